#pragma once

#include "dosefind/fitting.hpp"
#include "dosefind/med.hpp"
#include "dosefind/weights.hpp"

namespace dosefind {

enum class IrwlsCriterion {
  MedRelative,     // ((MED_i - MED_{i-1}) / MED_{i-1})^2 <= tol
  ResponseAtMed,   // same ratio on the fitted mean response at the MED
};

struct IrwlsConfig {
  WeightSpec weight;
  IrwlsCriterion criterion = IrwlsCriterion::MedRelative;
  double tol = 0.001;
  int max_iter = 100;
};

struct IrwlsResult {
  FitResult fit;    // converged == false means the OLS fallback was returned
  MedEstimate med;  // plug-in MED at the returned parameters
};

// Starts from the unweighted grid fit, then alternates plug-in MED updates
// with weighted refits until the stopping criterion holds. Non-convergence,
// a nonpositive MED, or a failed weighted refit all return the initial OLS
// estimates flagged converged = false. fit.trace records every iteration.
IrwlsResult irwls_fit(ModelKind kind, const Dataset& data, const GridBounds& bounds,
                      const MedRequest& request, const IrwlsConfig& config);

// Weighted-information interval around the converged plug-in MED:
//   MED_W +- z_{1-ci_alpha} * (sigma_W / sqrt(n)) * sqrt(b^T M_W^- b)
// with M_W built from the converged weights. Requires a converged weighted
// fit and a continuous weight tag (w7 is refused).
MedEstimate irwls_med_ci(const FitResult& fit, const DoseDesign& design,
                         const MedRequest& request, const WeightSpec& spec);

}  // namespace dosefind
