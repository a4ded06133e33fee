#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "dosefind/dataset.hpp"
#include "dosefind/fitting.hpp"
#include "dosefind/models.hpp"

namespace dosefind {

struct MedRequest {
  double delta = 0.4;      // clinically relevant effect over placebo
  double alpha = 0.025;    // one-sided level of the Wald screen bound
  double ci_alpha = 0.025; // per-tail level of the two-sided interval
};

struct MedEstimate {
  std::optional<double> value;
  std::optional<double> lower;
  std::optional<double> upper;
  std::optional<double> se;
  std::string method;
};

// Plug-in MED: the dose whose mean exceeds the mean at d0 by delta. Empty
// when beta <= 0 or the effect delta is unattainable for the curve.
std::optional<double> med_from_theta(ModelKind kind, const Theta& theta, double delta,
                                     double d0 = 0.0);

// d(MED)/d(theta), full length 2 + arity; the alpha component is always 0.
// Computed from the implicit equation shape(MED) = shape(d0) + delta/beta.
// Throws std::domain_error when the MED is not estimable at theta.
std::vector<double> med_gradient(ModelKind kind, const Theta& theta, double delta,
                                 double d0 = 0.0);

// Per-observation information of the mean curve, restricted to estimated
// parameters: M = sum_j (n_j/n) w_j g_j g_j^T. dose_weights empty means 1.
Eigen::MatrixXd information_matrix(ModelKind kind, const Theta& theta,
                                   const DoseDesign& design,
                                   const std::vector<bool>& gamma_free,
                                   const std::vector<double>& dose_weights = {});

// Wald standard error of the fitted mean at dose d.
double mean_wald_se(const FitResult& fit, const DoseDesign& design, double d);

// Screened estimator: smallest dose on an equally spaced grid over
// [d0, dmax] whose fitted effect exceeds delta while the pointwise lower
// Wald bound at one-sided level alpha clears the placebo mean.
MedEstimate med_with_screen(const FitResult& fit, const DoseDesign& design,
                            const MedRequest& request, int grid_points = 1001);

// Delta-method interval around the plug-in MED:
//   MED(theta) +- z_{1-ci_alpha} * (sigma/sqrt(n)) * sqrt(b^T M^- b).
MedEstimate classical_med_ci(const FitResult& fit, const DoseDesign& design,
                             const MedRequest& request);

// Solves M x = b through a generalized inverse; throws
// singular_information_error when b is outside the range of M.
Eigen::VectorXd solve_information(const Eigen::MatrixXd& m, const Eigen::VectorXd& b);

// Gradient vector restricted to (alpha, beta, free gammas).
Eigen::VectorXd compress_free(const std::vector<double>& full,
                              const std::vector<bool>& gamma_free);

}  // namespace dosefind
