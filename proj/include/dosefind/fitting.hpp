#pragma once

#include <span>
#include <utility>
#include <vector>

#include "dosefind/dataset.hpp"
#include "dosefind/models.hpp"

namespace dosefind {

// Search box for the nonlinear parameters, one (lower, upper) pair per gamma
// dimension. lower == upper marks the dimension as fixed (not estimated);
// that is how the LinLog offset stays at a supplied constant.
struct GridBounds {
  std::vector<std::pair<double, double>> limits;
  int grid_points = 30;
};

// Family defaults scaled by the maximum design dose:
//   Emax     ED50 in [0.001, 1.5] * dmax
//   SigEmax  ED50 in [0.001, 1.5] * dmax, h in [0.5, 10]
//   Exponential  delta in [0.1, 2] * dmax
//   LinLog   offset fixed at 0.2 * dmax
//   Power    exponent in [0.05, 3]
//   Quadratic  ratio in [-1.5, -0.05] / dmax
//   TruncLogistic  s in [1, 30] / dmax, m in [0.05, 1.2] * dmax
GridBounds default_bounds(ModelKind kind, const DoseDesign& design);

// Shrinks each free dimension to start +- 1.1 * (upper - lower)/grid_points,
// clamped to the original box. Exactly one such pass is used per fit.
GridBounds refine_bounds(std::span<const double> start, const GridBounds& bounds);

struct FitResult {
  ModelKind kind = ModelKind::Linear;
  Theta theta;
  double sigma = 0.0;  // sqrt(sse / (n - p)), p = estimated parameter count
  double sse = 0.0;    // minimized (weighted) residual sum of squares
  std::vector<double> weights_used;  // per observation
  bool converged = true;
  int iterations = 1;
  std::vector<bool> gamma_free;

  struct TraceEntry {
    Theta theta;
    double med = 0.0;
    bool med_ok = false;
  };
  std::vector<TraceEntry> trace;

  int n_free_params() const;
};

// Grid search over gamma (coarse pass + one refinement pass), with an exact
// weighted linear solve for (alpha, beta) at every grid point via QR of the
// weighted design. The best point across both passes wins; SSE ties break
// toward the lexicographically smallest gamma.
FitResult fit_ols(ModelKind kind, const Dataset& data, const GridBounds& bounds);
FitResult fit_weighted(ModelKind kind, const Dataset& data, const GridBounds& bounds,
                       const std::vector<double>& weights);

}  // namespace dosefind
