#pragma once

#include <cstdint>
#include <vector>

#include "dosefind/fitting.hpp"
#include "dosefind/med.hpp"

namespace dosefind {

// Pointwise confidence band for the effect curve mu(d) - mu(d0) on an equally
// spaced dose grid. The first grid point is d0 and its band is pinned to
// (0, 0). Entries of failed profile doses are NaN unless interpolated.
struct EffectCurveBand {
  std::vector<double> grid;
  std::vector<double> lower;
  std::vector<double> fitted;
  std::vector<double> upper;
  double level = 0.95;
  int refit_failures = 0;             // dropped bootstrap resamples
  std::vector<int> profile_failures;  // grid indices where profiling failed
};

struct BootstrapConfig {
  int b_samples = 1000;
  int grid_points = 201;
  double level = 0.95;
  std::uint64_t seed = 1;
};

// Percentile bootstrap: resamples responses with replacement within each dose
// group, refits, and takes pointwise empirical quantiles of the bootstrap
// effect curves (order statistic at ceil(B*q), no interpolation). Failed
// refits are dropped; more than 20% of them is an error.
EffectCurveBand percentile_bootstrap_band(ModelKind kind, const Dataset& data,
                                          const GridBounds& bounds,
                                          const BootstrapConfig& config);

struct ProfileConfig {
  int grid_points = 201;
  double level = 0.95;
};

// Profile-likelihood band: at each grid dose the effect is pinned, the slope
// follows from beta = effect / (shape(d) - shape(d0)), the intercept and the
// nonlinear parameters are profiled out (gamma over the fit grid plus the
// fitted point), and the interval endpoints solve
//   n log(SSE(effect) / SSE_hat) = chi2_1(level)
// by bisection. Isolated failed doses are linearly interpolated over.
EffectCurveBand profile_likelihood_band(ModelKind kind, const Dataset& data,
                                        const GridBounds& bounds,
                                        const ProfileConfig& config);

// Reads a MED interval off a band: the point estimate is the smallest grid
// dose whose fitted effect exceeds delta, the lower bound the smallest dose
// whose upper band exceeds delta, the upper bound the smallest dose whose
// lower band exceeds delta. Sides without a crossing stay empty.
MedEstimate invert_band_for_med(const EffectCurveBand& band, double delta);

// Pointwise Wald band for the effect curve of a least-squares fit, using the
// delta method with covariance sigma^2 M^- / n.
EffectCurveBand wald_effect_band(const FitResult& fit, const DoseDesign& design,
                                 double level = 0.95, int grid_points = 201);

// Same shape of band with a caller-supplied parameter covariance (already
// divided by nothing: cov is the asymptotic per-sqrt(n) covariance, so the
// pointwise variance is g^T cov g / n). Used for sandwich-based bands.
EffectCurveBand wald_effect_band_cov(const FitResult& fit, const DoseDesign& design,
                                     const Eigen::MatrixXd& cov, double level = 0.95,
                                     int grid_points = 201);

}  // namespace dosefind
