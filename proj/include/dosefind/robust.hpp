#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "dosefind/fitting.hpp"
#include "dosefind/med.hpp"
#include "dosefind/weights.hpp"

namespace dosefind {

struct RRConfig {
  double score_tol_factor = 1e-8;  // converged when ||score||_inf <= factor * n
  // The dose weights are only piecewise smooth in theta (the normalizing
  // distance switches doses and the clip kinks), so Newton can stall with the
  // score far below its sampling scale but above the strict tolerance. A stall
  // still counts as converged when ||score||_inf <= stall_tol_factor * sigma *
  // sqrt(n); sigma = 0 (noise-free data) disables this tier.
  double stall_tol_factor = 0.01;
  double step_tol = 1e-10;
  int max_iter = 100;
  int max_halvings = 10;
  double fd_step_rel = 1e-6;
  // Bread matrix of the sandwich. The residual * d(w h)/d(theta) term of the
  // exact score derivative has mean zero at the solution, and its
  // finite-difference estimate is dominated by weight-kink noise, so the
  // default bread is the smooth first term -(1/n) sum w h h^T. Set to false
  // to use the full finite-difference derivative instead.
  bool drop_score_residual_term = true;
};

struct SandwichCov {
  Eigen::MatrixXd a_matrix;    // (1/n) sum d(phi)/d(theta)
  Eigen::MatrixXd v_matrix;    // (1/n) sum (y - mu)^2 w^2 h h^T
  Eigen::MatrixXd covariance;  // A^-1 V A^-T
  bool singular = true;
  double a_condition = 0.0;
};

struct RRResult {
  FitResult fit;  // converged == false means the OLS fallback was returned
  SandwichCov cov;
  MedEstimate med;  // plug-in MED at the returned parameters
  int iterations = 0;
  double score_norm = 0.0;
  bool used_fallback = false;
  std::string fallback_reason;  // empty when the search converged
};

// Estimating-function value for a single observation:
//   phi(y, d, theta) = (y - mu(d, theta)) * w(d, MED(theta)) * dmu/dtheta,
// restricted to the free parameters. Throws std::domain_error when the MED is
// not estimable or nonpositive at theta.
Eigen::VectorXd score_eval(ModelKind kind, const Theta& theta,
                           const std::vector<bool>& gamma_free, double y, double d,
                           const WeightSpec& spec, const MedRequest& request,
                           const DoseDesign& design);

// Damped Newton-Raphson root search of the summed score, started at the
// unweighted grid fit. Steps are halved (up to max_halvings) when the score
// norm fails to decrease or the iterate leaves the admissible region (invalid
// gamma, nonpositive or inestimable MED). Falls back to the OLS estimates
// flagged converged = false on non-convergence.
RRResult rr_fit(ModelKind kind, const Dataset& data, const GridBounds& bounds,
                const MedRequest& request, const WeightSpec& spec,
                const RRConfig& config = {});

// Empirical sandwich covariance of the score estimator at theta. By default
// the bread matrix is the smooth -(1/n) sum w h h^T term of the score
// derivative; configure drop_score_residual_term = false for the full
// central finite-difference derivative including the residual term.
SandwichCov sandwich_cov(ModelKind kind, const Theta& theta,
                         const std::vector<bool>& gamma_free, const Dataset& data,
                         const WeightSpec& spec, const MedRequest& request,
                         const RRConfig& config = {});

// Delta-method interval from the sandwich covariance:
//   MED(theta) +- z_{1-ci_alpha} * sqrt(grad^T cov grad / n), clamped to [0, inf).
// Returns a CI-less estimate when the fit fell back or the sandwich is singular.
MedEstimate rr_med_ci(const FitResult& fit, const SandwichCov& cov,
                      const MedRequest& request, const DoseDesign& design);

}  // namespace dosefind
