#include "dosefind/med.hpp"

#include <cmath>

#include "dosefind/stats.hpp"

namespace dosefind {

namespace {

// d(shape)/d(dose).
double shape_dose_derivative(ModelKind kind, std::span<const double> g, double d) {
  switch (kind) {
    case ModelKind::Linear:
      return 1.0;
    case ModelKind::LinLog:
      return 1.0 / (d + g[0]);
    case ModelKind::Emax:
      return g[0] / ((g[0] + d) * (g[0] + d));
    case ModelKind::Exponential:
      return std::exp(d / g[0]) / g[0];
    case ModelKind::Quadratic:
      return 1.0 + 2.0 * g[0] * d;
    case ModelKind::SigEmax: {
      double x = standardized_shape(kind, g, d);
      return d > 0.0 ? x * (1.0 - x) * g[1] / d : 0.0;
    }
    case ModelKind::Power:
      return g[0] * std::pow(d, g[0] - 1.0);
    case ModelKind::TruncLogistic: {
      double x = standardized_shape(kind, g, d);
      return g[0] * x * (1.0 - x);
    }
  }
  return 0.0;
}

// d(shape)/d(gamma) as a vector of length arity.
std::vector<double> shape_gamma_gradient(ModelKind kind, std::span<const double> g,
                                         double d) {
  Theta unit;
  unit.alpha = 0.0;
  unit.beta = 1.0;
  unit.gamma.assign(g.begin(), g.end());
  auto full = mean_gradient(kind, unit, d);
  return {full.begin() + 2, full.end()};
}

}  // namespace

std::optional<double> med_from_theta(ModelKind kind, const Theta& theta, double delta,
                                     double d0) {
  validate_gamma(kind, theta.gamma);
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  if (!(theta.beta > 0.0) || !std::isfinite(theta.beta)) return std::nullopt;
  double u = standardized_shape(kind, theta.gamma, d0) + delta / theta.beta;
  try {
    return inverse_shape(kind, theta.gamma, u);
  } catch (const no_solution_error&) {
    return std::nullopt;
  }
}

std::vector<double> med_gradient(ModelKind kind, const Theta& theta, double delta,
                                 double d0) {
  auto med = med_from_theta(kind, theta, delta, d0);
  if (!med) throw std::domain_error("MED not estimable at theta");
  double m = *med;
  double slope = shape_dose_derivative(kind, theta.gamma, m);
  if (!(slope > 0.0) || !std::isfinite(slope))
    throw std::domain_error("shape not increasing at the MED");
  std::vector<double> out(2 + theta.gamma.size(), 0.0);
  out[1] = -delta / (theta.beta * theta.beta * slope);
  if (!theta.gamma.empty()) {
    auto at_d0 = shape_gamma_gradient(kind, theta.gamma, d0);
    auto at_med = shape_gamma_gradient(kind, theta.gamma, m);
    for (std::size_t k = 0; k < theta.gamma.size(); ++k)
      out[2 + k] = (at_d0[k] - at_med[k]) / slope;
  }
  return out;
}

Eigen::VectorXd compress_free(const std::vector<double>& full,
                              const std::vector<bool>& gamma_free) {
  std::size_t p = 2;
  for (bool f : gamma_free)
    if (f) ++p;
  Eigen::VectorXd out(p);
  out(0) = full[0];
  out(1) = full[1];
  std::size_t at = 2;
  for (std::size_t k = 0; k < gamma_free.size(); ++k)
    if (gamma_free[k]) out(at++) = full[2 + k];
  return out;
}

Eigen::MatrixXd information_matrix(ModelKind kind, const Theta& theta,
                                   const DoseDesign& design,
                                   const std::vector<bool>& gamma_free,
                                   const std::vector<double>& dose_weights) {
  if (!dose_weights.empty() && dose_weights.size() != design.arms())
    throw std::invalid_argument("dose_weights length must match design arms");
  double n = static_cast<double>(design.total());
  std::size_t p = 2;
  for (bool f : gamma_free)
    if (f) ++p;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p, p);
  for (std::size_t j = 0; j < design.arms(); ++j) {
    auto g = compress_free(mean_gradient(kind, theta, design.doses[j]), gamma_free);
    double frac = static_cast<double>(design.allocations[j]) / n;
    double w = dose_weights.empty() ? 1.0 : dose_weights[j];
    m.noalias() += (frac * w) * (g * g.transpose());
  }
  return m;
}

Eigen::VectorXd solve_information(const Eigen::MatrixXd& m, const Eigen::VectorXd& b) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(m);
  Eigen::VectorXd x = cod.solve(b);
  double resid = (m * x - b).norm();
  double scale = b.norm() + m.norm() * x.norm();
  if (resid > 1e-7 * std::max(scale, 1e-300))
    throw singular_information_error(
        "information matrix is singular and the gradient is outside its range");
  return x;
}

double mean_wald_se(const FitResult& fit, const DoseDesign& design, double d) {
  Eigen::MatrixXd m = information_matrix(fit.kind, fit.theta, design, fit.gamma_free);
  auto g = compress_free(mean_gradient(fit.kind, fit.theta, d), fit.gamma_free);
  Eigen::VectorXd x = solve_information(m, g);
  double quad = std::max(0.0, g.dot(x));
  double n = static_cast<double>(fit.weights_used.size());
  return fit.sigma * std::sqrt(quad / n);
}

MedEstimate med_with_screen(const FitResult& fit, const DoseDesign& design,
                            const MedRequest& request, int grid_points) {
  if (grid_points < 2) throw std::invalid_argument("grid_points must be >= 2");
  MedEstimate out;
  out.method = "classical";
  double d0 = design.d0();
  double mu0 = eval_mean(fit.kind, fit.theta, d0);
  double z = normal_quantile(1.0 - request.alpha);
  double n = static_cast<double>(fit.weights_used.size());

  Eigen::MatrixXd m = information_matrix(fit.kind, fit.theta, design, fit.gamma_free);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(m);
  double mnorm = m.norm();

  double step = (design.dmax() - d0) / static_cast<double>(grid_points - 1);
  for (int i = 1; i < grid_points; ++i) {
    double d = (i == grid_points - 1) ? design.dmax() : d0 + step * i;
    double mu = eval_mean(fit.kind, fit.theta, d);
    if (!(mu > mu0 + request.delta)) continue;
    double lower_bound;
    if (fit.sigma == 0.0) {
      lower_bound = mu;
    } else {
      auto g = compress_free(mean_gradient(fit.kind, fit.theta, d), fit.gamma_free);
      Eigen::VectorXd x = cod.solve(g);
      double resid = (m * x - g).norm();
      if (resid > 1e-7 * std::max(g.norm() + mnorm * x.norm(), 1e-300))
        throw singular_information_error(
            "information matrix is singular and the gradient is outside its range");
      double se = fit.sigma * std::sqrt(std::max(0.0, g.dot(x)) / n);
      lower_bound = mu - z * se;
    }
    if (lower_bound > mu0) {
      out.value = d;
      return out;
    }
  }
  return out;
}

MedEstimate classical_med_ci(const FitResult& fit, const DoseDesign& design,
                             const MedRequest& request) {
  MedEstimate out;
  out.method = "classical";
  auto med = med_from_theta(fit.kind, fit.theta, request.delta, design.d0());
  if (!med) return out;
  out.value = med;
  auto b = compress_free(med_gradient(fit.kind, fit.theta, request.delta, design.d0()),
                         fit.gamma_free);
  Eigen::MatrixXd m = information_matrix(fit.kind, fit.theta, design, fit.gamma_free);
  Eigen::VectorXd x = solve_information(m, b);
  double n = static_cast<double>(fit.weights_used.size());
  double se = fit.sigma / std::sqrt(n) * std::sqrt(std::max(0.0, b.dot(x)));
  double z = normal_quantile(1.0 - request.ci_alpha);
  out.se = se;
  out.lower = std::max(0.0, *med - z * se);
  out.upper = *med + z * se;
  return out;
}

}  // namespace dosefind
