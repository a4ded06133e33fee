#include "dosefind/irwls.hpp"

#include <cmath>

#include "dosefind/stats.hpp"

namespace dosefind {

namespace {

FitResult::TraceEntry make_entry(const Theta& theta, const std::optional<double>& med) {
  FitResult::TraceEntry e;
  e.theta = theta;
  if (med) {
    e.med = *med;
    e.med_ok = true;
  }
  return e;
}

IrwlsResult fallback(FitResult ols, std::vector<FitResult::TraceEntry> trace,
                     const std::optional<double>& ols_med) {
  ols.converged = false;
  ols.iterations = static_cast<int>(trace.size());
  ols.trace = std::move(trace);
  IrwlsResult out;
  out.fit = std::move(ols);
  out.med.method = "irwls";
  out.med.value = ols_med;
  return out;
}

}  // namespace

IrwlsResult irwls_fit(ModelKind kind, const Dataset& data, const GridBounds& bounds,
                      const MedRequest& request, const IrwlsConfig& config) {
  if (config.max_iter < 2) throw std::invalid_argument("max_iter must be >= 2");
  if (!(config.tol > 0.0)) throw std::invalid_argument("tol must be positive");

  FitResult ols = fit_ols(kind, data, bounds);
  double d0 = data.design.d0();
  auto med0 = med_from_theta(kind, ols.theta, request.delta, d0);

  std::vector<FitResult::TraceEntry> trace;
  trace.push_back(make_entry(ols.theta, med0));
  if (!med0 || *med0 <= 0.0) return fallback(std::move(ols), std::move(trace), med0);

  double prev_med = *med0;
  double prev_resp = eval_mean(kind, ols.theta, prev_med);

  for (int iter = 2; iter <= config.max_iter; ++iter) {
    std::vector<double> dose_w;
    try {
      dose_w = weights_at_doses(config.weight, prev_med, data.design);
    } catch (const std::invalid_argument&) {
      return fallback(std::move(ols), std::move(trace), med0);
    }
    std::vector<double> obs_w(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      obs_w[i] = dose_w[static_cast<std::size_t>(data.observations[i].dose_index)];

    FitResult wfit;
    try {
      wfit = fit_weighted(kind, data, bounds, obs_w);
    } catch (const rank_deficiency_error&) {
      return fallback(std::move(ols), std::move(trace), med0);
    }
    auto med = med_from_theta(kind, wfit.theta, request.delta, d0);
    trace.push_back(make_entry(wfit.theta, med));
    if (!med || *med <= 0.0) return fallback(std::move(ols), std::move(trace), med0);

    double ratio;
    if (config.criterion == IrwlsCriterion::MedRelative) {
      ratio = (*med - prev_med) / prev_med;
    } else {
      double resp = eval_mean(kind, wfit.theta, *med);
      ratio = (resp - prev_resp) / prev_resp;
      prev_resp = resp;
    }
    if (ratio * ratio <= config.tol) {
      wfit.converged = true;
      wfit.iterations = static_cast<int>(trace.size());
      wfit.trace = std::move(trace);
      IrwlsResult out;
      out.fit = std::move(wfit);
      out.med.method = "irwls";
      out.med.value = med;
      return out;
    }
    prev_med = *med;
  }
  return fallback(std::move(ols), std::move(trace), med0);
}

MedEstimate irwls_med_ci(const FitResult& fit, const DoseDesign& design,
                         const MedRequest& request, const WeightSpec& spec) {
  if (!is_continuous(spec.kind))
    throw std::invalid_argument("the discrete weight w7 has no weighted-information CI");
  if (!fit.converged)
    throw std::invalid_argument("irwls CI needs a converged weighted fit");

  MedEstimate out;
  out.method = "irwls";
  auto med = med_from_theta(fit.kind, fit.theta, request.delta, design.d0());
  if (!med || *med <= 0.0) return out;
  out.value = med;

  std::vector<double> dose_w = weights_at_doses(spec, *med, design);
  Eigen::MatrixXd m =
      information_matrix(fit.kind, fit.theta, design, fit.gamma_free, dose_w);
  auto b = compress_free(med_gradient(fit.kind, fit.theta, request.delta, design.d0()),
                         fit.gamma_free);
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
