#include "dosefind/robust.hpp"

#include <cmath>

#include "dosefind/stats.hpp"

namespace dosefind {

namespace {

// Free-parameter view of theta: (alpha, beta, free gamma components).
struct ParamMap {
  Theta base;
  std::vector<bool> gamma_free;

  std::size_t dim() const {
    std::size_t p = 2;
    for (bool f : gamma_free)
      if (f) ++p;
    return p;
  }
  Eigen::VectorXd pack(const Theta& t) const {
    Eigen::VectorXd v(dim());
    v(0) = t.alpha;
    v(1) = t.beta;
    std::size_t at = 2;
    for (std::size_t k = 0; k < gamma_free.size(); ++k)
      if (gamma_free[k]) v(at++) = t.gamma[k];
    return v;
  }
  Theta unpack(const Eigen::VectorXd& v) const {
    Theta t = base;
    t.alpha = v(0);
    t.beta = v(1);
    std::size_t at = 2;
    for (std::size_t k = 0; k < gamma_free.size(); ++k)
      if (gamma_free[k]) t.gamma[k] = v(at++);
    return t;
  }
};

// Summed score over the dataset; empty when theta is inadmissible (invalid
// gamma, or MED not estimable / nonpositive).
std::optional<Eigen::VectorXd> total_score(ModelKind kind, const ParamMap& map,
                                           const Theta& theta, const Dataset& data,
                                           const WeightSpec& spec,
                                           const MedRequest& request) {
  try {
    validate_gamma(kind, theta.gamma);
  } catch (const std::domain_error&) {
    return std::nullopt;
  }
  auto med = med_from_theta(kind, theta, request.delta, data.design.d0());
  if (!med || *med <= 0.0) return std::nullopt;

  Eigen::VectorXd score = Eigen::VectorXd::Zero(map.dim());
  const auto& agg = data.aggregates();
  for (std::size_t j = 0; j < data.design.arms(); ++j) {
    double d = data.design.doses[j];
    double w = compute_weight(spec, d, *med, data.design);
    double mu = eval_mean(kind, theta, d);
    auto h = compress_free(mean_gradient(kind, theta, d), map.gamma_free);
    double resid_sum = agg[j].count * (agg[j].mean - mu);
    score.noalias() += (w * resid_sum) * h;
  }
  if (!score.allFinite()) return std::nullopt;
  return score;
}

std::optional<Eigen::MatrixXd> score_jacobian(ModelKind kind, const ParamMap& map,
                                              const Eigen::VectorXd& v,
                                              const Dataset& data,
                                              const WeightSpec& spec,
                                              const MedRequest& request,
                                              double fd_step_rel) {
  std::size_t p = map.dim();
  Eigen::MatrixXd jac(p, p);
  for (std::size_t k = 0; k < p; ++k) {
    double h = fd_step_rel * std::max(1.0, std::fabs(v(k)));
    std::optional<Eigen::VectorXd> up, dn;
    for (int attempt = 0; attempt < 6 && (!up || !dn); ++attempt) {
      Eigen::VectorXd vp = v, vm = v;
      vp(k) += h;
      vm(k) -= h;
      up = total_score(kind, map, map.unpack(vp), data, spec, request);
      dn = total_score(kind, map, map.unpack(vm), data, spec, request);
      if (!up || !dn) h *= 0.5;
    }
    if (!up || !dn) return std::nullopt;
    jac.col(k) = (*up - *dn) / (2.0 * h);
  }
  return jac;
}

// Smooth part of the score derivative, -sum_j w_j n_j h_j h_j^T. The exact
// derivative adds a residual-weighted d(w h)/d(theta) term that has mean zero
// at the solution and is ill-defined at the weight kinks, where its
// finite-difference estimate can sink the numerical rank.
std::optional<Eigen::MatrixXd> working_score_jacobian(ModelKind kind, const ParamMap& map,
                                                      const Theta& theta,
                                                      const Dataset& data,
                                                      const WeightSpec& spec,
                                                      const MedRequest& request) {
  auto med = med_from_theta(kind, theta, request.delta, data.design.d0());
  if (!med || *med <= 0.0) return std::nullopt;
  std::size_t p = map.dim();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p, p);
  const auto& agg = data.aggregates();
  for (std::size_t j = 0; j < data.design.arms(); ++j) {
    double d = data.design.doses[j];
    double w = compute_weight(spec, d, *med, data.design);
    auto h = compress_free(mean_gradient(kind, theta, d), map.gamma_free);
    m.noalias() -= (w * agg[j].count) * (h * h.transpose());
  }
  if (!m.allFinite()) return std::nullopt;
  return m;
}

std::vector<double> observation_weights(const Dataset& data, const WeightSpec& spec,
                                        double med) {
  std::vector<double> dose_w = weights_at_doses(spec, med, data.design);
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    out[i] = dose_w[static_cast<std::size_t>(data.observations[i].dose_index)];
  return out;
}

double weighted_sse(ModelKind kind, const Theta& theta, const Dataset& data,
                    const std::vector<double>& dose_w) {
  const auto& agg = data.aggregates();
  double sse = 0.0;
  for (std::size_t j = 0; j < data.design.arms(); ++j) {
    double mu = eval_mean(kind, theta, data.design.doses[j]);
    double r = agg[j].mean - mu;
    sse += dose_w[j] * (agg[j].centered_ss + agg[j].count * r * r);
  }
  return sse;
}

}  // namespace

Eigen::VectorXd score_eval(ModelKind kind, const Theta& theta,
                           const std::vector<bool>& gamma_free, double y, double d,
                           const WeightSpec& spec, const MedRequest& request,
                           const DoseDesign& design) {
  validate_gamma(kind, theta.gamma);
  auto med = med_from_theta(kind, theta, request.delta, design.d0());
  if (!med || *med <= 0.0)
    throw std::domain_error("MED not estimable at theta; score undefined");
  double w = compute_weight(spec, d, *med, design);
  double mu = eval_mean(kind, theta, d);
  auto h = compress_free(mean_gradient(kind, theta, d), gamma_free);
  return (y - mu) * w * h;
}

SandwichCov sandwich_cov(ModelKind kind, const Theta& theta,
                         const std::vector<bool>& gamma_free, const Dataset& data,
                         const WeightSpec& spec, const MedRequest& request,
                         const RRConfig& config) {
  SandwichCov out;
  ParamMap map{theta, gamma_free};
  double n = static_cast<double>(data.size());
  std::size_t p = map.dim();

  auto med = med_from_theta(kind, theta, request.delta, data.design.d0());
  if (!med || *med <= 0.0) return out;

  Eigen::MatrixXd v_mat = Eigen::MatrixXd::Zero(p, p);
  const auto& agg = data.aggregates();
  for (std::size_t j = 0; j < data.design.arms(); ++j) {
    double d = data.design.doses[j];
    double w = compute_weight(spec, d, *med, data.design);
    double mu = eval_mean(kind, theta, d);
    auto h = compress_free(mean_gradient(kind, theta, d), gamma_free);
    double r = agg[j].mean - mu;
    double sq_resid = agg[j].centered_ss + agg[j].count * r * r;
    v_mat.noalias() += (w * w * sq_resid) * (h * h.transpose());
  }
  v_mat /= n;
  out.v_matrix = 0.5 * (v_mat + v_mat.transpose());

  Eigen::MatrixXd a_mat(p, p);
  if (config.drop_score_residual_term) {
    a_mat.setZero();
    for (std::size_t j = 0; j < data.design.arms(); ++j) {
      double d = data.design.doses[j];
      double w = compute_weight(spec, d, *med, data.design);
      auto h = compress_free(mean_gradient(kind, theta, d), gamma_free);
      a_mat.noalias() -= (agg[j].count * w) * (h * h.transpose());
    }
    a_mat /= n;
  } else {
    auto jac = score_jacobian(kind, map, map.pack(theta), data, spec, request,
                              config.fd_step_rel);
    if (!jac) return out;
    a_mat = *jac / n;
  }
  out.a_matrix = a_mat;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a_mat);
  double smin = svd.singularValues()(svd.singularValues().size() - 1);
  double smax = svd.singularValues()(0);
  out.a_condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(smin > 1e-12 * std::max(smax, 1e-300))) return out;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(a_mat);
  if (!lu.isInvertible()) return out;
  Eigen::MatrixXd a_inv = lu.inverse();
  Eigen::MatrixXd cov = a_inv * out.v_matrix * a_inv.transpose();
  if (!cov.allFinite()) return out;
  out.covariance = 0.5 * (cov + cov.transpose());
  out.singular = false;
  return out;
}

RRResult rr_fit(ModelKind kind, const Dataset& data, const GridBounds& bounds,
                const MedRequest& request, const WeightSpec& spec,
                const RRConfig& config) {
  FitResult ols = fit_ols(kind, data, bounds);
  double d0 = data.design.d0();

  RRResult out;
  out.med.method = "rr";

  auto finish_fallback = [&](std::optional<double> med, const char* reason) {
    out.fit = ols;
    out.fit.converged = false;
    out.used_fallback = true;
    out.fallback_reason = reason;
    out.med.value = med;
    return out;
  };

  auto ols_med = med_from_theta(kind, ols.theta, request.delta, d0);
  if (!ols_med || *ols_med <= 0.0)
    return finish_fallback(ols_med, "no positive MED at the initial fit");

  ParamMap map{ols.theta, ols.gamma_free};
  Eigen::VectorXd v = map.pack(ols.theta);
  auto score = total_score(kind, map, ols.theta, data, spec, request);
  if (!score) return finish_fallback(ols_med, "score undefined at the initial fit");

  double n = static_cast<double>(data.size());
  double score_tol = config.score_tol_factor * n;
  // The weights make the score only piecewise smooth, so the iteration can
  // stall short of score_tol. A stalled iterate still counts once the score is
  // negligible against its sampling scale sigma * sqrt(n).
  double stall_tol = config.stall_tol_factor * ols.sigma * std::sqrt(n);
  bool converged = score->lpNorm<Eigen::Infinity>() <= score_tol;
  int iter = 0;

  while (!converged && iter < config.max_iter) {
    ++iter;
    // Full finite-difference Jacobian first; near weight kinks it can be
    // unavailable or numerically singular, in which case the smooth
    // Fisher-scoring direction keeps the damped iteration going.
    Eigen::VectorXd step;
    bool have_step = false;
    auto jac = score_jacobian(kind, map, v, data, spec, request, config.fd_step_rel);
    if (jac) {
      Eigen::FullPivLU<Eigen::MatrixXd> lu(*jac);
      if (lu.isInvertible()) {
        step = lu.solve(*score);
        have_step = step.allFinite();
      }
    }
    if (!have_step) {
      auto work = working_score_jacobian(kind, map, map.unpack(v), data, spec, request);
      if (!work) return finish_fallback(ols_med, "weighted information unavailable");
      Eigen::FullPivLU<Eigen::MatrixXd> lu(*work);
      if (!lu.isInvertible())
        return finish_fallback(ols_med, "weighted information singular");
      step = lu.solve(*score);
      if (!step.allFinite())
        return finish_fallback(ols_med, "non-finite step");
    }

    double current_norm = score->lpNorm<Eigen::Infinity>();
    double lambda = 1.0;
    bool accepted = false;
    bool step_dead = false;
    for (int halving = 0; halving <= config.max_halvings; ++halving) {
      Eigen::VectorXd v_new = v - lambda * step;
      auto s_new = total_score(kind, map, map.unpack(v_new), data, spec, request);
      if (s_new && s_new->lpNorm<Eigen::Infinity>() < current_norm) {
        step_dead = (lambda * step).norm() <= config.step_tol;
        v = v_new;
        score = s_new;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (score->lpNorm<Eigen::Infinity>() <= score_tol) converged = true;
    if (!accepted || step_dead) break;
  }
  if (!converged && score->lpNorm<Eigen::Infinity>() <= stall_tol) converged = true;
  if (!converged)
    return finish_fallback(ols_med, iter >= config.max_iter
                                        ? "iteration limit with a large score"
                                        : "search stalled with a large score");

  Theta theta = map.unpack(v);
  auto med = med_from_theta(kind, theta, request.delta, d0);
  if (!med || *med <= 0.0)
    return finish_fallback(ols_med, "no positive MED at the solution");

  FitResult fit = ols;
  fit.theta = theta;
  fit.converged = true;
  fit.iterations = iter + 1;
  fit.trace.clear();
  fit.weights_used = observation_weights(data, spec, *med);
  std::vector<double> dose_w = weights_at_doses(spec, *med, data.design);
  fit.sse = weighted_sse(kind, theta, data, dose_w);
  double unweighted = weighted_sse(kind, theta, data,
                                   std::vector<double>(data.design.arms(), 1.0));
  int p = fit.n_free_params();
  fit.sigma = data.size() > static_cast<std::size_t>(p)
                  ? std::sqrt(unweighted / (n - p))
                  : 0.0;

  out.fit = std::move(fit);
  out.iterations = iter;
  out.score_norm = score->lpNorm<Eigen::Infinity>();
  out.med.value = med;
  out.cov = sandwich_cov(kind, theta, out.fit.gamma_free, data, spec, request, config);
  return out;
}

MedEstimate rr_med_ci(const FitResult& fit, const SandwichCov& cov,
                      const MedRequest& request, const DoseDesign& design) {
  MedEstimate out;
  out.method = "rr";
  auto med = med_from_theta(fit.kind, fit.theta, request.delta, design.d0());
  out.value = med;
  if (!med || !fit.converged || cov.singular) return out;
  auto b = compress_free(med_gradient(fit.kind, fit.theta, request.delta, design.d0()),
                         fit.gamma_free);
  double n = static_cast<double>(fit.weights_used.size());
  double var = b.dot(cov.covariance * b) / n;
  if (!(var >= 0.0) || !std::isfinite(var)) return out;
  double se = std::sqrt(var);
  double z = normal_quantile(1.0 - request.ci_alpha);
  out.se = se;
  out.lower = std::max(0.0, *med - z * se);
  out.upper = *med + z * se;
  return out;
}

}  // namespace dosefind
