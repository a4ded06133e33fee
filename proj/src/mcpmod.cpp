#include "dosefind/mcpmod.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "dosefind/errors.hpp"
#include "dosefind/rng.hpp"
#include "dosefind/stats.hpp"

namespace dosefind {

namespace {

// Fixed stream for the null simulation so every call sees the same draws.
constexpr std::uint64_t kCritStream = 0x6d61787463726974ULL;

}  // namespace

std::vector<Candidate> default_candidates(const DoseDesign& design) {
  double dmax = design.dmax();
  return {
      {ModelKind::Linear, {}, "linear"},
      {ModelKind::Emax, {0.2 * dmax}, "emax"},
      {ModelKind::SigEmax, {0.4 * dmax, 4.0}, "sigemax"},
  };
}

std::vector<std::vector<double>> optimal_contrasts(const std::vector<Candidate>& candidates,
                                                   const DoseDesign& design) {
  std::size_t arms = design.arms();
  double n = static_cast<double>(design.total());
  std::vector<std::vector<double>> contrasts;
  contrasts.reserve(candidates.size());
  for (const auto& cand : candidates) {
    validate_gamma(cand.kind, cand.gamma);
    std::vector<double> x(arms);
    double xbar = 0.0;
    for (std::size_t j = 0; j < arms; ++j) {
      x[j] = standardized_shape(cand.kind, cand.gamma, design.doses[j]);
      xbar += design.allocations[j] * x[j] / n;
    }
    std::vector<double> c(arms);
    double norm2 = 0.0;
    for (std::size_t j = 0; j < arms; ++j) {
      c[j] = design.allocations[j] * (x[j] - xbar);
      norm2 += c[j] * c[j];
    }
    if (!(norm2 > 0.0))
      throw input_error("candidate '" + cand.label +
                        "' has a constant shape over the design; no contrast exists");
    double inv = 1.0 / std::sqrt(norm2);
    for (auto& v : c) v *= inv;
    contrasts.push_back(std::move(c));
  }
  return contrasts;
}

double max_t_critical_value(const std::vector<std::vector<double>>& contrasts,
                            const DoseDesign& design, double alpha, int draws) {
  if (contrasts.empty()) throw input_error("no contrasts given");
  if (draws < 100) throw std::invalid_argument("draws must be >= 100");
  std::size_t arms = design.arms();
  double dof = static_cast<double>(design.total()) - static_cast<double>(arms);
  if (dof < 1.0) throw input_error("no residual degrees of freedom in the design");

  // Denominator scale sqrt(sum c_j^2 / n_j) per contrast.
  std::vector<double> denom(contrasts.size());
  for (std::size_t m = 0; m < contrasts.size(); ++m) {
    if (contrasts[m].size() != arms) throw input_error("contrast length mismatch");
    double s = 0.0;
    for (std::size_t j = 0; j < arms; ++j)
      s += contrasts[m][j] * contrasts[m][j] / design.allocations[j];
    denom[m] = std::sqrt(s);
  }

  auto engine = make_engine(kCritStream, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::chi_squared_distribution<double> chi2(dof);
  std::vector<double> maxima(static_cast<std::size_t>(draws));
  std::vector<double> means(arms);
  for (int r = 0; r < draws; ++r) {
    for (std::size_t j = 0; j < arms; ++j)
      means[j] = gauss(engine) / std::sqrt(static_cast<double>(design.allocations[j]));
    double sigma = std::sqrt(chi2(engine) / dof);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < contrasts.size(); ++m) {
      double num = 0.0;
      for (std::size_t j = 0; j < arms; ++j) num += contrasts[m][j] * means[j];
      best = std::max(best, num / (sigma * denom[m]));
    }
    maxima[static_cast<std::size_t>(r)] = best;
  }
  return order_stat_quantile(std::move(maxima), 1.0 - alpha);
}

PocResult poc_test(const std::vector<Candidate>& candidates, const Dataset& data,
                   const PocConfig& config) {
  if (candidates.empty()) throw input_error("no candidate models given");
  if (!(config.alpha > 0.0 && config.alpha < 0.5))
    throw std::invalid_argument("alpha must be in (0, 0.5)");
  const auto& design = data.design;
  auto contrasts = optimal_contrasts(candidates, design);

  double n = static_cast<double>(data.size());
  double dof = n - static_cast<double>(design.arms());
  if (dof < 1.0) throw input_error("pooled variance needs replication within doses");
  double within_ss = 0.0;
  for (const auto& a : data.aggregates()) within_ss += a.centered_ss;
  double sigma = std::sqrt(within_ss / dof);

  // Contrasts sum to zero, so centering the group means changes nothing
  // mathematically but keeps the numerator exactly zero on constant data.
  double grand = 0.0;
  for (std::size_t j = 0; j < design.arms(); ++j)
    grand += design.allocations[j] * data.aggregates()[j].mean / n;

  PocResult out;
  out.t_stats.resize(candidates.size());
  for (std::size_t m = 0; m < candidates.size(); ++m) {
    double num = 0.0, den2 = 0.0;
    for (std::size_t j = 0; j < design.arms(); ++j) {
      num += contrasts[m][j] * (data.aggregates()[j].mean - grand);
      den2 += contrasts[m][j] * contrasts[m][j] / design.allocations[j];
    }
    if (num == 0.0) {
      out.t_stats[m] = 0.0;
    } else {
      double den = sigma * std::sqrt(den2);
      out.t_stats[m] = den > 0.0 ? num / den
                                 : std::copysign(std::numeric_limits<double>::infinity(), num);
    }
  }

  if (config.critical_value) {
    out.critical_value = *config.critical_value;
  } else if (config.bonferroni) {
    out.critical_value = student_t_quantile(
        1.0 - config.alpha / static_cast<double>(candidates.size()), dof);
  } else {
    out.critical_value = max_t_critical_value(contrasts, design, config.alpha,
                                              config.crit_draws);
  }

  out.significant.resize(candidates.size());
  for (std::size_t m = 0; m < candidates.size(); ++m) {
    out.significant[m] = out.t_stats[m] > out.critical_value;
    out.any_significant = out.any_significant || out.significant[m];
  }
  if (!out.any_significant) return out;

  if (config.selection == SelectionRule::MaxT) {
    std::size_t best = 0;
    double best_t = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < candidates.size(); ++m) {
      if (out.significant[m] && out.t_stats[m] > best_t) {
        best_t = out.t_stats[m];
        best = m;
      }
    }
    out.selected = best;
  } else {
    std::optional<std::size_t> best;
    double best_aic = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < candidates.size(); ++m) {
      if (!out.significant[m]) continue;
      try {
        FitResult fit = fit_ols(candidates[m].kind, data,
                                default_bounds(candidates[m].kind, design));
        double p = static_cast<double>(fit.n_free_params()) + 1.0;  // + sigma
        double aic = n * std::log(std::max(fit.sse, 1e-300) / n) + 2.0 * p;
        if (aic < best_aic) {
          best_aic = aic;
          best = m;
        }
      } catch (const std::exception&) {
        // unfittable candidate: never selected
      }
    }
    out.selected = best;
  }
  return out;
}

McpModResult mcpmod_med(const std::vector<Candidate>& candidates, const Dataset& data,
                        const PocConfig& poc_config, const MedRequest& request,
                        McpEstimator estimator, const WeightSpec& weight) {
  McpModResult out;
  out.poc = poc_test(candidates, data, poc_config);
  out.med.method =
      estimator == McpEstimator::Classical ? "mcpmod-classical" : "mcpmod-rr";
  if (!out.poc.selected) return out;

  const Candidate& chosen = candidates[*out.poc.selected];
  out.selected_label = chosen.label;
  GridBounds bounds = default_bounds(chosen.kind, data.design);
  if (estimator == McpEstimator::Classical) {
    FitResult fit = fit_ols(chosen.kind, data, bounds);
    out.fit = fit;
    MedEstimate screened = med_with_screen(fit, data.design, request);
    MedEstimate ci = classical_med_ci(fit, data.design, request);
    out.med.value = screened.value;
    out.med.lower = ci.lower;
    out.med.upper = ci.upper;
    out.med.se = ci.se;
  } else {
    RRResult rr = rr_fit(chosen.kind, data, bounds, request, weight);
    out.fit = rr.fit;
    MedEstimate est = rr_med_ci(rr.fit, rr.cov, request, data.design);
    out.med.value = est.value;
    out.med.lower = est.lower;
    out.med.upper = est.upper;
    out.med.se = est.se;
  }
  return out;
}

}  // namespace dosefind
