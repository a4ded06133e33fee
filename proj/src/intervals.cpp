#include "dosefind/intervals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dosefind/rng.hpp"
#include "dosefind/stats.hpp"

namespace dosefind {

namespace {

std::vector<double> dose_grid(const DoseDesign& design, int grid_points) {
  if (grid_points < 2) throw std::invalid_argument("grid_points must be >= 2");
  std::vector<double> grid(static_cast<std::size_t>(grid_points));
  double d0 = design.d0();
  double step = (design.dmax() - d0) / static_cast<double>(grid_points - 1);
  for (int g = 0; g < grid_points; ++g) grid[static_cast<std::size_t>(g)] = d0 + step * g;
  grid.back() = design.dmax();
  return grid;
}

}  // namespace

EffectCurveBand percentile_bootstrap_band(ModelKind kind, const Dataset& data,
                                          const GridBounds& bounds,
                                          const BootstrapConfig& config) {
  if (config.b_samples < 2) throw std::invalid_argument("b_samples must be >= 2");
  if (!(config.level > 0.0 && config.level < 1.0))
    throw std::invalid_argument("level must be in (0,1)");

  FitResult fit0 = fit_ols(kind, data, bounds);
  EffectCurveBand band;
  band.level = config.level;
  band.grid = dose_grid(data.design, config.grid_points);
  std::size_t g_count = band.grid.size();

  double mu0 = eval_mean(kind, fit0.theta, data.design.d0());
  band.fitted.resize(g_count);
  for (std::size_t g = 0; g < g_count; ++g)
    band.fitted[g] = eval_mean(kind, fit0.theta, band.grid[g]) - mu0;

  auto groups = data.grouped_responses();
  std::size_t arms = data.design.arms();

  std::vector<std::vector<double>> effects(g_count);
  for (auto& column : effects) column.reserve(static_cast<std::size_t>(config.b_samples));

  std::vector<Observation> resampled(data.size());
  int failures = 0;
  for (int b = 0; b < config.b_samples; ++b) {
    auto engine = make_engine(config.seed, static_cast<std::uint64_t>(b), 0x626f6f74ULL);
    std::size_t at = 0;
    for (std::size_t j = 0; j < arms; ++j) {
      const auto& group = groups[j];
      std::uniform_int_distribution<std::size_t> pick(0, group.size() - 1);
      for (std::size_t i = 0; i < group.size(); ++i)
        resampled[at++] = {static_cast<int>(j), group[pick(engine)]};
    }
    try {
      Dataset resample(data.design, resampled);
      FitResult refit = fit_ols(kind, resample, bounds);
      double rmu0 = eval_mean(kind, refit.theta, data.design.d0());
      for (std::size_t g = 0; g < g_count; ++g)
        effects[g].push_back(eval_mean(kind, refit.theta, band.grid[g]) - rmu0);
    } catch (const std::exception&) {
      ++failures;
    }
  }
  band.refit_failures = failures;
  if (failures > config.b_samples / 5)
    throw bootstrap_failure_error("more than 20% of bootstrap refits failed (" +
                                  std::to_string(failures) + " of " +
                                  std::to_string(config.b_samples) + ")");

  double q_lo = 0.5 * (1.0 - config.level);
  double q_hi = 1.0 - q_lo;
  band.lower.resize(g_count);
  band.upper.resize(g_count);
  for (std::size_t g = 0; g < g_count; ++g) {
    band.lower[g] = order_stat_quantile(effects[g], q_lo);
    band.upper[g] = order_stat_quantile(std::move(effects[g]), q_hi);
  }
  band.lower[0] = 0.0;
  band.upper[0] = 0.0;
  band.fitted[0] = 0.0;
  return band;
}

namespace {

// Profiled residual sum of squares, cached per gamma candidate: with the
// slope beta pinned and the intercept profiled out,
//   RSS(beta) = within_ss + syy_c - 2 beta sxy_c + beta^2 sxx_c.
struct ProfileCandidate {
  double sxx_c = 0.0;
  double sxy_c = 0.0;
  double shape_d0 = 0.0;
  std::vector<double> shape_grid;  // at band grid doses
};

struct ProfileCache {
  std::vector<ProfileCandidate> candidates;
  double syy_c = 0.0;
  double within_ss = 0.0;
  double n = 0.0;

  double sse_at(double effect, std::size_t g) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : candidates) {
      double span = c.shape_grid[g] - c.shape_d0;
      double rss;
      if (effect == 0.0) {
        rss = syy_c;
      } else if (std::fabs(span) < 1e-300) {
        continue;
      } else {
        double beta = effect / span;
        rss = syy_c - 2.0 * beta * c.sxy_c + beta * beta * c.sxx_c;
      }
      best = std::min(best, rss);
    }
    return best + within_ss;
  }
};

void append_candidates(ModelKind kind, const GridBounds& bounds,
                       const std::vector<double>& grid, const Dataset& data,
                       std::vector<std::vector<double>>& gammas) {
  std::size_t dims = bounds.limits.size();
  std::vector<std::vector<double>> axes(dims);
  for (std::size_t k = 0; k < dims; ++k) {
    auto [lo, hi] = bounds.limits[k];
    if (lo == hi || bounds.grid_points <= 1) {
      axes[k] = {lo};
    } else {
      axes[k].resize(static_cast<std::size_t>(bounds.grid_points));
      double step = (hi - lo) / static_cast<double>(bounds.grid_points - 1);
      for (int i = 0; i < bounds.grid_points; ++i)
        axes[k][static_cast<std::size_t>(i)] = lo + step * i;
      axes[k].back() = hi;
    }
  }
  std::vector<std::size_t> idx(dims, 0);
  std::vector<double> gamma(dims);
  for (;;) {
    for (std::size_t k = 0; k < dims; ++k) gamma[k] = axes[k][idx[k]];
    bool valid = true;
    try {
      validate_gamma(kind, gamma);
    } catch (const std::domain_error&) {
      valid = false;
    }
    if (valid) gammas.push_back(gamma);
    std::size_t k = dims;
    bool done = dims == 0;
    while (k > 0) {
      --k;
      if (++idx[k] < axes[k].size()) break;
      idx[k] = 0;
      if (k == 0) done = true;
    }
    if (done) break;
  }
}

ProfileCache build_cache(ModelKind kind, const Dataset& data, const GridBounds& bounds,
                         const FitResult& fit0, const std::vector<double>& grid) {
  std::vector<std::vector<double>> gammas;
  append_candidates(kind, bounds, grid, data, gammas);
  GridBounds refined = refine_bounds(fit0.theta.gamma, bounds);
  append_candidates(kind, refined, grid, data, gammas);
  gammas.push_back(fit0.theta.gamma);

  const auto& agg = data.aggregates();
  const auto& design = data.design;
  ProfileCache cache;
  cache.n = static_cast<double>(data.size());
  double sy = 0.0;
  double syy = 0.0;
  for (std::size_t j = 0; j < design.arms(); ++j) {
    sy += agg[j].count * agg[j].mean;
    syy += agg[j].count * agg[j].mean * agg[j].mean;
    cache.within_ss += agg[j].centered_ss;
  }
  cache.syy_c = syy - sy * sy / cache.n;

  cache.candidates.reserve(gammas.size());
  for (const auto& gamma : gammas) {
    ProfileCandidate c;
    double sx = 0.0, sxx = 0.0, sxy = 0.0;
    std::vector<double> shape_at(design.arms());
    for (std::size_t j = 0; j < design.arms(); ++j) {
      double x = standardized_shape(kind, gamma, design.doses[j]);
      shape_at[j] = x;
      sx += agg[j].count * x;
      sxx += agg[j].count * x * x;
      sxy += agg[j].count * x * agg[j].mean;
    }
    c.sxx_c = sxx - sx * sx / cache.n;
    c.sxy_c = sxy - sx * sy / cache.n;
    if (c.sxx_c <= 0.0) continue;  // flat shape, slope unidentified
    c.shape_d0 = shape_at[0];
    c.shape_grid.resize(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g)
      c.shape_grid[g] = standardized_shape(kind, gamma, grid[g]);
    cache.candidates.push_back(std::move(c));
  }
  return cache;
}

}  // namespace

EffectCurveBand profile_likelihood_band(ModelKind kind, const Dataset& data,
                                        const GridBounds& bounds,
                                        const ProfileConfig& config) {
  if (!(config.level > 0.0 && config.level < 1.0))
    throw std::invalid_argument("level must be in (0,1)");
  FitResult fit0 = fit_ols(kind, data, bounds);

  EffectCurveBand band;
  band.level = config.level;
  band.grid = dose_grid(data.design, config.grid_points);
  std::size_t g_count = band.grid.size();

  double mu0 = eval_mean(kind, fit0.theta, data.design.d0());
  band.fitted.resize(g_count);
  for (std::size_t g = 0; g < g_count; ++g)
    band.fitted[g] = eval_mean(kind, fit0.theta, band.grid[g]) - mu0;
  band.fitted[0] = 0.0;

  ProfileCache cache = build_cache(kind, data, bounds, fit0, band.grid);
  double sse_hat = std::max(fit0.sse, 1e-300);
  double crit = chi2_quantile_1(config.level);
  double n = cache.n;

  auto deviance = [&](double effect, std::size_t g) {
    double sse = cache.sse_at(effect, g);
    return n * std::log(std::max(sse, 1e-300) / sse_hat);
  };

  const double nan = std::numeric_limits<double>::quiet_NaN();
  band.lower.assign(g_count, nan);
  band.upper.assign(g_count, nan);
  band.lower[0] = 0.0;
  band.upper[0] = 0.0;

  double scale = std::max({fit0.sigma, 1e-3, 0.05 * std::fabs(band.fitted.back())});
  for (std::size_t g = 1; g < g_count; ++g) {
    double center = band.fitted[g];
    // Outward doubling to bracket the crossing, then bisection.
    for (int side = 0; side < 2; ++side) {
      double sign = side == 0 ? 1.0 : -1.0;
      double h = 0.1 * scale;
      double lo_off = 0.0;
      bool bracketed = false;
      for (int i = 0; i < 70; ++i) {
        if (deviance(center + sign * h, g) > crit) {
          bracketed = true;
          break;
        }
        lo_off = h;
        h *= 2.0;
      }
      if (!bracketed) {
        band.profile_failures.push_back(static_cast<int>(g));
        break;
      }
      double lo = lo_off, hi = h;
      for (int i = 0; i < 60; ++i) {
        double mid = 0.5 * (lo + hi);
        if (deviance(center + sign * mid, g) > crit)
          hi = mid;
        else
          lo = mid;
      }
      double endpoint = center + sign * 0.5 * (lo + hi);
      if (side == 0)
        band.upper[g] = endpoint;
      else
        band.lower[g] = endpoint;
    }
  }

  // Interpolate isolated failures from their neighbors.
  for (int g : band.profile_failures) {
    std::size_t i = static_cast<std::size_t>(g);
    if (i == 0 || i + 1 >= g_count) continue;
    if (std::isfinite(band.lower[i - 1]) && std::isfinite(band.lower[i + 1]) &&
        std::isfinite(band.upper[i - 1]) && std::isfinite(band.upper[i + 1])) {
      band.lower[i] = 0.5 * (band.lower[i - 1] + band.lower[i + 1]);
      band.upper[i] = 0.5 * (band.upper[i - 1] + band.upper[i + 1]);
    }
  }
  return band;
}

namespace {

template <typename QuadForm>
EffectCurveBand wald_band_impl(const FitResult& fit, const DoseDesign& design,
                               QuadForm&& quad, double level, int grid_points) {
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("level must be in (0,1)");
  EffectCurveBand band;
  band.level = level;
  band.grid = dose_grid(design, grid_points);
  std::size_t g_count = band.grid.size();
  double mu0 = eval_mean(fit.kind, fit.theta, design.d0());
  auto g0 = compress_free(mean_gradient(fit.kind, fit.theta, design.d0()),
                          fit.gamma_free);
  double z = normal_quantile(0.5 * (1.0 + level));
  double n = static_cast<double>(fit.weights_used.size());
  band.fitted.resize(g_count);
  band.lower.resize(g_count);
  band.upper.resize(g_count);
  for (std::size_t g = 1; g < g_count; ++g) {
    double effect = eval_mean(fit.kind, fit.theta, band.grid[g]) - mu0;
    Eigen::VectorXd diff =
        compress_free(mean_gradient(fit.kind, fit.theta, band.grid[g]),
                      fit.gamma_free) -
        g0;
    double half = z * std::sqrt(std::max(0.0, quad(diff)) / n);
    band.fitted[g] = effect;
    band.lower[g] = effect - half;
    band.upper[g] = effect + half;
  }
  band.fitted[0] = 0.0;
  band.lower[0] = 0.0;
  band.upper[0] = 0.0;
  return band;
}

}  // namespace

EffectCurveBand wald_effect_band(const FitResult& fit, const DoseDesign& design,
                                 double level, int grid_points) {
  Eigen::MatrixXd m = information_matrix(fit.kind, fit.theta, design, fit.gamma_free);
  double s2 = fit.sigma * fit.sigma;
  return wald_band_impl(
      fit, design,
      [&](const Eigen::VectorXd& g) {
        Eigen::VectorXd x = solve_information(m, g);
        return s2 * g.dot(x);
      },
      level, grid_points);
}

EffectCurveBand wald_effect_band_cov(const FitResult& fit, const DoseDesign& design,
                                     const Eigen::MatrixXd& cov, double level,
                                     int grid_points) {
  return wald_band_impl(
      fit, design,
      [&](const Eigen::VectorXd& g) {
        if (cov.rows() != g.size() || cov.cols() != g.size())
          throw std::invalid_argument("covariance dimension does not match the fit");
        return g.dot(cov * g);
      },
      level, grid_points);
}

MedEstimate invert_band_for_med(const EffectCurveBand& band, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  MedEstimate out;
  out.method = "band";
  for (std::size_t g = 0; g < band.grid.size(); ++g) {
    if (!out.lower && std::isfinite(band.upper[g]) && band.upper[g] > delta)
      out.lower = band.grid[g];
    if (!out.value && std::isfinite(band.fitted[g]) && band.fitted[g] > delta)
      out.value = band.grid[g];
    if (!out.upper && std::isfinite(band.lower[g]) && band.lower[g] > delta)
      out.upper = band.grid[g];
  }
  return out;
}

}  // namespace dosefind
