#include "dosefind/fitting.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace dosefind {

namespace {

constexpr int kMaxArms = 32;

using DesignMat = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::ColMajor, kMaxArms, 2>;
using RhsVec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxArms, 1>;

// Per-dose sufficient statistics of the weighted least-squares problem. The
// design matrix has identical rows within a dose group, so the fit depends on
// the data only through these.
struct WlsStats {
  std::vector<double> wsum;   // sum of weights per dose
  std::vector<double> wmean;  // weighted mean response per dose
  double within_ss = 0.0;     // sum w*y^2 - sum wsum*wmean^2 (gamma-independent)
};

WlsStats accumulate_stats(const Dataset& data, const std::vector<double>& weights) {
  std::size_t arms = data.design.arms();
  WlsStats s;
  s.wsum.assign(arms, 0.0);
  std::vector<double> wy(arms, 0.0);
  double wyy = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& o = data.observations[i];
    double w = weights[i];
    s.wsum[o.dose_index] += w;
    wy[o.dose_index] += w * o.response;
    wyy += w * o.response * o.response;
  }
  s.wmean.resize(arms);
  double between = 0.0;
  for (std::size_t j = 0; j < arms; ++j) {
    s.wmean[j] = wy[j] / s.wsum[j];
    between += wy[j] * s.wmean[j];
  }
  s.within_ss = std::max(0.0, wyy - between);
  return s;
}

struct LinearSolve {
  double alpha = 0.0;
  double beta = 0.0;
  double wsse = std::numeric_limits<double>::infinity();
  bool ok = false;
};

LinearSolve solve_at_shape(const WlsStats& stats, std::span<const double> shape) {
  std::size_t arms = stats.wsum.size();
  DesignMat design(arms, 2);
  RhsVec rhs(arms);
  for (std::size_t j = 0; j < arms; ++j) {
    double sw = std::sqrt(stats.wsum[j]);
    design(j, 0) = sw;
    design(j, 1) = sw * shape[j];
    rhs(j) = sw * stats.wmean[j];
  }
  Eigen::ColPivHouseholderQR<DesignMat> qr(design);
  LinearSolve out;
  if (qr.rank() < 2) return out;
  Eigen::Vector2d coef = qr.solve(rhs);
  if (!coef.allFinite()) return out;
  out.alpha = coef(0);
  out.beta = coef(1);
  double between = 0.0;
  for (std::size_t j = 0; j < arms; ++j) {
    double r = stats.wmean[j] - out.alpha - out.beta * shape[j];
    between += stats.wsum[j] * r * r;
  }
  out.wsse = stats.within_ss + between;
  out.ok = std::isfinite(out.wsse);
  return out;
}

std::vector<double> linspace(double lo, double hi, int n) {
  if (lo == hi || n <= 1) return {lo};
  std::vector<double> out(static_cast<std::size_t>(n));
  double step = (hi - lo) / static_cast<double>(n - 1);
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo + step * i;
  out.back() = hi;
  return out;
}

bool lex_less(const std::vector<double>& a, const std::vector<double>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

struct GridBest {
  std::vector<double> gamma;
  LinearSolve solve;
  bool found = false;
};

void scan_grid(ModelKind kind, const DoseDesign& design, const WlsStats& stats,
               const GridBounds& bounds, GridBest& best) {
  std::size_t dims = bounds.limits.size();
  std::vector<std::vector<double>> axes(dims);
  for (std::size_t k = 0; k < dims; ++k)
    axes[k] = linspace(bounds.limits[k].first, bounds.limits[k].second, bounds.grid_points);

  std::vector<std::size_t> idx(dims, 0);
  std::vector<double> gamma(dims);
  std::vector<double> shape(design.arms());
  for (;;) {
    for (std::size_t k = 0; k < dims; ++k) gamma[k] = axes[k][idx[k]];
    bool valid = true;
    try {
      validate_gamma(kind, gamma);
    } catch (const std::domain_error&) {
      valid = false;
    }
    if (valid) {
      for (std::size_t j = 0; j < design.arms(); ++j)
        shape[j] = standardized_shape(kind, gamma, design.doses[j]);
      LinearSolve s = solve_at_shape(stats, shape);
      if (s.ok && (!best.found || s.wsse < best.solve.wsse ||
                   (s.wsse == best.solve.wsse && lex_less(gamma, best.gamma)))) {
        best.gamma = gamma;
        best.solve = s;
        best.found = true;
      }
    }
    // Odometer increment; last axis varies fastest.
    std::size_t k = dims;
    while (k > 0) {
      --k;
      if (++idx[k] < axes[k].size()) break;
      idx[k] = 0;
      if (k == 0) return;
    }
    if (dims == 0) return;
  }
}

FitResult grid_fit(ModelKind kind, const Dataset& data, const GridBounds& bounds,
                   const std::vector<double>& weights) {
  const DoseDesign& design = data.design;
  if (design.arms() > kMaxArms)
    throw input_error("designs with more than 32 dose levels are not supported");
  if (static_cast<int>(bounds.limits.size()) != gamma_arity(kind))
    throw std::invalid_argument("bounds dimension does not match model");
  if (bounds.grid_points < 2) throw std::invalid_argument("grid_points must be >= 2");
  for (const auto& [lo, hi] : bounds.limits)
    if (!(lo <= hi)) throw std::invalid_argument("bounds must satisfy lower <= upper");
  if (weights.size() != data.size())
    throw std::invalid_argument("weights length must match observation count");
  for (double w : weights)
    if (!(w > 0.0) || !std::isfinite(w))
      throw std::invalid_argument("weights must be strictly positive and finite");

  int free_dims = 0;
  for (const auto& [lo, hi] : bounds.limits)
    if (lo < hi) ++free_dims;
  int p = 2 + free_dims;
  if (static_cast<int>(design.arms()) < p + 1)
    throw rank_deficiency_error("need at least " + std::to_string(p + 1) +
                                " distinct doses to fit " + model_name(kind));

  WlsStats stats = accumulate_stats(data, weights);

  GridBest best;
  scan_grid(kind, design, stats, bounds, best);
  if (!best.found)
    throw rank_deficiency_error("weighted design is rank deficient at every grid point");
  if (free_dims > 0) {
    GridBounds refined = refine_bounds(best.gamma, bounds);
    scan_grid(kind, design, stats, refined, best);
  }

  FitResult fit;
  fit.kind = kind;
  fit.theta.alpha = best.solve.alpha;
  fit.theta.beta = best.solve.beta;
  fit.theta.gamma = best.gamma;
  fit.sse = best.solve.wsse;
  int n = static_cast<int>(data.size());
  fit.sigma = n > p ? std::sqrt(fit.sse / static_cast<double>(n - p)) : 0.0;
  fit.weights_used = weights;
  fit.gamma_free.resize(bounds.limits.size());
  for (std::size_t k = 0; k < bounds.limits.size(); ++k)
    fit.gamma_free[k] = bounds.limits[k].first < bounds.limits[k].second;
  return fit;
}

}  // namespace

int FitResult::n_free_params() const {
  int p = 2;
  for (bool f : gamma_free)
    if (f) ++p;
  return p;
}

GridBounds default_bounds(ModelKind kind, const DoseDesign& design) {
  double dmax = design.dmax();
  if (dmax <= 0.0) throw std::invalid_argument("design needs a positive maximum dose");
  GridBounds b;
  switch (kind) {
    case ModelKind::Linear:
      break;
    case ModelKind::LinLog:
      b.limits = {{0.2 * dmax, 0.2 * dmax}};
      break;
    case ModelKind::Emax:
      b.limits = {{0.001 * dmax, 1.5 * dmax}};
      break;
    case ModelKind::Exponential:
      b.limits = {{0.1 * dmax, 2.0 * dmax}};
      break;
    case ModelKind::Quadratic:
      b.limits = {{-1.5 / dmax, -0.05 / dmax}};
      break;
    case ModelKind::SigEmax:
      b.limits = {{0.001 * dmax, 1.5 * dmax}, {0.5, 10.0}};
      break;
    case ModelKind::Power:
      b.limits = {{0.05, 3.0}};
      break;
    case ModelKind::TruncLogistic:
      b.limits = {{1.0 / dmax, 30.0 / dmax}, {0.05 * dmax, 1.2 * dmax}};
      break;
  }
  return b;
}

GridBounds refine_bounds(std::span<const double> start, const GridBounds& bounds) {
  if (start.size() != bounds.limits.size())
    throw std::invalid_argument("start dimension does not match bounds");
  GridBounds out = bounds;
  for (std::size_t k = 0; k < bounds.limits.size(); ++k) {
    auto [lo, hi] = bounds.limits[k];
    if (lo == hi) continue;
    double dif = (hi - lo) / static_cast<double>(bounds.grid_points);
    out.limits[k].first = std::max(start[k] - 1.1 * dif, lo);
    out.limits[k].second = std::min(start[k] + 1.1 * dif, hi);
  }
  return out;
}

FitResult fit_ols(ModelKind kind, const Dataset& data, const GridBounds& bounds) {
  return grid_fit(kind, data, bounds, std::vector<double>(data.size(), 1.0));
}

FitResult fit_weighted(ModelKind kind, const Dataset& data, const GridBounds& bounds,
                       const std::vector<double>& weights) {
  return grid_fit(kind, data, bounds, weights);
}

}  // namespace dosefind
