#include "dosefind/models.hpp"

#include <cmath>
#include <limits>

namespace dosefind {

int gamma_arity(ModelKind kind) {
  switch (kind) {
    case ModelKind::Linear: return 0;
    case ModelKind::LinLog: return 1;
    case ModelKind::Emax: return 1;
    case ModelKind::Exponential: return 1;
    case ModelKind::Quadratic: return 1;
    case ModelKind::SigEmax: return 2;
    case ModelKind::Power: return 1;
    case ModelKind::TruncLogistic: return 2;
  }
  return 0;
}

const char* model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Linear: return "linear";
    case ModelKind::LinLog: return "linlog";
    case ModelKind::Emax: return "emax";
    case ModelKind::Exponential: return "exponential";
    case ModelKind::Quadratic: return "quadratic";
    case ModelKind::SigEmax: return "sigemax";
    case ModelKind::Power: return "power";
    case ModelKind::TruncLogistic: return "tlogistic";
  }
  return "?";
}

ModelKind model_from_name(const std::string& name) {
  if (name == "linear") return ModelKind::Linear;
  if (name == "linlog") return ModelKind::LinLog;
  if (name == "emax") return ModelKind::Emax;
  if (name == "exponential") return ModelKind::Exponential;
  if (name == "quadratic") return ModelKind::Quadratic;
  if (name == "sigemax") return ModelKind::SigEmax;
  if (name == "power") return ModelKind::Power;
  if (name == "tlogistic") return ModelKind::TruncLogistic;
  throw input_error("unknown model name: " + name);
}

void validate_gamma(ModelKind kind, std::span<const double> gamma) {
  if (static_cast<int>(gamma.size()) != gamma_arity(kind))
    throw std::domain_error("gamma has wrong length for model");
  for (double g : gamma)
    if (!std::isfinite(g)) throw std::domain_error("gamma must be finite");
  switch (kind) {
    case ModelKind::Linear:
      break;
    case ModelKind::LinLog:
      if (gamma[0] <= 0.0) throw std::domain_error("linlog offset must be positive");
      break;
    case ModelKind::Emax:
      if (gamma[0] <= 0.0) throw std::domain_error("ED50 must be positive");
      break;
    case ModelKind::Exponential:
      if (gamma[0] <= 0.0) throw std::domain_error("exponential rate must be positive");
      break;
    case ModelKind::Quadratic:
      if (gamma[0] >= 0.0)
        throw std::domain_error("quadratic ratio must be negative (downturning curve)");
      break;
    case ModelKind::SigEmax:
      if (gamma[0] <= 0.0) throw std::domain_error("ED50 must be positive");
      if (gamma[1] <= 0.0) throw std::domain_error("hill exponent must be positive");
      break;
    case ModelKind::Power:
      if (gamma[0] <= 0.0) throw std::domain_error("power exponent must be positive");
      break;
    case ModelKind::TruncLogistic:
      if (gamma[0] <= 0.0) throw std::domain_error("logistic slope must be positive");
      break;
  }
}

double standardized_shape(ModelKind kind, std::span<const double> gamma, double d) {
  if (d < 0.0) throw std::domain_error("dose must be nonnegative");
  switch (kind) {
    case ModelKind::Linear:
      return d;
    case ModelKind::LinLog:
      return std::log(d + gamma[0]);
    case ModelKind::Emax:
      return d / (gamma[0] + d);
    case ModelKind::Exponential:
      return std::expm1(d / gamma[0]);
    case ModelKind::Quadratic:
      return d + gamma[0] * d * d;
    case ModelKind::SigEmax: {
      if (d == 0.0) return 0.0;
      double t = std::pow(d / gamma[0], gamma[1]);
      return t / (1.0 + t);
    }
    case ModelKind::Power:
      return d == 0.0 ? 0.0 : std::pow(d, gamma[0]);
    case ModelKind::TruncLogistic:
      return 1.0 / (1.0 + std::exp(gamma[0] * (gamma[1] - d)));
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double eval_mean(ModelKind kind, const Theta& theta, double d) {
  return theta.alpha + theta.beta * standardized_shape(kind, theta.gamma, d);
}

namespace {

double inverse_tlogistic(std::span<const double> gamma, double u) {
  double s = gamma[0], m = gamma[1];
  double at_zero = 1.0 / (1.0 + std::exp(s * m));
  if (u < at_zero || u >= 1.0)
    throw no_solution_error("value outside attainable range of shape");
  if (u == at_zero) return 0.0;
  double lo = 0.0;
  double hi = std::max(1.0, m + 1.0 / s);
  while (1.0 / (1.0 + std::exp(s * (m - hi))) < u) {
    hi *= 2.0;
    if (hi > 1e12) throw no_solution_error("value outside attainable range of shape");
  }
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (1.0 / (1.0 + std::exp(s * (m - mid))) < u)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-14 * std::max(1.0, hi)) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double inverse_shape(ModelKind kind, std::span<const double> gamma, double u) {
  validate_gamma(kind, gamma);
  switch (kind) {
    case ModelKind::Linear:
      if (u < 0.0) throw no_solution_error("value outside attainable range of shape");
      return u;
    case ModelKind::LinLog: {
      double d = std::exp(u) - gamma[0];
      if (d < 0.0) throw no_solution_error("value outside attainable range of shape");
      return d;
    }
    case ModelKind::Emax:
      if (u < 0.0 || u >= 1.0)
        throw no_solution_error("value outside attainable range of shape");
      return u * gamma[0] / (1.0 - u);
    case ModelKind::Exponential:
      if (u < 0.0) throw no_solution_error("value outside attainable range of shape");
      return gamma[0] * std::log1p(u);
    case ModelKind::Quadratic: {
      // Smallest nonnegative root of r*d^2 + d - u = 0 (r < 0).
      double r = gamma[0];
      double disc = 1.0 + 4.0 * r * u;
      if (disc < 0.0) throw no_solution_error("value outside attainable range of shape");
      double sq = std::sqrt(disc);
      double root1 = (-1.0 + sq) / (2.0 * r);
      double root2 = (-1.0 - sq) / (2.0 * r);
      double best = std::numeric_limits<double>::infinity();
      if (root1 >= 0.0) best = std::min(best, root1);
      if (root2 >= 0.0) best = std::min(best, root2);
      if (!std::isfinite(best))
        throw no_solution_error("value outside attainable range of shape");
      return best;
    }
    case ModelKind::SigEmax:
      if (u < 0.0 || u >= 1.0)
        throw no_solution_error("value outside attainable range of shape");
      if (u == 0.0) return 0.0;
      return gamma[0] * std::pow(u / (1.0 - u), 1.0 / gamma[1]);
    case ModelKind::Power:
      if (u < 0.0) throw no_solution_error("value outside attainable range of shape");
      if (u == 0.0) return 0.0;
      return std::pow(u, 1.0 / gamma[0]);
    case ModelKind::TruncLogistic:
      return inverse_tlogistic(gamma, u);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

std::vector<double> mean_gradient(ModelKind kind, const Theta& theta, double d) {
  validate_gamma(kind, theta.gamma);
  const auto& g = theta.gamma;
  double x = standardized_shape(kind, g, d);
  std::vector<double> out(2 + g.size());
  out[0] = 1.0;
  out[1] = x;
  switch (kind) {
    case ModelKind::Linear:
      break;
    case ModelKind::LinLog:
      out[2] = theta.beta / (d + g[0]);
      break;
    case ModelKind::Emax:
      out[2] = theta.beta * (-d / ((g[0] + d) * (g[0] + d)));
      break;
    case ModelKind::Exponential:
      out[2] = theta.beta * std::exp(d / g[0]) * (-d / (g[0] * g[0]));
      break;
    case ModelKind::Quadratic:
      out[2] = theta.beta * d * d;
      break;
    case ModelKind::SigEmax: {
      if (d == 0.0) {
        out[2] = 0.0;
        out[3] = 0.0;
      } else {
        double x1mx = x * (1.0 - x);
        out[2] = theta.beta * (-(g[1] / g[0]) * x1mx);
        out[3] = theta.beta * (x1mx * std::log(d / g[0]));
      }
      break;
    }
    case ModelKind::Power:
      out[2] = (d == 0.0) ? 0.0 : theta.beta * x * std::log(d);
      break;
    case ModelKind::TruncLogistic: {
      double x1mx = x * (1.0 - x);
      out[2] = theta.beta * x1mx * (d - g[1]);
      out[3] = theta.beta * (-g[0] * x1mx);
      break;
    }
  }
  return out;
}

}  // namespace dosefind
