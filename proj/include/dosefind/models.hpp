#pragma once

#include <span>
#include <string>
#include <vector>

#include "dosefind/errors.hpp"

namespace dosefind {

// Mean response is always alpha + beta * shape(d; gamma). The shape carries
// the nonlinear parameters:
//   Linear         d                         (no gamma)
//   LinLog         log(d + c)                gamma = {c}, c > 0
//   Emax           d / (ED50 + d)            gamma = {ED50}
//   Exponential    exp(d / delta) - 1        gamma = {delta}
//   Quadratic      d + r * d^2               gamma = {r}, r < 0 (curvature ratio)
//   SigEmax        d^h / (ED50^h + d^h)      gamma = {ED50, h}
//   Power          d^e                       gamma = {e}, e > 0
//   TruncLogistic  1 / (1 + exp(s * (m - d)))  gamma = {s, m}
enum class ModelKind {
  Linear,
  LinLog,
  Emax,
  Exponential,
  Quadratic,
  SigEmax,
  Power,
  TruncLogistic,
};

struct Theta {
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<double> gamma;
};

int gamma_arity(ModelKind kind);
const char* model_name(ModelKind kind);
ModelKind model_from_name(const std::string& name);

// Throws std::domain_error on invalid gamma (wrong size, nonpositive ED50,
// nonnegative Quadratic ratio, ...).
void validate_gamma(ModelKind kind, std::span<const double> gamma);

double standardized_shape(ModelKind kind, std::span<const double> gamma, double d);
double eval_mean(ModelKind kind, const Theta& theta, double d);

// Smallest dose d >= 0 with shape(d) == u; throws no_solution_error when u is
// outside the attainable range. TruncLogistic is solved by bisection.
double inverse_shape(ModelKind kind, std::span<const double> gamma, double u);

// d(mean)/d(theta) = (1, shape(d), beta * d shape/d gamma_1, ...).
std::vector<double> mean_gradient(ModelKind kind, const Theta& theta, double d);

}  // namespace dosefind
