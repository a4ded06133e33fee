#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "dosefind/dataset.hpp"
#include "dosefind/models.hpp"

namespace testkit {

// Standard five-dose design used throughout: placebo plus four active doses.
inline dosefind::DoseDesign std_design(int per_group) {
  return dosefind::DoseDesign({0.0, 0.05, 0.2, 0.6, 1.0},
                              std::vector<int>(5, per_group));
}

inline dosefind::DoseDesign wide_design(int per_group) {
  return dosefind::DoseDesign({0.0, 0.25, 0.5, 0.75, 1.0},
                              std::vector<int>(5, per_group));
}

// Noise-free responses: the exact mean at every design point.
inline dosefind::Dataset exact_dataset(dosefind::ModelKind kind,
                                       const dosefind::Theta& theta,
                                       const dosefind::DoseDesign& design) {
  std::vector<dosefind::Observation> obs;
  for (std::size_t g = 0; g < design.doses.size(); ++g) {
    double mu = dosefind::eval_mean(kind, theta, design.doses[g]);
    for (int k = 0; k < design.allocations[g]; ++k)
      obs.push_back({static_cast<int>(g), mu});
  }
  return dosefind::Dataset(design, obs);
}

inline dosefind::Dataset noisy_dataset(dosefind::ModelKind kind,
                                       const dosefind::Theta& theta,
                                       const dosefind::DoseDesign& design,
                                       double sigma, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<dosefind::Observation> obs;
  for (std::size_t g = 0; g < design.doses.size(); ++g) {
    double mu = dosefind::eval_mean(kind, theta, design.doses[g]);
    for (int k = 0; k < design.allocations[g]; ++k)
      obs.push_back({static_cast<int>(g), mu + noise(eng)});
  }
  return dosefind::Dataset(design, obs);
}

// Bisection root finder, kept deliberately independent of any library solver
// so it can serve as an oracle for inverse and MED computations.
inline double bisect(const std::function<double(double)>& f, double lo, double hi,
                     int iters = 200) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) throw std::runtime_error("bisect: no sign change");
  for (int i = 0; i < iters; ++i) {
    double mid = 0.5 * (lo + hi);
    double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Central finite difference with a relative step, the reference for every
// analytic gradient in the suite.
inline double central_diff(const std::function<double(double)>& f, double x,
                           double rel_step = 1e-6) {
  double h = rel_step * std::max(1.0, std::abs(x));
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Random parameter draws kept inside each family's sensible region.
inline dosefind::Theta random_theta(dosefind::ModelKind kind, std::mt19937_64& eng) {
  using dosefind::ModelKind;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  dosefind::Theta t;
  t.alpha = -0.5 + u(eng);
  t.beta = 0.3 + 1.2 * u(eng);
  switch (kind) {
    case ModelKind::Linear:
      break;
    case ModelKind::LinLog:
      t.gamma = {0.05 + 0.5 * u(eng)};
      break;
    case ModelKind::Emax:
      t.gamma = {0.05 + 0.8 * u(eng)};
      break;
    case ModelKind::Exponential:
      t.gamma = {0.3 + 1.2 * u(eng)};
      break;
    case ModelKind::Quadratic:
      t.gamma = {-(0.1 + 0.8 * u(eng))};
      break;
    case ModelKind::SigEmax:
      t.gamma = {0.1 + 0.7 * u(eng), 1.0 + 4.0 * u(eng)};
      break;
    case ModelKind::Power:
      t.gamma = {0.3 + 1.5 * u(eng)};
      break;
    case ModelKind::TruncLogistic:
      t.gamma = {3.0 + 12.0 * u(eng), 0.2 + 0.7 * u(eng)};
      break;
  }
  return t;
}

inline const std::vector<dosefind::ModelKind>& all_models() {
  using dosefind::ModelKind;
  static const std::vector<ModelKind> kinds = {
      ModelKind::Linear,   ModelKind::LinLog, ModelKind::Emax,
      ModelKind::Exponential, ModelKind::Quadratic, ModelKind::SigEmax,
      ModelKind::Power,    ModelKind::TruncLogistic};
  return kinds;
}

}  // namespace testkit
