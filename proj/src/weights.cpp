#include "dosefind/weights.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dosefind {

WeightKind weight_from_name(const std::string& name) {
  if (name == "unit") return WeightKind::Unit;
  if (name == "w1") return WeightKind::W1;
  if (name == "w2") return WeightKind::W2;
  if (name == "w3") return WeightKind::W3;
  if (name == "w4") return WeightKind::W4;
  if (name == "w5") return WeightKind::W5;
  if (name == "w6") return WeightKind::W6;
  if (name == "w7") return WeightKind::W7;
  throw input_error("unknown weight name: " + name);
}

const char* weight_name(WeightKind kind) {
  switch (kind) {
    case WeightKind::Unit: return "unit";
    case WeightKind::W1: return "w1";
    case WeightKind::W2: return "w2";
    case WeightKind::W3: return "w3";
    case WeightKind::W4: return "w4";
    case WeightKind::W5: return "w5";
    case WeightKind::W6: return "w6";
    case WeightKind::W7: return "w7";
  }
  return "?";
}

bool is_continuous(WeightKind kind) { return kind != WeightKind::W7; }

namespace {

// Index (into design.doses) of the active dose closest to d_med; ties break
// toward the smaller dose.
std::size_t closest_active(const DoseDesign& design, double d_med) {
  std::size_t best = 1;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j < design.arms(); ++j) {
    double dist = std::fabs(design.doses[j] - d_med);
    if (dist < best_dist) {
      best_dist = dist;
      best = j;
    }
  }
  return best;
}

double bump(double z, double clip, bool squared) {
  double a = std::min(std::fabs(z), clip);
  double w = 1.0 - a * a;
  return squared ? w * w : w;
}

}  // namespace

double compute_weight(const WeightSpec& spec, double d, double d_med,
                      const DoseDesign& design) {
  if (spec.kind == WeightKind::Unit) return 1.0;
  if (!(d_med > 0.0)) throw std::invalid_argument("weights need a positive working MED");
  if (!(spec.clip > 0.0 && spec.clip < 1.0))
    throw std::invalid_argument("clip must be in (0,1)");
  if (design.arms() < 2)
    throw std::invalid_argument("weights need at least one active dose");

  switch (spec.kind) {
    case WeightKind::W1:
    case WeightKind::W2: {
      double z = (d_med - d) / d_med;
      return bump(z, spec.clip, spec.kind == WeightKind::W2);
    }
    case WeightKind::W3:
    case WeightKind::W4: {
      std::size_t j = closest_active(design, d_med);
      double denom = std::fabs(design.doses[j] - d_med);
      if (denom == 0.0) denom = std::numeric_limits<double>::min();
      double z = (d_med - d) / denom;
      return bump(z, spec.clip, spec.kind == WeightKind::W4);
    }
    case WeightKind::W5:
    case WeightKind::W6: {
      if (design.arms() < 3)
        throw std::invalid_argument("w5/w6 need at least two active doses");
      std::size_t skip = closest_active(design, d_med);
      double denom = std::numeric_limits<double>::infinity();
      for (std::size_t j = 1; j < design.arms(); ++j) {
        if (j == skip) continue;
        denom = std::min(denom, std::fabs(design.doses[j] - d_med));
      }
      double z = (d_med - d) / denom;
      return bump(z, spec.clip, spec.kind == WeightKind::W6);
    }
    case WeightKind::W7: {
      if (!(spec.k1 > spec.k2 && spec.k2 > 0.0))
        throw std::invalid_argument("w7 needs k1 > k2 > 0");
      std::size_t j = closest_active(design, d_med);
      return d == design.doses[j] ? spec.k1 : spec.k2;
    }
    case WeightKind::Unit:
      break;
  }
  return 1.0;
}

std::vector<double> weights_at_doses(const WeightSpec& spec, double d_med,
                                     const DoseDesign& design) {
  std::vector<double> out(design.arms());
  for (std::size_t j = 0; j < design.arms(); ++j)
    out[j] = compute_weight(spec, design.doses[j], d_med, design);
  return out;
}

}  // namespace dosefind
