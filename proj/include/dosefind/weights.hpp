#pragma once

#include <string>
#include <vector>

#include "dosefind/dataset.hpp"

namespace dosefind {

// Dose weighting around a working MED estimate. Tags w1..w6 are continuous
// bump weights, differing in how the distance to the MED is normalized:
//   w1/w2  by the MED itself
//   w3/w4  by the distance from the MED to the closest active dose
//   w5/w6  by the distance to the closest active dose excluding the nearest
// Odd tags use 1 - z^2, even tags (1 - z^2)^2, with |z| clipped below 1.
// w7 is discrete: k1 at the design dose closest to the MED, k2 elsewhere.
// unit is the degenerate w == 1 used for reductions to unweighted fits.
enum class WeightKind { Unit, W1, W2, W3, W4, W5, W6, W7 };

struct WeightSpec {
  WeightKind kind = WeightKind::W5;
  double clip = 0.9999;
  double k1 = 5.0;
  double k2 = 1.0;
};

WeightKind weight_from_name(const std::string& name);
const char* weight_name(WeightKind kind);

// True for tags usable in the weighted-least-squares confidence interval
// (everything except the discrete w7).
bool is_continuous(WeightKind kind);

// Weight at dose d given the working MED d_med. Active doses are all design
// doses except the first (placebo). Ties in "closest dose" break toward the
// smaller dose. Throws std::invalid_argument for d_med <= 0 or designs with
// too few active doses (w5/w6 need two).
double compute_weight(const WeightSpec& spec, double d, double d_med,
                      const DoseDesign& design);

std::vector<double> weights_at_doses(const WeightSpec& spec, double d_med,
                                     const DoseDesign& design);

}  // namespace dosefind
