#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dosefind/dataset.hpp"
#include "dosefind/fitting.hpp"
#include "dosefind/med.hpp"
#include "dosefind/robust.hpp"
#include "dosefind/weights.hpp"

namespace dosefind {

// Multiple-comparison-then-modelling pipeline: one optimal contrast per
// candidate shape, a one-sided max-T proof-of-concept test, selection of the
// winning candidate, and MED estimation from a refit of that model.

struct Candidate {
  ModelKind kind = ModelKind::Linear;
  std::vector<double> gamma;  // guessed shape parameters, full arity
  std::string label;
};

// Linear, Emax with ED50 at 20% of the top dose, and a sigmoid Emax centred
// at 40% of the top dose with Hill exponent 4.
std::vector<Candidate> default_candidates(const DoseDesign& design);

// Contrast coefficients proportional to n_j * (x_j - weighted mean of x),
// scaled to unit Euclidean norm; they sum to zero by construction. Throws
// input_error for a candidate whose standardized shape is constant over the
// design (the contrast would vanish).
std::vector<std::vector<double>> optimal_contrasts(const std::vector<Candidate>& candidates,
                                                   const DoseDesign& design);

enum class SelectionRule { MaxT, Aic };
enum class McpEstimator { Classical, Robust };

struct PocConfig {
  double alpha = 0.025;     // one-sided test level
  bool bonferroni = false;  // t quantile at alpha/M instead of simulated max-T
  int crit_draws = 50000;
  std::optional<double> critical_value;  // precomputed; skips the simulation
  SelectionRule selection = SelectionRule::MaxT;
};

struct PocResult {
  std::vector<double> t_stats;
  double critical_value = 0.0;
  std::vector<bool> significant;
  bool any_significant = false;
  std::optional<std::size_t> selected;  // index into the candidate list
};

// Critical value of the one-sided max-T statistic under a flat dose-response:
// simulated exactly (normal group means, chi-square pooled variance with
// n - arms degrees of freedom) with a fixed internal seed, so repeated calls
// with the same inputs return the same value.
double max_t_critical_value(const std::vector<std::vector<double>>& contrasts,
                            const DoseDesign& design, double alpha, int draws);

// Contrast t statistics with the pooled variance estimate, the critical
// value, and the selected candidate. Selection uses only the t statistics
// (MaxT) or ordinary least-squares AICs (Aic), never the downstream
// estimator, so both estimators below always agree on the selected model.
PocResult poc_test(const std::vector<Candidate>& candidates, const Dataset& data,
                   const PocConfig& config);

struct McpModResult {
  PocResult poc;
  std::optional<FitResult> fit;  // refit of the selected model
  MedEstimate med;               // empty value when the test fails
  std::string selected_label;
};

// Full pipeline. Classical refits the selected model by least squares and
// applies the screened MED estimate with its delta-method interval; Robust
// refits it with the dose-proximity weighted score equations and reports the
// plug-in MED with the sandwich interval.
McpModResult mcpmod_med(const std::vector<Candidate>& candidates, const Dataset& data,
                        const PocConfig& poc_config, const MedRequest& request,
                        McpEstimator estimator = McpEstimator::Classical,
                        const WeightSpec& weight = WeightSpec{});

}  // namespace dosefind
