#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dosefind/dataset.hpp"
#include "dosefind/intervals.hpp"
#include "dosefind/irwls.hpp"
#include "dosefind/mcpmod.hpp"
#include "dosefind/med.hpp"
#include "dosefind/robust.hpp"

namespace dosefind {

// Scenario-driven simulation studies: estimator bias/spread, interval
// coverage, and the family-wise error rate of the proof-of-concept test.
// Scenarios are JSON documents; results are written as CSV plus a manifest
// that reproduces the run byte for byte.

// Small random shifts added to truth parameters before each replicate is
// generated, so the per-replicate target MED moves with them. Two shift
// variables are drawn once per replicate, eps1 ~ U(0, 0.01) then
// eps2 ~ U(0, 0.06); each binding adds the variable it names, so several
// parameters can share one draw.
struct NoiseBinding {
  int param = 0;  // packed index: 0 alpha, 1 beta, 2 + k the k-th shape value
  int eps = 1;    // which shared shift variable to add (1 or 2)
};

struct TruthSpec {
  ModelKind model = ModelKind::Emax;
  Theta theta;
  double sigma = 0.1;  // residual standard deviation
  std::vector<NoiseBinding> perturb;
};

struct MethodSpec {
  std::string estimator;  // classical | irwls | rr | pboot | proflik | mcpmod
  WeightSpec weight;
  IrwlsCriterion criterion = IrwlsCriterion::MedRelative;
  std::string mcp_fit = "classical";  // mcpmod only: classical | rr
  std::string model;  // "" = scenario fit_model, "truth" = generating model
  std::string label;
};

struct SimScenario {
  std::string name;
  std::string kind = "estimation";  // estimation | coverage | fwer
  TruthSpec truth;
  std::vector<double> doses;
  std::vector<int> pattern;  // per-dose allocation multipliers, default all 1
  std::vector<int> sample_sizes;  // per unit of pattern (balanced: per arm)
  int replicates = 500;
  double delta = 0.4;
  std::uint64_t seed = 1;
  std::string fit_model = "emax";
  std::vector<MethodSpec> methods;
  BootstrapConfig bootstrap;  // seed field ignored; derived per replicate
  ProfileConfig profile;
  double ci_alpha = 0.025;      // per-tail level of the reported intervals
  double screen_alpha = 0.025;  // one-sided level of the classical screen
  PocConfig poc;                // critical_value ignored; computed per n
  std::vector<Candidate> candidates;  // empty = default_candidates

  DoseDesign design_for(int n) const;
};

SimScenario scenario_from_json_text(const std::string& text);  // unwraps {"scenario": ...}
SimScenario scenario_from_file(const std::string& path);
// Normalized echo with every field explicit; reparsing it reproduces the run.
std::string scenario_to_json_text(const SimScenario& scenario);

struct GeneratedData {
  Dataset data;
  Theta truth;  // perturbed parameters actually used for this replicate
};

// One replicate: applies the parameter perturbations, then draws normal
// responses around the perturbed mean curve. Draw order is fixed
// (perturbations first, then responses dose by dose), so one engine fully
// determines the replicate.
GeneratedData generate_dataset(const TruthSpec& truth, const DoseDesign& design,
                               std::mt19937_64& engine);

struct ReplicateRecord {
  int n = 0;
  int replicate = 0;
  double truth_med = 0.0;
  std::optional<double> estimate;
  std::optional<double> lower;
  std::optional<double> upper;
  std::optional<double> se;
  std::string selected;  // mcpmod selected candidate, empty otherwise
  std::optional<bool> covered;
};

struct MethodSeries {
  std::string label;
  // Flattened as records[n_index * replicates + replicate].
  std::vector<ReplicateRecord> records;
};

struct SummaryRow {
  std::string method;
  int n = 0;
  int replicates = 0;
  int estimable = 0;
  double mean_estimate = 0.0;
  double mean_r = 0.0;    // mean of 100 * (est - truth) / truth
  double median_r = 0.0;
  double iqr_r = 0.0;
  double sd_estimate = 0.0;  // empirical SD of the estimates
  double mean_se = 0.0;      // mean reported asymptotic SE
};

struct CoverageRow {
  std::string method;
  int n = 0;
  int replicates = 0;
  int with_interval = 0;  // at least one finite bound
  int covered = 0;
  double coverage = 0.0;  // covered / replicates; missing intervals miss
  double mean_width = 0.0;  // over two-sided intervals
};

struct FwerRow {
  int n = 0;
  int replicates = 0;
  int rejections = 0;
  double fwer = 0.0;
};

struct FwerRecord {
  int n = 0;
  int replicate = 0;
  double max_t = 0.0;
  bool rejected = false;
};

struct StudyResult {
  SimScenario scenario;
  std::vector<MethodSeries> methods;
  std::vector<SummaryRow> summary;
  std::vector<CoverageRow> coverage;  // coverage studies only
  std::vector<FwerRow> fwer;          // fwer studies only
  std::vector<FwerRecord> fwer_records;
};

// Runs every (sample size, replicate) cell, splitting cells across threads.
// Each cell seeds its own generator from (seed, n index, replicate), and all
// results land in preassigned slots, so the output is independent of the
// thread count.
StudyResult run_study(const SimScenario& scenario, int threads = 1);

// summary.csv always; replicates.csv with per-replicate records;
// coverage.csv for coverage studies; manifest.json echoing the normalized
// scenario under a "scenario" key. Numbers are printed with %.10g.
void write_study_outputs(const StudyResult& result, const std::string& directory);

}  // namespace dosefind
