#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "dosefind/rng.hpp"
#include "dosefind/simlab.hpp"
#include "dosefind/stats.hpp"
#include "helpers.hpp"

using namespace dosefind;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

SimScenario tiny_scenario() {
  SimScenario s;
  s.name = "tiny";
  s.kind = "estimation";
  s.truth.model = ModelKind::Emax;
  s.truth.theta = Theta{0.2, 0.7, {0.2}};
  s.truth.sigma = 0.3;
  s.doses = {0.0, 0.05, 0.2, 0.6, 1.0};
  s.sample_sizes = {10};
  s.replicates = 6;
  s.delta = 0.4;
  s.seed = 42;
  s.fit_model = "emax";
  MethodSpec classical;
  classical.estimator = "classical";
  s.methods.push_back(classical);
  MethodSpec rr;
  rr.estimator = "rr";
  rr.weight.kind = WeightKind::W5;
  s.methods.push_back(rr);
  return s;
}

}  // namespace

TEST_CASE("dataset generation is reproducible from the engine seed") {
  TruthSpec truth;
  truth.model = ModelKind::Emax;
  truth.theta = Theta{0.2, 0.7, {0.2}};
  truth.sigma = 0.65;
  DoseDesign d = testkit::std_design(20);

  auto e1 = make_engine(7, 1, 0, 3);
  auto e2 = make_engine(7, 1, 0, 3);
  GeneratedData g1 = generate_dataset(truth, d, e1);
  GeneratedData g2 = generate_dataset(truth, d, e2);
  REQUIRE(g1.data.size() == g2.data.size());
  for (std::size_t i = 0; i < g1.data.size(); ++i)
    CHECK(g1.data.observations[i].response == g2.data.observations[i].response);

  auto e3 = make_engine(7, 1, 0, 4);
  GeneratedData g3 = generate_dataset(truth, d, e3);
  bool differs = false;
  for (std::size_t i = 0; i < g1.data.size(); ++i)
    differs = differs || g1.data.observations[i].response != g3.data.observations[i].response;
  CHECK(differs);
}

TEST_CASE("generated group means track the model curve") {
  TruthSpec truth;
  truth.model = ModelKind::Emax;
  truth.theta = Theta{0.2, 0.7, {0.2}};
  truth.sigma = 0.65;
  DoseDesign d = testkit::std_design(200);
  auto eng = make_engine(11, 1, 0, 0);
  GeneratedData gen = generate_dataset(truth, d, eng);
  double bound = 4.0 * 0.65 / std::sqrt(200.0);
  for (std::size_t j = 0; j < d.arms(); ++j) {
    double mu = eval_mean(truth.model, truth.theta, d.doses[j]);
    CHECK(std::abs(gen.data.aggregates()[j].mean - mu) < bound);
  }
  CHECK(gen.truth.beta == truth.theta.beta);
}

TEST_CASE("perturbation bindings share their uniform draws") {
  TruthSpec truth;
  truth.model = ModelKind::SigEmax;
  truth.theta = Theta{0.2, 0.6, {0.4, 4.0}};
  truth.sigma = 0.65;
  truth.perturb = {{1, 1}, {2, 1}};  // beta and gamma0 move together
  DoseDesign d = testkit::std_design(5);

  for (int rep = 0; rep < 5; ++rep) {
    auto eng = make_engine(3, 1, 0, static_cast<std::uint64_t>(rep));
    GeneratedData gen = generate_dataset(truth, d, eng);
    double shift_beta = gen.truth.beta - truth.theta.beta;
    double shift_gamma = gen.truth.gamma[0] - truth.theta.gamma[0];
    // One draw feeds both parameters; recovering it by subtraction rounds in
    // the last ulp, so compare with a hair of slack.
    CHECK(shift_beta == doctest::Approx(shift_gamma).epsilon(1e-9));
    CHECK(shift_beta > 0.0);
    CHECK(shift_beta < 0.01);
    CHECK(gen.truth.gamma[1] == truth.theta.gamma[1]);
  }

  // The second variable has its own wider range.
  TruthSpec t2 = truth;
  t2.perturb = {{1, 2}};
  bool beyond = false;
  for (int rep = 0; rep < 40; ++rep) {
    auto eng = make_engine(5, 1, 0, static_cast<std::uint64_t>(rep));
    GeneratedData gen = generate_dataset(t2, d, eng);
    double shift = gen.truth.beta - t2.theta.beta;
    CHECK(shift > 0.0);
    CHECK(shift < 0.06);
    beyond = beyond || shift > 0.01;
  }
  CHECK(beyond);
}

TEST_CASE("scenario json round-trips to a fixed point") {
  std::string text = R"({
    "name": "roundtrip",
    "kind": "coverage",
    "truth": {"model": "emax", "alpha": 0.32, "beta": 0.74, "gamma": [0.14], "sigma": 0.65},
    "doses": [0, 0.05, 0.2, 0.6, 1],
    "sample_sizes": [25, 50],
    "replicates": 12,
    "delta": 0.3,
    "seed": 9,
    "fit_model": "emax",
    "methods": [
      {"estimator": "classical"},
      {"estimator": "rr", "weight": "w5"},
      {"estimator": "irwls", "weight": "w6"},
      {"estimator": "pboot"},
      {"estimator": "proflik"},
      {"estimator": "mcpmod", "fit": "rr", "weight": "w6"}
    ],
    "bootstrap": {"b_samples": 40}
  })";
  SimScenario s = scenario_from_json_text(text);
  CHECK(s.methods[0].label == "classical");
  CHECK(s.methods[1].label == "rr-w5");
  CHECK(s.methods[2].label == "irwls-w6");
  CHECK(s.methods[5].label == "mcpmod-rr-w6");
  CHECK(s.bootstrap.b_samples == 40);
  CHECK(s.bootstrap.grid_points == 201);

  std::string once = scenario_to_json_text(s);
  std::string twice = scenario_to_json_text(scenario_from_json_text(once));
  CHECK(once == twice);
}

TEST_CASE("scenario parsing reports helpful errors") {
  CHECK_THROWS_AS(scenario_from_json_text("{not json"), input_error);
  CHECK_THROWS_AS(scenario_from_json_text(R"({"kind": "estimation"})"), input_error);
  CHECK_THROWS_AS(scenario_from_json_text(R"({
    "truth": {"model": "emax", "beta": 0.7, "gamma": [0.2]},
    "doses": [0, 1], "sample_sizes": [5], "delta": 0.4,
    "kind": "other"})"),
                  input_error);
  CHECK_THROWS_AS(scenario_from_json_text(R"({
    "truth": {"model": "emax", "beta": 0.7, "gamma": [0.2],
              "perturb": [{"param": "beta", "eps": 3}]},
    "doses": [0, 1], "sample_sizes": [5], "delta": 0.4})"),
                  input_error);
}

TEST_CASE("a small study produces labeled records for every replicate") {
  SimScenario s = tiny_scenario();
  StudyResult res = run_study(s, 1);
  REQUIRE(res.methods.size() == 2);
  CHECK(res.methods[0].label == "classical");
  CHECK(res.methods[1].label == "rr-w5");
  for (const auto& series : res.methods) {
    REQUIRE(series.records.size() == 6);
    for (const auto& rec : series.records) {
      CHECK(rec.n == 10);
      CHECK(rec.truth_med == doctest::Approx(0.8 / 3.0).epsilon(1e-12));
      CHECK_FALSE(rec.covered.has_value());  // estimation study: no coverage flag
    }
  }
  REQUIRE(res.summary.size() == 2);
  CHECK(res.summary[0].replicates == 6);
  CHECK(res.summary[0].estimable <= 6);
  CHECK(res.coverage.empty());
}

TEST_CASE("study results do not depend on the thread count") {
  SimScenario s = tiny_scenario();
  s.replicates = 8;
  MethodSpec pboot;
  pboot.estimator = "pboot";
  s.methods.push_back(pboot);
  s.bootstrap.b_samples = 30;

  StudyResult one = run_study(s, 1);
  StudyResult four = run_study(s, 4);
  REQUIRE(one.methods.size() == four.methods.size());
  for (std::size_t mi = 0; mi < one.methods.size(); ++mi) {
    for (std::size_t r = 0; r < one.methods[mi].records.size(); ++r) {
      const auto& a = one.methods[mi].records[r];
      const auto& b = four.methods[mi].records[r];
      CHECK(a.estimate == b.estimate);
      CHECK(a.lower == b.lower);
      CHECK(a.upper == b.upper);
      CHECK(a.se == b.se);
      CHECK(a.selected == b.selected);
    }
  }
}

TEST_CASE("coverage studies flag each interval against the true MED") {
  SimScenario s = tiny_scenario();
  s.kind = "coverage";
  s.sample_sizes = {25};
  s.replicates = 10;
  s.methods.resize(1);  // classical only
  StudyResult res = run_study(s, 1);
  REQUIRE(res.coverage.size() == 1);
  const auto& cov = res.coverage[0];
  CHECK(cov.method == "classical");
  CHECK(cov.replicates == 10);
  int covered = 0, with_interval = 0;
  double truth = 0.8 / 3.0;
  for (const auto& rec : res.methods[0].records) {
    REQUIRE(rec.covered.has_value());
    bool has = rec.lower || rec.upper;
    if (has) ++with_interval;
    bool ok = has && (!rec.lower || truth >= *rec.lower) && (!rec.upper || truth <= *rec.upper);
    CHECK(*rec.covered == ok);
    if (ok) ++covered;
  }
  CHECK(cov.covered == covered);
  CHECK(cov.with_interval == with_interval);
  CHECK(cov.coverage == doctest::Approx(covered / 10.0));
}

TEST_CASE("estimation studies tolerate truths with no reachable target") {
  SimScenario s = tiny_scenario();
  // Plateau well below the requested gain: beta * 1 < delta.
  s.truth.theta = Theta{0.1, 0.3, {0.01}};
  s.methods.resize(1);
  StudyResult res = run_study(s, 1);
  for (const auto& rec : res.methods[0].records) CHECK_FALSE(std::isfinite(rec.truth_med));
  CHECK_FALSE(std::isfinite(res.summary[0].mean_r));

  s.kind = "coverage";
  CHECK_THROWS_AS(run_study(s, 1), input_error);
}

TEST_CASE("relative errors in the summary follow the replicate records") {
  SimScenario s = tiny_scenario();
  s.methods.resize(1);
  StudyResult res = run_study(s, 1);
  const auto& recs = res.methods[0].records;
  std::vector<double> rel;
  for (const auto& rec : recs)
    if (rec.estimate && std::isfinite(rec.truth_med))
      rel.push_back(100.0 * (*rec.estimate - rec.truth_med) / rec.truth_med);
  if (!rel.empty()) {
    CHECK(res.summary[0].mean_r == doctest::Approx(mean_of(rel)).epsilon(1e-12));
    CHECK(res.summary[0].median_r == doctest::Approx(median_of(rel)).epsilon(1e-12));
  }
}

TEST_CASE("fwer studies count rejections of a flat curve") {
  SimScenario s;
  s.name = "flat";
  s.kind = "fwer";
  s.truth.model = ModelKind::Linear;
  s.truth.theta = Theta{0.2, 0.0, {}};
  s.truth.sigma = 0.65;
  s.doses = {0.0, 0.05, 0.2, 0.6, 1.0};
  s.sample_sizes = {10};
  s.replicates = 40;
  s.delta = 0.4;
  s.seed = 5;
  StudyResult res = run_study(s, 1);
  REQUIRE(res.fwer.size() == 1);
  CHECK(res.fwer[0].replicates == 40);
  REQUIRE(res.fwer_records.size() == 40);
  int rejected = 0;
  for (const auto& r : res.fwer_records) {
    CHECK(std::isfinite(r.max_t));
    if (r.rejected) ++rejected;
  }
  CHECK(res.fwer[0].rejections == rejected);
  CHECK(res.fwer[0].fwer == doctest::Approx(rejected / 40.0));
  CHECK(rejected <= 8);  // far looser than the nominal 2.5% level
}

TEST_CASE("study outputs re-run byte-identically from their manifest") {
  namespace fs = std::filesystem;
  SimScenario s = tiny_scenario();
  s.replicates = 5;
  fs::path base = fs::temp_directory_path() / "dosefind_simlab_test";
  fs::remove_all(base);
  StudyResult res = run_study(s, 1);
  write_study_outputs(res, (base / "first").string());
  CHECK(fs::exists(base / "first" / "summary.csv"));
  CHECK(fs::exists(base / "first" / "replicates.csv"));
  CHECK(fs::exists(base / "first" / "manifest.json"));

  SimScenario again = scenario_from_file((base / "first" / "manifest.json").string());
  StudyResult res2 = run_study(again, 1);
  write_study_outputs(res2, (base / "second").string());
  CHECK(slurp(base / "first" / "summary.csv") == slurp(base / "second" / "summary.csv"));
  CHECK(slurp(base / "first" / "replicates.csv") ==
        slurp(base / "second" / "replicates.csv"));
  CHECK(slurp(base / "first" / "manifest.json") ==
        slurp(base / "second" / "manifest.json"));
  fs::remove_all(base);
}
