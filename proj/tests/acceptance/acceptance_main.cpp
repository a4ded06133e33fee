// Acceptance checklist for the toolkit. Each criterion exercises one
// externally visible contract: closed-form targets, derivative consistency,
// estimator reductions, calibration of the simulation pipeline, error-rate
// control, and byte-level determinism of scenario outputs. One PASS/FAIL
// line per criterion; the exit code is the number of failures.
//
// Usage: acceptance [--only N]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dosefind/dataset.hpp"
#include "dosefind/fitting.hpp"
#include "dosefind/intervals.hpp"
#include "dosefind/irwls.hpp"
#include "dosefind/med.hpp"
#include "dosefind/models.hpp"
#include "dosefind/robust.hpp"
#include "dosefind/simlab.hpp"
#include "dosefind/weights.hpp"

namespace fs = std::filesystem;
using namespace dosefind;

namespace {

DoseDesign standard_design(int per_group) {
  return DoseDesign({0.0, 0.05, 0.2, 0.6, 1.0}, std::vector<int>(5, per_group));
}

Dataset noisy_dataset(const DoseDesign& design, ModelKind kind, const Theta& theta,
                      double sigma, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<Observation> obs;
  obs.reserve(design.total());
  for (std::size_t j = 0; j < design.arms(); ++j) {
    double mu = eval_mean(kind, theta, design.doses[j]);
    for (int i = 0; i < design.allocations[j]; ++i)
      obs.push_back({static_cast<int>(j), mu + noise(eng)});
  }
  return Dataset(design, obs);
}

template <typename F>
double central_diff(F&& f, double x) {
  double h = 1e-6 * std::max(1.0, std::fabs(x));
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

Theta random_theta(ModelKind kind, std::mt19937_64& eng) {
  auto u = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(eng);
  };
  Theta t;
  t.alpha = u(-0.5, 0.5);
  t.beta = u(0.3, 1.5);
  switch (kind) {
    case ModelKind::Linear: break;
    case ModelKind::LinLog: t.gamma = {u(0.05, 0.55)}; break;
    case ModelKind::Emax: t.gamma = {u(0.05, 0.85)}; break;
    case ModelKind::Exponential: t.gamma = {u(0.3, 1.5)}; break;
    case ModelKind::Quadratic: t.gamma = {-u(0.1, 0.9)}; break;
    case ModelKind::SigEmax: t.gamma = {u(0.1, 0.8), u(1.0, 5.0)}; break;
    case ModelKind::Power: t.gamma = {u(0.3, 1.8)}; break;
    case ModelKind::TruncLogistic: t.gamma = {u(3.0, 15.0), u(0.2, 0.9)}; break;
  }
  return t;
}

const std::vector<ModelKind> kAllModels = {
    ModelKind::Linear,    ModelKind::LinLog, ModelKind::Emax,
    ModelKind::Exponential, ModelKind::Quadratic, ModelKind::SigEmax,
    ModelKind::Power,     ModelKind::TruncLogistic};

// Scenario builders shared by the simulation criteria. The bundled JSON
// scenarios mirror these settings at full scale.

MethodSpec method(const std::string& estimator, WeightKind weight = WeightKind::Unit,
                  const std::string& mcp_fit = "classical") {
  MethodSpec m;
  m.estimator = estimator;
  m.weight.kind = weight;
  m.mcp_fit = mcp_fit;
  return m;
}

SimScenario base_scenario(const std::string& kind, ModelKind truth_model,
                          const Theta& truth_theta, double delta, int n) {
  SimScenario s;
  s.kind = kind;
  s.truth.model = truth_model;
  s.truth.theta = truth_theta;
  s.truth.sigma = 0.65;
  s.doses = {0.0, 0.05, 0.2, 0.6, 1.0};
  s.sample_sizes = {n};
  s.replicates = 500;
  s.delta = delta;
  s.seed = 1;
  return s;
}

const SummaryRow& summary_for(const StudyResult& res, const std::string& label, int n) {
  for (const auto& row : res.summary)
    if (row.method == label && row.n == n) return row;
  throw std::runtime_error("missing summary row " + label);
}

const CoverageRow& coverage_for(const StudyResult& res, const std::string& label, int n) {
  for (const auto& row : res.coverage)
    if (row.method == label && row.n == n) return row;
  throw std::runtime_error("missing coverage row " + label);
}

bool within(double x, double center, double half) {
  return std::isfinite(x) && x >= center - half && x <= center + half;
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path scenario_dir() {
  const char* env = std::getenv("DOSEFIND_SCENARIOS");
  return env ? fs::path(env) : fs::path("scenarios");
}

// 1. Closed-form MED targets.
bool criterion1(std::string& detail) {
  auto m1 = med_from_theta(ModelKind::Emax, Theta{0.2, 0.7, {0.2}}, 0.4);
  auto m2 = med_from_theta(ModelKind::Emax, Theta{0.32, 0.74, {0.14}}, 0.2);
  bool ok = m1 && std::fabs(*m1 - 0.266667) <= 1e-6 &&
            m2 && std::fabs(*m2 - 0.051852) <= 1e-6;
  std::ostringstream out;
  out << "med(emax 0.2/0.7/0.2, delta 0.4) = " << (m1 ? fmt(*m1) : "none")
      << ", med(emax 0.32/0.74/0.14, delta 0.2) = " << (m2 ? fmt(*m2) : "none");
  detail = out.str();
  return ok;
}

// 2. Analytic gradients against central finite differences.
bool criterion2(std::string& detail) {
  double worst_mean = 0.0, worst_med = 0.0;
  int total = 0;
  for (std::size_t fam = 0; fam < kAllModels.size(); ++fam) {
    ModelKind kind = kAllModels[fam];
    std::mt19937_64 eng(0xC2000 + fam);
    std::uniform_real_distribution<double> ud(0.01, 1.0);
    int done = 0, attempts = 0;
    while (done < 100 && ++attempts < 10000) {
      Theta theta = random_theta(kind, eng);
      double d = ud(eng);

      auto mg = mean_gradient(kind, theta, d);
      auto mean_at = [&](const Theta& t) { return eval_mean(kind, t, d); };
      for (std::size_t c = 0; c < mg.size(); ++c) {
        auto shift = [&](double x) {
          Theta t = theta;
          if (c == 0) t.alpha = x;
          else if (c == 1) t.beta = x;
          else t.gamma[c - 2] = x;
          return mean_at(t);
        };
        double base = c == 0 ? theta.alpha : c == 1 ? theta.beta : theta.gamma[c - 2];
        double fd = central_diff(shift, base);
        double err = std::fabs(mg[c] - fd) / std::max(1.0, std::fabs(mg[c]));
        worst_mean = std::max(worst_mean, err);
        if (err > 1e-5) {
          detail = std::string("mean gradient mismatch for ") + model_name(kind);
          return false;
        }
      }

      double max_eff = 0.0;
      for (int g = 0; g <= 200; ++g) {
        double dd = g / 200.0;
        max_eff = std::max(max_eff, eval_mean(kind, theta, dd) - eval_mean(kind, theta, 0.0));
      }
      if (max_eff < 1e-3) continue;
      double delta = 0.5 * max_eff;
      auto med0 = med_from_theta(kind, theta, delta);
      if (!med0 || *med0 <= 0.0) continue;

      auto med_at = [&](const Theta& t) { return med_from_theta(kind, t, delta); };
      std::vector<double> grad;
      try {
        grad = med_gradient(kind, theta, delta);
      } catch (const std::domain_error&) {
        continue;
      }
      if (grad[0] != 0.0) {
        detail = "med gradient should not depend on the intercept";
        return false;
      }
      bool usable = true;
      for (std::size_t c = 1; c < grad.size() && usable; ++c) {
        auto shift = [&](double x) {
          Theta t = theta;
          if (c == 1) t.beta = x;
          else t.gamma[c - 2] = x;
          auto m = med_at(t);
          return m ? *m : std::numeric_limits<double>::quiet_NaN();
        };
        double base = c == 1 ? theta.beta : theta.gamma[c - 2];
        double fd = central_diff(shift, base);
        if (!std::isfinite(fd)) {
          usable = false;
          break;
        }
        double err = std::fabs(grad[c] - fd) / std::max(1.0, std::fabs(grad[c]));
        worst_med = std::max(worst_med, err);
        if (err > 1e-5) {
          detail = std::string("med gradient mismatch for ") + model_name(kind);
          return false;
        }
      }
      if (!usable) continue;
      ++done;
      ++total;
    }
    if (done < 100) {
      detail = std::string("could not find 100 usable points for ") + model_name(kind);
      return false;
    }
  }
  std::ostringstream out;
  out << total << " points; worst rel err mean " << fmt(worst_mean) << ", med "
      << fmt(worst_med);
  detail = out.str();
  return true;
}

// 3. Unit-weight reductions of both robust estimators to least squares.
bool criterion3(std::string& detail) {
  DoseDesign design = standard_design(25);
  GridBounds bounds = default_bounds(ModelKind::Emax, design);
  bounds.grid_points = 2000;
  MedRequest req;
  IrwlsConfig icfg;
  icfg.weight.kind = WeightKind::Unit;
  WeightSpec unit;
  unit.kind = WeightKind::Unit;

  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Dataset data = noisy_dataset(design, ModelKind::Emax, Theta{0.2, 0.7, {0.2}}, 0.1, seed);
    FitResult ols = fit_ols(ModelKind::Emax, data, bounds);
    IrwlsResult ir = irwls_fit(ModelKind::Emax, data, bounds, req, icfg);
    RRResult rr = rr_fit(ModelKind::Emax, data, bounds, req, unit);
    std::vector<std::pair<double, double>> prs = {
        {ir.fit.theta.alpha, ols.theta.alpha},   {ir.fit.theta.beta, ols.theta.beta},
        {ir.fit.theta.gamma[0], ols.theta.gamma[0]}, {rr.fit.theta.alpha, ols.theta.alpha},
        {rr.fit.theta.beta, ols.theta.beta},     {rr.fit.theta.gamma[0], ols.theta.gamma[0]}};
    for (auto [got, want] : prs) worst = std::max(worst, std::fabs(got - want));
    if (!ir.fit.converged || rr.used_fallback) {
      detail = "unit-weight fit refused to converge on seed " + std::to_string(seed);
      return false;
    }
  }
  detail = "50 datasets; worst |component difference| " + fmt(worst);
  return worst <= 1e-6;
}

// 4. Sandwich standard errors track the empirical spread of the estimator.
bool criterion4(std::string& detail) {
  SimScenario s = base_scenario("estimation", ModelKind::Emax, Theta{0.32, 0.74, {0.14}},
                                0.3, 100);
  s.name = "se-calibration";
  s.methods = {method("rr", WeightKind::W5)};
  StudyResult res = run_study(s, 1);
  const SummaryRow& row = summary_for(res, "rr-w5", 100);
  double ratio = row.mean_se / row.sd_estimate;
  detail = "mean se " + fmt(row.mean_se) + ", empirical sd " + fmt(row.sd_estimate) +
           ", ratio " + fmt(ratio);
  return std::isfinite(ratio) && std::fabs(ratio - 1.0) <= 0.15;
}

// 5. Coverage calibration under the saturating truth at the standard design.
bool criterion5(std::string& detail) {
  Theta truth{0.32, 0.74, {0.14}};
  SimScenario a = base_scenario("coverage", ModelKind::Emax, truth, 0.3, 25);
  a.name = "coverage-a";
  a.methods = {method("classical"), method("irwls", WeightKind::W6), method("proflik")};
  StudyResult ra = run_study(a, 1);

  SimScenario b = base_scenario("coverage", ModelKind::Emax, truth, 0.3, 50);
  b.name = "coverage-b";
  b.methods = {method("pboot")};
  b.bootstrap.b_samples = 500;
  StudyResult rb = run_study(b, 1);

  double classical = coverage_for(ra, "classical", 25).coverage;
  double irwls6 = coverage_for(ra, "irwls-w6", 25).coverage;
  double proflik = coverage_for(ra, "proflik", 25).coverage;
  double pboot = coverage_for(rb, "pboot", 50).coverage;

  bool ok = within(classical, 0.83, 0.04) && classical < 0.90 &&
            within(pboot, 0.95, 0.03) && within(proflik, 0.94, 0.04) &&
            within(irwls6, 0.67, 0.05);
  detail = "classical n25 " + fmt(classical) + ", irwls-w6 n25 " + fmt(irwls6) +
           ", proflik n25 " + fmt(proflik) + ", pboot n50 " + fmt(pboot);
  return ok;
}

// 6. Coverage under the steep truth at the improved design.
bool criterion6(std::string& detail) {
  Theta truth{0.32, 0.66, {0.3, 4.0}};
  SimScenario a = base_scenario("coverage", ModelKind::SigEmax, truth, 0.3, 50);
  a.name = "improved-a";
  a.doses = {0.0, 0.25, 0.5, 0.75, 1.0};
  a.fit_model = "sigemax";
  a.methods = {method("classical"), method("rr", WeightKind::W5)};
  StudyResult ra = run_study(a, 1);

  SimScenario b = base_scenario("coverage", ModelKind::SigEmax, truth, 0.3, 25);
  b.name = "improved-b";
  b.doses = {0.0, 0.25, 0.5, 0.75, 1.0};
  b.fit_model = "sigemax";
  b.methods = {method("proflik")};
  StudyResult rb = run_study(b, 1);

  double classical = coverage_for(ra, "classical", 50).coverage;
  double rr5 = coverage_for(ra, "rr-w5", 50).coverage;
  double proflik = coverage_for(rb, "proflik", 25).coverage;

  bool ok = within(classical, 0.96, 0.03) && within(rr5, 0.95, 0.03) && proflik < 0.95;
  detail = "classical n50 " + fmt(classical) + ", rr-w5 n50 " + fmt(rr5) +
           ", proflik n25 " + fmt(proflik) + " (< 0.95 required)";
  return ok;
}

// 7. Weighting reduces bias under a misspecified fitted model.
bool criterion7(std::string& detail) {
  Theta truth{0.2, 0.615, {0.4, 4.0}};

  SimScenario lin = base_scenario("estimation", ModelKind::SigEmax, truth, 0.4, 50);
  lin.name = "misfit-linear";
  lin.fit_model = "linear";
  lin.methods = {method("classical"), method("rr", WeightKind::W6)};
  StudyResult rl = run_study(lin, 1);
  double lin_cl = summary_for(rl, "classical", 50).mean_r;
  double lin_rr = summary_for(rl, "rr-w6", 50).mean_r;

  SimScenario em = base_scenario("estimation", ModelKind::SigEmax, truth, 0.4, 25);
  em.name = "misfit-emax";
  em.fit_model = "emax";
  em.sample_sizes = {25, 50};
  em.methods = {method("classical"), method("rr", WeightKind::W5)};
  StudyResult re = run_study(em, 1);
  double em_cl25 = summary_for(re, "classical", 25).mean_r;
  double em_rr25 = summary_for(re, "rr-w5", 25).mean_r;
  double em_cl50 = summary_for(re, "classical", 50).mean_r;
  double em_rr50 = summary_for(re, "rr-w5", 50).mean_r;

  bool ok = std::fabs(lin_rr) < std::fabs(lin_cl) &&
            std::fabs(em_rr25) < std::fabs(em_cl25) &&
            std::fabs(em_rr50) < std::fabs(em_cl50);
  detail = "mean rel bias %: linear fit " + fmt(lin_cl) + " vs " + fmt(lin_rr) +
           "; emax fit n25 " + fmt(em_cl25) + " vs " + fmt(em_rr25) + ", n50 " +
           fmt(em_cl50) + " vs " + fmt(em_rr50);
  return ok;
}

// 8. Robust refitting inside the model-selection pipeline.
bool criterion8(std::string& detail) {
  SimScenario s = base_scenario("estimation", ModelKind::SigEmax, Theta{0.2, 0.6, {0.4, 4.0}},
                                0.4, 50);
  s.name = "mcpmod-perturbed";
  s.truth.perturb = {{1, 1}, {2, 1}};
  s.methods = {method("mcpmod", WeightKind::W6, "classical"),
               method("mcpmod", WeightKind::W6, "rr")};
  StudyResult res = run_study(s, 1);

  const SummaryRow& cl = summary_for(res, "mcpmod-classical", 50);
  const SummaryRow& rr = summary_for(res, "mcpmod-rr-w6", 50);

  const auto& rc = res.methods[0].records;
  const auto& rm = res.methods[1].records;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < rc.size(); ++i)
    if (rc[i].selected == rm[i].selected) ++agree;

  bool ok = std::fabs(rr.median_r) < std::fabs(cl.median_r) && agree == rc.size();
  detail = "median rel bias % " + fmt(cl.median_r) + " vs " + fmt(rr.median_r) +
           "; identical selections " + std::to_string(agree) + "/" +
           std::to_string(rc.size());
  return ok;
}

// 9. Family-wise error rate of the proof-of-concept gate under a flat curve.
bool criterion9(std::string& detail) {
  SimScenario s = base_scenario("fwer", ModelKind::Linear, Theta{0.2, 0.0, {}}, 0.4, 25);
  s.name = "fwer-flat";
  s.replicates = 1000;
  StudyResult res = run_study(s, 1);
  int rejections = res.fwer.at(0).rejections;
  detail = std::to_string(rejections) + "/1000 rejections (limit 34)";
  return rejections <= 34;
}

// 10. Byte-identical outputs across thread counts and manifest re-runs.
bool criterion10(std::string& detail) {
  fs::path scen = scenario_dir() / "quick_emax.json";
  SimScenario s = scenario_from_file(scen.string());
  fs::path base = fs::temp_directory_path() / "dosefind_acceptance";
  fs::remove_all(base);

  write_study_outputs(run_study(s, 1), (base / "t1").string());
  write_study_outputs(run_study(s, 8), (base / "t8").string());
  SimScenario again = scenario_from_file((base / "t1" / "manifest.json").string());
  write_study_outputs(run_study(again, 1), (base / "rerun").string());

  std::vector<std::string> files = {"summary.csv", "replicates.csv", "manifest.json"};
  if (s.kind == "coverage") files.push_back("coverage.csv");
  for (const auto& f : files) {
    std::string ref = slurp(base / "t1" / f);
    if (slurp(base / "t8" / f) != ref) {
      detail = f + " differs between 1 and 8 threads";
      return false;
    }
    if (slurp(base / "rerun" / f) != ref) {
      detail = f + " differs after re-running from the manifest";
      return false;
    }
  }
  fs::remove_all(base);
  detail = std::to_string(files.size()) + " files identical across 1/8 threads and a manifest re-run";
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: acceptance [--only N]\n";
      return 64;
    }
  }

  struct Entry {
    int id;
    const char* title;
    std::function<bool(std::string&)> run;
  };
  std::vector<Entry> entries = {
      {1, "closed-form MED targets", criterion1},
      {2, "gradients match finite differences", criterion2},
      {3, "unit weights reduce to least squares", criterion3},
      {4, "sandwich se tracks the empirical sd", criterion4},
      {5, "coverage at the standard design", criterion5},
      {6, "coverage at the improved design", criterion6},
      {7, "weighting cuts misspecification bias", criterion7},
      {8, "robust refits inside model selection", criterion8},
      {9, "family-wise error rate under a flat curve", criterion9},
      {10, "deterministic scenario outputs", criterion10},
  };

  int failures = 0;
  for (const auto& e : entries) {
    if (only != 0 && e.id != only) continue;
    std::string detail;
    bool ok = false;
    auto t0 = std::chrono::steady_clock::now();
    try {
      ok = e.run(detail);
    } catch (const std::exception& ex) {
      detail = std::string("exception: ") + ex.what();
    }
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d  %s  %7.1fs  %s: %s\n", e.id, ok ? "PASS" : "FAIL", secs,
                e.title, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  return failures;
}
