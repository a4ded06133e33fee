#include "dosefind/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "dosefind/errors.hpp"
#include "dosefind/rng.hpp"
#include "dosefind/stats.hpp"
#include "dosefind/threading.hpp"

namespace dosefind {

namespace {

using nlohmann::json;

// Stream tags keep the data draws and the per-replicate bootstrap seeds on
// disjoint substreams of the master seed.
constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kBootStream = 2;

int param_index_from_name(const std::string& name) {
  if (name == "alpha") return 0;
  if (name == "beta") return 1;
  if (name.rfind("gamma", 0) == 0) {
    std::string tail = name.substr(5);
    if (tail.empty()) return 2;
    try {
      return 2 + std::stoi(tail);
    } catch (const std::exception&) {
    }
  }
  throw input_error("unknown perturb parameter '" + name + "'");
}

std::string param_name_from_index(int idx) {
  if (idx == 0) return "alpha";
  if (idx == 1) return "beta";
  return "gamma" + std::to_string(idx - 2);
}

std::string composed_label(const MethodSpec& m) {
  std::string base;
  std::string wname = weight_name(m.weight.kind);
  if (m.estimator == "mcpmod") {
    base = "mcpmod-" + m.mcp_fit;
    if (m.mcp_fit == "rr") base += "-" + wname;
  } else if (m.estimator == "irwls") {
    base = "irwls-" + wname;
    if (m.criterion == IrwlsCriterion::ResponseAtMed) base += "-b";
  } else if (m.estimator == "rr") {
    base = "rr-" + wname;
  } else {
    base = m.estimator;
  }
  if (m.model == "truth")
    base += "-oracle";
  else if (!m.model.empty())
    base += "-" + m.model;
  return base;
}

ModelKind resolve_model(const MethodSpec& m, const SimScenario& sc) {
  if (m.model.empty()) return model_from_name(sc.fit_model);
  if (m.model == "truth") return sc.truth.model;
  return model_from_name(m.model);
}

const json& require(const json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key))
    throw input_error(std::string(where) + " is missing required key '" + key + "'");
  return j.at(key);
}

MethodSpec method_from_json(const json& jm) {
  MethodSpec m;
  m.estimator = require(jm, "estimator", "method").get<std::string>();
  bool wants_weight = m.estimator == "irwls" || m.estimator == "rr";
  if (m.estimator == "mcpmod") {
    m.mcp_fit = jm.value("fit", std::string{"classical"});
    if (m.mcp_fit != "classical" && m.mcp_fit != "rr")
      throw input_error("mcpmod fit must be 'classical' or 'rr'");
    wants_weight = m.mcp_fit == "rr";
  } else if (m.estimator != "classical" && m.estimator != "irwls" &&
             m.estimator != "rr" && m.estimator != "pboot" &&
             m.estimator != "proflik") {
    throw input_error("unknown estimator '" + m.estimator + "'");
  }
  if (wants_weight)
    m.weight.kind = weight_from_name(require(jm, "weight", "method").get<std::string>());
  else if (jm.contains("weight"))
    m.weight.kind = weight_from_name(jm.at("weight").get<std::string>());
  if (m.estimator == "irwls") {
    std::string c = jm.value("criterion", std::string{"med"});
    if (c == "med")
      m.criterion = IrwlsCriterion::MedRelative;
    else if (c == "response")
      m.criterion = IrwlsCriterion::ResponseAtMed;
    else
      throw input_error("irwls criterion must be 'med' or 'response'");
  }
  m.model = jm.value("model", std::string{});
  if (!m.model.empty() && m.model != "truth") model_from_name(m.model);
  m.label = jm.value("label", std::string{});
  if (m.label.empty()) m.label = composed_label(m);
  return m;
}

json method_to_json(const MethodSpec& m) {
  json jm;
  jm["estimator"] = m.estimator;
  jm["label"] = m.label;
  if (m.estimator == "mcpmod") {
    jm["fit"] = m.mcp_fit;
    if (m.mcp_fit == "rr") jm["weight"] = weight_name(m.weight.kind);
  } else if (m.estimator == "irwls" || m.estimator == "rr") {
    jm["weight"] = weight_name(m.weight.kind);
  }
  if (m.estimator == "irwls")
    jm["criterion"] = m.criterion == IrwlsCriterion::ResponseAtMed ? "response" : "med";
  if (!m.model.empty()) jm["model"] = m.model;
  return jm;
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

DoseDesign SimScenario::design_for(int n) const {
  if (n <= 0) throw input_error("sample size must be positive");
  std::vector<int> alloc(doses.size());
  for (std::size_t j = 0; j < doses.size(); ++j)
    alloc[j] = pattern.empty() ? n : pattern[j] * n;
  return DoseDesign(doses, alloc);
}

SimScenario scenario_from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw input_error(std::string("scenario JSON: ") + e.what());
  }
  try {
    if (root.is_object() && root.contains("scenario")) root = root.at("scenario");
    SimScenario s;
    s.name = root.value("name", std::string{"unnamed"});
    s.kind = root.value("kind", std::string{"estimation"});
    if (s.kind != "estimation" && s.kind != "coverage" && s.kind != "fwer")
      throw input_error("kind must be estimation, coverage, or fwer");

    const json& t = require(root, "truth", "scenario");
    s.truth.model = model_from_name(require(t, "model", "truth").get<std::string>());
    s.truth.theta.alpha = t.value("alpha", 0.0);
    s.truth.theta.beta = require(t, "beta", "truth").get<double>();
    s.truth.theta.gamma = t.value("gamma", std::vector<double>{});
    s.truth.sigma = t.value("sigma", 0.1);
    if (!(s.truth.sigma > 0.0)) throw input_error("truth sigma must be positive");
    for (const auto& b : t.value("perturb", json::array())) {
      NoiseBinding nb;
      nb.param = param_index_from_name(require(b, "param", "perturb").get<std::string>());
      nb.eps = require(b, "eps", "perturb").get<int>();
      if (nb.eps != 1 && nb.eps != 2) throw input_error("perturb eps must be 1 or 2");
      s.truth.perturb.push_back(nb);
    }

    s.doses = require(root, "doses", "scenario").get<std::vector<double>>();
    s.pattern = root.value("pattern", std::vector<int>(s.doses.size(), 1));
    if (s.pattern.size() != s.doses.size())
      throw input_error("pattern length must match doses");
    s.sample_sizes = require(root, "sample_sizes", "scenario").get<std::vector<int>>();
    s.replicates = root.value("replicates", 500);
    s.delta = require(root, "delta", "scenario").get<double>();
    s.seed = root.value("seed", std::uint64_t{1});
    s.fit_model = root.value("fit_model", std::string{"emax"});
    model_from_name(s.fit_model);

    for (const auto& jm : root.value("methods", json::array()))
      s.methods.push_back(method_from_json(jm));

    if (root.contains("bootstrap")) {
      const json& b = root.at("bootstrap");
      s.bootstrap.b_samples = b.value("b_samples", s.bootstrap.b_samples);
      s.bootstrap.grid_points = b.value("grid_points", s.bootstrap.grid_points);
      s.bootstrap.level = b.value("level", s.bootstrap.level);
    }
    if (root.contains("profile")) {
      const json& p = root.at("profile");
      s.profile.grid_points = p.value("grid_points", s.profile.grid_points);
      s.profile.level = p.value("level", s.profile.level);
    }
    s.ci_alpha = root.value("ci_alpha", 0.025);
    s.screen_alpha = root.value("screen_alpha", 0.025);
    if (root.contains("poc")) {
      const json& p = root.at("poc");
      s.poc.alpha = p.value("alpha", s.poc.alpha);
      s.poc.bonferroni = p.value("bonferroni", s.poc.bonferroni);
      s.poc.crit_draws = p.value("draws", s.poc.crit_draws);
      std::string sel = p.value("selection", std::string{"maxt"});
      if (sel == "maxt")
        s.poc.selection = SelectionRule::MaxT;
      else if (sel == "aic")
        s.poc.selection = SelectionRule::Aic;
      else
        throw input_error("poc selection must be 'maxt' or 'aic'");
    }
    for (const auto& jc : root.value("candidates", json::array())) {
      Candidate c;
      c.kind = model_from_name(require(jc, "model", "candidate").get<std::string>());
      c.gamma = jc.value("gamma", std::vector<double>{});
      c.label = jc.value("label", model_name(c.kind));
      validate_gamma(c.kind, c.gamma);
      s.candidates.push_back(std::move(c));
    }
    return s;
  } catch (const json::exception& e) {
    throw input_error(std::string("scenario: ") + e.what());
  }
}

SimScenario scenario_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return scenario_from_json_text(buf.str());
}

std::string scenario_to_json_text(const SimScenario& s) {
  json t;
  t["model"] = model_name(s.truth.model);
  t["alpha"] = s.truth.theta.alpha;
  t["beta"] = s.truth.theta.beta;
  t["gamma"] = s.truth.theta.gamma;
  t["sigma"] = s.truth.sigma;
  json perturb = json::array();
  for (const auto& b : s.truth.perturb)
    perturb.push_back({{"param", param_name_from_index(b.param)}, {"eps", b.eps}});
  t["perturb"] = perturb;

  json methods = json::array();
  for (const auto& m : s.methods) methods.push_back(method_to_json(m));

  json cands = json::array();
  for (const auto& c : s.candidates)
    cands.push_back(
        {{"model", model_name(c.kind)}, {"gamma", c.gamma}, {"label", c.label}});

  json j;
  j["name"] = s.name;
  j["kind"] = s.kind;
  j["truth"] = t;
  j["doses"] = s.doses;
  j["pattern"] = s.pattern.empty() ? std::vector<int>(s.doses.size(), 1) : s.pattern;
  j["sample_sizes"] = s.sample_sizes;
  j["replicates"] = s.replicates;
  j["delta"] = s.delta;
  j["seed"] = s.seed;
  j["fit_model"] = s.fit_model;
  j["methods"] = methods;
  j["bootstrap"] = {{"b_samples", s.bootstrap.b_samples},
                    {"grid_points", s.bootstrap.grid_points},
                    {"level", s.bootstrap.level}};
  j["profile"] = {{"grid_points", s.profile.grid_points}, {"level", s.profile.level}};
  j["ci_alpha"] = s.ci_alpha;
  j["screen_alpha"] = s.screen_alpha;
  j["poc"] = {{"alpha", s.poc.alpha},
              {"bonferroni", s.poc.bonferroni},
              {"draws", s.poc.crit_draws},
              {"selection", s.poc.selection == SelectionRule::Aic ? "aic" : "maxt"}};
  j["candidates"] = cands;
  return j.dump(2) + "\n";
}

GeneratedData generate_dataset(const TruthSpec& truth, const DoseDesign& design,
                               std::mt19937_64& engine) {
  Theta theta = truth.theta;
  double eps[2] = {0.0, 0.0};
  if (!truth.perturb.empty()) {
    eps[0] = std::uniform_real_distribution<double>(0.0, 0.01)(engine);
    eps[1] = std::uniform_real_distribution<double>(0.0, 0.06)(engine);
  }
  for (const auto& b : truth.perturb) {
    double v = eps[b.eps - 1];
    if (b.param == 0) {
      theta.alpha += v;
    } else if (b.param == 1) {
      theta.beta += v;
    } else {
      std::size_t k = static_cast<std::size_t>(b.param - 2);
      if (k >= theta.gamma.size())
        throw input_error("perturb parameter beyond the model's shape arity");
      theta.gamma[k] += v;
    }
  }
  validate_gamma(truth.model, theta.gamma);
  std::normal_distribution<double> noise(0.0, truth.sigma);
  std::vector<Observation> obs;
  obs.reserve(static_cast<std::size_t>(design.total()));
  for (std::size_t j = 0; j < design.arms(); ++j) {
    double mu = eval_mean(truth.model, theta, design.doses[j]);
    for (int i = 0; i < design.allocations[j]; ++i)
      obs.push_back({static_cast<int>(j), mu + noise(engine)});
  }
  return {Dataset(design, std::move(obs)), theta};
}

namespace {

ReplicateRecord evaluate_method(const SimScenario& sc, const MethodSpec& m,
                                const std::vector<Candidate>& cands,
                                const std::optional<double>& crit, const Dataset& data,
                                double truth_med, std::size_t ni, int rep) {
  ReplicateRecord rec;
  rec.n = sc.sample_sizes[ni];
  rec.replicate = rep;
  rec.truth_med = truth_med;
  MedRequest req;
  req.delta = sc.delta;
  req.alpha = sc.screen_alpha;
  req.ci_alpha = sc.ci_alpha;
  try {
    if (m.estimator == "mcpmod") {
      PocConfig pc = sc.poc;
      if (crit) pc.critical_value = crit;
      McpEstimator which =
          m.mcp_fit == "rr" ? McpEstimator::Robust : McpEstimator::Classical;
      McpModResult res = mcpmod_med(cands, data, pc, req, which, m.weight);
      rec.estimate = res.med.value;
      rec.lower = res.med.lower;
      rec.upper = res.med.upper;
      rec.se = res.med.se;
      rec.selected = res.selected_label;
      return rec;
    }
    ModelKind work = resolve_model(m, sc);
    GridBounds bounds = default_bounds(work, data.design);
    if (m.estimator == "classical") {
      FitResult fit = fit_ols(work, data, bounds);
      rec.estimate = med_with_screen(fit, data.design, req).value;
      try {
        MedEstimate ci = classical_med_ci(fit, data.design, req);
        rec.lower = ci.lower;
        rec.upper = ci.upper;
        rec.se = ci.se;
      } catch (const std::exception&) {
        // interval unavailable; the point estimate stands on its own
      }
    } else if (m.estimator == "irwls") {
      IrwlsConfig cfg;
      cfg.weight = m.weight;
      cfg.criterion = m.criterion;
      IrwlsResult r = irwls_fit(work, data, bounds, req, cfg);
      rec.estimate = r.med.value;
      if (r.fit.converged && is_continuous(m.weight.kind)) {
        try {
          MedEstimate ci = irwls_med_ci(r.fit, data.design, req, m.weight);
          rec.lower = ci.lower;
          rec.upper = ci.upper;
          rec.se = ci.se;
        } catch (const std::exception&) {
        }
      }
    } else if (m.estimator == "rr") {
      RRResult r = rr_fit(work, data, bounds, req, m.weight);
      rec.estimate = r.med.value;
      if (!r.used_fallback) {
        MedEstimate ci = rr_med_ci(r.fit, r.cov, req, data.design);
        rec.lower = ci.lower;
        rec.upper = ci.upper;
        rec.se = ci.se;
      }
    } else if (m.estimator == "pboot") {
      BootstrapConfig bc = sc.bootstrap;
      bc.seed = derive_seed(sc.seed, kBootStream, ni, static_cast<std::uint64_t>(rep));
      EffectCurveBand band = percentile_bootstrap_band(work, data, bounds, bc);
      MedEstimate est = invert_band_for_med(band, sc.delta);
      rec.estimate = est.value;
      rec.lower = est.lower;
      rec.upper = est.upper;
    } else if (m.estimator == "proflik") {
      EffectCurveBand band = profile_likelihood_band(work, data, bounds, sc.profile);
      MedEstimate est = invert_band_for_med(band, sc.delta);
      rec.estimate = est.value;
      rec.lower = est.lower;
      rec.upper = est.upper;
    } else {
      throw input_error("unknown estimator '" + m.estimator + "'");
    }
  } catch (const input_error&) {
    throw;  // scenario mistakes should surface, not count as fit failures
  } catch (const std::exception&) {
    // estimation failed for this replicate; the record stays empty
  }
  return rec;
}

}  // namespace

StudyResult run_study(const SimScenario& scenario, int threads) {
  SimScenario sc = scenario;
  if (sc.kind != "estimation" && sc.kind != "coverage" && sc.kind != "fwer")
    throw input_error("kind must be estimation, coverage, or fwer");
  if (sc.doses.size() < 2) throw input_error("need at least two doses");
  if (sc.pattern.empty()) sc.pattern.assign(sc.doses.size(), 1);
  if (sc.sample_sizes.empty()) throw input_error("sample_sizes must not be empty");
  if (sc.replicates <= 0) throw input_error("replicates must be positive");
  if (!(sc.delta > 0.0)) throw input_error("delta must be positive");
  if (sc.truth.theta.gamma.size() != gamma_arity(sc.truth.model))
    throw input_error("truth gamma length does not match the model");
  validate_gamma(sc.truth.model, sc.truth.theta.gamma);
  for (auto& m : sc.methods)
    if (m.label.empty()) m.label = composed_label(m);

  bool is_fwer = sc.kind == "fwer";
  bool needs_poc = is_fwer;
  for (const auto& m : sc.methods) needs_poc = needs_poc || m.estimator == "mcpmod";
  if (needs_poc && sc.candidates.empty())
    sc.candidates = default_candidates(sc.design_for(sc.sample_sizes.front()));

  StudyResult out;
  out.scenario = sc;

  std::size_t n_count = sc.sample_sizes.size();
  std::size_t reps = static_cast<std::size_t>(sc.replicates);
  std::size_t total = n_count * reps;

  // One max-T critical value per sample size, simulated up front so the
  // replicate loop never repeats the 50k-draw null simulation.
  std::vector<std::optional<double>> crit_per_n(n_count);
  if (needs_poc && !sc.poc.bonferroni) {
    for (std::size_t ni = 0; ni < n_count; ++ni) {
      DoseDesign design = sc.design_for(sc.sample_sizes[ni]);
      auto contrasts = optimal_contrasts(sc.candidates, design);
      crit_per_n[ni] =
          max_t_critical_value(contrasts, design, sc.poc.alpha, sc.poc.crit_draws);
    }
  }

  if (is_fwer) {
    out.fwer_records.resize(total);
    run_parallel(total, static_cast<unsigned>(threads), [&](std::size_t task) {
      std::size_t ni = task / reps;
      int rep = static_cast<int>(task % reps);
      DoseDesign design = sc.design_for(sc.sample_sizes[ni]);
      auto engine = make_engine(sc.seed, kDataStream, ni, static_cast<std::uint64_t>(rep));
      GeneratedData gen = generate_dataset(sc.truth, design, engine);
      PocConfig pc = sc.poc;
      if (crit_per_n[ni]) pc.critical_value = crit_per_n[ni];
      PocResult poc = poc_test(sc.candidates, gen.data, pc);
      FwerRecord r;
      r.n = sc.sample_sizes[ni];
      r.replicate = rep;
      r.max_t = *std::max_element(poc.t_stats.begin(), poc.t_stats.end());
      r.rejected = poc.any_significant;
      out.fwer_records[task] = r;
    });
    for (std::size_t ni = 0; ni < n_count; ++ni) {
      FwerRow row;
      row.n = sc.sample_sizes[ni];
      row.replicates = sc.replicates;
      for (std::size_t r = 0; r < reps; ++r)
        row.rejections += out.fwer_records[ni * reps + r].rejected ? 1 : 0;
      row.fwer = static_cast<double>(row.rejections) / static_cast<double>(reps);
      out.fwer.push_back(row);
    }
    return out;
  }

  if (sc.methods.empty()) throw input_error("methods must not be empty");
  bool coverage_kind = sc.kind == "coverage";
  // Plateau-style truths can place the target effect out of reach; estimation
  // studies then report raw estimates with blank bias columns, but coverage
  // needs the true value.
  auto base_med = med_from_theta(sc.truth.model, sc.truth.theta, sc.delta);
  if (coverage_kind && (!base_med || *base_med <= 0.0))
    throw input_error("the truth parameters admit no positive MED at this delta");

  out.methods.resize(sc.methods.size());
  for (std::size_t mi = 0; mi < sc.methods.size(); ++mi) {
    out.methods[mi].label = sc.methods[mi].label;
    out.methods[mi].records.resize(total);
  }

  run_parallel(total, static_cast<unsigned>(threads), [&](std::size_t task) {
    std::size_t ni = task / reps;
    int rep = static_cast<int>(task % reps);
    DoseDesign design = sc.design_for(sc.sample_sizes[ni]);
    auto engine = make_engine(sc.seed, kDataStream, ni, static_cast<std::uint64_t>(rep));
    GeneratedData gen = generate_dataset(sc.truth, design, engine);
    auto truth_med = med_from_theta(sc.truth.model, gen.truth, sc.delta);
    double truth_value = (truth_med && *truth_med > 0.0)
                             ? *truth_med
                             : std::numeric_limits<double>::quiet_NaN();
    if (coverage_kind && !std::isfinite(truth_value))
      throw input_error("a perturbed truth lost its MED; adjust the scenario");
    for (std::size_t mi = 0; mi < sc.methods.size(); ++mi) {
      ReplicateRecord rec = evaluate_method(sc, sc.methods[mi], sc.candidates,
                                            crit_per_n[ni], gen.data, truth_value,
                                            ni, rep);
      if (coverage_kind) {
        bool has_l = rec.lower.has_value();
        bool has_u = rec.upper.has_value();
        rec.covered = (has_l || has_u) && (!has_l || truth_value >= *rec.lower) &&
                      (!has_u || truth_value <= *rec.upper);
      }
      out.methods[mi].records[task] = std::move(rec);
    }
  });

  for (std::size_t mi = 0; mi < sc.methods.size(); ++mi) {
    for (std::size_t ni = 0; ni < n_count; ++ni) {
      const auto* recs = out.methods[mi].records.data() + ni * reps;
      SummaryRow row;
      row.method = out.methods[mi].label;
      row.n = sc.sample_sizes[ni];
      row.replicates = sc.replicates;
      std::vector<double> ests, rel, ses;
      for (std::size_t r = 0; r < reps; ++r) {
        const ReplicateRecord& rec = recs[r];
        if (rec.estimate) {
          ests.push_back(*rec.estimate);
          if (std::isfinite(rec.truth_med))
            rel.push_back(100.0 * (*rec.estimate - rec.truth_med) / rec.truth_med);
        }
        if (rec.se) ses.push_back(*rec.se);
      }
      row.estimable = static_cast<int>(ests.size());
      double nan = std::numeric_limits<double>::quiet_NaN();
      row.mean_estimate = ests.empty() ? nan : mean_of(ests);
      row.mean_r = rel.empty() ? nan : mean_of(rel);
      row.median_r = rel.empty() ? nan : median_of(rel);
      row.iqr_r = rel.empty() ? nan : iqr_of(rel);
      row.sd_estimate = sample_sd(ests);
      row.mean_se = ses.empty() ? nan : mean_of(ses);
      out.summary.push_back(std::move(row));

      if (coverage_kind) {
        CoverageRow cov;
        cov.method = out.methods[mi].label;
        cov.n = sc.sample_sizes[ni];
        cov.replicates = sc.replicates;
        std::vector<double> widths;
        for (std::size_t r = 0; r < reps; ++r) {
          const ReplicateRecord& rec = recs[r];
          if (rec.lower || rec.upper) ++cov.with_interval;
          if (rec.covered && *rec.covered) ++cov.covered;
          if (rec.lower && rec.upper) widths.push_back(*rec.upper - *rec.lower);
        }
        cov.coverage = static_cast<double>(cov.covered) / static_cast<double>(reps);
        cov.mean_width =
            widths.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_of(widths);
        out.coverage.push_back(std::move(cov));
      }
    }
  }
  return out;
}

namespace {

std::string fmt_num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt_num(*v) : std::string{};
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw input_error("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

void write_study_outputs(const StudyResult& result, const std::string& directory) {
  namespace fs = std::filesystem;
  fs::path dir(directory);
  fs::create_directories(dir);
  bool is_fwer = result.scenario.kind == "fwer";
  bool is_coverage = result.scenario.kind == "coverage";

  {
    auto out = open_output(dir / "summary.csv");
    if (is_fwer) {
      out << "n,replicates,rejections,fwer,mc_se\n";
      for (const auto& row : result.fwer) {
        double mc_se = std::sqrt(row.fwer * (1.0 - row.fwer) /
                                 static_cast<double>(row.replicates));
        out << row.n << ',' << row.replicates << ',' << row.rejections << ','
            << fmt_num(row.fwer) << ',' << fmt_num(mc_se) << '\n';
      }
    } else {
      out << "method,n,replicates,estimable,mean_estimate,mean_bias_pct,"
             "median_bias_pct,iqr_bias_pct,sd_estimate,mean_se\n";
      for (const auto& row : result.summary) {
        out << row.method << ',' << row.n << ',' << row.replicates << ','
            << row.estimable << ',' << fmt_num(row.mean_estimate) << ','
            << fmt_num(row.mean_r) << ',' << fmt_num(row.median_r) << ','
            << fmt_num(row.iqr_r) << ',' << fmt_num(row.sd_estimate) << ','
            << fmt_num(row.mean_se) << '\n';
      }
    }
  }

  {
    auto out = open_output(dir / "replicates.csv");
    if (is_fwer) {
      out << "n,replicate,max_t,rejected\n";
      for (const auto& r : result.fwer_records)
        out << r.n << ',' << r.replicate << ',' << fmt_num(r.max_t) << ','
            << (r.rejected ? 1 : 0) << '\n';
    } else {
      out << "method,n,replicate,truth_med,estimate,lower,upper,se,selected,covered\n";
      for (const auto& series : result.methods) {
        for (const auto& r : series.records) {
          out << series.label << ',' << r.n << ',' << r.replicate << ','
              << fmt_num(r.truth_med) << ',' << fmt_opt(r.estimate) << ','
              << fmt_opt(r.lower) << ',' << fmt_opt(r.upper) << ',' << fmt_opt(r.se)
              << ',' << r.selected << ',';
          if (r.covered) out << (*r.covered ? 1 : 0);
          out << '\n';
        }
      }
    }
  }

  if (is_coverage) {
    auto out = open_output(dir / "coverage.csv");
    out << "method,n,replicates,with_interval,covered,coverage,mean_width\n";
    for (const auto& row : result.coverage)
      out << row.method << ',' << row.n << ',' << row.replicates << ','
          << row.with_interval << ',' << row.covered << ',' << fmt_num(row.coverage)
          << ',' << fmt_num(row.mean_width) << '\n';
  }

  {
    json manifest;
    manifest["scenario"] = json::parse(scenario_to_json_text(result.scenario));
    auto out = open_output(dir / "manifest.json");
    out << manifest.dump(2) << '\n';
  }
}

}  // namespace dosefind
