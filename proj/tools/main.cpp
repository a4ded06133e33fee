// Command line front end: model fits, MED estimates, confidence intervals,
// MCP-Mod, scenario simulations, and illustration curves.
//
// Exit codes: 0 success, 1 bad input (arguments, files, scenarios),
// 2 estimation failure (rank deficiency, no solution, failed resampling).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "dosefind/dataset.hpp"
#include "dosefind/errors.hpp"
#include "dosefind/fitting.hpp"
#include "dosefind/intervals.hpp"
#include "dosefind/irwls.hpp"
#include "dosefind/mcpmod.hpp"
#include "dosefind/med.hpp"
#include "dosefind/models.hpp"
#include "dosefind/rng.hpp"
#include "dosefind/robust.hpp"
#include "dosefind/simlab.hpp"
#include "dosefind/weights.hpp"

namespace {

using dosefind::input_error;
using json = nlohmann::json;

json number_or_null(const std::optional<double>& v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

json fit_json(const dosefind::FitResult& fit) {
  json j;
  j["model"] = dosefind::model_name(fit.kind);
  j["alpha"] = fit.theta.alpha;
  j["beta"] = fit.theta.beta;
  j["gamma"] = fit.theta.gamma;
  j["sigma"] = fit.sigma;
  j["sse"] = fit.sse;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  return j;
}

json med_json(const dosefind::MedEstimate& est) {
  json j;
  j["method"] = est.method;
  j["med"] = number_or_null(est.value);
  j["lower"] = number_or_null(est.lower);
  j["upper"] = number_or_null(est.upper);
  j["se"] = number_or_null(est.se);
  return j;
}

void emit(const json& j) { std::cout << j.dump(2) << "\n"; }

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw input_error("cannot write '" + path.string() + "'");
  return out;
}

void write_band_csv(const dosefind::EffectCurveBand& band,
                    const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "dose,lower,fitted,upper\n";
  char buf[160];
  for (std::size_t g = 0; g < band.grid.size(); ++g) {
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g\n", band.grid[g],
                  band.lower[g], band.fitted[g], band.upper[g]);
    out << buf;
  }
}

std::vector<dosefind::Candidate> candidates_from_file(const std::string& path,
                                                      const dosefind::DoseDesign& design) {
  if (path.empty()) return dosefind::default_candidates(design);
  std::ifstream in(path);
  if (!in) throw input_error("cannot open candidate file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw input_error(std::string("candidate file: ") + e.what());
  }
  if (!doc.is_array() || doc.empty())
    throw input_error("candidate file must hold a non-empty JSON array");
  std::vector<dosefind::Candidate> out;
  for (const auto& jc : doc) {
    dosefind::Candidate c;
    if (!jc.contains("model")) throw input_error("candidate entry is missing 'model'");
    c.kind = dosefind::model_from_name(jc.at("model").get<std::string>());
    c.gamma = jc.value("gamma", std::vector<double>{});
    c.label = jc.value("label", std::string(dosefind::model_name(c.kind)));
    dosefind::validate_gamma(c.kind, c.gamma);
    out.push_back(std::move(c));
  }
  return out;
}

struct CommonArgs {
  std::string data_path;
  std::string model = "emax";
  double delta = 0.4;
  double alpha = 0.025;
  double ci_alpha = 0.025;
  int grid_points = 30;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_model = true,
                bool data_required = true) {
  auto* data = cmd->add_option("--data", a.data_path,
                               "CSV file with a dose,response header");
  if (data_required) data->required();
  if (with_model) cmd->add_option("--model", a.model, "dose-response model name");
  cmd->add_option("--delta", a.delta, "clinically relevant effect over placebo");
  cmd->add_option("--alpha", a.alpha, "one-sided level of the screen bound");
  cmd->add_option("--ci-alpha", a.ci_alpha, "per-tail level of the interval");
  cmd->add_option("--grid-points", a.grid_points, "grid resolution per shape dimension");
}

struct W7Args {
  int k1 = 5;
  int k2 = 1;
};

void add_w7(CLI::App* cmd, W7Args& a) {
  cmd->add_option("--w7-k1", a.k1, "w7 weight at the dose closest to the MED");
  cmd->add_option("--w7-k2", a.k2, "w7 weight at every other dose");
}

dosefind::WeightSpec weight_spec(const std::string& name, const W7Args& w7) {
  dosefind::WeightSpec spec;
  spec.kind = dosefind::weight_from_name(name);
  spec.k1 = w7.k1;
  spec.k2 = w7.k2;
  return spec;
}

dosefind::Dataset load_data(const CommonArgs& a) {
  return dosefind::dataset_from_csv_file(a.data_path);
}

dosefind::GridBounds bounds_for(const CommonArgs& a, dosefind::ModelKind kind,
                                const dosefind::DoseDesign& design) {
  auto bounds = dosefind::default_bounds(kind, design);
  bounds.grid_points = a.grid_points;
  return bounds;
}

dosefind::MedRequest request_for(const CommonArgs& a) {
  dosefind::MedRequest req;
  req.delta = a.delta;
  req.alpha = a.alpha;
  req.ci_alpha = a.ci_alpha;
  return req;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dose-finding estimation toolkit"};
  app.require_subcommand(1);

  CommonArgs fit_args;
  std::string fit_weight = "unit";
  W7Args fit_w7;
  double fit_med = 0.0;
  auto* fit_cmd = app.add_subcommand("fit", "grid least-squares fit of a model");
  add_common(fit_cmd, fit_args);
  fit_cmd->add_option("--weight", fit_weight, "weight tag (unit, w1..w7)");
  add_w7(fit_cmd, fit_w7);
  auto* fit_med_opt =
      fit_cmd->add_option("--med", fit_med, "target dose the weights center on");

  CommonArgs med_args;
  int med_screen_grid = 1001;
  auto* med_cmd =
      app.add_subcommand("med", "screened MED estimate with its delta-method interval");
  add_common(med_cmd, med_args);
  med_cmd->add_option("--screen-grid", med_screen_grid,
                      "dose grid points of the screened search");

  CommonArgs irwls_args;
  std::string irwls_weight = "w5";
  W7Args irwls_w7;
  std::string irwls_criterion = "med";
  double irwls_tol = 0.001;
  int irwls_max_iter = 100;
  auto* irwls_cmd =
      app.add_subcommand("irwls", "iteratively reweighted MED estimate");
  add_common(irwls_cmd, irwls_args);
  irwls_cmd->add_option("--weight", irwls_weight, "weight tag (w1..w7)");
  add_w7(irwls_cmd, irwls_w7);
  irwls_cmd->add_option("--criterion", irwls_criterion,
                        "stopping rule: med or response");
  irwls_cmd->add_option("--tol", irwls_tol, "squared relative change tolerance");
  irwls_cmd->add_option("--max-iter", irwls_max_iter, "iteration cap");

  CommonArgs rr_args;
  std::string rr_weight = "w5";
  W7Args rr_w7;
  auto* rr_cmd = app.add_subcommand(
      "rr", "weighted estimating-equation MED estimate with sandwich interval");
  add_common(rr_cmd, rr_args);
  rr_cmd->add_option("--weight", rr_weight, "weight tag (w1..w6)");
  add_w7(rr_cmd, rr_w7);

  CommonArgs ci_args;
  std::string ci_method = "classical";
  std::string ci_weight = "w5";
  std::string ci_band_path;
  int ci_b_samples = 1000;
  int ci_band_grid = 201;
  std::uint64_t ci_seed = 1;
  W7Args ci_w7;
  auto* ci_cmd = app.add_subcommand("ci", "confidence interval for the MED");
  add_common(ci_cmd, ci_args);
  ci_cmd->add_option("--method", ci_method,
                     "classical, irwls, rr, pboot, or proflik");
  ci_cmd->add_option("--weight", ci_weight, "weight tag for irwls/rr");
  add_w7(ci_cmd, ci_w7);
  ci_cmd->add_option("--band", ci_band_path, "write the effect band CSV here");
  ci_cmd->add_option("--b-samples", ci_b_samples, "bootstrap resamples");
  ci_cmd->add_option("--band-grid", ci_band_grid, "dose grid points of the band");
  ci_cmd->add_option("--seed", ci_seed, "bootstrap seed");

  CommonArgs mcp_args;
  std::string mcp_estimator = "classical";
  std::string mcp_weight = "w6";
  std::string mcp_candidates;
  std::string mcp_selection = "maxt";
  bool mcp_bonferroni = false;
  int mcp_draws = 50000;
  auto* mcp_cmd =
      app.add_subcommand("mcpmod", "model-selection pipeline with a max-T test");
  add_common(mcp_cmd, mcp_args, /*with_model=*/false);
  W7Args mcp_w7;
  mcp_cmd->add_option("--estimator", mcp_estimator, "classical or rr");
  mcp_cmd->add_option("--weight", mcp_weight, "weight tag for the rr estimator");
  add_w7(mcp_cmd, mcp_w7);
  mcp_cmd->add_option("--candidates", mcp_candidates,
                      "JSON file with candidate models");
  mcp_cmd->add_option("--selection", mcp_selection, "maxt or aic");
  mcp_cmd->add_flag("--bonferroni", mcp_bonferroni,
                    "Bonferroni critical value instead of simulated max-T");
  mcp_cmd->add_option("--draws", mcp_draws, "null simulation draws");

  std::string sim_scenario;
  std::string sim_out;
  int sim_threads = 1;
  auto* sim_cmd = app.add_subcommand("simulate", "run a scenario study");
  sim_cmd->add_option("--scenario", sim_scenario,
                      "scenario JSON (or a manifest.json from a previous run)")
      ->required();
  sim_cmd->add_option("--out", sim_out, "output directory")
      ->envname("DOSEFIND_OUT")
      ->required();
  sim_cmd->add_option("--threads", sim_threads, "worker threads");

  CommonArgs ill_args;
  ill_args.delta = 0.2;  // the bundled illustration targets a 0.2 effect
  std::string ill_out = "illustration";
  std::string ill_weight = "w5";
  W7Args ill_w7;
  int ill_b_samples = 1000;
  int ill_band_grid = 201;
  int ill_n = 75;
  std::uint64_t ill_seed = 1;
  auto* ill_cmd = app.add_subcommand(
      "illustrate",
      "effect bands and weight curves; generates its demo dataset unless --data is given");
  add_common(ill_cmd, ill_args, /*with_model=*/true, /*data_required=*/false);
  ill_cmd->add_option("--out", ill_out, "output directory")->envname("DOSEFIND_OUT");
  ill_cmd->add_option("--weight", ill_weight, "weight tag of the weighted-fit band");
  add_w7(ill_cmd, ill_w7);
  ill_cmd->add_option("--b-samples", ill_b_samples, "bootstrap resamples");
  ill_cmd->add_option("--band-grid", ill_band_grid, "dose grid points of the bands");
  ill_cmd->add_option("--n", ill_n, "patients per dose of the generated dataset");
  ill_cmd->add_option("--seed", ill_seed, "generation and bootstrap seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (app.got_subcommand(fit_cmd)) {
      auto data = load_data(fit_args);
      auto kind = dosefind::model_from_name(fit_args.model);
      auto bounds = bounds_for(fit_args, kind, data.design);
      auto spec = weight_spec(fit_weight, fit_w7);
      dosefind::FitResult fit;
      if (spec.kind == dosefind::WeightKind::Unit) {
        fit = dosefind::fit_ols(kind, data, bounds);
      } else {
        if (fit_med_opt->count() == 0)
          throw input_error("--med is required for a weighted fit");
        auto dose_w = dosefind::weights_at_doses(spec, fit_med, data.design);
        std::vector<double> w;
        w.reserve(data.size());
        for (const auto& obs : data.observations)
          w.push_back(dose_w[static_cast<std::size_t>(obs.dose_index)]);
        fit = dosefind::fit_weighted(kind, data, bounds, w);
      }
      json out = fit_json(fit);
      out["plug_in_med"] = number_or_null(
          dosefind::med_from_theta(kind, fit.theta, fit_args.delta, data.design.d0()));
      emit(out);
    } else if (app.got_subcommand(med_cmd)) {
      auto data = load_data(med_args);
      auto kind = dosefind::model_from_name(med_args.model);
      auto bounds = bounds_for(med_args, kind, data.design);
      auto req = request_for(med_args);
      auto fit = dosefind::fit_ols(kind, data, bounds);
      auto screened = dosefind::med_with_screen(fit, data.design, req, med_screen_grid);
      json out;
      out["fit"] = fit_json(fit);
      out["med"] = med_json(screened);
      out["plug_in_med"] = number_or_null(
          dosefind::med_from_theta(kind, fit.theta, req.delta, data.design.d0()));
      try {
        out["interval"] = med_json(dosefind::classical_med_ci(fit, data.design, req));
      } catch (const dosefind::singular_information_error&) {
        out["interval"] = nullptr;
      }
      emit(out);
    } else if (app.got_subcommand(irwls_cmd)) {
      auto data = load_data(irwls_args);
      auto kind = dosefind::model_from_name(irwls_args.model);
      auto bounds = bounds_for(irwls_args, kind, data.design);
      auto req = request_for(irwls_args);
      dosefind::IrwlsConfig cfg;
      cfg.weight = weight_spec(irwls_weight, irwls_w7);
      if (irwls_criterion == "med")
        cfg.criterion = dosefind::IrwlsCriterion::MedRelative;
      else if (irwls_criterion == "response")
        cfg.criterion = dosefind::IrwlsCriterion::ResponseAtMed;
      else
        throw input_error("--criterion must be med or response");
      cfg.tol = irwls_tol;
      cfg.max_iter = irwls_max_iter;
      auto res = dosefind::irwls_fit(kind, data, bounds, req, cfg);
      json out;
      out["fit"] = fit_json(res.fit);
      out["med"] = med_json(res.med);
      json trace = json::array();
      for (const auto& step : res.fit.trace) {
        json entry;
        entry["alpha"] = step.theta.alpha;
        entry["beta"] = step.theta.beta;
        entry["gamma"] = step.theta.gamma;
        entry["med"] = step.med_ok ? json(step.med) : json(nullptr);
        trace.push_back(std::move(entry));
      }
      out["trace"] = std::move(trace);
      if (res.fit.converged && dosefind::is_continuous(cfg.weight.kind))
        out["interval"] =
            med_json(dosefind::irwls_med_ci(res.fit, data.design, req, cfg.weight));
      else
        out["interval"] = nullptr;
      emit(out);
    } else if (app.got_subcommand(rr_cmd)) {
      auto data = load_data(rr_args);
      auto kind = dosefind::model_from_name(rr_args.model);
      auto bounds = bounds_for(rr_args, kind, data.design);
      auto req = request_for(rr_args);
      auto res = dosefind::rr_fit(kind, data, bounds, req, weight_spec(rr_weight, rr_w7));
      json out;
      out["fit"] = fit_json(res.fit);
      out["med"] = med_json(dosefind::rr_med_ci(res.fit, res.cov, req, data.design));
      out["iterations"] = res.iterations;
      out["score_norm"] = res.score_norm;
      out["used_fallback"] = res.used_fallback;
      out["covariance_singular"] = res.cov.singular;
      emit(out);
    } else if (app.got_subcommand(ci_cmd)) {
      auto data = load_data(ci_args);
      auto kind = dosefind::model_from_name(ci_args.model);
      auto bounds = bounds_for(ci_args, kind, data.design);
      auto req = request_for(ci_args);
      json out;
      if (ci_method == "classical") {
        auto fit = dosefind::fit_ols(kind, data, bounds);
        out["interval"] = med_json(dosefind::classical_med_ci(fit, data.design, req));
      } else if (ci_method == "irwls") {
        dosefind::IrwlsConfig cfg;
        cfg.weight = weight_spec(ci_weight, ci_w7);
        auto res = dosefind::irwls_fit(kind, data, bounds, req, cfg);
        if (!res.fit.converged)
          throw dosefind::rank_deficiency_error(
              "the reweighted fit fell back to least squares; no interval");
        out["interval"] =
            med_json(dosefind::irwls_med_ci(res.fit, data.design, req, cfg.weight));
      } else if (ci_method == "rr") {
        auto res =
            dosefind::rr_fit(kind, data, bounds, req, weight_spec(ci_weight, ci_w7));
        out["interval"] = med_json(dosefind::rr_med_ci(res.fit, res.cov, req, data.design));
      } else if (ci_method == "pboot" || ci_method == "proflik") {
        double level = 1.0 - 2.0 * ci_args.ci_alpha;
        dosefind::EffectCurveBand band;
        if (ci_method == "pboot") {
          dosefind::BootstrapConfig bc;
          bc.b_samples = ci_b_samples;
          bc.grid_points = ci_band_grid;
          bc.level = level;
          bc.seed = ci_seed;
          band = dosefind::percentile_bootstrap_band(kind, data, bounds, bc);
          out["refit_failures"] = band.refit_failures;
        } else {
          dosefind::ProfileConfig pc;
          pc.grid_points = ci_band_grid;
          pc.level = level;
          band = dosefind::profile_likelihood_band(kind, data, bounds, pc);
        }
        auto est = dosefind::invert_band_for_med(band, req.delta);
        est.method = ci_method;
        out["interval"] = med_json(est);
        if (!ci_band_path.empty()) {
          write_band_csv(band, ci_band_path);
          out["band_file"] = ci_band_path;
        }
      } else {
        throw input_error("--method must be classical, irwls, rr, pboot, or proflik");
      }
      out["method"] = ci_method;
      emit(out);
    } else if (app.got_subcommand(mcp_cmd)) {
      auto data = load_data(mcp_args);
      auto req = request_for(mcp_args);
      auto cands = candidates_from_file(mcp_candidates, data.design);
      dosefind::PocConfig pc;
      pc.alpha = mcp_args.alpha;
      pc.bonferroni = mcp_bonferroni;
      pc.crit_draws = mcp_draws;
      if (mcp_selection == "maxt")
        pc.selection = dosefind::SelectionRule::MaxT;
      else if (mcp_selection == "aic")
        pc.selection = dosefind::SelectionRule::Aic;
      else
        throw input_error("--selection must be maxt or aic");
      dosefind::McpEstimator which;
      if (mcp_estimator == "classical")
        which = dosefind::McpEstimator::Classical;
      else if (mcp_estimator == "rr")
        which = dosefind::McpEstimator::Robust;
      else
        throw input_error("--estimator must be classical or rr");
      auto res = dosefind::mcpmod_med(cands, data, pc, req, which,
                                      weight_spec(mcp_weight, mcp_w7));
      json out;
      json tests = json::array();
      for (std::size_t m = 0; m < cands.size(); ++m) {
        tests.push_back({{"candidate", cands[m].label},
                         {"t", res.poc.t_stats[m]},
                         {"significant", static_cast<bool>(res.poc.significant[m])}});
      }
      out["tests"] = std::move(tests);
      out["critical_value"] = res.poc.critical_value;
      out["any_significant"] = res.poc.any_significant;
      out["selected"] = res.selected_label.empty() ? json(nullptr)
                                                   : json(res.selected_label);
      out["fit"] = res.fit ? fit_json(*res.fit) : json(nullptr);
      out["med"] = med_json(res.med);
      emit(out);
    } else if (app.got_subcommand(sim_cmd)) {
      auto scenario = dosefind::scenario_from_file(sim_scenario);
      auto result = dosefind::run_study(scenario, sim_threads);
      dosefind::write_study_outputs(result, sim_out);
      json out;
      out["name"] = result.scenario.name;
      out["kind"] = result.scenario.kind;
      out["output_dir"] = sim_out;
      json files = json::array({"summary.csv", "replicates.csv", "manifest.json"});
      if (result.scenario.kind == "coverage") files.push_back("coverage.csv");
      out["files"] = std::move(files);
      emit(out);
    } else if (app.got_subcommand(ill_cmd)) {
      std::filesystem::path dir(ill_out);
      std::filesystem::create_directories(dir);
      auto kind = dosefind::model_from_name(ill_args.model);

      std::optional<dosefind::Dataset> loaded;
      if (ill_args.data_path.empty()) {
        // Demo dataset: a saturating curve with a gentle slope near placebo,
        // noisy enough that the band methods visibly disagree.
        dosefind::TruthSpec truth;
        truth.model = dosefind::ModelKind::Emax;
        truth.theta = {0.32, 0.74, {0.14}};
        truth.sigma = 0.65;
        dosefind::DoseDesign design({0.0, 0.05, 0.2, 0.6, 1.0},
                                    std::vector<int>(5, ill_n));
        auto engine = dosefind::make_engine(ill_seed, 0, 0);
        loaded = dosefind::generate_dataset(truth, design, engine).data;
        auto out = open_out(dir / "data.csv");
        dosefind::dataset_to_csv(*loaded, out);
      } else {
        loaded = load_data(ill_args);
      }
      const auto& data = *loaded;
      auto bounds = bounds_for(ill_args, kind, data.design);
      auto req = request_for(ill_args);

      double level = 1.0 - 2.0 * ill_args.ci_alpha;
      dosefind::BootstrapConfig bc;
      bc.b_samples = ill_b_samples;
      bc.grid_points = ill_band_grid;
      bc.level = level;
      bc.seed = ill_seed;
      auto boot = dosefind::percentile_bootstrap_band(kind, data, bounds, bc);
      write_band_csv(boot, dir / "pboot_band.csv");

      dosefind::ProfileConfig pcfg;
      pcfg.grid_points = ill_band_grid;
      pcfg.level = level;
      auto prof = dosefind::profile_likelihood_band(kind, data, bounds, pcfg);
      write_band_csv(prof, dir / "proflik_band.csv");

      auto fit = dosefind::fit_ols(kind, data, bounds);
      write_band_csv(dosefind::wald_effect_band(fit, data.design, level, ill_band_grid),
                     dir / "wald_band.csv");
      auto rr = dosefind::rr_fit(kind, data, bounds, req, weight_spec(ill_weight, ill_w7));
      if (!rr.used_fallback && !rr.cov.singular)
        write_band_csv(dosefind::wald_effect_band_cov(rr.fit, data.design,
                                                      rr.cov.covariance, level,
                                                      ill_band_grid),
                       dir / "weighted_band.csv");
      auto med = dosefind::med_from_theta(kind, fit.theta, req.delta, data.design.d0());
      {
        // Weight profiles over the dose range, centred on the fitted MED.
        auto out = open_out(dir / "weights.csv");
        out << "dose,w1,w2,w3,w4,w5,w6,w7\n";
        double target = med && *med > 0.0 ? *med : 0.5 * data.design.dmax();
        char buf[64];
        for (int g = 0; g < ill_band_grid; ++g) {
          double d = data.design.d0() + (data.design.dmax() - data.design.d0()) * g /
                                            static_cast<double>(ill_band_grid - 1);
          std::snprintf(buf, sizeof buf, "%.10g", d);
          out << buf;
          for (int w = 1; w <= 7; ++w) {
            dosefind::WeightSpec spec;
            spec.kind = static_cast<dosefind::WeightKind>(w);
            std::snprintf(buf, sizeof buf, ",%.10g",
                          dosefind::compute_weight(spec, d, target, data.design));
            out << buf;
          }
          out << '\n';
        }
      }
      json out;
      out["output_dir"] = ill_out;
      out["plug_in_med"] = number_or_null(med);
      emit(out);
    }
    return 0;
  } catch (const input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
