// Python bindings for the main operations: model fits, MED estimators and
// intervals, effect-curve bands, the MCP-Mod pipeline, and scenario studies.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "dosefind/dataset.hpp"
#include "dosefind/errors.hpp"
#include "dosefind/fitting.hpp"
#include "dosefind/intervals.hpp"
#include "dosefind/irwls.hpp"
#include "dosefind/mcpmod.hpp"
#include "dosefind/med.hpp"
#include "dosefind/models.hpp"
#include "dosefind/robust.hpp"
#include "dosefind/simlab.hpp"
#include "dosefind/weights.hpp"

namespace py = pybind11;
using namespace dosefind;

namespace {

// Responses are dose-major: all values for the first dose, then the second.
Dataset make_dataset(const std::vector<double>& doses, const std::vector<int>& allocations,
                     const std::vector<double>& responses) {
  DoseDesign design(doses, allocations);
  if (responses.size() != static_cast<std::size_t>(design.total()))
    throw input_error("responses length must equal the total allocation");
  std::vector<Observation> obs;
  obs.reserve(responses.size());
  std::size_t at = 0;
  for (std::size_t j = 0; j < design.arms(); ++j)
    for (int i = 0; i < design.allocations[j]; ++i)
      obs.push_back({static_cast<int>(j), responses[at++]});
  return Dataset(std::move(design), std::move(obs));
}

py::object opt_to_py(const std::optional<double>& v) {
  if (v) return py::float_(*v);
  return py::none();
}

py::dict fit_to_dict(const FitResult& fit) {
  py::dict d;
  d["model"] = model_name(fit.kind);
  d["alpha"] = fit.theta.alpha;
  d["beta"] = fit.theta.beta;
  d["gamma"] = fit.theta.gamma;
  d["sigma"] = fit.sigma;
  d["sse"] = fit.sse;
  d["converged"] = fit.converged;
  d["iterations"] = fit.iterations;
  return d;
}

py::dict med_to_dict(const MedEstimate& est) {
  py::dict d;
  d["method"] = est.method;
  d["med"] = opt_to_py(est.value);
  d["lower"] = opt_to_py(est.lower);
  d["upper"] = opt_to_py(est.upper);
  d["se"] = opt_to_py(est.se);
  return d;
}

py::dict band_to_dict(const EffectCurveBand& band) {
  py::dict d;
  d["grid"] = band.grid;
  d["lower"] = band.lower;
  d["fitted"] = band.fitted;
  d["upper"] = band.upper;
  d["level"] = band.level;
  d["refit_failures"] = band.refit_failures;
  return d;
}

GridBounds bounds_with(ModelKind kind, const DoseDesign& design, int grid_points) {
  GridBounds bounds = default_bounds(kind, design);
  if (grid_points > 0) bounds.grid_points = grid_points;
  return bounds;
}

MedRequest make_request(double delta, double alpha, double ci_alpha) {
  MedRequest req;
  req.delta = delta;
  req.alpha = alpha;
  req.ci_alpha = ci_alpha;
  return req;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "dose-finding MED estimation toolkit";

  py::register_exception<input_error>(m, "InputError", PyExc_ValueError);
  py::register_exception<rank_deficiency_error>(m, "RankDeficiencyError",
                                                PyExc_RuntimeError);
  py::register_exception<bootstrap_failure_error>(m, "BootstrapFailureError",
                                                  PyExc_RuntimeError);

  m.def("models", [] {
    std::vector<std::string> names;
    for (ModelKind k : {ModelKind::Linear, ModelKind::LinLog, ModelKind::Emax,
                        ModelKind::Exponential, ModelKind::Quadratic,
                        ModelKind::SigEmax, ModelKind::Power,
                        ModelKind::TruncLogistic})
      names.emplace_back(model_name(k));
    return names;
  });

  m.def(
      "fit",
      [](const std::string& model, const std::vector<double>& doses,
         const std::vector<int>& allocations, const std::vector<double>& responses,
         int grid_points) {
        auto data = make_dataset(doses, allocations, responses);
        auto kind = model_from_name(model);
        auto fit = fit_ols(kind, data, bounds_with(kind, data.design, grid_points));
        py::dict d = fit_to_dict(fit);
        d["plug_in_med"] = py::none();
        return d;
      },
      py::arg("model"), py::arg("doses"), py::arg("allocations"), py::arg("responses"),
      py::arg("grid_points") = 0, "Grid least-squares fit; responses are dose-major.");

  m.def(
      "med_classical",
      [](const std::string& model, const std::vector<double>& doses,
         const std::vector<int>& allocations, const std::vector<double>& responses,
         double delta, double alpha, double ci_alpha, int grid_points) {
        auto data = make_dataset(doses, allocations, responses);
        auto kind = model_from_name(model);
        auto req = make_request(delta, alpha, ci_alpha);
        auto fit = fit_ols(kind, data, bounds_with(kind, data.design, grid_points));
        py::dict d = med_to_dict(med_with_screen(fit, data.design, req));
        d["fit"] = fit_to_dict(fit);
        d["plug_in_med"] =
            opt_to_py(med_from_theta(kind, fit.theta, delta, data.design.d0()));
        try {
          d["interval"] = med_to_dict(classical_med_ci(fit, data.design, req));
        } catch (const singular_information_error&) {
          d["interval"] = py::none();
        }
        return d;
      },
      py::arg("model"), py::arg("doses"), py::arg("allocations"), py::arg("responses"),
      py::arg("delta"), py::arg("alpha") = 0.025, py::arg("ci_alpha") = 0.025,
      py::arg("grid_points") = 0,
      "Screened MED estimate with its delta-method interval.");

  m.def(
      "med_irwls",
      [](const std::string& model, const std::vector<double>& doses,
         const std::vector<int>& allocations, const std::vector<double>& responses,
         double delta, const std::string& weight, const std::string& criterion,
         double ci_alpha, int grid_points) {
        auto data = make_dataset(doses, allocations, responses);
        auto kind = model_from_name(model);
        auto req = make_request(delta, 0.025, ci_alpha);
        IrwlsConfig cfg;
        cfg.weight.kind = weight_from_name(weight);
        if (criterion == "med")
          cfg.criterion = IrwlsCriterion::MedRelative;
        else if (criterion == "response")
          cfg.criterion = IrwlsCriterion::ResponseAtMed;
        else
          throw input_error("criterion must be 'med' or 'response'");
        auto res =
            irwls_fit(kind, data, bounds_with(kind, data.design, grid_points), req, cfg);
        py::dict d = med_to_dict(res.med);
        d["fit"] = fit_to_dict(res.fit);
        if (res.fit.converged && is_continuous(cfg.weight.kind))
          d["interval"] = med_to_dict(irwls_med_ci(res.fit, data.design, req, cfg.weight));
        else
          d["interval"] = py::none();
        return d;
      },
      py::arg("model"), py::arg("doses"), py::arg("allocations"), py::arg("responses"),
      py::arg("delta"), py::arg("weight") = "w5", py::arg("criterion") = "med",
      py::arg("ci_alpha") = 0.025, py::arg("grid_points") = 0,
      "Iteratively reweighted MED estimate.");

  m.def(
      "med_rr",
      [](const std::string& model, const std::vector<double>& doses,
         const std::vector<int>& allocations, const std::vector<double>& responses,
         double delta, const std::string& weight, double ci_alpha, int grid_points) {
        auto data = make_dataset(doses, allocations, responses);
        auto kind = model_from_name(model);
        auto req = make_request(delta, 0.025, ci_alpha);
        WeightSpec spec;
        spec.kind = weight_from_name(weight);
        auto res =
            rr_fit(kind, data, bounds_with(kind, data.design, grid_points), req, spec);
        py::dict d = med_to_dict(rr_med_ci(res.fit, res.cov, req, data.design));
        d["fit"] = fit_to_dict(res.fit);
        d["used_fallback"] = res.used_fallback;
        d["covariance_singular"] = res.cov.singular;
        return d;
      },
      py::arg("model"), py::arg("doses"), py::arg("allocations"), py::arg("responses"),
      py::arg("delta"), py::arg("weight") = "w5", py::arg("ci_alpha") = 0.025,
      py::arg("grid_points") = 0,
      "Weighted estimating-equation MED estimate with a sandwich interval.");

  m.def(
      "bootstrap_band",
      [](const std::string& model, const std::vector<double>& doses,
         const std::vector<int>& allocations, const std::vector<double>& responses,
         int b_samples, double level, std::uint64_t seed, int grid_points,
         int fit_grid_points) {
        auto data = make_dataset(doses, allocations, responses);
        auto kind = model_from_name(model);
        BootstrapConfig bc;
        bc.b_samples = b_samples;
        bc.level = level;
        bc.seed = seed;
        bc.grid_points = grid_points;
        return band_to_dict(percentile_bootstrap_band(
            kind, data, bounds_with(kind, data.design, fit_grid_points), bc));
      },
      py::arg("model"), py::arg("doses"), py::arg("allocations"), py::arg("responses"),
      py::arg("b_samples") = 1000, py::arg("level") = 0.95, py::arg("seed") = 1,
      py::arg("grid_points") = 201, py::arg("fit_grid_points") = 0,
      "Percentile-bootstrap band of the effect curve over placebo.");

  m.def(
      "profile_band",
      [](const std::string& model, const std::vector<double>& doses,
         const std::vector<int>& allocations, const std::vector<double>& responses,
         double level, int grid_points, int fit_grid_points) {
        auto data = make_dataset(doses, allocations, responses);
        auto kind = model_from_name(model);
        ProfileConfig pc;
        pc.level = level;
        pc.grid_points = grid_points;
        return band_to_dict(profile_likelihood_band(
            kind, data, bounds_with(kind, data.design, fit_grid_points), pc));
      },
      py::arg("model"), py::arg("doses"), py::arg("allocations"), py::arg("responses"),
      py::arg("level") = 0.95, py::arg("grid_points") = 201,
      py::arg("fit_grid_points") = 0,
      "Profile-likelihood band of the effect curve over placebo.");

  m.def(
      "invert_band",
      [](const std::vector<double>& grid, const std::vector<double>& lower,
         const std::vector<double>& fitted, const std::vector<double>& upper,
         double delta) {
        EffectCurveBand band;
        band.grid = grid;
        band.lower = lower;
        band.fitted = fitted;
        band.upper = upper;
        return med_to_dict(invert_band_for_med(band, delta));
      },
      py::arg("grid"), py::arg("lower"), py::arg("fitted"), py::arg("upper"),
      py::arg("delta"), "First grid doses whose band curves clear delta.");

  m.def(
      "mcpmod",
      [](const std::vector<double>& doses, const std::vector<int>& allocations,
         const std::vector<double>& responses, double delta,
         const std::string& estimator, const std::string& weight, double alpha,
         bool bonferroni, double ci_alpha) {
        auto data = make_dataset(doses, allocations, responses);
        auto req = make_request(delta, 0.025, ci_alpha);
        PocConfig pc;
        pc.alpha = alpha;
        pc.bonferroni = bonferroni;
        McpEstimator which;
        if (estimator == "classical")
          which = McpEstimator::Classical;
        else if (estimator == "rr")
          which = McpEstimator::Robust;
        else
          throw input_error("estimator must be 'classical' or 'rr'");
        WeightSpec spec;
        spec.kind = weight_from_name(weight);
        auto cands = default_candidates(data.design);
        auto res = mcpmod_med(cands, data, pc, req, which, spec);
        py::dict d = med_to_dict(res.med);
        py::list tests;
        for (std::size_t i = 0; i < cands.size(); ++i) {
          py::dict t;
          t["candidate"] = cands[i].label;
          t["t"] = res.poc.t_stats[i];
          t["significant"] = static_cast<bool>(res.poc.significant[i]);
          tests.append(t);
        }
        d["tests"] = tests;
        d["critical_value"] = res.poc.critical_value;
        d["any_significant"] = res.poc.any_significant;
        d["selected"] = res.selected_label.empty()
                            ? py::object(py::none())
                            : py::object(py::str(res.selected_label));
        d["fit"] = res.fit ? py::object(fit_to_dict(*res.fit)) : py::object(py::none());
        return d;
      },
      py::arg("doses"), py::arg("allocations"), py::arg("responses"), py::arg("delta"),
      py::arg("estimator") = "classical", py::arg("weight") = "w6",
      py::arg("alpha") = 0.025, py::arg("bonferroni") = false,
      py::arg("ci_alpha") = 0.025,
      "MCP-Mod pipeline with the default candidate set.");

  m.def(
      "run_scenario",
      [](const std::string& scenario_json, const std::string& out_dir, int threads) {
        auto scenario = scenario_from_json_text(scenario_json);
        auto result = run_study(scenario, threads);
        if (!out_dir.empty()) write_study_outputs(result, out_dir);
        py::list summary;
        for (const auto& row : result.summary) {
          py::dict r;
          r["method"] = row.method;
          r["n"] = row.n;
          r["replicates"] = row.replicates;
          r["estimable"] = row.estimable;
          r["mean_estimate"] = row.mean_estimate;
          r["mean_bias_pct"] = row.mean_r;
          r["median_bias_pct"] = row.median_r;
          r["iqr_bias_pct"] = row.iqr_r;
          r["sd_estimate"] = row.sd_estimate;
          r["mean_se"] = row.mean_se;
          summary.append(r);
        }
        py::list coverage;
        for (const auto& row : result.coverage) {
          py::dict r;
          r["method"] = row.method;
          r["n"] = row.n;
          r["coverage"] = row.coverage;
          r["with_interval"] = row.with_interval;
          r["covered"] = row.covered;
          coverage.append(r);
        }
        py::list fwer;
        for (const auto& row : result.fwer) {
          py::dict r;
          r["n"] = row.n;
          r["replicates"] = row.replicates;
          r["rejections"] = row.rejections;
          r["fwer"] = row.fwer;
          fwer.append(r);
        }
        py::dict d;
        d["name"] = result.scenario.name;
        d["kind"] = result.scenario.kind;
        d["summary"] = summary;
        d["coverage"] = coverage;
        d["fwer"] = fwer;
        return d;
      },
      py::arg("scenario_json"), py::arg("out_dir") = "", py::arg("threads") = 1,
      "Run a simulation scenario from its JSON text; optionally write CSVs.");

  m.def("normalize_scenario",
        [](const std::string& text) {
          return scenario_to_json_text(scenario_from_json_text(text));
        },
        py::arg("scenario_json"),
        "Normalized scenario JSON with every field made explicit.");
}
