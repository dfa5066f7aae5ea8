#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "muplab/activations.hpp"
#include "muplab/cli.hpp"
#include "muplab/config.hpp"
#include "muplab/diagnostics.hpp"
#include "muplab/infwidth.hpp"
#include "muplab/sweep.hpp"

namespace py = pybind11;
using namespace muplab;

namespace {

Json parse(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw ConfigError(e.what());
  }
}

FeatureSnapshot as_snapshot(const Mat& rows, std::size_t step) {
  return {1, FeatureKind::Pre, step, rows};
}

py::dict train_run(const std::string& config_json, const std::string& scheme,
                   std::size_t width, std::uint64_t seed) {
  const ExperimentConfig cfg = parse_experiment(parse(config_json));
  const Dataset data = make_dataset(cfg.dataset);
  RunOutcome run;
  {
    py::gil_scoped_release nogil;
    run = run_one(cfg, data, parse_scheme(scheme), width, seed, true);
  }
  if (!run.error.empty()) throw Error(run.error);
  py::dict out;
  out["loss"] = run.result.loss_history;
  out["outputs"] = run.result.output_history;
  out["chi"] = run.result.chi_history;
  out["update_norm"] = run.result.update_norm_history;
  out["weight_norm"] = run.result.weight_norm_history;
  out["final_loss"] = run.result.final_loss;
  py::list rows;
  for (const auto& r : run.rows)
    rows.append(py::dict(py::arg("layer") = r.layer, py::arg("kind") = r.kind,
                         py::arg("metric") = r.metric, py::arg("step") = r.step,
                         py::arg("value") = r.value));
  out["metrics"] = rows;
  return out;
}

std::string sweep_csv(const std::string& config_json, std::size_t workers) {
  const ExperimentConfig cfg = parse_experiment(parse(config_json));
  const Dataset data = make_dataset(cfg.dataset);
  std::vector<MetricRow> rows;
  {
    py::gil_scoped_release nogil;
    rows = sweep(cfg, data, resolve_workers(workers ? workers : cfg.workers));
  }
  std::ostringstream csv;
  write_csv(csv, rows);
  return csv.str();
}

py::dict infwidth_run(const std::string& config_json) {
  InfRunConfig cfg = parse_infwidth(parse(config_json));
  cfg.inf.workers = resolve_workers(cfg.inf.workers);
  const Dataset data = make_dataset(cfg.dataset);
  Rng rng(cfg.seed);
  InfTrajectory traj;
  {
    py::gil_scoped_release nogil;
    traj = run(data, cfg.inf, rng);
  }
  py::dict out;
  out["f"] = traj.f;
  out["chi"] = traj.chi;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Finite and infinite-width MLP training under abc-parametrizations";

  py::register_exception<Error>(m, "MuplabError", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

  m.def("activation_names", &activation_names);
  m.def(
      "activation",
      [](const std::string& name, double x) {
        const auto& a = activation(name);
        return py::make_tuple(a.value(x), a.deriv(x), a.deriv2(x));
      },
      py::arg("name"), py::arg("x"), "(phi, phi', phi'') at x");
  m.def(
      "good_suite",
      [](const std::string& name, std::size_t trials, std::uint64_t seed) {
        Rng rng(seed);
        const auto r = run_good_suite(activation(name), trials, rng);
        return py::dict(py::arg("trials") = r.trials,
                        py::arg("decomposition_passes") = r.decomposition_passes,
                        py::arg("product_passes") = r.product_passes,
                        py::arg("all_passed") = r.all_passed());
      },
      py::arg("name"), py::arg("trials") = 100, py::arg("seed") = 42);

  m.def(
      "layer_plan",
      [](const std::string& scheme, std::size_t depth, std::size_t d, std::size_t n,
         double eta) {
        const auto p = layer_plan(parse_scheme(scheme), depth, d, n, eta);
        return py::make_tuple(p.init_std, p.lr);
      },
      py::arg("scheme"), py::arg("depth"), py::arg("d"), py::arg("n"), py::arg("eta"),
      "(init_std, lr) per layer, input layer first");

  m.def("feature_change",
        [](const Mat& now, const Mat& base) {
          return feature_change(as_snapshot(now, 1), as_snapshot(base, 0)).mean;
        });
  m.def("min_eig", [](const Mat& rows) { return diversity_min_eig(as_snapshot(rows, 0)); });
  m.def("spacetime_min_eig", [](const Mat& a, const Mat& b) {
    return spacetime_min_eig(as_snapshot(a, 0), as_snapshot(b, 1));
  });
  m.def("check_dataset", [](const std::vector<Vec>& points, double tol) {
    const auto r = check_dataset_assumption(points, tol);
    std::vector<std::string> msgs;
    for (const auto& v : r.violations) msgs.push_back(describe(v));
    return py::make_tuple(r.ok, msgs);
  });

  m.def("train", &train_run, py::arg("config_json"), py::arg("scheme"), py::arg("width"),
        py::arg("seed"));
  m.def("sweep_csv", &sweep_csv, py::arg("config_json"), py::arg("workers") = 0);
  m.def("infwidth", &infwidth_run, py::arg("config_json"));
  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
