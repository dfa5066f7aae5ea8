#include "muplab/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "muplab/config.hpp"
#include "muplab/diagnostics.hpp"
#include "muplab/infwidth.hpp"
#include "muplab/plot.hpp"
#include "muplab/sweep.hpp"

namespace muplab {
namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required) {
  auto* c = cmd->add_option("--config", f.config, "JSON configuration file");
  if (config_required) c->required();
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--seed", f.seed, "seed override");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

int cmd_train(const CommonFlags& f, std::ostream& out) {
  ExperimentConfig cfg =
      f.config.empty() ? ExperimentConfig{} : parse_experiment(load_json_file(f.config));
  if (!f.out.empty()) cfg.output_dir = f.out;
  const std::uint64_t seed = f.seed.value_or(cfg.seeds.front());
  const Dataset data = make_dataset(cfg.dataset);
  const Scheme scheme = cfg.schemes.front();
  const std::size_t width = cfg.widths.front();
  RunOutcome run = run_one(cfg, data, scheme, width, seed, true);
  if (!run.error.empty()) throw Error("training failed: " + run.error);

  const std::string id = run_id(cfg, scheme, width, seed);
  std::vector<MetricRow> rows = run.rows;
  const auto& res = run.result;
  const std::string tag(to_string(scheme));
  for (std::size_t t = 0; t < res.loss_history.size(); ++t) {
    double chi = 0.0;
    for (double c : res.chi_history[t]) chi = std::max(chi, std::abs(c));
    rows.push_back({id, tag, width, seed, 0, "output", "train_loss", t, res.loss_history[t]});
    rows.push_back({id, tag, width, seed, 0, "output", "max_abs_chi", t, chi});
    const double rel = res.weight_norm_history[t] > 0.0
                           ? res.update_norm_history[t] / res.weight_norm_history[t]
                           : 0.0;
    rows.push_back({id, tag, width, seed, 0, "output", "relative_update", t, rel});
  }
  const fs::path csv = fs::path(cfg.output_dir) / "train.csv";
  write_csv(csv, rows);
  out << "run " << id << " (" << tag << ", width " << width << ", seed " << seed
      << "): final loss " << format_value(res.final_loss) << "\n"
      << "wrote " << csv.string() << "\n";
  return 0;
}

int cmd_sweep(const CommonFlags& f, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg = parse_experiment(load_json_file(f.config));
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (f.seed) cfg.base_seed = *f.seed;
  const Dataset data = make_dataset(cfg.dataset);
  const auto rows = sweep(cfg, data, resolve_workers(cfg.workers));
  const fs::path dir(cfg.output_dir);
  write_csv(dir / "metrics.csv", rows);
  write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");
  Json runs = Json::array();
  std::size_t failed = 0;
  for (Scheme s : cfg.schemes)
    for (std::size_t w : cfg.widths)
      for (std::uint64_t seed : cfg.seeds)
        runs.push_back({{"run_id", run_id(cfg, s, w, seed)},
                        {"scheme", std::string(to_string(s))},
                        {"width", w},
                        {"seed", seed}});
  for (const auto& r : rows)
    if (r.metric == "error") ++failed;
  write_text(dir / "runs.json", runs.dump(2) + "\n");
  if (failed) err << failed << " run(s) failed; see metric=error rows\n";
  out << "wrote " << rows.size() << " rows to " << (dir / "metrics.csv").string() << "\n";
  return 0;
}

int cmd_infwidth(const CommonFlags& f, std::ostream& out, std::ostream& err) {
  InfRunConfig cfg = parse_infwidth(load_json_file(f.config));
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (f.seed) cfg.seed = *f.seed;
  cfg.inf.workers = resolve_workers(cfg.inf.workers);
  const Dataset data = make_dataset(cfg.dataset);
  Rng rng(cfg.seed);
  // Surface dataset warnings before the (possibly long) run.
  if (data.size() >= 2) {
    const auto report =
        check_dataset_assumption(data.inputs, default_assumption_tol(data.inputs));
    for (const auto& v : report.violations) err << "warning: " << describe(v) << "\n";
  }
  InfSummary summary;
  const InfTrajectory traj = run(data, cfg.inf, rng, &summary);

  const fs::path dir(cfg.output_dir);
  std::ostringstream csv;
  csv << "step,sample_id,f_ring,chi_ring\n";
  for (std::size_t t = 0; t < traj.f.size(); ++t)
    for (std::size_t i = 0; i < traj.f[t].size(); ++i)
      csv << t << ',' << i << ',' << format_value(traj.f[t][i]) << ','
          << format_value(traj.chi[t][i]) << '\n';
  write_text(dir / "trajectory.csv", csv.str());

  auto mat = [](const Mat& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      std::vector<double> r(static_cast<std::size_t>(m.cols()));
      for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
      rows.push_back(r);
    }
    return rows;
  };
  Json js;
  js["config"] = to_json(cfg);
  js["steps"] = cfg.inf.steps;
  js["f_ring_final"] = traj.f.back();
  js["chi_ring_final"] = traj.chi.back();
  Json layers = Json::array();
  for (std::size_t l = 0; l < summary.x_moment_initial.size(); ++l)
    layers.push_back({{"layer", l + 1},
                      {"x_moment_initial", mat(summary.x_moment_initial[l])},
                      {"x_moment_final", mat(summary.x_moment_final[l])},
                      {"witness_min_eig", summary.witness_min_eig[l]}});
  js["layers"] = layers;
  js["max_hat_covariance_error"] = summary.max_hat_covariance_error.empty()
                                       ? 0.0
                                       : summary.max_hat_covariance_error.front();
  write_text(dir / "summary.json", js.dump(2) + "\n");
  out << "wrote " << (dir / "trajectory.csv").string() << " and "
      << (dir / "summary.json").string() << "\n";
  return 0;
}

int cmd_check_activation(const std::vector<std::string>& names, std::size_t trials,
                         const CommonFlags& f, std::ostream& out) {
  Rng rng(f.seed.value_or(42));
  bool all = true;
  for (const auto& name : names.empty() ? good_activation_names() : names) {
    const Activation& act = activation(name);
    const auto r = run_good_suite(act, trials, rng);
    out << name << ": decomposition " << r.decomposition_passes << "/" << r.trials
        << " (min statistic " << format_value(r.min_decomposition_statistic) << ")";
    if (act.smooth)
      out << ", derivative product " << r.product_passes << "/" << r.trials
          << " (min statistic " << format_value(r.min_product_statistic) << ")";
    else
      out << ", derivative product skipped (not twice differentiable)";
    out << (r.all_passed() ? " -> no constancy found" : " -> FAILED") << "\n";
    all = all && r.all_passed();
  }
  out << "note: randomized falsification test, not a proof\n";
  return all ? 0 : 1;
}

int cmd_check_dataset(const CommonFlags& f, std::optional<double> tol, double jitter,
                      std::size_t attempts, std::ostream& out) {
  const Json j = load_json_file(f.config);
  const DatasetSpec spec = j.is_object() && j.contains("dataset")
                               ? parse_experiment(j).dataset
                               : parse_dataset_spec(j);
  Dataset data = make_dataset(spec);
  auto check = [&](const Dataset& d) {
    return check_dataset_assumption(d.inputs, tol.value_or(default_assumption_tol(d.inputs)));
  };
  AssumptionReport report = check(data);
  for (const auto& v : report.violations) out << describe(v) << "\n";
  if (report.ok) {
    out << "dataset passes the inner-product check (" << data.size() << " points)\n";
    return 0;
  }
  out << report.violations.size() << " violation(s)\n";
  if (jitter <= 0.0) return 1;
  Rng rng(f.seed.value_or(42));
  for (std::size_t a = 1; a <= attempts; ++a) {
    const Dataset jittered = jitter_dataset(data, jitter, rng);
    if (check(jittered).ok) {
      out << "jitter " << jitter << ": passes after " << a << " attempt(s)\n";
      return 0;
    }
  }
  out << "jitter " << jitter << ": still failing after " << attempts << " attempts\n";
  return 1;
}

int cmd_plot(const CommonFlags& f, std::string csv, PlotSpec spec, std::ostream& out) {
  if (!f.config.empty()) {
    const Json j = load_json_file(f.config);
    if (!j.is_object()) throw ConfigError("plot config must be an object");
    for (const auto& [key, value] : j.items()) {
      if (key == "csv") csv = value.get<std::string>();
      else if (key == "metric") spec.metric = value.get<std::string>();
      else if (key == "layer") spec.layer = value.get<std::size_t>();
      else if (key == "kind") spec.kind = value.get<std::string>();
      else if (key == "step") spec.step = value.get<std::size_t>();
      else if (key == "log_y") spec.log_y = value.get<bool>();
      else if (key == "title") spec.title = value.get<std::string>();
      else throw ConfigError("plot config: unknown key '" + key + "'");
    }
  }
  if (csv.empty()) throw ValidationError("plot needs --csv");
  const fs::path dir = f.out.empty() ? fs::path(".") : fs::path(f.out);
  const fs::path svg = dir / ("plot_" + spec.metric + "_l" + std::to_string(spec.layer) +
                              "_" + spec.kind + ".svg");
  emit_plot(csv, spec, svg);
  out << "wrote " << svg.string() << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"muplab: parametrization experiments for wide MLPs"};
  app.name("muplab");
  app.require_subcommand(1);

  CommonFlags train_f, sweep_f, inf_f, act_f, data_f, plot_f;
  auto* train = app.add_subcommand("train", "train one network and record diagnostics");
  add_common(train, train_f, false);
  auto* sweep_cmd = app.add_subcommand("sweep", "run every (scheme, width, seed)");
  add_common(sweep_cmd, sweep_f, true);
  auto* inf = app.add_subcommand("infwidth", "simulate the infinite-width limit");
  add_common(inf, inf_f, true);

  auto* act = app.add_subcommand("check-activation", "randomized GOOD-property checks");
  add_common(act, act_f, false);
  std::vector<std::string> act_names;
  std::size_t trials = 100;
  act->add_option("--activation", act_names, "activation name(s)");
  act->add_option("--trials", trials, "random draws per check")->check(CLI::PositiveNumber);

  auto* data = app.add_subcommand("check-dataset", "check pairwise inner products");
  add_common(data, data_f, true);
  std::optional<double> tol;
  double jitter = 0.0;
  std::size_t attempts = 10;
  data->add_option("--tol", tol, "violation tolerance (default 1e-9 max |<xi_i, xi_j>|)");
  data->add_option("--jitter", jitter, "on failure, retry with N(0, jitter^2) noise");
  data->add_option("--attempts", attempts, "jitter attempts");

  auto* plot = app.add_subcommand("plot", "render a metric against width as SVG");
  add_common(plot, plot_f, false);
  std::string csv;
  PlotSpec spec;
  std::optional<std::size_t> step;
  plot->add_option("--csv", csv, "metrics CSV written by sweep");
  plot->add_option("--metric", spec.metric, "metric name");
  plot->add_option("--layer", spec.layer, "layer");
  plot->add_option("--kind", spec.kind, "pre or post");
  plot->add_option("--step", step, "training step (default: last)");
  plot->add_flag("--log-y", spec.log_y, "log10 value axis");
  plot->add_option("--title", spec.title, "plot title");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) return cmd_train(train_f, out);
    if (*sweep_cmd) return cmd_sweep(sweep_f, out, err);
    if (*inf) return cmd_infwidth(inf_f, out, err);
    if (*act) return cmd_check_activation(act_names, trials, act_f, out);
    if (*data) return cmd_check_dataset(data_f, tol, jitter, attempts, out);
    if (*plot) {
      spec.step = step;
      return cmd_plot(plot_f, csv, spec, out);
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace muplab
