#include "muplab/sweep.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "muplab/diagnostics.hpp"

namespace muplab {

std::string run_id(const ExperimentConfig& config, Scheme scheme,
                   std::size_t width, std::uint64_t seed) {
  const std::uint64_t h =
      hash64({hash_bytes(to_json(config).dump()), static_cast<std::uint64_t>(scheme),
              width, seed});
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

std::uint64_t run_seed(const ExperimentConfig& config, Scheme scheme,
                       std::size_t width, std::uint64_t seed) {
  return hash64({config.base_seed, static_cast<std::uint64_t>(scheme), width, seed});
}

namespace {

bool wants(const ExperimentConfig& c, std::string_view metric) {
  for (const auto& m : c.metrics)
    if (m == metric) return true;
  return false;
}

}  // namespace

std::vector<MetricRow> metric_rows(const ExperimentConfig& config,
                                   const TrainResult& result,
                                   const std::string& id, Scheme scheme,
                                   std::size_t width, std::uint64_t seed) {
  std::vector<MetricRow> rows;
  const std::string tag(to_string(scheme));
  auto add = [&](std::size_t layer, std::string kind, std::string metric,
                 std::size_t step, double value) {
    rows.push_back({id, tag, width, seed, layer, std::move(kind), std::move(metric),
                    step, value});
  };
  for (std::size_t step : config.snapshot_steps) {
    const double loss =
        step < result.loss_history.size() ? result.loss_history[step] : result.final_loss;
    add(0, "output", "loss", step, loss);
    for (std::size_t layer = 1; layer <= config.depth; ++layer) {
      for (FeatureKind kind : {FeatureKind::Pre, FeatureKind::Post}) {
        const FeatureSnapshot* snap = result.find(layer, kind, step);
        const FeatureSnapshot* base = result.find(layer, kind, 0);
        if (!snap || !base) continue;
        const std::string k(to_string(kind));
        if (wants(config, "feature_change"))
          add(layer, k, "feature_change", step, feature_change(*snap, *base).mean);
        if (wants(config, "min_eig"))
          add(layer, k, "min_eig", step, diversity_min_eig(*snap));
        if (wants(config, "min_eig_raw"))
          add(layer, k, "min_eig_raw", step, diversity_min_eig_raw(*snap));
        if (wants(config, "spacetime_min_eig"))
          add(layer, k, "spacetime_min_eig", step, spacetime_min_eig(*base, *snap));
        if (wants(config, "spectrum") && snap->features.rows() >= 2) {
          for (const auto& [p, v] : spectrum(*snap).percentile_curve) {
            char name[32];
            std::snprintf(name, sizeof name, "spectrum_p%02d", static_cast<int>(p));
            add(layer, k, name, step, v);
          }
        }
      }
    }
  }
  return rows;
}

RunOutcome run_one(const ExperimentConfig& config, const Dataset& data,
                   Scheme scheme, std::size_t width, std::uint64_t seed,
                   bool keep_result) {
  RunOutcome out;
  const std::string id = run_id(config, scheme, width, seed);
  try {
    Rng rng(run_seed(config, scheme, width, seed));
    const LayerPlan plan = layer_plan(scheme, config.depth, data.dim(), width, config.eta);
    Mlp mlp = init(plan, activation(config.activation), rng);
    TrainOptions opts;
    opts.steps = config.steps;
    opts.batch_size = config.batch_size;
    opts.snapshot_steps = config.snapshot_steps;
    TrainResult result = train(mlp, data, config.loss, opts);
    out.rows = metric_rows(config, result, id, scheme, width, seed);
    for (const auto& r : out.rows)
      if (!std::isfinite(r.value))
        throw NumericalDivergence(r.step, "metric " + r.metric + " is not finite");
    if (keep_result) out.result = std::move(result);
  } catch (const std::exception& e) {
    double where = 0.0;
    if (const auto* div = dynamic_cast<const NumericalDivergence*>(&e))
      where = static_cast<double>(div->step());
    out.rows = {{id, std::string(to_string(scheme)), width, seed, 0, "none", "error", 0,
                 where}};
    out.error = e.what();
  }
  return out;
}

std::vector<MetricRow> sweep(const ExperimentConfig& config, const Dataset& data,
                             std::size_t workers) {
  struct Job {
    Scheme scheme;
    std::size_t width;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Scheme s : config.schemes)
    for (std::size_t w : config.widths)
      for (std::uint64_t seed : config.seeds) jobs.push_back({s, w, seed});
  std::vector<std::vector<MetricRow>> per_run(jobs.size());
  parallel_blocks(jobs.size(), workers, [&](std::size_t k) {
    per_run[k] = run_one(config, data, jobs[k].scheme, jobs[k].width, jobs[k].seed).rows;
  });
  std::vector<MetricRow> rows;
  for (auto& r : per_run)
    rows.insert(rows.end(), std::make_move_iterator(r.begin()),
                std::make_move_iterator(r.end()));
  return rows;
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream& out, const std::vector<MetricRow>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows)
    out << r.run_id << ',' << r.scheme << ',' << r.width << ',' << r.seed << ','
        << r.layer << ',' << r.kind << ',' << r.metric << ',' << r.step << ','
        << format_value(r.value) << '\n';
}

void write_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  write_csv(out, rows);
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::vector<MetricRow> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileFormat("cannot open CSV '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw FileFormat("'" + path.string() + "' does not start with the metrics header");
  std::vector<MetricRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9)
      throw FileFormat("line " + std::to_string(lineno) + " has " +
                       std::to_string(cells.size()) + " fields, expected 9");
    try {
      rows.push_back({cells[0], cells[1], std::stoull(cells[2]), std::stoull(cells[3]),
                      std::stoull(cells[4]), cells[5], cells[6], std::stoull(cells[7]),
                      std::stod(cells[8])});
    } catch (const std::logic_error&) {
      throw FileFormat("line " + std::to_string(lineno) + " has a malformed number");
    }
  }
  return rows;
}

}  // namespace muplab
