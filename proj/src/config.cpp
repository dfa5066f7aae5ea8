#include "muplab/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

namespace muplab {
namespace {

void require_object(const Json& j, std::string_view where,
                    std::initializer_list<std::string_view> allowed) {
  if (!j.is_object())
    throw ConfigError(std::string(where) + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
  }
}

template <class T>
T get(const Json& j, const char* key, std::string_view where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(where) + "." + key + ": " + e.what());
  }
}

template <class T>
void read(const Json& j, const char* key, T& out, std::string_view where) {
  if (j.contains(key)) out = get<T>(j, key, where);
}

std::size_t read_count(const Json& j, const char* key, std::size_t fallback,
                       std::string_view where) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    throw ConfigError(std::string(where) + "." + key +
                      ": expected a non-negative integer");
  return v.get<std::size_t>();
}

double read_real(const Json& j, const char* key, double fallback,
                 std::string_view where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number())
    throw ConfigError(std::string(where) + "." + key + ": expected a number");
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v))
    throw ConfigError(std::string(where) + "." + key + ": must be finite");
  return v;
}

template <class Fn>
auto wrap(std::string_view where, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const ValidationError& e) {
    throw ConfigError(std::string(where) + ": " + e.what());
  }
}

}  // namespace

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{
      "feature_change", "min_eig", "min_eig_raw", "spacetime_min_eig", "spectrum"};
  return names;
}

DatasetSpec parse_dataset_spec(const Json& j) {
  constexpr std::string_view where = "dataset";
  require_object(j, where,
                 {"kind", "d", "m", "seed", "path", "classes", "count",
                  "preprocessing", "points", "labels"});
  DatasetSpec s;
  read(j, "kind", s.kind, where);
  if (s.kind != "synthetic" && s.kind != "cifar10" && s.kind != "points")
    throw ConfigError("dataset.kind must be synthetic, cifar10 or points");
  s.d = read_count(j, "d", s.d, where);
  s.m = read_count(j, "m", s.m, where);
  if (j.contains("seed")) s.seed = get<std::uint64_t>(j, "seed", where);
  read(j, "path", s.path, where);
  if (j.contains("classes")) {
    const auto cls = get<std::vector<int>>(j, "classes", where);
    if (cls.size() != 2) throw ConfigError("dataset.classes must list two classes");
    s.class_pos = cls[0];
    s.class_neg = cls[1];
  }
  s.count = read_count(j, "count", s.count, where);
  if (j.contains("preprocessing"))
    s.preprocessing = wrap(where, [&] {
      return parse_pixel_scale(get<std::string>(j, "preprocessing", where));
    });
  read(j, "points", s.points, where);
  read(j, "labels", s.labels, where);
  if (s.kind == "synthetic" && (s.d < 1 || s.m < 1))
    throw ConfigError("dataset: synthetic d and m must be >= 1");
  if (s.kind == "cifar10" && s.path.empty())
    throw ConfigError("dataset: cifar10 needs a path");
  if (s.kind == "points" && s.points.empty())
    throw ConfigError("dataset: points list is empty");
  return s;
}

Json to_json(const DatasetSpec& s) {
  Json j;
  j["kind"] = s.kind;
  if (s.kind == "synthetic") {
    j["d"] = s.d;
    j["m"] = s.m;
    j["seed"] = s.seed;
  } else if (s.kind == "cifar10") {
    j["path"] = s.path;
    j["classes"] = {s.class_pos, s.class_neg};
    j["count"] = s.count;
    j["preprocessing"] = std::string(to_string(s.preprocessing));
    j["seed"] = s.seed;
  } else {
    j["points"] = s.points;
    if (!s.labels.empty()) j["labels"] = s.labels;
  }
  return j;
}

ExperimentConfig parse_experiment(const Json& j) {
  constexpr std::string_view where = "config";
  require_object(j, where,
                 {"schemes", "widths", "seeds", "base_seed", "depth", "activation",
                  "loss", "eta", "steps", "batch_size", "snapshot_steps",
                  "dataset", "metrics", "output_dir", "workers"});
  ExperimentConfig c;
  if (j.contains("schemes")) {
    c.schemes.clear();
    for (const auto& tag : get<std::vector<std::string>>(j, "schemes", where))
      c.schemes.push_back(wrap(where, [&] { return parse_scheme(tag); }));
    if (c.schemes.empty()) throw ConfigError("config.schemes is empty");
  }
  read(j, "widths", c.widths, where);
  if (c.widths.empty()) throw ConfigError("config.widths is empty");
  for (auto w : c.widths)
    if (w < 1) throw ConfigError("config.widths entries must be >= 1");
  read(j, "seeds", c.seeds, where);
  if (c.seeds.empty()) throw ConfigError("config.seeds is empty");
  if (j.contains("base_seed")) c.base_seed = get<std::uint64_t>(j, "base_seed", where);
  c.depth = read_count(j, "depth", c.depth, where);
  if (c.depth < 1) throw ConfigError("config.depth must be >= 1");
  read(j, "activation", c.activation, where);
  wrap(where, [&] { return &activation(c.activation); });
  if (j.contains("loss"))
    c.loss = wrap(where, [&] { return parse_loss(get<std::string>(j, "loss", where)); });
  c.eta = read_real(j, "eta", c.eta, where);
  if (!(c.eta > 0.0)) throw ConfigError("config.eta must be positive");
  c.steps = read_count(j, "steps", c.steps, where);
  c.batch_size = read_count(j, "batch_size", c.batch_size, where);
  if (j.contains("snapshot_steps")) {
    c.snapshot_steps = get<std::vector<std::size_t>>(j, "snapshot_steps", where);
  } else {
    c.snapshot_steps = {0, c.steps};
    std::sort(c.snapshot_steps.begin(), c.snapshot_steps.end());
    c.snapshot_steps.erase(std::unique(c.snapshot_steps.begin(), c.snapshot_steps.end()),
                           c.snapshot_steps.end());
  }
  for (auto s : c.snapshot_steps)
    if (s > c.steps) throw ConfigError("config.snapshot_steps entries must be <= steps");
  if (j.contains("dataset")) c.dataset = parse_dataset_spec(j.at("dataset"));
  if (j.contains("metrics")) {
    c.metrics = get<std::vector<std::string>>(j, "metrics", where);
    for (const auto& m : c.metrics)
      if (std::find(metric_names().begin(), metric_names().end(), m) ==
          metric_names().end())
        throw ConfigError("config.metrics: unknown metric '" + m + "'");
  }
  read(j, "output_dir", c.output_dir, where);
  c.workers = read_count(j, "workers", c.workers, where);
  return c;
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  std::vector<std::string> schemes;
  for (auto s : c.schemes) schemes.emplace_back(to_string(s));
  j["schemes"] = schemes;
  j["widths"] = c.widths;
  j["seeds"] = c.seeds;
  j["base_seed"] = c.base_seed;
  j["depth"] = c.depth;
  j["activation"] = c.activation;
  j["loss"] = std::string(to_string(c.loss));
  j["eta"] = c.eta;
  j["steps"] = c.steps;
  j["batch_size"] = c.batch_size;
  j["snapshot_steps"] = c.snapshot_steps;
  j["dataset"] = to_json(c.dataset);
  j["metrics"] = c.metrics;
  j["output_dir"] = c.output_dir;
  j["workers"] = c.workers;
  return j;
}

InfRunConfig parse_infwidth(const Json& j) {
  constexpr std::string_view where = "infwidth";
  require_object(j, where,
                 {"depth", "particles", "eta", "steps", "loss", "activation",
                  "input_scale", "jitter", "workers", "memory_limit_mb",
                  "dataset", "seed", "output_dir"});
  InfRunConfig c;
  c.inf.input_scale = InputScale::Unit;
  c.inf.depth = read_count(j, "depth", c.inf.depth, where);
  c.inf.particles = read_count(j, "particles", c.inf.particles, where);
  c.inf.eta = read_real(j, "eta", c.inf.eta, where);
  c.inf.steps = read_count(j, "steps", c.inf.steps, where);
  if (j.contains("loss"))
    c.inf.loss = wrap(where, [&] { return parse_loss(get<std::string>(j, "loss", where)); });
  read(j, "activation", c.inf.activation, where);
  wrap(where, [&] { return &activation(c.inf.activation); });
  if (j.contains("input_scale"))
    c.inf.input_scale = wrap(where, [&] {
      return parse_input_scale(get<std::string>(j, "input_scale", where));
    });
  c.inf.jitter = read_real(j, "jitter", c.inf.jitter, where);
  c.inf.workers = read_count(j, "workers", 0, where);
  c.inf.memory_limit_mb = read_real(j, "memory_limit_mb", c.inf.memory_limit_mb, where);
  if (j.contains("dataset")) {
    c.dataset = parse_dataset_spec(j.at("dataset"));
  } else {
    c.dataset.d = 16;
    c.dataset.m = 4;
  }
  if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed", where);
  read(j, "output_dir", c.output_dir, where);
  if (c.inf.depth < 1) throw ConfigError("infwidth.depth must be >= 1");
  if (c.inf.steps < 1) throw ConfigError("infwidth.steps must be >= 1");
  if (c.inf.particles < 2) throw ConfigError("infwidth.particles must be >= 2");
  if (!(c.inf.eta > 0.0)) throw ConfigError("infwidth.eta must be positive");
  if (!(c.inf.jitter >= 0.0)) throw ConfigError("infwidth.jitter must be >= 0");
  return c;
}

Json to_json(const InfRunConfig& c) {
  Json j;
  j["depth"] = c.inf.depth;
  j["particles"] = c.inf.particles;
  j["eta"] = c.inf.eta;
  j["steps"] = c.inf.steps;
  j["loss"] = std::string(to_string(c.inf.loss));
  j["activation"] = c.inf.activation;
  j["input_scale"] = std::string(to_string(c.inf.input_scale));
  j["jitter"] = c.inf.jitter;
  j["workers"] = c.inf.workers;
  j["memory_limit_mb"] = c.inf.memory_limit_mb;
  j["dataset"] = to_json(c.dataset);
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  return j;
}

Json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " +
                      e.what());
  }
}

Dataset make_dataset(const DatasetSpec& spec) {
  Rng rng(spec.seed);
  if (spec.kind == "synthetic") return synth_gaussian_dataset(spec.d, spec.m, rng);
  if (spec.kind == "cifar10")
    return load_cifar10(spec.path, spec.class_pos, spec.class_neg, spec.count, rng,
                        spec.preprocessing);
  Dataset out;
  for (std::size_t i = 0; i < spec.points.size(); ++i) {
    out.inputs.push_back(Eigen::Map<const Vec>(
        spec.points[i].data(), static_cast<Eigen::Index>(spec.points[i].size())));
    out.labels.push_back(spec.labels.empty() ? (i % 2 == 0 ? 1.0 : -1.0)
                                             : spec.labels.at(i));
  }
  if (!spec.labels.empty() && spec.labels.size() != spec.points.size())
    throw DimensionMismatch("dataset: points and labels differ in count");
  out.validate();
  return out;
}

std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MUPLAB_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return 1;
}

std::uint64_t hash_bytes(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  std::size_t i = 0;
  while (i < bytes.size()) {
    std::uint64_t word = 0;
    for (std::size_t k = 0; k < 8 && i < bytes.size(); ++k, ++i)
      word |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * k);
    h = hash64({h, word});
  }
  return hash64({h, bytes.size()});
}

}  // namespace muplab
