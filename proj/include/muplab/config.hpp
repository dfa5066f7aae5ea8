#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "muplab/dataset.hpp"
#include "muplab/infwidth.hpp"
#include "muplab/network.hpp"
#include "muplab/schemes.hpp"

namespace muplab {

using Json = nlohmann::json;

/// Where the inputs come from. kind is "synthetic" (d, m, seed), "cifar10"
/// (path, classes, count, preprocessing, seed) or "points" (explicit points
/// with optional labels; alternating +1/-1 when omitted).
struct DatasetSpec {
  std::string kind = "synthetic";
  std::size_t d = 128;
  std::size_t m = 10;
  std::uint64_t seed = 42;
  std::string path;
  int class_pos = 0;
  int class_neg = 1;
  std::size_t count = 10;
  PixelScale preprocessing = PixelScale::PlusMinusOne;
  std::vector<std::vector<double>> points;
  std::vector<double> labels;
};

/// Metric names accepted in ExperimentConfig::metrics.
const std::vector<std::string>& metric_names();

struct ExperimentConfig {
  std::vector<Scheme> schemes{Scheme::MuP};
  std::vector<std::size_t> widths{64};
  std::vector<std::uint64_t> seeds{42, 43, 44, 45, 46, 47, 48, 49, 50, 51};
  std::uint64_t base_seed = 0;
  std::size_t depth = 3;
  std::string activation = "silu";
  LossKind loss = LossKind::MSE;
  double eta = 0.1;
  std::size_t steps = 1000;
  std::size_t batch_size = 0;
  std::vector<std::size_t> snapshot_steps{0, 1000};
  DatasetSpec dataset;
  std::vector<std::string> metrics{"feature_change", "min_eig", "min_eig_raw",
                                   "spacetime_min_eig", "spectrum"};
  std::string output_dir = "out";
  std::size_t workers = 0;  // 0: MUPLAB_WORKERS or 1
};

struct InfRunConfig {
  InfConfig inf;
  DatasetSpec dataset;
  std::uint64_t seed = 42;
  std::string output_dir = "out";
};

/// Parsers reject unknown keys, wrong types and out-of-range values with
/// ConfigError.
DatasetSpec parse_dataset_spec(const Json& j);
Json to_json(const DatasetSpec& s);
ExperimentConfig parse_experiment(const Json& j);
Json to_json(const ExperimentConfig& c);
InfRunConfig parse_infwidth(const Json& j);
Json to_json(const InfRunConfig& c);

/// Reads a JSON file; a missing or unparsable file is a ConfigError.
Json load_json_file(const std::filesystem::path& path);

Dataset make_dataset(const DatasetSpec& spec);

/// Worker count: the explicit value if nonzero, else MUPLAB_WORKERS, else 1.
std::size_t resolve_workers(std::size_t requested);

/// 64-bit hash of a byte string (used for run ids).
std::uint64_t hash_bytes(std::string_view bytes);

}  // namespace muplab
