#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "muplab/config.hpp"

namespace muplab {

/// One line of the metrics CSV.
struct MetricRow {
  std::string run_id;
  std::string scheme;
  std::size_t width = 0;
  std::uint64_t seed = 0;
  std::size_t layer = 0;
  std::string kind;
  std::string metric;
  std::size_t step = 0;
  double value = 0.0;
};

inline constexpr const char* kCsvHeader =
    "run_id,scheme,width,seed,layer,kind,metric,step,value";

/// 16 hex digits hashing the canonical config JSON with scheme, width, seed.
std::string run_id(const ExperimentConfig& config, Scheme scheme,
                   std::size_t width, std::uint64_t seed);

/// Seed of a run's generator: hash64(base_seed, scheme, width, trial seed).
std::uint64_t run_seed(const ExperimentConfig& config, Scheme scheme,
                       std::size_t width, std::uint64_t seed);

/// Diagnostics rows for one finished run (loss rows use layer 0, kind
/// "output").
std::vector<MetricRow> metric_rows(const ExperimentConfig& config,
                                   const TrainResult& result,
                                   const std::string& id, Scheme scheme,
                                   std::size_t width, std::uint64_t seed);

struct RunOutcome {
  std::vector<MetricRow> rows;
  TrainResult result;  // empty on failure
  std::string error;
};

/// Trains one (scheme, width, seed) run. Failures become a single
/// metric="error" row (value = failing step, or 0).
RunOutcome run_one(const ExperimentConfig& config, const Dataset& data,
                   Scheme scheme, std::size_t width, std::uint64_t seed,
                   bool keep_result = false);

/// Every (scheme, width, seed) run, in that nesting order, on up to
/// `workers` threads. Rows come back in run order whatever the worker count.
std::vector<MetricRow> sweep(const ExperimentConfig& config, const Dataset& data,
                             std::size_t workers);

std::string format_value(double v);
void write_csv(std::ostream& out, const std::vector<MetricRow>& rows);
void write_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_csv(const std::filesystem::path& path);

}  // namespace muplab
