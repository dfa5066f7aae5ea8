#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "muplab/sweep.hpp"

namespace muplab {

/// Selects rows of one metric at one (layer, kind, step) and draws value
/// against width (log2 axis), one polyline per scheme: the mean over seeds
/// with a min-max band.
struct PlotSpec {
  std::string metric = "feature_change";
  std::size_t layer = 2;
  std::string kind = "pre";
  std::optional<std::size_t> step;  // default: the largest step present
  bool log_y = false;
  std::string title;
};

struct PlotSeries {
  std::string scheme;
  std::vector<double> widths;
  std::vector<double> mean;
  std::vector<double> lo;
  std::vector<double> hi;
};

/// Throws EmptySelection when nothing matches (or, with log_y, nothing
/// positive matches).
std::vector<PlotSeries> select_series(const std::vector<MetricRow>& rows,
                                      const PlotSpec& spec);

std::string render_svg(const std::vector<PlotSeries>& series, const PlotSpec& spec);

/// Reads the CSV, renders, writes the SVG.
void emit_plot(const std::filesystem::path& csv, const PlotSpec& spec,
               const std::filesystem::path& svg);

}  // namespace muplab
