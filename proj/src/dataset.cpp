#include "muplab/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "muplab/diagnostics.hpp"

namespace muplab {

Eigen::MatrixXd Dataset::input_columns() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(dim()),
                      static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i)
    out.col(static_cast<Eigen::Index>(i)) = inputs[i];
  return out;
}

void Dataset::validate() const {
  if (inputs.empty()) throw ValidationError("dataset is empty");
  if (labels.size() != inputs.size())
    throw DimensionMismatch("dataset has " + std::to_string(inputs.size()) +
                            " inputs but " + std::to_string(labels.size()) +
                            " labels");
  for (const auto& x : inputs)
    if (x.size() != inputs.front().size())
      throw DimensionMismatch("dataset inputs differ in dimension");
  for (double y : labels)
    if (y != 1.0 && y != -1.0)
      throw ValidationError("dataset labels must be +1 or -1");
}

std::string_view to_string(PixelScale s) {
  switch (s) {
    case PixelScale::Raw255: return "raw255";
    case PixelScale::Unit: return "unit";
    case PixelScale::PlusMinusOne: return "pm1";
  }
  return "?";
}

PixelScale parse_pixel_scale(std::string_view s) {
  if (s == "raw255") return PixelScale::Raw255;
  if (s == "unit") return PixelScale::Unit;
  if (s == "pm1") return PixelScale::PlusMinusOne;
  throw ValidationError("unknown pixel preprocessing '" + std::string(s) +
                        "' (expected raw255, unit or pm1)");
}

double scale_pixel(std::uint8_t byte, PixelScale s) {
  const double v = static_cast<double>(byte);
  switch (s) {
    case PixelScale::Raw255: return v;
    case PixelScale::Unit: return v / 255.0;
    case PixelScale::PlusMinusOne: return 2.0 * (v / 255.0) - 1.0;
  }
  return v;
}

namespace {

std::vector<std::filesystem::path> batch_files(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(path)) return {path};
  if (!fs::is_directory(path))
    throw FileFormat("CIFAR-10 path '" + path.string() + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(path))
    if (e.is_regular_file() && e.path().extension() == ".bin")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw FileFormat("no .bin batch files under '" + path.string() + "'");
  return files;
}

}  // namespace

Dataset load_cifar10(const std::filesystem::path& path, int class_pos,
                     int class_neg, std::size_t count, Rng& rng,
                     PixelScale scale) {
  if (class_pos == class_neg || class_pos < 0 || class_pos > 9 ||
      class_neg < 0 || class_neg > 9)
    throw ValidationError("CIFAR-10 classes must be two distinct values in 0..9");

  struct Record {
    double label;
    std::vector<std::uint8_t> pixels;
  };
  std::vector<Record> pool;
  for (const auto& file : batch_files(path)) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw FileFormat("cannot open '" + file.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() % kCifarRecordBytes != 0)
      throw FileFormat("'" + file.string() + "' has " +
                       std::to_string(bytes.size()) +
                       " bytes, not a multiple of 3073");
    for (std::size_t off = 0; off < bytes.size(); off += kCifarRecordBytes) {
      const int label = bytes[off];
      if (label != class_pos && label != class_neg) continue;
      pool.push_back({label == class_pos ? 1.0 : -1.0,
                      std::vector<std::uint8_t>(
                          bytes.begin() + static_cast<std::ptrdiff_t>(off + 1),
                          bytes.begin() + static_cast<std::ptrdiff_t>(off + kCifarRecordBytes))});
    }
  }
  if (pool.size() < count)
    throw InsufficientSamples("requested " + std::to_string(count) +
                              " records but only " + std::to_string(pool.size()) +
                              " match the two classes");

  // Partial Fisher-Yates: the first `count` slots become the sample.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  Dataset out;
  for (std::size_t i = 0; i < count; ++i) {
    Vec x(static_cast<Eigen::Index>(kCifarPixels));
    for (std::size_t k = 0; k < kCifarPixels; ++k)
      x(static_cast<Eigen::Index>(k)) = scale_pixel(pool[i].pixels[k], scale);
    out.inputs.push_back(std::move(x));
    out.labels.push_back(pool[i].label);
  }
  return out;
}

Dataset synth_gaussian_dataset(std::size_t d, std::size_t m, Rng& rng) {
  if (d < 1 || m < 1) throw ValidationError("synthetic dataset needs d, m >= 1");
  Dataset out;
  for (std::size_t i = 0; i < m; ++i) {
    out.inputs.push_back(gaussian_matrix(rng, d, 1, 1.0).col(0));
    out.labels.push_back(i % 2 == 0 ? 1.0 : -1.0);
  }
  if (m < 2) return out;
  constexpr int kAttempts = 10;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    const auto report =
        check_dataset_assumption(out.inputs, default_assumption_tol(out.inputs));
    if (report.ok) return out;
    for (auto& x : out.inputs) x = gaussian_matrix(rng, d, 1, 1.0).col(0);
  }
  throw AssumptionUnsatisfiable(
      "synthetic dataset violates the inner-product assumption after 10 draws");
}

Dataset jitter_dataset(const Dataset& data, double epsilon, Rng& rng) {
  Dataset out = data;
  out.inputs = jitter_points(data.inputs, epsilon, rng);
  return out;
}

}  // namespace muplab
