#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "muplab/numerics.hpp"

namespace muplab {

/// Inputs of dimension d with +-1 labels.
struct Dataset {
  std::vector<Vec> inputs;
  std::vector<double> labels;

  std::size_t size() const { return inputs.size(); }
  std::size_t dim() const { return inputs.empty() ? 0 : inputs.front().size(); }
  /// Inputs as the columns of a d x m matrix.
  Eigen::MatrixXd input_columns() const;
  void validate() const;
};

/// Pixel byte -> input value mapping for CIFAR-10.
enum class PixelScale { Raw255, Unit, PlusMinusOne };

std::string_view to_string(PixelScale s);
PixelScale parse_pixel_scale(std::string_view s);
double scale_pixel(std::uint8_t byte, PixelScale s);

constexpr std::size_t kCifarRecordBytes = 3073;
constexpr std::size_t kCifarPixels = 3072;

/// Reads CIFAR-10 binary batches (a single file or every *.bin file in a
/// directory, in lexicographic order). Each 3073-byte record is one label
/// byte followed by the R, G and B planes of a 32x32 image, row-major. Records
/// of class_pos get label +1 and records of class_neg get -1; `count` of them
/// are drawn without replacement using rng.
Dataset load_cifar10(const std::filesystem::path& path, int class_pos,
                     int class_neg, std::size_t count, Rng& rng,
                     PixelScale scale = PixelScale::PlusMinusOne);

/// i.i.d. standard normal inputs with labels +1, -1, +1, ...; redraws the
/// noise (up to 10 attempts) until the pairwise inner-product check passes.
Dataset synth_gaussian_dataset(std::size_t d, std::size_t m, Rng& rng);

/// Adds N(0, epsilon^2) noise to every input coordinate; labels are kept.
Dataset jitter_dataset(const Dataset& data, double epsilon, Rng& rng);

}  // namespace muplab
