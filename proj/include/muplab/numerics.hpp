#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "muplab/errors.hpp"

namespace muplab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// SplitMix64 finalizer. Bijective mixing of a 64-bit word.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Order-sensitive hash of a sequence of 64-bit words.
std::uint64_t hash64(std::initializer_list<std::uint64_t> words) noexcept;

/// Counter-based random stream.
///
/// Output k (k = 1, 2, ...) of a stream with seed s is
/// `mix64(s + k * 0x9E3779B97F4A7C15)`, i.e. SplitMix64. Uniforms take the top
/// 53 bits; normals use the Box-Muller transform and consume two uniforms per
/// pair (the sine branch is cached and returned by the next call). The whole
/// sequence depends only on the seed and the call order, so it is identical
/// across platforms and thread counts.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept : seed_(seed), state_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }

  /// Uniform on (0, 1].
  double uniform() noexcept {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * (1.0 - uniform());
  }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) noexcept;

  double normal() noexcept;

  /// Independent child stream keyed by `key`; depends on the seed only, not
  /// on how many values were drawn from this stream.
  Rng derive(std::uint64_t key) const noexcept {
    return Rng(hash64({seed_, key}));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// i.i.d. N(0, std^2) entries, drawn in row-major order.
Mat gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double std);

struct SymEigResult {
  Vec eigenvalues;  // ascending
  Mat eigenvectors;  // column k pairs with eigenvalues(k)
};

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Sweeps stop once the off-diagonal Frobenius norm drops below
/// `tol * ||A||_F`. Throws NonSymmetric if |A - A^T| exceeds 1e-12 ||A||_F.
SymEigResult sym_eig(const Mat& a, double tol = 1e-15);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Mat& a);

/// Lower-triangular L with L L^T = A + jitter I.
Mat cholesky(const Mat& a, double jitter = 0.0);

/// The 1e-10 * trace / dim jitter used on estimated covariances.
double default_jitter(const Mat& a);

/// K_ij = <f_i, f_j> / scale.
Mat gram(std::span<const Vec> features, double scale);

/// Same as `gram`, with the features stored as rows of a matrix.
Mat gram_rows(const Mat& rows, double scale);

bool all_finite(const Mat& m);
bool all_finite(const Vec& v);

/// Runs fn(block) for block in [0, n_blocks) on up to `workers` threads.
/// Blocks are handed out in a fixed interleaved order; callers that write
/// per-block results and combine them in block order get results that do not
/// depend on the worker count.
void parallel_blocks(std::size_t n_blocks, std::size_t workers,
                     const std::function<void(std::size_t)>& fn);

}  // namespace muplab
