#include "muplab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <thread>

namespace muplab {

std::uint64_t hash64(std::initializer_list<std::uint64_t> words) noexcept {
  std::uint64_t h = 0x6A09E667F3BCC909ULL;
  for (std::uint64_t w : words) {
    h = mix64(h ^ mix64(w + 0x9E3779B97F4A7C15ULL));
  }
  return h;
}

std::uint64_t Rng::below(std::uint64_t bound) noexcept {
  if (bound <= 1) return 0;
  // Rejection sampling keeps the result exactly uniform.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t r = next_u64();
  while (r >= limit) r = next_u64();
  return r % bound;
}

double Rng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Mat gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double std) {
  if (!(std >= 0.0)) throw ValidationError("gaussian_matrix: std must be >= 0");
  Mat m(rows, cols);
  double* p = m.data();
  const std::size_t count = rows * cols;
  for (std::size_t k = 0; k < count; ++k) p[k] = std * rng.normal();
  return m;
}

namespace {

double off_diagonal_norm(const Mat& a) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace

SymEigResult sym_eig(const Mat& input, double tol) {
  if (input.rows() != input.cols())
    throw DimensionMismatch("sym_eig: matrix is not square");
  const Eigen::Index n = input.rows();
  const double norm = input.norm();
  if ((input - input.transpose()).cwiseAbs().maxCoeff() > 1e-12 * norm &&
      n > 0) {
    throw NonSymmetric("sym_eig: matrix is not symmetric");
  }

  Mat a = 0.5 * (input + input.transpose());
  Mat v = Mat::Identity(n, n);
  const double stop = tol * norm;
  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    if (off_diagonal_norm(a) <= stop) break;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rutishauser's formulation of the rotation angle.
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });
  SymEigResult out{Vec(n), Mat(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.eigenvalues(k) = a(order[k], order[k]);
    out.eigenvectors.col(k) = v.col(order[k]);
  }
  return out;
}

double min_eigenvalue(const Mat& a) { return sym_eig(a).eigenvalues(0); }

Mat cholesky(const Mat& a, double jitter) {
  if (a.rows() != a.cols())
    throw DimensionMismatch("cholesky: matrix is not square");
  const Eigen::Index n = a.rows();
  Mat l = Mat::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = a(j, j) + jitter;
    for (Eigen::Index k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > 0.0)) {
      std::ostringstream msg;
      msg << "cholesky: pivot " << j << " = " << pivot << " is not positive";
      throw NotPositiveDefinite(msg.str());
    }
    const double d = std::sqrt(pivot);
    l(j, j) = d;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = 0.5 * (a(i, j) + a(j, i));
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / d;
    }
  }
  return l;
}

double default_jitter(const Mat& a) {
  if (a.rows() == 0) return 0.0;
  return 1e-10 * a.trace() / static_cast<double>(a.rows());
}

Mat gram(std::span<const Vec> features, double scale) {
  if (!(scale > 0.0)) throw ValidationError("gram: scale must be positive");
  const std::size_t m = features.size();
  Mat k(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    if (features[i].size() != features[0].size())
      throw DimensionMismatch("gram: feature vectors differ in length");
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      const double v = features[i].dot(features[j]) / scale;
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

Mat gram_rows(const Mat& rows, double scale) {
  if (!(scale > 0.0)) throw ValidationError("gram: scale must be positive");
  const Eigen::Index m = rows.rows();
  Mat k(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i; j < m; ++j) {
      const double v = rows.row(i).dot(rows.row(j)) / scale;
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

bool all_finite(const Mat& m) { return m.allFinite(); }
bool all_finite(const Vec& v) { return v.allFinite(); }

void parallel_blocks(std::size_t n_blocks, std::size_t workers,
                     const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n_blocks));
  if (workers == 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) fn(b);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t b = w; b < n_blocks; b += workers) fn(b);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace muplab
