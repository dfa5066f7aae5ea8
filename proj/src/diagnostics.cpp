#include "muplab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace muplab {

std::string_view to_string(FeatureKind k) {
  return k == FeatureKind::Pre ? "pre" : "post";
}

FeatureKind parse_feature_kind(std::string_view s) {
  if (s == "pre") return FeatureKind::Pre;
  if (s == "post") return FeatureKind::Post;
  throw ValidationError("unknown feature kind '" + std::string(s) + "'");
}

namespace {

void require_same_shape(const FeatureSnapshot& a, const FeatureSnapshot& b) {
  if (a.features.rows() != b.features.rows() ||
      a.features.cols() != b.features.cols())
    throw DimensionMismatch("feature snapshots differ in shape");
  if (a.layer != b.layer || a.kind != b.kind)
    throw ValidationError("feature snapshots come from different layers/kinds");
}

double width_of(const FeatureSnapshot& s) {
  return static_cast<double>(std::max<Eigen::Index>(1, s.features.cols()));
}

}  // namespace

FeatureChange feature_change(const FeatureSnapshot& snap_t,
                             const FeatureSnapshot& snap_0) {
  require_same_shape(snap_t, snap_0);
  FeatureChange out;
  const Eigen::Index m = snap_0.features.rows();
  out.per_sample.resize(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    const double base = snap_0.features.row(i).norm();
    if (!(base > 0.0))
      throw ZeroInitialFeature("sample " + std::to_string(i) +
                               " has a zero initial feature vector");
    const double r = (snap_t.features.row(i) - snap_0.features.row(i)).norm() / base;
    out.per_sample[static_cast<std::size_t>(i)] = r;
    out.mean += r;
  }
  if (m > 0) out.mean /= static_cast<double>(m);
  return out;
}

double diversity_min_eig(const FeatureSnapshot& snap) {
  if (snap.features.rows() < 1)
    throw ValidationError("diversity_min_eig: empty snapshot");
  return min_eigenvalue(gram_rows(snap.features, width_of(snap)));
}

double diversity_min_eig_raw(const FeatureSnapshot& snap) {
  if (snap.features.rows() < 1)
    throw ValidationError("diversity_min_eig_raw: empty snapshot");
  return min_eigenvalue(gram_rows(snap.features, 1.0));
}

double spacetime_min_eig(const FeatureSnapshot& snap_0,
                         const FeatureSnapshot& snap_t) {
  require_same_shape(snap_t, snap_0);
  const Eigen::Index m = snap_0.features.rows();
  Mat rows(2 * m, snap_0.features.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    rows.row(2 * i) = snap_0.features.row(i);
    rows.row(2 * i + 1) = snap_t.features.row(i);
  }
  return min_eigenvalue(gram_rows(rows, width_of(snap_0)));
}

SpectrumReport spectrum(const FeatureSnapshot& snap,
                        std::vector<double> percents) {
  const Eigen::Index m = snap.features.rows();
  if (m < 2) throw ValidationError("spectrum: need at least two samples");
  if (percents.empty())
    for (int p = 0; p <= 100; p += 10) percents.push_back(p);
  SpectrumReport out;
  out.eigenvalues = sym_eig(gram_rows(snap.features, width_of(snap))).eigenvalues;
  for (double p : percents) {
    if (!(p >= 0.0 && p <= 100.0))
      throw ValidationError("spectrum: percent outside [0, 100]");
    const auto k = static_cast<Eigen::Index>(
        std::ceil(p * static_cast<double>(m - 1) / 100.0 - 1e-12));
    out.percentile_curve.emplace_back(p, out.eigenvalues(m - 1 - k));
  }
  return out;
}

AssumptionReport check_dataset_assumption(std::span<const Vec> points,
                                          double tol) {
  const std::size_t m = points.size();
  if (m < 2) throw ValidationError("dataset check needs at least two points");
  for (const auto& p : points)
    if (p.size() != points[0].size())
      throw DimensionMismatch("dataset points differ in dimension");

  Mat ip(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) ip(i, j) = std::abs(points[i].dot(points[j]));

  AssumptionReport r;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      if (ip(i, j) <= tol)
        r.violations.push_back({ViolationKind::ZeroInnerProduct, i, j, 0, ip(i, j)});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      for (std::size_t k = j + 1; k < m; ++k) {
        if (k == i) continue;
        const double gap = std::abs(ip(i, j) - ip(i, k));
        if (gap <= tol)
          r.violations.push_back({ViolationKind::Collision, i, j, k, gap});
      }
    }
  }
  r.ok = r.violations.empty();
  return r;
}

double default_assumption_tol(std::span<const Vec> points) {
  double worst = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i; j < points.size(); ++j)
      worst = std::max(worst, std::abs(points[i].dot(points[j])));
  return 1e-9 * worst;
}

std::vector<Vec> jitter_points(std::span<const Vec> points, double epsilon,
                               Rng& rng) {
  if (!(epsilon >= 0.0)) throw ValidationError("jitter: epsilon must be >= 0");
  std::vector<Vec> out(points.begin(), points.end());
  for (auto& p : out)
    for (Eigen::Index k = 0; k < p.size(); ++k) p(k) += epsilon * rng.normal();
  return out;
}

std::string describe(const Violation& v) {
  std::ostringstream os;
  if (v.kind == ViolationKind::ZeroInnerProduct) {
    os << "zero inner product: |<xi_" << v.i << ", xi_" << v.j
       << ">| = " << v.gap;
  } else {
    os << "collision: ||<xi_" << v.i << ", xi_" << v.j << ">| - |<xi_" << v.i
       << ", xi_" << v.k << ">|| = " << v.gap;
  }
  return os.str();
}

}  // namespace muplab
