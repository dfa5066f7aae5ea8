#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "muplab/numerics.hpp"

namespace muplab {

enum class FeatureKind { Pre, Post };

std::string_view to_string(FeatureKind k);
FeatureKind parse_feature_kind(std::string_view s);

/// Features of one layer at one training step; row i belongs to sample i,
/// so the matrix is m x n.
struct FeatureSnapshot {
  std::size_t layer = 0;
  FeatureKind kind = FeatureKind::Pre;
  std::size_t step = 0;
  Mat features;
};

struct FeatureChange {
  std::vector<double> per_sample;
  double mean = 0.0;
};

/// r_i = ||row_i(t) - row_i(0)|| / ||row_i(0)||.
FeatureChange feature_change(const FeatureSnapshot& snap_t,
                             const FeatureSnapshot& snap_0);

/// Minimum eigenvalue of K_ij = <row_i, row_j> / n.
double diversity_min_eig(const FeatureSnapshot& snap);

/// Same Gram without the 1/n width normalization.
double diversity_min_eig_raw(const FeatureSnapshot& snap);

/// Rows [h0_1, hT_1, h0_2, hT_2, ...], Gram normalized by n, min eigenvalue.
double spacetime_min_eig(const FeatureSnapshot& snap_0,
                         const FeatureSnapshot& snap_t);

struct SpectrumReport {
  Vec eigenvalues;  // ascending
  // (percent, eigenvalue); 0% is the largest eigenvalue, 100% the smallest.
  std::vector<std::pair<double, double>> percentile_curve;
};

/// Percentile p maps to the ceil(p (m - 1) / 100)-th largest eigenvalue
/// (zero-based) of the width-normalized Gram. Percents default to 0, 10, ..., 100.
SpectrumReport spectrum(const FeatureSnapshot& snap,
                        std::vector<double> percents = {});

enum class ViolationKind { ZeroInnerProduct, Collision };

/// For ZeroInnerProduct, k is unused and gap is |<xi_i, xi_j>|. For
/// Collision, gap is ||<xi_i, xi_j>| - |<xi_i, xi_k>||.
struct Violation {
  ViolationKind kind;
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t k = 0;
  double gap = 0.0;
};

struct AssumptionReport {
  bool ok = true;
  std::vector<Violation> violations;
};

/// Checks that no two distinct points are orthogonal and that, for every
/// point, the absolute inner products with the other points are pairwise
/// distinct (differences above tol).
AssumptionReport check_dataset_assumption(std::span<const Vec> points,
                                          double tol);

/// 1e-9 * max |<xi_i, xi_j>| over all pairs (including i = j).
double default_assumption_tol(std::span<const Vec> points);

/// Adds i.i.d. N(0, epsilon^2) noise to every coordinate, point by point.
std::vector<Vec> jitter_points(std::span<const Vec> points, double epsilon,
                               Rng& rng);

std::string describe(const Violation& v);

}  // namespace muplab
