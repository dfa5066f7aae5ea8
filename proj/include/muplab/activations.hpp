#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "muplab/numerics.hpp"

namespace muplab {

/// A scalar activation with its first two derivatives.
///
/// `tail_residual(z)` is phi(z) minus the affine asymptote of phi in the
/// direction of sign(z), evaluated without cancellation; it is what remains of
/// phi far out in the tails. `tail_rate` is the exponential decay rate of that
/// residual (1 for sigmoid and SiLU, 2 for tanh, 0 when the residual is not
/// exponential).
struct Activation {
  std::string name;
  double (*value)(double);
  double (*deriv)(double);
  double (*deriv2)(double);
  double (*tail_residual)(double);
  double tail_rate;
  // Affine asymptotes slope * z + intercept as z -> -inf and z -> +inf.
  double minus_slope, minus_intercept;
  double plus_slope, plus_intercept;
  bool smooth;
  // Documented analytically, never checked numerically: the level sets of phi
  // and phi' are countable.
  bool countable_level_sets;
};

/// Looks up "sigmoid", "tanh", "silu", "gelu", "relu" or "identity".
/// Throws ValidationError for unknown names.
const Activation& activation(std::string_view name);

std::vector<std::string> activation_names();

/// The activations with exponential tails that are expected to be GOOD.
std::vector<std::string> good_activation_names();

struct DecompositionTerm {
  double a;
  double b;
  double c;
};

/// Coefficients of x -> sum_i a_i phi(b_i x + c_i).
struct Decomposition {
  std::vector<DecompositionTerm> terms;

  double evaluate(const Activation& act, double x) const;
};

struct Grid {
  double lo = -20.0;
  double hi = 20.0;
  std::size_t count = 2001;

  double at(std::size_t k) const;
};

/// Outcome of a randomized falsification test for non-constancy.
///
/// `statistic` is the range of the tested function over the grid divided by
/// (1 + max |value|); `passed` holds exactly when it exceeds `threshold`. A
/// pass means no constancy was detected on this grid; it is evidence, not a
/// proof.
struct CheckReport {
  bool passed = false;
  double statistic = 0.0;
  double range = 0.0;
  double threshold = 0.0;
  Grid grid;
};

constexpr double kDefaultConstancyThreshold = 1e-6;

/// Throws InvalidCoefficients when two |b_i| coincide or every a_k b_k is 0.
void validate_decomposition(const Decomposition& d);

CheckReport check_nonconstant_decomposition(
    const Activation& act, const Decomposition& d, Grid grid = {},
    double threshold = kDefaultConstancyThreshold);

/// (r1 + phi(x)) (r2 + phi'(x)).
double derivative_product(const Activation& act, double r1, double r2, double x);

CheckReport check_derivative_product(
    const Activation& act, double r1, double r2, Grid grid = {},
    double threshold = kDefaultConstancyThreshold);

/// Least-squares slope of log|f(x) - asymptote(x)| against x on
/// [x0, x1], sampled at `samples` evenly spaced points. For a decomposition
/// of sigmoid this approaches -min_i |b_i|.
double estimate_tail_decay(const Activation& act, const Decomposition& d,
                           double x0, double x1, std::size_t samples = 64);

/// Random coefficients with a_i, b_i uniform on [-3, 3] \ {0} and c_i on
/// [-1, 1]; b is redrawn until every pair of |b_i| differs by more than 0.1.
Decomposition random_decomposition(Rng& rng, std::size_t terms);

/// Outcome of repeated randomized checks on one activation. Passing every
/// trial is evidence for the GOOD property, not a proof of it.
struct GoodSuiteReport {
  std::string activation;
  std::size_t trials = 0;
  std::size_t decomposition_passes = 0;
  std::size_t product_passes = 0;  // 0 when the activation is not smooth
  double min_decomposition_statistic = 0.0;
  double min_product_statistic = 0.0;

  bool all_passed() const {
    return decomposition_passes == trials && product_passes == trials;
  }
};

/// `trials` random decompositions (2 to 4 terms) and `trials` random
/// (r1, r2) in [-2, 2]^2, each checked on the default grid.
GoodSuiteReport run_good_suite(const Activation& act, std::size_t trials, Rng& rng);

/// max over the grid of |SiLU'(x) - (s(x) + x s(x)(1 - s(x)))|, s = sigmoid.
double silu_deriv_identity_check(std::span<const double> xs);

}  // namespace muplab
