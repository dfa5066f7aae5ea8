#include "muplab/activations.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "muplab/errors.hpp"

namespace muplab {
namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}
double sigmoid_d(double z) {
  const double s = sigmoid(z);
  return s * (1.0 - s);
}
double sigmoid_d2(double z) {
  const double s = sigmoid(z);
  return s * (1.0 - s) * (1.0 - 2.0 * s);
}
double sigmoid_tail(double z) {
  return z >= 0.0 ? -sigmoid(-z) : sigmoid(z);
}

double tanh_v(double z) { return std::tanh(z); }
double tanh_d(double z) {
  const double t = std::tanh(z);
  return 1.0 - t * t;
}
double tanh_d2(double z) {
  const double t = std::tanh(z);
  return -2.0 * t * (1.0 - t * t);
}
double tanh_tail(double z) {
  return z >= 0.0 ? -2.0 / (std::exp(2.0 * z) + 1.0)
                  : 2.0 / (std::exp(-2.0 * z) + 1.0);
}

double silu(double z) { return z * sigmoid(z); }
double silu_d(double z) {
  const double s = sigmoid(z);
  return s + z * s * (1.0 - s);
}
double silu_d2(double z) {
  const double s = sigmoid(z);
  return s * (1.0 - s) * (2.0 + z * (1.0 - 2.0 * s));
}
double silu_tail(double z) {
  return z >= 0.0 ? -z * sigmoid(-z) : z * sigmoid(z);
}

// Gaussian CDF through the C library's erfc, which keeps full relative
// accuracy in the lower tail.
double gauss_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double gauss_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}
double gelu(double z) { return z * gauss_cdf(z); }
double gelu_d(double z) { return gauss_cdf(z) + z * gauss_pdf(z); }
double gelu_d2(double z) { return gauss_pdf(z) * (2.0 - z * z); }
double gelu_tail(double z) {
  return z >= 0.0 ? -z * gauss_cdf(-z) : z * gauss_cdf(z);
}

double relu(double z) { return z > 0.0 ? z : 0.0; }
double relu_d(double z) { return z > 0.0 ? 1.0 : 0.0; }
double zero_fn(double) { return 0.0; }

double identity(double z) { return z; }
double one_fn(double) { return 1.0; }

const std::array<Activation, 6>& registry() {
  static const std::array<Activation, 6> acts = {{
      {"sigmoid", sigmoid, sigmoid_d, sigmoid_d2, sigmoid_tail, 1.0, 0.0, 0.0,
       0.0, 1.0, true, true},
      {"tanh", tanh_v, tanh_d, tanh_d2, tanh_tail, 2.0, 0.0, -1.0, 0.0, 1.0,
       true, true},
      {"silu", silu, silu_d, silu_d2, silu_tail, 1.0, 0.0, 0.0, 1.0, 0.0, true,
       true},
      {"gelu", gelu, gelu_d, gelu_d2, gelu_tail, 0.0, 0.0, 0.0, 1.0, 0.0, true,
       true},
      {"relu", relu, relu_d, zero_fn, zero_fn, 0.0, 0.0, 0.0, 1.0, 0.0, false,
       false},
      {"identity", identity, one_fn, zero_fn, zero_fn, 0.0, 1.0, 0.0, 1.0, 0.0,
       true, false},
  }};
  return acts;
}

// phi(z) minus the asymptote of phi in direction `dir` (+1 or -1).
double residual_toward(const Activation& act, double z, double dir) {
  if ((z >= 0.0) == (dir > 0.0)) return act.tail_residual(z);
  const double slope = dir > 0.0 ? act.plus_slope : act.minus_slope;
  const double intercept = dir > 0.0 ? act.plus_intercept : act.minus_intercept;
  return act.value(z) - (slope * z + intercept);
}

CheckReport scan_for_constancy(const Grid& grid, double threshold,
                               auto&& fn) {
  if (grid.count < 2 || !(grid.hi > grid.lo))
    throw ValidationError("grid needs count >= 2 and hi > lo");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double max_abs = 0.0;
  for (std::size_t k = 0; k < grid.count; ++k) {
    const double v = fn(grid.at(k));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    max_abs = std::max(max_abs, std::abs(v));
  }
  CheckReport r;
  r.grid = grid;
  r.threshold = threshold;
  r.range = hi - lo;
  r.statistic = r.range / (1.0 + max_abs);
  r.passed = r.statistic > threshold;
  return r;
}

}  // namespace

const Activation& activation(std::string_view name) {
  for (const auto& a : registry())
    if (a.name == name) return a;
  throw ValidationError("unknown activation '" + std::string(name) + "'");
}

std::vector<std::string> activation_names() {
  std::vector<std::string> out;
  for (const auto& a : registry()) out.push_back(a.name);
  return out;
}

std::vector<std::string> good_activation_names() {
  return {"sigmoid", "tanh", "silu", "gelu"};
}

double Decomposition::evaluate(const Activation& act, double x) const {
  double s = 0.0;
  for (const auto& t : terms) s += t.a * act.value(t.b * x + t.c);
  return s;
}

double Grid::at(std::size_t k) const {
  if (count <= 1) return lo;
  return lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
}

void validate_decomposition(const Decomposition& d) {
  bool any_active = false;
  for (std::size_t i = 0; i < d.terms.size(); ++i) {
    const auto& ti = d.terms[i];
    if (!std::isfinite(ti.a) || !std::isfinite(ti.b) || !std::isfinite(ti.c))
      throw InvalidCoefficients("decomposition has non-finite coefficients");
    if (ti.a * ti.b != 0.0) any_active = true;
    for (std::size_t j = 0; j < i; ++j) {
      if (std::abs(ti.b) == std::abs(d.terms[j].b))
        throw InvalidCoefficients("decomposition terms " + std::to_string(j) +
                                  " and " + std::to_string(i) +
                                  " share the same |b|");
    }
  }
  if (!any_active)
    throw InvalidCoefficients("every a_k * b_k is zero; the check is vacuous");
}

CheckReport check_nonconstant_decomposition(const Activation& act,
                                            const Decomposition& d, Grid grid,
                                            double threshold) {
  validate_decomposition(d);
  return scan_for_constancy(grid, threshold,
                            [&](double x) { return d.evaluate(act, x); });
}

double derivative_product(const Activation& act, double r1, double r2,
                          double x) {
  return (r1 + act.value(x)) * (r2 + act.deriv(x));
}

CheckReport check_derivative_product(const Activation& act, double r1,
                                     double r2, Grid grid, double threshold) {
  if (!act.smooth)
    throw NonSmoothActivation("activation '" + act.name +
                              "' is not twice differentiable");
  return scan_for_constancy(grid, threshold, [&](double x) {
    return derivative_product(act, r1, r2, x);
  });
}

double estimate_tail_decay(const Activation& act, const Decomposition& d,
                           double x0, double x1, std::size_t samples) {
  if (!(x0 >= 5.0) || !(x1 > x0) || samples < 2)
    throw ValidationError("estimate_tail_decay: need 5 <= x0 < x1, samples >= 2");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    const double x = x0 + (x1 - x0) * static_cast<double>(k) /
                              static_cast<double>(samples - 1);
    double r = 0.0;
    for (const auto& t : d.terms) {
      if (t.b == 0.0) continue;  // constant term, its own asymptote
      r += t.a * residual_toward(act, t.b * x + t.c, t.b > 0.0 ? 1.0 : -1.0);
    }
    if (!(std::abs(r) >= 1e-300))
      throw ResidualUnderflow("tail residual vanished at x = " +
                              std::to_string(x));
    const double y = std::log(std::abs(r));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(samples);
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Decomposition random_decomposition(Rng& rng, std::size_t terms) {
  auto nonzero = [&] {
    double v = 0.0;
    while (v == 0.0) v = rng.uniform(-3.0, 3.0);
    return v;
  };
  Decomposition d;
  for (std::size_t k = 0; k < terms; ++k) {
    double b = 0.0;
    for (bool clash = true; clash;) {
      b = nonzero();
      clash = false;
      for (const auto& t : d.terms)
        if (std::abs(std::abs(t.b) - std::abs(b)) <= 0.1) clash = true;
    }
    const double a = nonzero();
    d.terms.push_back({a, b, rng.uniform(-1.0, 1.0)});
  }
  return d;
}

GoodSuiteReport run_good_suite(const Activation& act, std::size_t trials, Rng& rng) {
  GoodSuiteReport r;
  r.activation = act.name;
  r.trials = trials;
  r.min_decomposition_statistic = std::numeric_limits<double>::infinity();
  r.min_product_statistic = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < trials; ++k) {
    const auto d = random_decomposition(rng, 2 + rng.below(3));
    const auto c = check_nonconstant_decomposition(act, d);
    r.decomposition_passes += c.passed ? 1 : 0;
    r.min_decomposition_statistic = std::min(r.min_decomposition_statistic, c.statistic);
  }
  if (act.smooth) {
    for (std::size_t k = 0; k < trials; ++k) {
      const double r1 = rng.uniform(-2.0, 2.0);
      const double r2 = rng.uniform(-2.0, 2.0);
      const auto c = check_derivative_product(act, r1, r2);
      r.product_passes += c.passed ? 1 : 0;
      r.min_product_statistic = std::min(r.min_product_statistic, c.statistic);
    }
  }
  return r;
}

double silu_deriv_identity_check(std::span<const double> xs) {
  const auto& act = activation("silu");
  double worst = 0.0;
  for (double x : xs) {
    const double s = sigmoid(x);
    worst = std::max(worst, std::abs(act.deriv(x) - (s + x * s * (1.0 - s))));
  }
  return worst;
}

}  // namespace muplab
