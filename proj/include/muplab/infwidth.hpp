#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "muplab/activations.hpp"
#include "muplab/dataset.hpp"
#include "muplab/network.hpp"
#include "muplab/numerics.hpp"

namespace muplab {

/// Input-layer convention of the simulated limit.
///
/// `Unit`: W1 entries N(0, 1), hidden N(0, 1/n), output n W ~ N(0, 1), first
/// layer learning rate eta n. `Sqrt2OverD`: the constants of the finite mup
/// plan (std sqrt(2/d), sqrt(2/n), sqrt(2)/n; learning rate eta n / d), so the
/// limit can be compared directly with `layer_plan(Scheme::MuP, ...)` nets.
enum class InputScale { Unit, Sqrt2OverD };

std::string_view to_string(InputScale s);
InputScale parse_input_scale(std::string_view s);

/// Constants entering the limit equations.
struct LimitGains {
  double input_cov = 1.0;   // Cov(Z^{h1_0(xi_i)}, Z^{h1_0(xi_j)}) = input_cov <xi_i, xi_j>
  double first_lr = 1.0;    // dh1_t = -eta first_lr sum_i chi_i <xi_i, xi> Z^{dh1}
  double hidden_var = 1.0;  // sigma^2 of the middle matrices
  double output_var = 1.0;  // Var Z^{What_0}
};

LimitGains limit_gains(InputScale s, std::size_t d);

struct InfConfig {
  std::size_t depth = 2;
  std::size_t particles = 200000;
  double eta = 0.5;
  std::size_t steps = 5;
  LossKind loss = LossKind::MSE;
  std::string activation = "silu";
  InputScale input_scale = InputScale::Unit;
  double jitter = 1e-10;  // relative: jitter * trace / dim
  std::size_t workers = 1;
  double memory_limit_mb = 4096.0;
};

/// Refuses m * steps > 64 and ensembles whose estimated footprint exceeds
/// the configured memory limit.
void check_inf_budget(const InfConfig& cfg, std::size_t m);

/// Estimated bytes held by an ensemble for this configuration.
double estimate_inf_bytes(const InfConfig& cfg, std::size_t m);

/// A per-particle scalar with forward-mode sensitivities. Storage is
/// component-major: component 0 is the value, component k + 1 the derivative
/// with respect to tangent coordinate k of the owning layer group.
struct Field {
  std::size_t n = 0;
  std::size_t comps = 0;
  std::vector<double> data;

  Field() = default;
  Field(std::size_t particles, std::size_t tangent_comps)
      : n(particles), comps(tangent_comps), data((1 + tangent_comps) * particles, 0.0) {}

  double* val() { return data.data(); }
  const double* val() const { return data.data(); }
  double* d(std::size_t k) { return data.data() + (1 + k) * n; }
  const double* d(std::size_t k) const { return data.data() + (1 + k) * n; }
  /// Derivative for particle p, zero past the stored components.
  double deriv(std::size_t k, std::size_t p) const { return k < comps ? d(k)[p] : 0.0; }
  void drop_tangent();
};

/// Jointly Gaussian hat variables, one coordinate per key vector.
///
/// Coordinates are added one at a time: the new coordinate is sampled from
/// its Gaussian conditional given the particle's existing coordinates, by
/// appending a row to a Cholesky factor of the key covariance
/// `gain * E[key_a key_b]`. Whitened normals are retained per coordinate.
class HatFamily {
 public:
  HatFamily() = default;
  HatFamily(std::string name, std::size_t particles, double gain, std::uint64_t seed);

  const std::string& name() const { return name_; }
  std::size_t size() const { return hats_.size(); }
  std::size_t particles() const { return n_; }
  double gain() const { return gain_; }
  const std::vector<double>& hat(std::size_t k) const { return hats_.at(k); }
  std::vector<double>& mutable_hat(std::size_t k) { return hats_.at(k); }
  /// gain * E[key_a key_b] as used when each coordinate was added.
  const Mat& target() const { return target_; }

  /// Adds a coordinate whose cross-covariances with the existing ones are
  /// `cross` and whose variance is `var`; returns its index. Stores `key`
  /// (may be empty) for later cross-covariance estimates.
  std::size_t extend(std::span<const double> cross, double var,
                     std::vector<double> key, double jitter_rel,
                     std::size_t workers);

  const std::vector<double>& key(std::size_t k) const { return keys_.at(k); }

  /// Largest |empirical Cov - target| / sqrt(target_aa target_bb) over all
  /// coordinate pairs with nonzero target variances.
  double covariance_error() const;

 private:
  std::string name_;
  std::size_t n_ = 0;
  double gain_ = 1.0;
  std::uint64_t seed_ = 0;
  Mat chol_;
  Mat target_;
  std::vector<std::vector<double>> eps_;
  std::vector<std::vector<double>> hats_;
  std::vector<std::vector<double>> keys_;
};

/// Samples a new coordinate keyed by `key_values` (one value per particle):
/// cross-covariances with existing keys are particle means.
std::size_t extend_hat(HatFamily& family, std::vector<double> key_values,
                       double jitter_rel, std::size_t workers);

/// Constant coefficients used by the ensemble, recorded so a single particle
/// can be recomputed independently.
///
/// For layer l >= 2 (index l - 1) and step t:
///   h^l_t(xi_j) = sum_{r<=t} w^l_{r,j} + sum_{s<t,i} forward[l-1][t](j, s m + i) dh^l_s(xi_i)
/// where w^l_{r,j} is forward hat r m + j of layer l, and
///   dx^{l-1}_t(xi_j) = b^l_{t,j} + sum_{r<=t,i} backward[l-1][t](j, r m + i) x^{l-1}_r(xi_i)
/// where b^l_{t,j} is backward hat t m + j of layer l. The first layer obeys
///   h^1_t(xi_j) = h^1_{t-1}(xi_j) - eta first_lr sum_i chi_{t-1,i} G(i, j) dh^1_{t-1}(xi_i),
/// G the input Gram, and What_t = What_{t-1} - eta sum_i chi_{t-1,i} x^L_{t-1}(xi_i).
struct CoefficientLog {
  double eta = 0.0;
  LimitGains gains;
  Mat input_gram;
  std::vector<std::vector<double>> chi;
  std::vector<std::vector<Mat>> forward;
  std::vector<std::vector<Mat>> backward;
};

struct InfTrajectory {
  std::vector<std::vector<double>> f;    // f_ring[t][i], t = 0..steps
  std::vector<std::vector<double>> chi;  // chi_ring[t][i]
};

/// Moment summary of a finished run.
struct InfSummary {
  // Per layer: E[x_0(xi_i) x_0(xi_j)] and E[x_T(xi_i) x_T(xi_j)].
  std::vector<Mat> x_moment_initial;
  std::vector<Mat> x_moment_final;
  // Per layer: min eigenvalue of the joint second-moment matrix of
  // {x_s(xi_i) : s in {0, T}}.
  std::vector<double> witness_min_eig;
  std::vector<double> max_hat_covariance_error;
};

/// N-particle Monte Carlo representation of the infinite-width mup dynamics
/// (full batch). Drive it with `init_ensemble`, then alternately
/// `forward_step(t, chi_{t-1})` and `backward_step(t, chi_t)`, or use `run`.
class ZEnsemble {
 public:
  enum class FamilyKind { Forward, Backward };

  std::size_t particles() const { return n_; }
  std::size_t depth() const { return L_; }
  std::size_t samples() const { return m_; }
  /// Last step whose forward pass is complete.
  std::size_t step() const { return t_; }
  const InfConfig& config() const { return cfg_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// f_ring_t(xi_i) for the current step (0 at t = 0).
  const std::vector<double>& output() const { return f_; }

  void forward_step(std::size_t t, std::span<const double> chi_prev);
  void backward_step(std::size_t t, std::span<const double> chi_t);

  const CoefficientLog& coefficients() const { return log_; }

  /// Layer l's forward family (l >= 2, hats w^l) or backward family
  /// (l >= 2, hats b^l).
  const HatFamily& family(std::size_t layer, FamilyKind kind) const;
  /// The initial first-layer preactivations, one coordinate per sample.
  const HatFamily& input_family() const { return input_; }
  const std::vector<double>& output_weight_initial() const { return what0_; }

  /// Tangent coordinate of hat `index` of the given family inside the layer
  /// group that depends on it (layer l's group for forward hats of layer l,
  /// layer l - 1's group for backward hats of layer l).
  std::size_t tangent_index(std::size_t layer, FamilyKind kind,
                            std::size_t index) const;

  /// Z^{dh^l_t(xi_j)} with sensitivities in layer l's group. For l = 1 only
  /// the latest backward step is retained.
  const Field& dh(std::size_t layer, std::size_t t, std::size_t j) const;
  /// Z^{x^l_s(xi_j)}; sensitivities are kept for l < L (and the current step
  /// of layer L).
  const Field& x(std::size_t layer, std::size_t s, std::size_t j) const;
  /// Z^{h^l_t(xi_j)} for the current step.
  const Field& h(std::size_t layer, std::size_t j) const;

  InfSummary summary() const;

  friend ZEnsemble init_ensemble(const Dataset& data, const InfConfig& cfg,
                                 Rng& rng);

 private:
  struct Group {
    std::size_t comps = 0;
    std::vector<std::size_t> forward_index;   // comp of forward hat k
    std::vector<std::size_t> backward_index;  // comp of backward hat k
  };

  ZEnsemble() = default;
  void forward_layer(std::size_t layer, std::size_t t);
  void compute_output_delta(std::size_t t);
  void check_finite(const Field& f, const char* what) const;
  double mean(const double* a) const;
  double mean_product(const double* a, const double* b) const;
  template <class Fn>
  void for_particles(Fn&& fn) const;

  InfConfig cfg_;
  const Activation* act_ = nullptr;
  std::size_t n_ = 0, L_ = 0, m_ = 0, t_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::string> warnings_;
  CoefficientLog log_;
  std::vector<double> f_;

  HatFamily input_;
  std::vector<HatFamily> fwd_;  // index l - 1, used for l >= 2
  std::vector<HatFamily> bwd_;
  std::vector<Group> groups_;

  // Per layer (index l - 1): h current per sample; x history [s][j];
  // dh history [s][j] (layer 1 keeps only the latest step); cumulative
  // forward hats per sample.
  std::vector<std::vector<Field>> h_;
  std::vector<std::vector<std::vector<Field>>> x_;
  std::vector<std::vector<std::vector<Field>>> dh_;
  std::vector<std::vector<std::vector<double>>> u_;
  Field what_;
  Field what_prev_;
  std::vector<double> what0_;
  std::size_t dh1_step_ = 0;
};

/// Builds the step-0 ensemble: h1_0 jointly Gaussian with covariance
/// input_cov <xi_i, xi_j>, deeper preactivations from forward hats keyed by
/// x^{l-1}_0, What_0 i.i.d. N(0, output_var). Warns when the inputs fail the
/// dataset assumption check.
ZEnsemble init_ensemble(const Dataset& data, const InfConfig& cfg, Rng& rng);

/// Full-batch simulation for cfg.steps steps; f_ring_0 = 0.
InfTrajectory run(const Dataset& data, const InfConfig& cfg, Rng& rng,
                  InfSummary* summary = nullptr);

}  // namespace muplab
