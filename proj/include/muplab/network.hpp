#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "muplab/activations.hpp"
#include "muplab/dataset.hpp"
#include "muplab/diagnostics.hpp"
#include "muplab/numerics.hpp"
#include "muplab/schemes.hpp"

namespace muplab {

enum class LossKind { MSE, Logistic };

std::string_view to_string(LossKind k);
LossKind parse_loss(std::string_view tag);

/// Bias-free MLP: h1 = W1 xi, x_l = phi(h_l), h_{l+1} = W_{l+1} x_l,
/// f = W_{L+1} x_L. weights[k] holds W_{k+1}.
struct Mlp {
  std::vector<Mat> weights;
  const Activation* act = nullptr;
  LayerPlan plan;

  std::size_t depth() const { return plan.depth; }
  std::size_t width() const { return plan.n; }
  std::size_t input_dim() const { return plan.d; }
};

/// Draws W1, ..., W_{L+1} in that order, each row-major.
Mlp init(const LayerPlan& plan, const Activation& act, Rng& rng);

struct ForwardTrace {
  std::vector<Vec> h;
  std::vector<Vec> x;
  double f = 0.0;
};

ForwardTrace forward(const Mlp& mlp, const Vec& xi);

/// Forward pass on the columns of `inputs` (d x m). h[l] and x[l] are n x m.
struct BatchTrace {
  std::vector<Eigen::MatrixXd> h;
  std::vector<Eigen::MatrixXd> x;
  Vec f;
};

BatchTrace forward_batch(const Mlp& mlp, const Eigen::MatrixXd& inputs);

/// MSE: 2 (f - y); logistic: -y / (1 + exp(y f)); 0 outside the batch.
double error_signal(LossKind loss, double f, double y, bool in_batch = true);

/// Per-sample loss: (f - y)^2 or log(1 + exp(-y f)).
double loss_value(LossKind loss, double f, double y);

/// Weight gradients in factored form: the gradient of layer k is
/// left[k] * right[k]^T. A single-sample gradient has rank one; summing
/// gradients appends columns, so a batch gradient never has to be formed
/// densely (which matters once n x n matrices are large).
struct Grads {
  std::vector<Eigen::MatrixXd> left;
  std::vector<Eigen::MatrixXd> right;

  Mat dense(std::size_t layer_index) const;
  /// Frobenius norm squared of left[k] right[k]^T without forming it.
  double squared_norm(std::size_t layer_index) const;
  Grads& operator+=(const Grads& other);
};

/// Gradients of chi * f with respect to every weight matrix.
Grads backward(const Mlp& mlp, const Vec& xi, const ForwardTrace& trace,
               double chi);

/// W_l <- W_l - lr_l * grad_l, with the gradient already summed over the batch.
void sgd_step(Mlp& mlp, const Grads& grads);

struct TrainOptions {
  std::size_t steps = 0;
  /// 0 means full batch. Otherwise step t uses the cyclic window of
  /// batch_size samples starting at (t * batch_size) mod m.
  std::size_t batch_size = 0;
  /// Steps in [0, steps] at which every layer's pre- and post-activation
  /// features are captured. Step 0 is always captured.
  std::vector<std::size_t> snapshot_steps;
};

struct TrainResult {
  std::vector<double> loss_history;        // mean loss before update t
  std::vector<std::vector<double>> chi_history;  // chi_{t,i}
  std::vector<std::vector<double>> output_history;  // f_t(xi_i), t = 0..steps
  std::vector<double> update_norm_history;  // sqrt(sum_l lr_l^2 ||grad_l||^2)
  std::vector<double> weight_norm_history;  // sqrt(sum_l ||W_l||^2) before update t
  std::vector<FeatureSnapshot> snapshots;
  double final_loss = 0.0;

  /// Snapshot for (layer, kind, step); nullptr when it was not recorded.
  const FeatureSnapshot* find(std::size_t layer, FeatureKind kind,
                              std::size_t step) const;
};

/// Batched full-batch (or scheduled mini-batch) SGD. Throws
/// NumericalDivergence when an output or weight becomes non-finite.
TrainResult train(Mlp& mlp, const Dataset& data, LossKind loss,
                  const TrainOptions& options);

}  // namespace muplab
