#include "muplab/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace muplab {

std::string_view to_string(LossKind k) {
  return k == LossKind::MSE ? "mse" : "logistic";
}

LossKind parse_loss(std::string_view tag) {
  if (tag == "mse") return LossKind::MSE;
  if (tag == "logistic") return LossKind::Logistic;
  throw ValidationError("unknown loss '" + std::string(tag) +
                        "' (expected mse or logistic)");
}

Mlp init(const LayerPlan& plan, const Activation& act, Rng& rng) {
  if (plan.depth < 1 || plan.d < 1 || plan.n < 1 ||
      plan.init_std.size() != plan.depth + 1 || plan.lr.size() != plan.depth + 1)
    throw ValidationError("init: layer plan is inconsistent");
  Mlp mlp;
  mlp.act = &act;
  mlp.plan = plan;
  mlp.weights.reserve(plan.depth + 1);
  mlp.weights.push_back(gaussian_matrix(rng, plan.n, plan.d, plan.init_std[0]));
  for (std::size_t l = 1; l < plan.depth; ++l)
    mlp.weights.push_back(gaussian_matrix(rng, plan.n, plan.n, plan.init_std[l]));
  mlp.weights.push_back(gaussian_matrix(rng, 1, plan.n, plan.init_std[plan.depth]));
  return mlp;
}

namespace {

void check_input(const Mlp& mlp, Eigen::Index dim) {
  if (mlp.weights.empty() || mlp.act == nullptr)
    throw ValidationError("network is not initialized");
  if (dim != mlp.weights.front().cols())
    throw DimensionMismatch("input has dimension " + std::to_string(dim) +
                            ", network expects " +
                            std::to_string(mlp.weights.front().cols()));
}

template <class M>
M apply(const Activation& act, const M& h) {
  return h.unaryExpr([&](double z) { return act.value(z); });
}

template <class M>
M apply_deriv(const Activation& act, const M& h) {
  return h.unaryExpr([&](double z) { return act.deriv(z); });
}

// w * x over blocks of rows: each packed block of w stays in cache, which
// matters when x has only a few columns and the product is memory bound.
Eigen::MatrixXd blocked_product(const Mat& w, const Eigen::MatrixXd& x) {
  constexpr Eigen::Index kRows = 32;
  Eigen::MatrixXd out(w.rows(), x.cols());
  for (Eigen::Index r0 = 0; r0 < w.rows(); r0 += kRows) {
    const Eigen::Index rows = std::min(kRows, w.rows() - r0);
    out.middleRows(r0, rows).noalias() = w.middleRows(r0, rows) * x;
  }
  return out;
}

}  // namespace

ForwardTrace forward(const Mlp& mlp, const Vec& xi) {
  check_input(mlp, xi.size());
  const std::size_t L = mlp.depth();
  ForwardTrace tr;
  tr.h.reserve(L);
  tr.x.reserve(L);
  tr.h.push_back(mlp.weights[0] * xi);
  tr.x.push_back(apply(*mlp.act, tr.h.back()));
  for (std::size_t l = 1; l < L; ++l) {
    tr.h.push_back(mlp.weights[l] * tr.x.back());
    tr.x.push_back(apply(*mlp.act, tr.h.back()));
  }
  tr.f = mlp.weights[L].row(0).dot(tr.x.back());
  return tr;
}

BatchTrace forward_batch(const Mlp& mlp, const Eigen::MatrixXd& inputs) {
  check_input(mlp, inputs.rows());
  const std::size_t L = mlp.depth();
  BatchTrace tr;
  tr.h.reserve(L);
  tr.x.reserve(L);
  tr.h.emplace_back(mlp.weights[0] * inputs);
  tr.x.push_back(apply(*mlp.act, tr.h.back()));
  for (std::size_t l = 1; l < L; ++l) {
    tr.h.emplace_back(blocked_product(mlp.weights[l], tr.x.back()));
    tr.x.push_back(apply(*mlp.act, tr.h.back()));
  }
  tr.f = (mlp.weights[L] * tr.x.back()).transpose();
  return tr;
}

double error_signal(LossKind loss, double f, double y, bool in_batch) {
  if (!in_batch) return 0.0;
  if (loss == LossKind::MSE) return 2.0 * (f - y);
  return -y / (1.0 + std::exp(y * f));
}

double loss_value(LossKind loss, double f, double y) {
  if (loss == LossKind::MSE) return (f - y) * (f - y);
  const double z = -y * f;
  // log(1 + e^z) without overflow.
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

Mat Grads::dense(std::size_t k) const {
  return left.at(k) * right.at(k).transpose();
}

namespace {

// ||l r^T||_F^2 = sum((l^T l) .* (r^T r)).
double factored_squared_norm(const Eigen::MatrixXd& l, const Eigen::MatrixXd& r) {
  const Eigen::MatrixXd a = l.transpose() * l;
  const Eigen::MatrixXd b = r.transpose() * r;
  return std::max(0.0, (a.array() * b.array()).sum());
}

}  // namespace

double Grads::squared_norm(std::size_t k) const {
  return factored_squared_norm(left.at(k), right.at(k));
}

Grads& Grads::operator+=(const Grads& other) {
  if (left.empty()) {
    *this = other;
    return *this;
  }
  if (other.left.size() != left.size())
    throw DimensionMismatch("gradients come from networks of different depth");
  for (std::size_t k = 0; k < left.size(); ++k) {
    if (other.left[k].rows() != left[k].rows() ||
        other.right[k].rows() != right[k].rows())
      throw DimensionMismatch("gradient shapes differ");
    Eigen::MatrixXd l(left[k].rows(), left[k].cols() + other.left[k].cols());
    l << left[k], other.left[k];
    Eigen::MatrixXd r(right[k].rows(), right[k].cols() + other.right[k].cols());
    r << right[k], other.right[k];
    left[k] = std::move(l);
    right[k] = std::move(r);
  }
  return *this;
}

Grads backward(const Mlp& mlp, const Vec& xi, const ForwardTrace& trace,
               double chi) {
  check_input(mlp, xi.size());
  const std::size_t L = mlp.depth();
  if (trace.h.size() != L || trace.x.size() != L)
    throw DimensionMismatch("trace does not match the network depth");
  Grads g;
  g.left.resize(L + 1);
  g.right.resize(L + 1);
  g.left[L] = Eigen::MatrixXd::Constant(1, 1, chi);
  g.right[L] = trace.x[L - 1];

  Vec dx = chi * mlp.weights[L].row(0).transpose();
  for (std::size_t l = L; l-- > 0;) {
    Vec dh = dx.cwiseProduct(apply_deriv(*mlp.act, trace.h[l]));
    g.right[l] = l == 0 ? xi : trace.x[l - 1];
    if (l > 0) dx = mlp.weights[l].transpose() * dh;
    g.left[l] = std::move(dh);
  }
  return g;
}

void sgd_step(Mlp& mlp, const Grads& grads) {
  if (grads.left.size() != mlp.weights.size())
    throw DimensionMismatch("gradient depth does not match the network");
  for (std::size_t k = 0; k < mlp.weights.size(); ++k) {
    Mat& w = mlp.weights[k];
    if (grads.left[k].rows() != w.rows() || grads.right[k].rows() != w.cols())
      throw DimensionMismatch("gradient shape does not match layer " +
                              std::to_string(k + 1));
    w.noalias() -= mlp.plan.lr[k] * (grads.left[k] * grads.right[k].transpose());
  }
}

const FeatureSnapshot* TrainResult::find(std::size_t layer, FeatureKind kind,
                                         std::size_t step) const {
  for (const auto& s : snapshots)
    if (s.layer == layer && s.kind == kind && s.step == step) return &s;
  return nullptr;
}

namespace {

void capture(TrainResult& out, const BatchTrace& tr, std::size_t step) {
  for (std::size_t l = 0; l < tr.h.size(); ++l) {
    out.snapshots.push_back({l + 1, FeatureKind::Pre, step, tr.h[l].transpose()});
    out.snapshots.push_back({l + 1, FeatureKind::Post, step, tr.x[l].transpose()});
  }
}

double total_weight_norm(const Mlp& mlp) {
  double s = 0.0;
  for (const auto& w : mlp.weights) s += w.squaredNorm();
  return std::sqrt(s);
}

}  // namespace

TrainResult train(Mlp& mlp, const Dataset& data, LossKind loss,
                  const TrainOptions& options) {
  data.validate();
  const Eigen::MatrixXd inputs = data.input_columns();
  check_input(mlp, inputs.rows());
  const std::size_t m = data.size();
  const std::size_t L = mlp.depth();
  const std::size_t batch =
      options.batch_size == 0 ? m : std::min(options.batch_size, m);

  std::vector<std::size_t> snaps = options.snapshot_steps;
  snaps.push_back(0);
  std::sort(snaps.begin(), snaps.end());
  snaps.erase(std::unique(snaps.begin(), snaps.end()), snaps.end());
  auto wants_snapshot = [&](std::size_t t) {
    return std::binary_search(snaps.begin(), snaps.end(), t);
  };

  TrainResult out;
  std::vector<char> in_batch(m);
  double weight_norm = total_weight_norm(mlp);
  for (std::size_t t = 0;; ++t) {
    const BatchTrace tr = forward_batch(mlp, inputs);
    if (!tr.f.allFinite())
      throw NumericalDivergence(t, "network output is not finite");
    if (wants_snapshot(t)) capture(out, tr, t);
    out.output_history.emplace_back(tr.f.data(), tr.f.data() + m);

    double mean_loss = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      mean_loss += loss_value(loss, tr.f(static_cast<Eigen::Index>(i)), data.labels[i]);
    mean_loss /= static_cast<double>(m);
    if (t == options.steps) {
      out.final_loss = mean_loss;
      break;
    }
    out.loss_history.push_back(mean_loss);

    std::fill(in_batch.begin(), in_batch.end(), 0);
    const std::size_t start = (t * batch) % m;
    for (std::size_t k = 0; k < batch; ++k) in_batch[(start + k) % m] = 1;
    Eigen::RowVectorXd chi(static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i)
      chi(static_cast<Eigen::Index>(i)) =
          error_signal(loss, tr.f(static_cast<Eigen::Index>(i)), data.labels[i],
                       in_batch[i] != 0);
    out.chi_history.emplace_back(chi.data(), chi.data() + m);

    // One pass per weight matrix: each block of rows first contributes its
    // pre-update values to the next error signal, then takes its update.
    double upd = 0.0;
    double norm2 = 0.0;
    {
      Mat& w = mlp.weights[L];
      const double lr = mlp.plan.lr[L];
      upd += lr * lr * factored_squared_norm(Eigen::MatrixXd(chi), tr.x[L - 1]);
      Eigen::MatrixXd dx = w.transpose() * chi;
      w.noalias() -= lr * (chi * tr.x[L - 1].transpose());
      norm2 += w.squaredNorm();
      for (std::size_t l = L; l-- > 0;) {
        const Eigen::MatrixXd dh = dx.cwiseProduct(apply_deriv(*mlp.act, tr.h[l]));
        const Eigen::MatrixXd& right = l == 0 ? inputs : tr.x[l - 1];
        Mat& wl = mlp.weights[l];
        const double lrl = mlp.plan.lr[l];
        upd += lrl * lrl * factored_squared_norm(dh, right);
        if (l > 0) dx = Eigen::MatrixXd::Zero(wl.cols(), dh.cols());
        constexpr Eigen::Index kRows = 64;
        for (Eigen::Index r0 = 0; r0 < wl.rows(); r0 += kRows) {
          const Eigen::Index rows = std::min(kRows, wl.rows() - r0);
          auto block = wl.middleRows(r0, rows);
          if (l > 0) dx.noalias() += block.transpose() * dh.middleRows(r0, rows);
          block.noalias() -= lrl * (dh.middleRows(r0, rows) * right.transpose());
          norm2 += block.squaredNorm();
        }
      }
    }
    out.update_norm_history.push_back(std::sqrt(upd));
    out.weight_norm_history.push_back(weight_norm);
    weight_norm = std::sqrt(norm2);
    if (!std::isfinite(weight_norm))
      throw NumericalDivergence(t + 1, "weights became non-finite");
  }
  return out;
}

}  // namespace muplab
