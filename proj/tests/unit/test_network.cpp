#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "muplab/network.hpp"
#include "oracles.hpp"

using namespace muplab;

namespace {

Mlp scalar_net(double w1, double w2) {
  LayerPlan plan{{1.0, 1.0}, {0.5, 0.25}, 1, 1, 1};
  Mlp mlp;
  mlp.plan = plan;
  mlp.act = &activation("tanh");
  mlp.weights = {Mat::Constant(1, 1, w1), Mat::Constant(1, 1, w2)};
  return mlp;
}

Mlp random_net(Rng& rng, std::size_t depth, std::size_t d, std::size_t n,
               const char* act) {
  return init(layer_plan(Scheme::MuP, depth, d, n, 0.1), activation(act), rng);
}

Vec random_input(Rng& rng, std::size_t d) {
  return gaussian_matrix(rng, d, 1, 1.0).col(0);
}

}  // namespace

TEST_CASE("initialization") {
  Rng a(5), b(5);
  const auto plan = layer_plan(Scheme::MuP, 2, 3, 4, 0.1);
  const Mlp x = init(plan, activation("silu"), a);
  const Mlp y = init(plan, activation("silu"), b);
  for (std::size_t k = 0; k < 3; ++k) CHECK(x.weights[k] == y.weights[k]);
  CHECK(x.weights[0].rows() == 4);
  CHECK(x.weights[0].cols() == 3);
  CHECK(x.weights[2].rows() == 1);

  Rng big(9);
  const Mlp wide = init(layer_plan(Scheme::MuP, 2, 8, 1024, 0.1), activation("silu"), big);
  const double var = wide.weights[1].array().square().mean();
  CHECK(std::abs(var - 2.0 / 1024) < 0.1 * 2.0 / 1024);

  auto zero = plan;
  std::fill(zero.init_std.begin(), zero.init_std.end(), 0.0);
  for (const char* name : {"tanh", "silu"}) {
    Rng r(1);
    const Mlp z = init(zero, activation(name), r);
    CHECK(forward(z, Vec::Ones(3)).f == 0.0);
  }

  auto bad = plan;
  bad.lr.pop_back();
  CHECK_THROWS_AS(init(bad, activation("silu"), a), ValidationError);
}

TEST_CASE("forward by hand and by loops") {
  const Mlp s = scalar_net(2.0, 3.0);
  Vec xi(1);
  xi << 0.5;
  CHECK(forward(s, xi).f == doctest::Approx(3.0 * std::tanh(1.0)).epsilon(1e-15));

  Rng rng(31);
  for (const char* act : {"tanh", "silu", "gelu"}) {
    const Mlp mlp = random_net(rng, 3, 5, 7, act);
    const Vec in = random_input(rng, 5);
    CHECK(std::abs(forward(mlp, in).f - oracle::straight_forward(mlp, in)) < 1e-12);
  }
  CHECK_THROWS_AS(forward(s, Vec::Ones(2)), DimensionMismatch);
}

TEST_CASE("batched forward matches per-sample forward") {
  Rng rng(8);
  const Mlp mlp = random_net(rng, 3, 6, 70, "silu");
  Eigen::MatrixXd inputs(6, 5);
  for (int i = 0; i < 5; ++i) inputs.col(i) = random_input(rng, 6);
  const auto bt = forward_batch(mlp, inputs);
  for (int i = 0; i < 5; ++i) {
    const auto tr = forward(mlp, inputs.col(i));
    CHECK(std::abs(bt.f(i) - tr.f) < 1e-12);
    for (std::size_t l = 0; l < 3; ++l)
      CHECK((bt.h[l].col(i) - tr.h[l]).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("error signals and losses") {
  CHECK(error_signal(LossKind::MSE, 1.0, 1.0) == 0.0);
  CHECK(error_signal(LossKind::MSE, 0.0, 1.0) == -2.0);
  CHECK(error_signal(LossKind::MSE, 0.0, 1.0, false) == 0.0);
  CHECK(error_signal(LossKind::Logistic, 0.0, 1.0) == -0.5);
  CHECK(loss_value(LossKind::MSE, 3.0, 1.0) == 4.0);
  CHECK(loss_value(LossKind::Logistic, 0.0, 1.0) == doctest::Approx(std::log(2.0)));
  CHECK(std::isfinite(loss_value(LossKind::Logistic, -1000.0, 1.0)));
  CHECK(loss_value(LossKind::Logistic, -1000.0, 1.0) == doctest::Approx(1000.0));
  const double h = 1e-6;
  for (double f : {-2.0, 0.3, 4.0}) {
    const double fd = (loss_value(LossKind::Logistic, f + h, -1.0) -
                       loss_value(LossKind::Logistic, f - h, -1.0)) / (2 * h);
    CHECK(error_signal(LossKind::Logistic, f, -1.0) == doctest::Approx(fd).epsilon(1e-8));
  }
  CHECK(parse_loss(to_string(LossKind::Logistic)) == LossKind::Logistic);
  CHECK_THROWS_AS(parse_loss("hinge"), ValidationError);
}

TEST_CASE("backward") {
  const Mlp s = scalar_net(2.0, 3.0);
  Vec xi(1);
  xi << 0.5;
  const auto tr = forward(s, xi);
  const Grads g = backward(s, xi, tr, 0.7);
  CHECK(g.dense(1)(0, 0) == doctest::Approx(0.7 * std::tanh(1.0)));
  const double t1 = std::tanh(1.0);
  CHECK(g.dense(0)(0, 0) == doctest::Approx(0.7 * 3.0 * (1 - t1 * t1) * 0.5));

  const Grads z = backward(s, xi, tr, 0.0);
  for (std::size_t k = 0; k < 2; ++k) CHECK(z.dense(k).isZero(0.0));
}

TEST_CASE("backward matches central finite differences") {
  Rng rng(123);
  const double h = 1e-6;
  double worst = 0.0;
  for (const char* act : {"sigmoid", "tanh", "silu"}) {
    for (int trial = 0; trial < 5; ++trial) {
      const std::size_t d = 1 + rng.below(8), n = 1 + rng.below(8);
      const std::size_t depth = 1 + rng.below(3);
      Mlp mlp = random_net(rng, depth, d, n, act);
      // Unit-scale weights so every layer contributes comparably.
      for (auto& w : mlp.weights) w = gaussian_matrix(rng, w.rows(), w.cols(), 1.0);
      const Vec in = random_input(rng, d);
      const double chi = 1.3;
      const Grads g = backward(mlp, in, forward(mlp, in), chi);
      for (std::size_t k = 0; k < mlp.weights.size(); ++k) {
        const Mat dense = g.dense(k);
        for (Eigen::Index i = 0; i < dense.rows(); ++i)
          for (Eigen::Index j = 0; j < dense.cols(); ++j) {
            Mlp p = mlp, m = mlp;
            p.weights[k](i, j) += h;
            m.weights[k](i, j) -= h;
            const double fd = chi * (forward(p, in).f - forward(m, in).f) / (2 * h);
            worst = std::max(worst, oracle::rel_err(dense(i, j), fd, 1e-4));
          }
      }
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("factored gradients") {
  Rng rng(4);
  Grads a, b;
  a.left = {Eigen::MatrixXd::Random(3, 1)};
  a.right = {Eigen::MatrixXd::Random(4, 1)};
  b.left = {Eigen::MatrixXd::Random(3, 2)};
  b.right = {Eigen::MatrixXd::Random(4, 2)};
  const Mat sum = a.dense(0) + b.dense(0);
  Grads c;
  c += a;
  c += b;
  CHECK((c.dense(0) - sum).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(c.squared_norm(0) == doctest::Approx(sum.squaredNorm()).epsilon(1e-12));
  Grads bad;
  bad.left = {Eigen::MatrixXd::Random(2, 1)};
  bad.right = {Eigen::MatrixXd::Random(4, 1)};
  CHECK_THROWS_AS(c += bad, DimensionMismatch);
}

TEST_CASE("sgd_step") {
  Rng rng(6);
  Mlp mlp = random_net(rng, 2, 3, 4, "silu");
  const Vec in = random_input(rng, 3);
  const auto before = mlp.weights;

  Grads zero = backward(mlp, in, forward(mlp, in), 0.0);
  sgd_step(mlp, zero);
  for (std::size_t k = 0; k < 3; ++k) CHECK(mlp.weights[k] == before[k]);

  // One sample on the scalar net: W2 <- 3 - 0.25 chi tanh(1),
  // W1 <- 2 - 0.5 chi 3 (1 - tanh(1)^2) 0.5.
  Mlp s = scalar_net(2.0, 3.0);
  Vec xi(1);
  xi << 0.5;
  const double chi = error_signal(LossKind::MSE, forward(s, xi).f, 1.0);
  sgd_step(s, backward(s, xi, forward(s, xi), chi));
  const double t1 = std::tanh(1.0);
  CHECK(s.weights[1](0, 0) == doctest::Approx(3.0 - 0.25 * chi * t1));
  CHECK(s.weights[0](0, 0) == doctest::Approx(2.0 - 0.5 * chi * 3.0 * (1 - t1 * t1) * 0.5));

  // Two identical samples move the weights twice as far.
  Mlp one = random_net(rng, 2, 3, 4, "silu"), two = one;
  const auto tr = forward(one, in);
  Grads g1 = backward(one, in, tr, 0.9), g2 = g1;
  g2 += g1;
  const auto start = one.weights;
  sgd_step(one, g1);
  sgd_step(two, g2);
  for (std::size_t k = 0; k < 3; ++k)
    CHECK(((two.weights[k] - start[k]) - 2.0 * (one.weights[k] - start[k]))
              .cwiseAbs()
              .maxCoeff() < 1e-14);
}

TEST_CASE("train") {
  Rng drng(3);
  const Dataset data = synth_gaussian_dataset(5, 4, drng);
  Rng r1(10);
  Mlp mlp = random_net(r1, 2, 5, 32, "silu");
  const Mlp start = mlp;

  TrainOptions none;
  none.steps = 0;
  Mlp copy = mlp;
  const auto r0 = train(copy, data, LossKind::MSE, none);
  CHECK(r0.loss_history.empty());
  CHECK(r0.output_history.size() == 1);
  for (const auto& s : r0.snapshots) CHECK(s.step == 0);
  CHECK(r0.snapshots.size() == 4);

  TrainOptions opt;
  opt.steps = 20;
  opt.snapshot_steps = {5, 20};
  Mlp a = start, b = start;
  const auto ra = train(a, data, LossKind::MSE, opt);
  const auto rb = train(b, data, LossKind::MSE, opt);
  CHECK(ra.loss_history == rb.loss_history);
  CHECK(ra.output_history == rb.output_history);
  CHECK(ra.chi_history == rb.chi_history);
  for (std::size_t k = 0; k < 3; ++k) CHECK(a.weights[k] == b.weights[k]);
  CHECK(ra.loss_history.size() == 20);
  CHECK(ra.output_history.size() == 21);
  CHECK(ra.snapshots.size() == 3 * 2 * 2);
  CHECK(ra.find(2, FeatureKind::Post, 5) != nullptr);
  CHECK(ra.find(2, FeatureKind::Post, 6) == nullptr);
  CHECK(ra.final_loss < ra.loss_history.front());

  // The fused update path agrees with forward/backward/sgd_step.
  Mlp ref = start;
  for (std::size_t t = 0; t < 3; ++t) {
    Grads g;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto tr = forward(ref, data.inputs[i]);
      g += backward(ref, data.inputs[i], tr, error_signal(LossKind::MSE, tr.f, data.labels[i]));
    }
    sgd_step(ref, g);
  }
  Mlp fused = start;
  TrainOptions three;
  three.steps = 3;
  train(fused, data, LossKind::MSE, three);
  for (std::size_t k = 0; k < 3; ++k)
    CHECK((fused.weights[k] - ref.weights[k]).cwiseAbs().maxCoeff() < 1e-12);

  // Relative update norm and weight norm bookkeeping.
  Mlp w = start;
  TrainOptions one;
  one.steps = 1;
  const auto r1r = train(w, data, LossKind::MSE, one);
  double norm2 = 0.0, upd2 = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    norm2 += start.weights[k].squaredNorm();
    upd2 += (w.weights[k] - start.weights[k]).squaredNorm();
  }
  CHECK(r1r.weight_norm_history[0] == doctest::Approx(std::sqrt(norm2)));
  CHECK(r1r.update_norm_history[0] == doctest::Approx(std::sqrt(upd2)).epsilon(1e-9));
}

TEST_CASE("mini-batch schedule only updates with in-batch samples") {
  Rng drng(3);
  const Dataset data = synth_gaussian_dataset(4, 4, drng);
  Rng r(2);
  Mlp mlp = random_net(r, 2, 4, 16, "tanh");
  TrainOptions opt;
  opt.steps = 3;
  opt.batch_size = 3;
  const auto res = train(mlp, data, LossKind::MSE, opt);
  // Step 0 uses samples 0..2, step 1 uses 3, 0, 1, step 2 uses 2, 3, 0.
  CHECK(res.chi_history[0][3] == 0.0);
  CHECK(res.chi_history[1][2] == 0.0);
  CHECK(res.chi_history[2][1] == 0.0);
  CHECK(res.chi_history[0][0] != 0.0);
}

TEST_CASE("divergence is reported with its step") {
  Rng drng(3);
  const Dataset data = synth_gaussian_dataset(4, 3, drng);
  Rng r(2);
  Mlp mlp = init(layer_plan(Scheme::NTP, 2, 4, 32, 1e6), activation("identity"), r);
  TrainOptions opt;
  opt.steps = 200;
  try {
    train(mlp, data, LossKind::MSE, opt);
    FAIL("expected divergence");
  } catch (const NumericalDivergence& e) {
    CHECK(e.step() > 0);
    CHECK(e.step() <= 200);
  }
}

TEST_CASE("mup initial outputs shrink like n^-1/2") {
  Rng drng(17);
  const Dataset data = synth_gaussian_dataset(16, 1, drng);
  std::vector<double> logn, logf;
  for (std::size_t n : {256, 1024, 4096}) {
    std::vector<double> f;
    for (std::uint64_t s = 42; s < 52; ++s) {
      Rng r(s);
      const Mlp mlp = init(layer_plan(Scheme::MuP, 2, 16, n, 0.1), activation("silu"), r);
      f.push_back(std::abs(forward(mlp, data.inputs[0]).f));
    }
    std::sort(f.begin(), f.end());
    logn.push_back(std::log(double(n)));
    logf.push_back(std::log(0.5 * (f[4] + f[5])));
  }
  const double mx = (logn[0] + logn[1] + logn[2]) / 3, my = (logf[0] + logf[1] + logf[2]) / 3;
  double sxy = 0, sxx = 0;
  for (int k = 0; k < 3; ++k) {
    sxy += (logn[k] - mx) * (logf[k] - my);
    sxx += (logn[k] - mx) * (logn[k] - mx);
  }
  const double slope = sxy / sxx;
  CHECK(slope > -0.7);
  CHECK(slope < -0.3);
}
