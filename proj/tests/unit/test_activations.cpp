#include <doctest.h>

#include <cmath>
#include <vector>

#include "muplab/activations.hpp"
#include "oracles.hpp"

using namespace muplab;

TEST_CASE("registry lookups") {
  for (const auto& name : activation_names()) CHECK(activation(name).name == name);
  CHECK_THROWS_AS(activation("softsign"), ValidationError);
  for (const auto& name : good_activation_names()) CHECK(activation(name).smooth);
  CHECK_FALSE(activation("relu").smooth);
}

TEST_CASE("analytic derivatives agree with central differences") {
  const double h = 1e-5;
  for (const auto& name : {"sigmoid", "tanh", "silu", "gelu", "identity"}) {
    const auto& act = activation(name);
    double worst1 = 0.0, worst2 = 0.0;
    for (int k = 0; k <= 2000; ++k) {
      const double x = -10.0 + 0.01 * k;
      const double fd1 = (act.value(x + h) - act.value(x - h)) / (2 * h);
      const double fd2 = (act.deriv(x + h) - act.deriv(x - h)) / (2 * h);
      // The floor keeps zero crossings of phi' and phi'' from dividing by ~0.
      worst1 = std::max(worst1, oracle::rel_err(act.deriv(x), fd1, 1e-3));
      worst2 = std::max(worst2, oracle::rel_err(act.deriv2(x), fd2, 1e-3));
    }
    INFO(name);
    CHECK(worst1 < 1e-6);
    CHECK(worst2 < 1e-6);
  }
}

TEST_CASE("tail residuals match direct subtraction where it is accurate") {
  for (const auto& name : good_activation_names()) {
    const auto& act = activation(name);
    for (double z : {0.5, 2.0, 4.0, -0.5, -2.0, -4.0}) {
      const double asym = z > 0 ? act.plus_slope * z + act.plus_intercept
                                : act.minus_slope * z + act.minus_intercept;
      INFO(name << " z=" << z);
      CHECK(oracle::rel_err(act.tail_residual(z), act.value(z) - asym) < 1e-9);
    }
  }
}

TEST_CASE("nonconstant decomposition examples") {
  const auto& sig = activation("sigmoid");
  const Grid grid{-20.0, 20.0, 401};
  Decomposition d{{{1, 1, 0}, {-1, 2, 0}}};
  const auto r = check_nonconstant_decomposition(sig, d, grid, 1e-6);
  CHECK(r.passed);
  CHECK(r.range > 0.09);

  const auto& id = activation("identity");
  CHECK_THROWS_AS(check_nonconstant_decomposition(id, {{{1, 1, 0}, {1, -1, 0}}}),
                  InvalidCoefficients);
  const auto cancel = check_nonconstant_decomposition(id, {{{2, 1, 0}, {1, -2, 0}}});
  CHECK_FALSE(cancel.passed);
  CHECK(cancel.statistic < 1e-12);

  CHECK_THROWS_AS(validate_decomposition({{{0, 1, 0}, {1, 0, 0}}}), InvalidCoefficients);
  CHECK_THROWS_AS(validate_decomposition({{{NAN, 1, 0}}}), InvalidCoefficients);
  CHECK_THROWS_AS(check_nonconstant_decomposition(sig, d, Grid{1.0, 0.0, 10}),
                  ValidationError);
}

TEST_CASE("derivative product examples") {
  const auto& sig = activation("sigmoid");
  const auto r = check_derivative_product(sig, 0, 0, Grid{-10, 10, 2001});
  CHECK(r.passed);
  CHECK(r.range == doctest::Approx(0.125 - sig.value(-10) * sig.deriv(-10)).epsilon(0.05));
  CHECK(derivative_product(sig, 0, 0, 0.0) == 0.125);

  const auto silu = check_derivative_product(activation("silu"), 1, 1, Grid{-10, 10, 2001});
  CHECK(silu.passed);
  CHECK(silu.range > 1.0);

  CHECK_THROWS_AS(check_derivative_product(activation("relu"), 0, 0), NonSmoothActivation);
}

TEST_CASE("randomized checks pass for the smooth exponential-tail activations") {
  Rng rng(77);
  for (const auto& name : good_activation_names()) {
    const auto rep = run_good_suite(activation(name), 100, rng);
    INFO(name << " min stats " << rep.min_decomposition_statistic << " "
              << rep.min_product_statistic);
    CHECK(rep.decomposition_passes == 100);
    CHECK(rep.product_passes == 100);
    CHECK(rep.all_passed());
  }
}

TEST_CASE("random decompositions respect the coefficient preconditions") {
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    const auto d = random_decomposition(rng, 4);
    CHECK_NOTHROW(validate_decomposition(d));
    for (std::size_t i = 0; i < d.terms.size(); ++i) {
      CHECK(d.terms[i].a != 0.0);
      CHECK(std::abs(d.terms[i].b) <= 3.0);
      for (std::size_t j = 0; j < i; ++j)
        CHECK(std::abs(std::abs(d.terms[i].b) - std::abs(d.terms[j].b)) > 0.1);
    }
  }
}

TEST_CASE("identity negative control fails whenever sum a_i b_i = 0") {
  Rng rng(101);
  const auto& id = activation("identity");
  for (int k = 0; k < 100; ++k) {
    auto d = random_decomposition(rng, 2);
    d.terms[1].a = -d.terms[0].a * d.terms[0].b / d.terms[1].b;
    const auto r = check_nonconstant_decomposition(id, d);
    CHECK_FALSE(r.passed);
  }
}

TEST_CASE("tail decay slopes") {
  const auto& sig = activation("sigmoid");
  const auto& th = activation("tanh");
  CHECK(estimate_tail_decay(sig, {{{1, 1, 0}, {1, 3, 0}}}, 8, 16) ==
        doctest::Approx(-1.0).epsilon(0.1));
  CHECK(estimate_tail_decay(sig, {{{1, 2, 0}}}, 8, 16) == doctest::Approx(-2.0).epsilon(0.1));
  CHECK(estimate_tail_decay(th, {{{1, 1, 0}}}, 8, 16) == doctest::Approx(-2.0).epsilon(0.1));
  // Far tails, where a direct subtraction from the asymptote would be 0.
  CHECK(estimate_tail_decay(sig, {{{1, 1, 0}, {-2, -1.5, 0.3}}}, 40, 60) ==
        doctest::Approx(-1.0).epsilon(0.01));

  CHECK_THROWS_AS(estimate_tail_decay(sig, {{{1, 1, 0}}}, 2, 10), ValidationError);
  CHECK_THROWS_AS(estimate_tail_decay(sig, {{{1, 1, 0}}}, 800, 900), ResidualUnderflow);
}

TEST_CASE("silu derivative identity") {
  const auto& silu = activation("silu");
  CHECK(silu.deriv(0.0) == 0.5);
  std::vector<double> xs;
  for (int k = 0; k <= 200; ++k) xs.push_back(-10.0 + 0.1 * k);
  CHECK(silu_deriv_identity_check(xs) < 1e-12);
  const double h = 1e-5;
  CHECK(std::abs(silu.deriv(5.0) - (silu.value(5 + h) - silu.value(5 - h)) / (2 * h)) < 1e-6);
}
