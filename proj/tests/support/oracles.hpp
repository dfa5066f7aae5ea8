#pragma once

// Reference computations shared by the unit and acceptance tests. None of
// them call into the code paths they are used to check.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "muplab/infwidth.hpp"
#include "muplab/network.hpp"
#include "muplab/numerics.hpp"

namespace oracle {

/// |a - b| / max(|a|, |b|, floor).
inline double rel_err(double a, double b, double floor = 0.0) {
  const double s = std::max({std::abs(a), std::abs(b), floor});
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

/// Eigenvalues of a symmetric 3x3 matrix from the roots of its
/// characteristic polynomial (trigonometric form), polished with Newton
/// steps in long double. Ascending.
inline std::array<double, 3> sym3_eigenvalues(const muplab::Mat& a) {
  using ld = long double;
  const ld a00 = a(0, 0), a11 = a(1, 1), a22 = a(2, 2);
  const ld a01 = a(0, 1), a02 = a(0, 2), a12 = a(1, 2);
  // lambda^3 + c2 lambda^2 + c1 lambda + c0
  const ld c2 = -(a00 + a11 + a22);
  const ld c1 = a00 * a11 + a00 * a22 + a11 * a22 - a01 * a01 - a02 * a02 - a12 * a12;
  const ld c0 = -(a00 * (a11 * a22 - a12 * a12) - a01 * (a01 * a22 - a12 * a02) +
                  a02 * (a01 * a12 - a11 * a02));
  const ld shift = -c2 / 3;
  const ld p = c1 - c2 * c2 / 3;
  const ld q = 2 * c2 * c2 * c2 / 27 - c2 * c1 / 3 + c0;
  std::array<ld, 3> roots{};
  if (p > -1e-30L) {
    roots.fill(shift);
  } else {
    const ld r = std::sqrt(-p / 3);
    ld arg = (3 * q) / (2 * p) * std::sqrt(-3 / p);
    arg = std::clamp(arg, ld(-1), ld(1));
    const ld phi = std::acos(arg) / 3;
    for (int k = 0; k < 3; ++k)
      roots[k] = 2 * r * std::cos(phi - 2 * std::numbers::pi_v<ld> * k / 3) + shift;
  }
  for (auto& x : roots) {
    for (int it = 0; it < 4; ++it) {
      const ld f = ((x + c2) * x + c1) * x + c0;
      const ld df = (3 * x + 2 * c2) * x + c1;
      if (df == 0) break;
      x -= f / df;
    }
  }
  std::sort(roots.begin(), roots.end());
  return {static_cast<double>(roots[0]), static_cast<double>(roots[1]),
          static_cast<double>(roots[2])};
}

/// Network output by explicit index loops, no matrix products.
inline double straight_forward(const muplab::Mlp& mlp, const muplab::Vec& xi) {
  std::vector<double> x(xi.data(), xi.data() + xi.size());
  for (std::size_t l = 0; l < mlp.depth(); ++l) {
    const muplab::Mat& w = mlp.weights[l];
    std::vector<double> h(static_cast<std::size_t>(w.rows()), 0.0);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index k = 0; k < w.cols(); ++k)
        h[static_cast<std::size_t>(i)] += w(i, k) * x[static_cast<std::size_t>(k)];
    for (auto& v : h) v = mlp.act->value(v);
    x = std::move(h);
  }
  const muplab::Mat& out = mlp.weights.back();
  double f = 0.0;
  for (Eigen::Index k = 0; k < out.cols(); ++k)
    f += out(0, k) * x[static_cast<std::size_t>(k)];
  return f;
}

/// E[fn(s1 u, s2 v)] for independent standard normals u, v, by the
/// trapezoid rule on [-w, w]^2 (spectrally accurate for smooth integrands
/// with Gaussian weight).
template <class Fn>
double gauss2_expect(Fn&& fn, double s1, double s2, double w = 10.0,
                     std::size_t points = 2001) {
  const double du = 2.0 * w / static_cast<double>(points - 1);
  std::vector<double> z(points), wt(points);
  for (std::size_t k = 0; k < points; ++k) {
    z[k] = -w + du * static_cast<double>(k);
    wt[k] = std::exp(-0.5 * z[k] * z[k]) / std::sqrt(2.0 * std::numbers::pi) * du;
  }
  double s = 0.0;
  for (std::size_t a = 0; a < points; ++a) {
    double row = 0.0;
    for (std::size_t b = 0; b < points; ++b) row += wt[b] * fn(s1 * z[a], s2 * z[b]);
    s += wt[a] * row;
  }
  return s;
}

/// One particle's hat values, copied out of an ensemble.
struct ParticleHats {
  std::vector<double> input;             // h^1_0(xi_j)
  std::vector<std::vector<double>> fwd;  // [layer - 1][k], layers >= 2
  std::vector<std::vector<double>> bwd;  // [layer - 1][k], layers >= 2
  double what0 = 0.0;
};

inline ParticleHats particle_hats(const muplab::ZEnsemble& e, std::size_t p) {
  using Kind = muplab::ZEnsemble::FamilyKind;
  ParticleHats out;
  for (std::size_t j = 0; j < e.samples(); ++j)
    out.input.push_back(e.input_family().hat(j)[p]);
  out.fwd.resize(e.depth());
  out.bwd.resize(e.depth());
  for (std::size_t l = 2; l <= e.depth(); ++l) {
    const auto& f = e.family(l, Kind::Forward);
    const auto& b = e.family(l, Kind::Backward);
    for (std::size_t k = 0; k < f.size(); ++k) out.fwd[l - 1].push_back(f.hat(k)[p]);
    for (std::size_t k = 0; k < b.size(); ++k) out.bwd[l - 1].push_back(b.hat(k)[p]);
  }
  out.what0 = e.output_weight_initial()[p];
  return out;
}

/// Scalar trajectory of one particle: [layer - 1][t][j].
struct ParticleState {
  std::vector<std::vector<std::vector<double>>> h, x, dh;
  double what = 0.0;
};

/// Recomputes a particle from its hats and the ensemble's logged constants
/// through forward step T (backward steps 0..T-1). The constants are held
/// fixed, so bumping a hat gives that particle's partial derivatives.
inline ParticleState replay(const muplab::CoefficientLog& log,
                            const muplab::Activation& act, std::size_t L,
                            std::size_t m, std::size_t T, const ParticleHats& hats) {
  ParticleState st;
  st.h.assign(L, {});
  st.x.assign(L, {});
  st.dh.assign(L, {});
  std::vector<std::vector<double>> u(L, std::vector<double>(m, 0.0));
  double what = hats.what0;
  for (std::size_t t = 0; t <= T; ++t) {
    std::vector<double> h1(m);
    if (t == 0) {
      h1 = hats.input;
    } else {
      for (std::size_t i = 0; i < m; ++i)
        what -= log.eta * log.chi[t - 1][i] * st.x[L - 1][t - 1][i];
      for (std::size_t j = 0; j < m; ++j) {
        double v = st.h[0][t - 1][j];
        for (std::size_t i = 0; i < m; ++i)
          v -= log.eta * log.gains.first_lr * log.chi[t - 1][i] *
               log.input_gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
               st.dh[0][t - 1][i];
        h1[j] = v;
      }
    }
    auto push = [&](std::size_t l, const std::vector<double>& h) {
      std::vector<double> x(m);
      for (std::size_t j = 0; j < m; ++j) x[j] = act.value(h[j]);
      st.h[l].push_back(h);
      st.x[l].push_back(std::move(x));
    };
    push(0, h1);
    for (std::size_t l = 1; l < L; ++l) {
      const muplab::Mat& K = log.forward[l][t];
      std::vector<double> h(m);
      for (std::size_t j = 0; j < m; ++j) {
        u[l][j] += hats.fwd[l][t * m + j];
        double v = u[l][j];
        for (std::size_t s = 0; s < t; ++s)
          for (std::size_t i = 0; i < m; ++i)
            v += K(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(s * m + i)) *
                 st.dh[l][s][i];
        h[j] = v;
      }
      push(l, h);
    }
    if (t == T) break;
    std::vector<double> dx(m, what);
    for (std::size_t l = L; l-- > 0;) {
      std::vector<double> dh(m);
      for (std::size_t j = 0; j < m; ++j) dh[j] = dx[j] * act.deriv(st.h[l][t][j]);
      if (l > 0) {
        const muplab::Mat& M = log.backward[l][t];
        for (std::size_t j = 0; j < m; ++j) {
          double v = hats.bwd[l][t * m + j];
          for (std::size_t r = 0; r <= t; ++r)
            for (std::size_t i = 0; i < m; ++i)
              v += M(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r * m + i)) *
                   st.x[l - 1][r][i];
          dx[j] = v;
        }
      }
      st.dh[l].push_back(std::move(dh));
    }
  }
  st.what = what;
  return st;
}

struct TapeComparison {
  double worst_value = 0.0;  // |replayed h - ensemble h| at step T
  double worst_rel = 0.0;    // tape derivative vs central difference
  std::size_t compared = 0;
};

/// For each listed particle: replays it from its hats, then bumps every hat
/// of every layer group by +-step and compares the central differences of
/// h, x and dh with the ensemble's tape derivatives. The ensemble must have
/// completed forward step T.
inline TapeComparison compare_tape(const muplab::ZEnsemble& e, const muplab::Activation& act,
                                   std::size_t T, const std::vector<std::size_t>& particles,
                                   double step, double floor) {
  using Kind = muplab::ZEnsemble::FamilyKind;
  const std::size_t L = e.depth(), m = e.samples();
  TapeComparison out;
  for (std::size_t p : particles) {
    const auto hats = particle_hats(e, p);
    const auto base = replay(e.coefficients(), act, L, m, T, hats);
    for (std::size_t l = 1; l <= L; ++l)
      for (std::size_t j = 0; j < m; ++j)
        out.worst_value =
            std::max(out.worst_value, std::abs(base.h[l - 1][T][j] - e.h(l, j).val()[p]));

    for (std::size_t l = 1; l <= L; ++l) {
      struct Hat {
        Kind kind;
        std::size_t layer, index;
      };
      std::vector<Hat> group;
      if (l >= 2)
        for (std::size_t k = 0; k < e.family(l, Kind::Forward).size(); ++k)
          group.push_back({Kind::Forward, l, k});
      if (l < L)
        for (std::size_t k = 0; k < e.family(l + 1, Kind::Backward).size(); ++k)
          group.push_back({Kind::Backward, l + 1, k});
      for (const auto& hat : group) {
        auto bumped = [&](double delta) {
          auto h = hats;
          auto& v = hat.kind == Kind::Forward ? h.fwd[hat.layer - 1][hat.index]
                                              : h.bwd[hat.layer - 1][hat.index];
          v += delta;
          return replay(e.coefficients(), act, L, m, T, h);
        };
        const auto up = bumped(step), down = bumped(-step);
        const std::size_t comp = e.tangent_index(hat.layer, hat.kind, hat.index);
        auto compare = [&](double tape, double hi, double lo) {
          out.worst_rel = std::max(out.worst_rel, rel_err(tape, (hi - lo) / (2 * step), floor));
          ++out.compared;
        };
        for (std::size_t j = 0; j < m; ++j) {
          compare(e.h(l, j).deriv(comp, p), up.h[l - 1][T][j], down.h[l - 1][T][j]);
          if (l < L)
            for (std::size_t s = 0; s <= T; ++s)
              compare(e.x(l, s, j).deriv(comp, p), up.x[l - 1][s][j], down.x[l - 1][s][j]);
          for (std::size_t s = l == 1 ? T - 1 : 0; s < T; ++s)
            compare(e.dh(l, s, j).deriv(comp, p), up.dh[l - 1][s][j], down.dh[l - 1][s][j]);
        }
      }
    }
  }
  return out;
}

}  // namespace oracle
