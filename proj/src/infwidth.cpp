#include "muplab/infwidth.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "muplab/diagnostics.hpp"

namespace muplab {
namespace {

constexpr std::size_t kBlock = 8192;

std::size_t block_count(std::size_t n) { return (n + kBlock - 1) / kBlock; }

template <class Fn>
void particle_blocks(std::size_t n, std::size_t workers, Fn&& fn) {
  parallel_blocks(block_count(n), workers, [&](std::size_t b) {
    fn(b * kBlock, std::min(n, (b + 1) * kBlock));
  });
}

double block_mean(std::size_t n, std::size_t workers, auto&& term) {
  std::vector<double> partial(block_count(n), 0.0);
  parallel_blocks(partial.size(), workers, [&](std::size_t b) {
    const std::size_t lo = b * kBlock, hi = std::min(n, (b + 1) * kBlock);
    double s = 0.0;
    for (std::size_t p = lo; p < hi; ++p) s += term(p);
    partial[b] = s;
  });
  double s = 0.0;
  for (double v : partial) s += v;
  return s / static_cast<double>(n);
}

}  // namespace

std::string_view to_string(InputScale s) {
  return s == InputScale::Unit ? "unit" : "sqrt2_over_d";
}

InputScale parse_input_scale(std::string_view s) {
  if (s == "unit") return InputScale::Unit;
  if (s == "sqrt2_over_d") return InputScale::Sqrt2OverD;
  throw ValidationError("unknown input_scale '" + std::string(s) +
                        "' (expected unit or sqrt2_over_d)");
}

LimitGains limit_gains(InputScale s, std::size_t d) {
  if (s == InputScale::Unit) return {};
  const double dd = static_cast<double>(d);
  return {2.0 / dd, 1.0 / dd, 2.0, 2.0};
}

double estimate_inf_bytes(const InfConfig& cfg, std::size_t m) {
  const std::size_t L = cfg.depth, T = cfg.steps;
  double arrays = 0.0;
  auto fwd_comps = [&](std::size_t layer, std::size_t t) {
    return (layer >= 2 ? m * (t + 1) : 0) + (layer < L ? m * t : 0);
  };
  for (std::size_t layer = 1; layer <= L; ++layer) {
    for (std::size_t t = 0; t <= T; ++t)
      arrays += static_cast<double>(m * (1 + (layer < L || t == T ? fwd_comps(layer, t) : 0)));
    arrays += static_cast<double>(m * (1 + fwd_comps(layer, T)));  // current h
    const std::size_t bwd_extra = layer < L ? m : 0;
    if (layer >= 2) {
      for (std::size_t t = 0; t < T; ++t)
        arrays += static_cast<double>(m * (1 + m * (t + 1) + (layer < L ? m * (t + 1) : 0)));
      arrays += 3.0 * static_cast<double>(m * (T + 1) + m * T);  // families
      arrays += static_cast<double>(m);                          // cumulative hats
    } else {
      arrays += static_cast<double>(2 * m * (1 + fwd_comps(1, T) + bwd_extra));
    }
  }
  arrays += 2.0 * static_cast<double>(1 + m * T) + 2.0 * static_cast<double>(m);
  return arrays * 8.0 * static_cast<double>(cfg.particles);
}

void check_inf_budget(const InfConfig& cfg, std::size_t m) {
  if (cfg.depth < 1) throw ValidationError("infwidth: depth must be >= 1");
  if (cfg.particles < 2) throw ValidationError("infwidth: need at least 2 particles");
  if (!(cfg.eta > 0.0) || !std::isfinite(cfg.eta))
    throw ValidationError("infwidth: eta must be positive");
  if (m * cfg.steps > 64)
    throw ResourceLimit("infwidth: m * steps = " + std::to_string(m * cfg.steps) +
                        " exceeds 64");
  const double mb = estimate_inf_bytes(cfg, m) / (1024.0 * 1024.0);
  if (mb > cfg.memory_limit_mb) {
    std::ostringstream msg;
    msg << "infwidth: estimated footprint " << mb << " MB exceeds the limit of "
        << cfg.memory_limit_mb << " MB";
    throw ResourceLimit(msg.str());
  }
}

void Field::drop_tangent() {
  data.resize(n);
  data.shrink_to_fit();
  comps = 0;
}

HatFamily::HatFamily(std::string name, std::size_t particles, double gain,
                     std::uint64_t seed)
    : name_(std::move(name)), n_(particles), gain_(gain), seed_(seed) {}

std::size_t HatFamily::extend(std::span<const double> cross, double var,
                              std::vector<double> key, double jitter_rel,
                              std::size_t workers) {
  const std::size_t k = size();
  if (cross.size() != k)
    throw DimensionMismatch("hat family '" + name_ + "': cross-covariance size");
  if (!std::isfinite(var) || var < 0.0)
    throw CovarianceNotPD("hat family '" + name_ + "': invalid variance");

  Mat target(k + 1, k + 1);
  target.topLeftCorner(k, k) = target_;
  for (std::size_t a = 0; a < k; ++a) {
    target(k, a) = cross[a];
    target(a, k) = cross[a];
  }
  target(k, k) = var;
  const double scale = target.trace() / static_cast<double>(k + 1);
  const double jitter = jitter_rel * scale;

  std::vector<double> l(k, 0.0);
  double ll = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    double s = cross[a];
    for (std::size_t b = 0; b < a; ++b) s -= chol_(a, b) * l[b];
    l[a] = chol_(a, a) > 0.0 ? s / chol_(a, a) : 0.0;
    ll += l[a] * l[a];
  }
  const double schur = var - ll;
  if (schur < -1e-6 * std::max(var, scale)) {
    std::ostringstream msg;
    msg << "hat family '" << name_ << "': conditional variance " << schur
        << " is negative";
    throw CovarianceNotPD(msg.str());
  }
  const double d = var == 0.0 ? 0.0 : std::sqrt(std::max(schur, 0.0) + jitter);

  Mat chol = Mat::Zero(k + 1, k + 1);
  chol.topLeftCorner(k, k) = chol_;
  for (std::size_t a = 0; a < k; ++a) chol(k, a) = l[a];
  chol(k, k) = d;

  std::vector<double> eps(n_), hat(n_);
  particle_blocks(n_, workers, [&](std::size_t lo, std::size_t hi) {
    Rng rng(hash64({seed_, k, lo / kBlock}));
    for (std::size_t p = lo; p < hi; ++p) eps[p] = rng.normal();
    for (std::size_t p = lo; p < hi; ++p) hat[p] = d * eps[p];
    for (std::size_t a = 0; a < k; ++a) {
      if (l[a] == 0.0) continue;
      const double la = l[a];
      const double* ea = eps_[a].data();
      for (std::size_t p = lo; p < hi; ++p) hat[p] += la * ea[p];
    }
  });

  chol_ = std::move(chol);
  target_ = std::move(target);
  eps_.push_back(std::move(eps));
  hats_.push_back(std::move(hat));
  keys_.push_back(std::move(key));
  return k;
}

double HatFamily::covariance_error() const {
  const std::size_t k = size();
  double worst = 0.0;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b <= a; ++b) {
      const double scale = std::sqrt(target_(a, a) * target_(b, b));
      if (!(scale > 0.0)) continue;
      const double emp = block_mean(n_, 1, [&](std::size_t p) {
        return hats_[a][p] * hats_[b][p];
      });
      worst = std::max(worst, std::abs(emp - target_(a, b)) / scale);
    }
  return worst;
}

std::size_t extend_hat(HatFamily& family, std::vector<double> key_values,
                       double jitter_rel, std::size_t workers) {
  const std::size_t n = family.particles();
  if (key_values.size() != n)
    throw DimensionMismatch("extend_hat: key has the wrong particle count");
  std::vector<double> cross(family.size());
  for (std::size_t a = 0; a < cross.size(); ++a) {
    const auto& other = family.key(a);
    if (other.size() != n)
      throw ValidationError("extend_hat: family coordinate has no stored key");
    cross[a] = family.gain() * block_mean(n, workers, [&](std::size_t p) {
      return key_values[p] * other[p];
    });
  }
  const double var = family.gain() * block_mean(n, workers, [&](std::size_t p) {
    return key_values[p] * key_values[p];
  });
  return family.extend(cross, var, std::move(key_values), jitter_rel, workers);
}

template <class Fn>
void ZEnsemble::for_particles(Fn&& fn) const {
  particle_blocks(n_, cfg_.workers, std::forward<Fn>(fn));
}

double ZEnsemble::mean(const double* a) const {
  return block_mean(n_, cfg_.workers, [&](std::size_t p) { return a[p]; });
}

double ZEnsemble::mean_product(const double* a, const double* b) const {
  return block_mean(n_, cfg_.workers, [&](std::size_t p) { return a[p] * b[p]; });
}

void ZEnsemble::check_finite(const Field& f, const char* what) const {
  const double* v = f.val();
  for (std::size_t p = 0; p < n_; ++p)
    if (!std::isfinite(v[p])) {
      std::ostringstream msg;
      msg << "particle " << p << " has a non-finite " << what << " at step " << t_;
      throw NonFiniteParticle(msg.str());
    }
}

namespace {

// x = phi(h) with the chain rule applied to every component.
Field apply_activation(const Activation& act, const Field& h,
                       std::size_t workers) {
  Field x(h.n, h.comps);
  particle_blocks(h.n, workers, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> slope(hi - lo);
    for (std::size_t p = lo; p < hi; ++p) {
      x.val()[p] = act.value(h.val()[p]);
      slope[p - lo] = act.deriv(h.val()[p]);
    }
    for (std::size_t k = 0; k < h.comps; ++k) {
      const double* hk = h.d(k);
      double* xk = x.d(k);
      for (std::size_t p = lo; p < hi; ++p) xk[p] = slope[p - lo] * hk[p];
    }
  });
  return x;
}

// Copy of f with room for `comps` tangent components.
Field widened(const Field& f, std::size_t comps) {
  Field out(f.n, std::max(comps, f.comps));
  std::copy(f.data.begin(), f.data.end(), out.data.begin());
  return out;
}

void axpy(Field& y, double a, const Field& x, std::size_t lo, std::size_t hi) {
  if (a == 0.0) return;
  {
    const double* xv = x.val();
    double* yv = y.val();
    for (std::size_t p = lo; p < hi; ++p) yv[p] += a * xv[p];
  }
  for (std::size_t k = 0; k < x.comps; ++k) {
    const double* xk = x.d(k);
    double* yk = y.d(k);
    for (std::size_t p = lo; p < hi; ++p) yk[p] += a * xk[p];
  }
}

}  // namespace

ZEnsemble init_ensemble(const Dataset& data, const InfConfig& cfg, Rng& rng) {
  data.validate();
  const std::size_t m = data.size();
  check_inf_budget(cfg, m);
  const Activation& act = activation(cfg.activation);
  if (!act.smooth)
    throw NonSmoothActivation("infwidth needs a twice differentiable activation, got '" +
                              act.name + "'");

  ZEnsemble e;
  e.cfg_ = cfg;
  e.act_ = &act;
  e.n_ = cfg.particles;
  e.L_ = cfg.depth;
  e.m_ = m;
  e.seed_ = rng.next_u64();
  const std::size_t N = e.n_, L = e.L_;
  const LimitGains gains = limit_gains(cfg.input_scale, data.dim());

  if (m >= 2) {
    const auto report =
        check_dataset_assumption(data.inputs, default_assumption_tol(data.inputs));
    for (const auto& v : report.violations)
      e.warnings_.push_back("dataset assumption violated: " + describe(v));
  }

  e.log_.eta = cfg.eta;
  e.log_.gains = gains;
  e.log_.input_gram = gram(data.inputs, 1.0);
  e.log_.forward.assign(L, {});
  e.log_.backward.assign(L, {});

  e.input_ = HatFamily("input", N, gains.input_cov, hash64({e.seed_, 1}));
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<double> cross(j);
    for (std::size_t i = 0; i < j; ++i)
      cross[i] = gains.input_cov * e.log_.input_gram(i, j);
    e.input_.extend(cross, gains.input_cov * e.log_.input_gram(j, j), {},
                    cfg.jitter, cfg.workers);
  }

  e.groups_.assign(L, {});
  e.fwd_.resize(L);
  e.bwd_.resize(L);
  e.h_.assign(L, std::vector<Field>(m));
  e.x_.assign(L, {});
  e.dh_.assign(L, {});
  e.u_.assign(L, std::vector<std::vector<double>>(m));
  for (std::size_t l = 1; l < L; ++l) {
    e.fwd_[l] = HatFamily("forward" + std::to_string(l + 1), N,
                          gains.hidden_var, hash64({e.seed_, 2, l}));
    e.bwd_[l] = HatFamily("backward" + std::to_string(l + 1), N,
                          gains.hidden_var, hash64({e.seed_, 3, l}));
  }

  for (std::size_t j = 0; j < m; ++j) {
    Field h(N, 0);
    std::copy(e.input_.hat(j).begin(), e.input_.hat(j).end(), h.val());
    e.h_[0][j] = std::move(h);
  }
  e.x_[0].emplace_back();
  for (std::size_t j = 0; j < m; ++j)
    e.x_[0][0].push_back(apply_activation(act, e.h_[0][j], cfg.workers));

  for (std::size_t l = 1; l < L; ++l) {
    auto& g = e.groups_[l];
    for (std::size_t j = 0; j < m; ++j) {
      const Field& key = e.x_[l - 1][0][j];
      extend_hat(e.fwd_[l], std::vector<double>(key.val(), key.val() + N),
                 cfg.jitter, cfg.workers);
      g.forward_index.push_back(g.comps++);
    }
    for (std::size_t j = 0; j < m; ++j) {
      Field h(N, g.comps);
      const auto& w = e.fwd_[l].hat(j);
      std::copy(w.begin(), w.end(), h.val());
      std::fill(h.d(g.forward_index[j]), h.d(g.forward_index[j]) + N, 1.0);
      e.u_[l][j] = w;
      e.h_[l][j] = std::move(h);
    }
    e.log_.forward[l].push_back(Mat(m, 0));
    e.x_[l].emplace_back();
    for (std::size_t j = 0; j < m; ++j)
      e.x_[l][0].push_back(apply_activation(act, e.h_[l][j], cfg.workers));
  }

  e.what0_.resize(N);
  const double sd = std::sqrt(gains.output_var);
  particle_blocks(N, cfg.workers, [&](std::size_t lo, std::size_t hi) {
    Rng r(hash64({e.seed_, 4, lo / kBlock}));
    for (std::size_t p = lo; p < hi; ++p) e.what0_[p] = sd * r.normal();
  });
  e.what_ = Field(N, 0);
  std::copy(e.what0_.begin(), e.what0_.end(), e.what_.val());
  e.f_.assign(m, 0.0);
  for (std::size_t l = 0; l < L; ++l)
    for (const auto& f : e.x_[l][0]) e.check_finite(f, "initial feature");
  return e;
}

void ZEnsemble::forward_step(std::size_t t, std::span<const double> chi_prev) {
  if (t != t_ + 1 || log_.chi.size() != t)
    throw ValidationError("forward_step(" + std::to_string(t) +
                          "): backward step " + std::to_string(t - 1) +
                          " has not run");
  if (chi_prev.size() != m_)
    throw DimensionMismatch("forward_step: chi has the wrong length");
  if (!std::equal(chi_prev.begin(), chi_prev.end(), log_.chi[t - 1].begin()))
    throw ValidationError("forward_step: chi differs from the one given to backward_step");
  const std::vector<double>& chi = log_.chi[t - 1];
  const double eta = cfg_.eta;
  const std::size_t N = n_;

  // Output weight: What_t = What_{t-1} - eta sum_i chi_{t-1,i} x^L_{t-1}(xi_i).
  what_prev_ = Field(N, 0);
  std::copy(what_.val(), what_.val() + N, what_prev_.val());
  what_ = widened(what_, groups_[L_ - 1].comps);
  for_particles([&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = 0; i < m_; ++i)
      axpy(what_, -eta * chi[i], x_[L_ - 1][t - 1][i], lo, hi);
  });
  for (auto& f : x_[L_ - 1][t - 1]) f.drop_tangent();

  // First layer.
  {
    auto& g = groups_[0];
    std::vector<Field> next;
    for (std::size_t j = 0; j < m_; ++j) next.push_back(widened(h_[0][j], g.comps));
    for_particles([&](std::size_t lo, std::size_t hi) {
      for (std::size_t j = 0; j < m_; ++j)
        for (std::size_t i = 0; i < m_; ++i)
          axpy(next[j], -eta * log_.gains.first_lr * chi[i] * log_.input_gram(i, j),
               dh_[0][0][i], lo, hi);
    });
    h_[0] = std::move(next);
    x_[0].emplace_back();
    for (std::size_t j = 0; j < m_; ++j) {
      check_finite(h_[0][j], "preactivation");
      x_[0][t].push_back(apply_activation(*act_, h_[0][j], cfg_.workers));
    }
  }
  for (std::size_t l = 1; l < L_; ++l) forward_layer(l, t);
  t_ = t;
  compute_output_delta(t);
}

void ZEnsemble::forward_layer(std::size_t l, std::size_t t) {
  const std::size_t N = n_, m = m_;
  const double sigma2 = log_.gains.hidden_var;
  const double eta = cfg_.eta;
  auto& g = groups_[l];
  const auto& below = groups_[l - 1];

  // New forward hats keyed by dx^{l-1}_t.
  for (std::size_t j = 0; j < m; ++j) {
    const double* now = x_[l - 1][t][j].val();
    const double* before = x_[l - 1][t - 1][j].val();
    std::vector<double> key(N);
    for (std::size_t p = 0; p < N; ++p) key[p] = now[p] - before[p];
    const std::size_t k = extend_hat(fwd_[l], std::move(key), cfg_.jitter, cfg_.workers);
    g.forward_index.push_back(g.comps++);
    const auto& w = fwd_[l].hat(k);
    auto& u = u_[l][j];
    for (std::size_t p = 0; p < N; ++p) u[p] += w[p];
  }

  // K(j, s m + i) = sigma^2 E[d x^{l-1}_t(xi_j) / d b^l_{s,i}]
  //                 - eta chi_{s,i} E[x^{l-1}_s(xi_i) x^{l-1}_t(xi_j)].
  Mat K(m, m * t);
  for (std::size_t j = 0; j < m; ++j) {
    const Field& xt = x_[l - 1][t][j];
    for (std::size_t s = 0; s < t; ++s)
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t comp = below.backward_index.at(s * m + i);
        const double sens = comp < xt.comps ? mean(xt.d(comp)) : 0.0;
        const double corr = mean_product(x_[l - 1][s][i].val(), xt.val());
        K(j, s * m + i) = sigma2 * sens - eta * log_.chi[s][i] * corr;
      }
  }
  log_.forward[l].push_back(K);

  x_[l].emplace_back();
  for (std::size_t j = 0; j < m; ++j) {
    Field h(N, g.comps);
    std::copy(u_[l][j].begin(), u_[l][j].end(), h.val());
    for (std::size_t r = 0; r <= t; ++r) {
      double* col = h.d(g.forward_index[r * m + j]);
      std::fill(col, col + N, 1.0);
    }
    for_particles([&](std::size_t lo, std::size_t hi) {
      for (std::size_t s = 0; s < t; ++s)
        for (std::size_t i = 0; i < m; ++i)
          axpy(h, K(j, s * m + i), dh_[l][s][i], lo, hi);
    });
    check_finite(h, "preactivation");
    x_[l][t].push_back(apply_activation(*act_, h, cfg_.workers));
    h_[l][j] = std::move(h);
  }
}

void ZEnsemble::compute_output_delta(std::size_t t) {
  const auto& now = x_[L_ - 1][t];
  const auto& before = x_[L_ - 1][t - 1];
  const double* w = what_.val();
  const double* wp = what_prev_.val();
  for (std::size_t j = 0; j < m_; ++j) {
    const double* a = now[j].val();
    const double* b = before[j].val();
    const double delta = block_mean(n_, cfg_.workers, [&](std::size_t p) {
      return (w[p] - wp[p]) * a[p] + wp[p] * (a[p] - b[p]);
    });
    f_[j] += delta;
  }
}

void ZEnsemble::backward_step(std::size_t t, std::span<const double> chi_t) {
  if (t != t_ || log_.chi.size() != t)
    throw ValidationError("backward_step(" + std::to_string(t) +
                          ") does not follow forward step " + std::to_string(t_));
  if (chi_t.size() != m_)
    throw DimensionMismatch("backward_step: chi has the wrong length");
  log_.chi.emplace_back(chi_t.begin(), chi_t.end());
  const std::size_t N = n_, m = m_;
  const double sigma2 = log_.gains.hidden_var;
  const double eta = cfg_.eta;

  std::vector<Field> dx(m, what_);
  for (std::size_t l = L_; l-- > 0;) {
    auto& g = groups_[l];
    std::vector<Field> dh;
    dh.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
      const Field& h = h_[l][j];
      const Field& up = dx[j];
      Field out(N, g.comps);
      for_particles([&](std::size_t lo, std::size_t hi) {
        std::vector<double> d1(hi - lo), d2(hi - lo);
        for (std::size_t p = lo; p < hi; ++p) {
          d1[p - lo] = act_->deriv(h.val()[p]);
          d2[p - lo] = act_->deriv2(h.val()[p]);
          out.val()[p] = up.val()[p] * d1[p - lo];
        }
        for (std::size_t k = 0; k < g.comps; ++k) {
          double* o = out.d(k);
          if (k < up.comps) {
            const double* uk = up.d(k);
            for (std::size_t p = lo; p < hi; ++p) o[p] = uk[p] * d1[p - lo];
          }
          if (k < h.comps) {
            const double* hk = h.d(k);
            const double* uv = up.val();
            for (std::size_t p = lo; p < hi; ++p) o[p] += uv[p] * d2[p - lo] * hk[p];
          }
        }
      });
      check_finite(out, "gradient");
      dh.push_back(std::move(out));
    }

    if (l == 0) {
      dh_[0].clear();
      dh_[0].push_back(std::move(dh));
      dh1_step_ = t;
      break;
    }

    // New backward hats keyed by dh^l_t, then
    // dx^{l-1}_t(xi_j) = b_{t,j} + sum_{r<=t,i} M(j, r m + i) x^{l-1}_r(xi_i).
    auto& below = groups_[l - 1];
    for (std::size_t j = 0; j < m; ++j) {
      extend_hat(bwd_[l], std::vector<double>(dh[j].val(), dh[j].val() + N),
                 cfg_.jitter, cfg_.workers);
      below.backward_index.push_back(below.comps++);
    }
    Mat M(m, m * (t + 1));
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<double> a(m * (t + 1));
      for (std::size_t q = 0; q < a.size(); ++q)
        a[q] = mean(dh[j].d(g.forward_index[q]));
      for (std::size_t r = 0; r <= t; ++r)
        for (std::size_t i = 0; i < m; ++i) {
          // Cumulative coordinate u_r = w_0 + ... + w_r.
          const double du = r < t ? a[r * m + i] - a[(r + 1) * m + i] : a[r * m + i];
          double v = sigma2 * du;
          if (r < t)
            v -= eta * log_.chi[r][i] * mean_product(dh_[l][r][i].val(), dh[j].val());
          M(j, r * m + i) = v;
        }
    }
    log_.backward[l].push_back(M);

    std::vector<Field> next;
    for (std::size_t j = 0; j < m; ++j) {
      Field out(N, below.comps);
      const auto& b = bwd_[l].hat(t * m + j);
      std::copy(b.begin(), b.end(), out.val());
      double* col = out.d(below.backward_index[t * m + j]);
      std::fill(col, col + N, 1.0);
      for_particles([&](std::size_t lo, std::size_t hi) {
        for (std::size_t r = 0; r <= t; ++r)
          for (std::size_t i = 0; i < m; ++i)
            axpy(out, M(j, r * m + i), x_[l - 1][r][i], lo, hi);
      });
      next.push_back(std::move(out));
    }
    dh_[l].push_back(std::move(dh));
    dx = std::move(next);
  }
}

const HatFamily& ZEnsemble::family(std::size_t layer, FamilyKind kind) const {
  if (layer < 2 || layer > L_)
    throw ValidationError("hat families exist for layers 2..L only");
  return kind == FamilyKind::Forward ? fwd_[layer - 1] : bwd_[layer - 1];
}

std::size_t ZEnsemble::tangent_index(std::size_t layer, FamilyKind kind,
                                     std::size_t index) const {
  if (layer < 2 || layer > L_)
    throw ValidationError("hat families exist for layers 2..L only");
  if (kind == FamilyKind::Forward) return groups_[layer - 1].forward_index.at(index);
  return groups_[layer - 2].backward_index.at(index);
}

const Field& ZEnsemble::dh(std::size_t layer, std::size_t t, std::size_t j) const {
  if (layer < 1 || layer > L_) throw ValidationError("dh: layer out of range");
  if (layer == 1) {
    if (dh_[0].empty() || t != dh1_step_)
      throw ValidationError("dh: layer 1 keeps only the latest backward step");
    return dh_[0][0].at(j);
  }
  return dh_[layer - 1].at(t).at(j);
}

const Field& ZEnsemble::x(std::size_t layer, std::size_t s, std::size_t j) const {
  if (layer < 1 || layer > L_) throw ValidationError("x: layer out of range");
  return x_[layer - 1].at(s).at(j);
}

const Field& ZEnsemble::h(std::size_t layer, std::size_t j) const {
  if (layer < 1 || layer > L_) throw ValidationError("h: layer out of range");
  return h_[layer - 1].at(j);
}

InfSummary ZEnsemble::summary() const {
  InfSummary s;
  const std::size_t m = m_;
  for (std::size_t l = 0; l < L_; ++l) {
    Mat init(m, m), fin(m, m), joint(2 * m, 2 * m);
    std::vector<const double*> rows;
    for (std::size_t i = 0; i < m; ++i) {
      rows.push_back(x_[l][0][i].val());
      rows.push_back(x_[l][t_][i].val());
    }
    for (std::size_t a = 0; a < 2 * m; ++a)
      for (std::size_t b = 0; b <= a; ++b) {
        const double v = mean_product(rows[a], rows[b]);
        joint(a, b) = v;
        joint(b, a) = v;
      }
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        init(i, j) = joint(2 * i, 2 * j);
        fin(i, j) = joint(2 * i + 1, 2 * j + 1);
      }
    s.x_moment_initial.push_back(init);
    s.x_moment_final.push_back(fin);
    s.witness_min_eig.push_back(min_eigenvalue(joint));
  }
  double worst = input_.covariance_error();
  for (std::size_t l = 1; l < L_; ++l)
    worst = std::max({worst, fwd_[l].covariance_error(), bwd_[l].covariance_error()});
  s.max_hat_covariance_error.push_back(worst);
  return s;
}

InfTrajectory run(const Dataset& data, const InfConfig& cfg, Rng& rng,
                  InfSummary* summary) {
  if (cfg.steps < 1) throw ValidationError("infwidth run needs steps >= 1");
  ZEnsemble e = init_ensemble(data, cfg, rng);
  const std::size_t m = data.size();
  auto signals = [&](const std::vector<double>& f) {
    std::vector<double> chi(m);
    for (std::size_t i = 0; i < m; ++i)
      chi[i] = error_signal(cfg.loss, f[i], data.labels[i]);
    return chi;
  };
  InfTrajectory traj;
  traj.f.push_back(e.output());
  traj.chi.push_back(signals(e.output()));
  e.backward_step(0, traj.chi.back());
  for (std::size_t t = 1; t <= cfg.steps; ++t) {
    e.forward_step(t, traj.chi.back());
    traj.f.push_back(e.output());
    for (double v : traj.f.back())
      if (!std::isfinite(v)) throw NumericalDivergence(t, "limit output is not finite");
    traj.chi.push_back(signals(e.output()));
    if (t < cfg.steps) e.backward_step(t, traj.chi.back());
  }
  if (summary) *summary = e.summary();
  return traj;
}

}  // namespace muplab
