#include "muplab/schemes.hpp"

#include <cmath>
#include <numbers>

#include "muplab/errors.hpp"

namespace muplab {

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::SP: return "sp";
    case Scheme::NTP: return "ntp";
    case Scheme::IP: return "ip";
    case Scheme::MuP: return "mup";
  }
  return "?";
}

Scheme parse_scheme(std::string_view tag) {
  for (Scheme s : all_schemes())
    if (to_string(s) == tag) return s;
  throw ValidationError("unknown parametrization '" + std::string(tag) +
                        "' (expected sp, ntp, ip or mup)");
}

std::vector<Scheme> all_schemes() {
  return {Scheme::SP, Scheme::NTP, Scheme::IP, Scheme::MuP};
}

LayerPlan layer_plan(Scheme scheme, std::size_t depth, std::size_t d,
                     std::size_t n, double eta) {
  if (depth < 1 || d < 1 || n < 1)
    throw ValidationError("layer_plan: depth, d and n must be >= 1");
  if (!(eta > 0.0) || !std::isfinite(eta))
    throw ValidationError("layer_plan: eta must be positive");

  const double dd = static_cast<double>(d);
  const double nn = static_cast<double>(n);
  LayerPlan p;
  p.d = d;
  p.n = n;
  p.depth = depth;
  p.init_std.resize(depth + 1);
  p.lr.resize(depth + 1);

  const auto fan_in = [&](std::size_t k) { return k == 0 ? dd : nn; };
  for (std::size_t k = 0; k <= depth; ++k) {
    const bool input = k == 0;
    const bool output = k == depth;
    switch (scheme) {
      case Scheme::SP:
        p.init_std[k] = std::sqrt(2.0 / fan_in(k));
        p.lr[k] = eta / nn;
        break;
      case Scheme::NTP:
        p.init_std[k] = std::sqrt(2.0 / fan_in(k));
        p.lr[k] = eta / fan_in(k);
        break;
      case Scheme::IP:
      case Scheme::MuP:
        if (input) {
          p.init_std[k] = std::sqrt(2.0 / dd);
          p.lr[k] = eta * nn / dd;
        } else if (output) {
          p.init_std[k] = std::numbers::sqrt2 / nn;
          p.lr[k] = eta / nn;
        } else {
          p.init_std[k] = scheme == Scheme::MuP ? std::sqrt(2.0 / nn)
                                                : std::numbers::sqrt2 / nn;
          p.lr[k] = eta;
        }
        break;
    }
  }
  return p;
}

}  // namespace muplab
