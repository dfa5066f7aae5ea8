#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace muplab {

enum class Scheme { SP, NTP, IP, MuP };

/// "sp" | "ntp" | "ip" | "mup".
std::string_view to_string(Scheme s);
Scheme parse_scheme(std::string_view tag);
std::vector<Scheme> all_schemes();

/// Per-layer initialization standard deviation and learning rate for an MLP
/// with input dimension d, L hidden layers of width n and a scalar output.
/// Index k of each list refers to layer k + 1.
struct LayerPlan {
  std::vector<double> init_std;
  std::vector<double> lr;
  std::size_t d = 0;
  std::size_t n = 0;
  std::size_t depth = 0;  // L
};

/// Concrete constants, including the sqrt(2) gains:
///   mup: std = sqrt(2/d), sqrt(2/n) (hidden), sqrt(2)/n (output);
///        lr = eta n/d, eta (hidden), eta/n (output)
///   ip:  as mup, but hidden std = sqrt(2)/n
///   sp:  std = sqrt(2/fan_in), lr = eta/n everywhere
///   ntp: std = sqrt(2/fan_in), lr = eta/fan_in (the input layer gets eta/d)
LayerPlan layer_plan(Scheme scheme, std::size_t depth, std::size_t d,
                     std::size_t n, double eta);

}  // namespace muplab
