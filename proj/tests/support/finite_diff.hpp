#pragma once

// Central finite-difference oracle. Independent of the reverse-mode code it checks:
// it only evaluates the scalar objective.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace phyadv::testing {

/// d f / d x_i by (f(x + h e_i) - f(x - h e_i)) / 2h, perturbing `x` in place.
inline std::vector<double> central_difference(std::span<double> x, const std::function<double()>& f,
                                              double h = 1e-4) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f();
    x[i] = keep - h;
    const double down = f();
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max_i max(|a_i|, |b_i|); 0 when both vanish.
inline double max_relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return scale == 0.0 ? 0.0 : diff / scale;
}

}  // namespace phyadv::testing
