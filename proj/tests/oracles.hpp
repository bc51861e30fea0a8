#pragma once

// Test-only reference computations, independent of the library code paths.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

/// Exact alpha-expectile: the first-order condition is piecewise linear in m
/// between sorted atoms, so scan segments and solve the linear piece.
inline double expectile_exact(std::vector<double> x, std::vector<double> p, double alpha) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  auto residual = [&](double m) {
    double r = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - m;
      r += d > 0 ? alpha * p[i] * d : (1 - alpha) * p[i] * d;
    }
    return r;
  };
  for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
    const double a = x[idx[k]], b = x[idx[k + 1]];
    const double ra = residual(a), rb = residual(b);
    if (ra >= 0 && rb <= 0) {
      if (ra == rb) return a;
      return a + (b - a) * ra / (ra - rb);
    }
  }
  return x[idx.front()];
}

/// Brute-force minimization of E[L(X - m)] by dense grid then ternary search.
inline double expectile_argmin(const std::vector<double>& x, const std::vector<double>& p, double alpha) {
  auto risk = [&](double m) {
    double r = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double u = x[i] - m;
      r += p[i] * (u >= 0 ? alpha : 1 - alpha) * u * u;
    }
    return r;
  };
  double lo = *std::min_element(x.begin(), x.end());
  double hi = *std::max_element(x.begin(), x.end());
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
    if (risk(m1) < risk(m2))
      hi = m2;
    else
      lo = m1;
  }
  return 0.5 * (lo + hi);
}

}  // namespace oracle
