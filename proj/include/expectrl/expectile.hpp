#pragma once

// Scalar expectile machinery.
//
// The asymmetric squared loss is L(u) = alpha * max(u,0)^2 + (1-alpha) *
// max(-u,0)^2, taken literally, so L(u) = u^2 / 2 at alpha = 1/2. The factor
// changes no minimizer and no fixed point.
//
// The alpha-expectile of X minimizes E[L(X - m)] over m. It is computed two
// independent ways: bisection on the first-order condition, and the dual
// form min_{Q in E} E_Q[X] over the likelihood-ratio set
//   E = { Q : eta * lower_ratio <= dQ/dP <= eta * upper_ratio, eta > 0 }.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace expectrl {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Pessimism level alpha in (0, 1/2] with the likelihood-ratio bounds of its
/// dual uncertainty set.
template <typename Scalar = double>
class ExpectileSpec {
 public:
  explicit ExpectileSpec(Scalar alpha) : alpha_(alpha) {
    if (!(alpha > Scalar(0) && alpha <= Scalar(0.5)))
      throw std::invalid_argument("expectile alpha must lie in (0, 0.5], got " +
                                  std::to_string(static_cast<double>(alpha)));
    lower_ratio_ = std::sqrt(alpha / (Scalar(1) - alpha));
    upper_ratio_ = std::sqrt((Scalar(1) - alpha) / alpha);
  }

  Scalar alpha() const { return alpha_; }
  Scalar lower_ratio() const { return lower_ratio_; }
  Scalar upper_ratio() const { return upper_ratio_; }

 private:
  Scalar alpha_;
  Scalar lower_ratio_;
  Scalar upper_ratio_;
};

/// Finite-support random variable.
template <typename Scalar = double>
struct DiscreteDistribution {
  Vec<Scalar> values;
  Vec<Scalar> probs;

  DiscreteDistribution() = default;
  DiscreteDistribution(Vec<Scalar> v, Vec<Scalar> p) : values(std::move(v)), probs(std::move(p)) {
    validate();
  }

  Eigen::Index size() const { return values.size(); }

  Scalar mean() const { return values.dot(probs); }

  void validate() const {
    if (values.size() != probs.size())
      throw std::invalid_argument("distribution values/probs length mismatch");
    if (values.size() == 0) throw std::invalid_argument("distribution is empty");
    if (!values.allFinite()) throw std::invalid_argument("distribution values must be finite");
    if ((probs.array() < Scalar(0)).any())
      throw std::invalid_argument("distribution probabilities must be nonnegative");
    if (std::abs(probs.sum() - Scalar(1)) > Scalar(1e-12))
      throw std::invalid_argument("distribution probabilities must sum to 1");
  }
};

/// Copy of `dist` with zero-mass atoms removed.
template <typename Scalar>
DiscreteDistribution<Scalar> drop_zero_mass(const DiscreteDistribution<Scalar>& dist) {
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < dist.size(); ++i) n += dist.probs[i] > Scalar(0);
  DiscreteDistribution<Scalar> out;
  out.values.resize(n);
  out.probs.resize(n);
  for (Eigen::Index i = 0, j = 0; i < dist.size(); ++i) {
    if (dist.probs[i] > Scalar(0)) {
      out.values[j] = dist.values[i];
      out.probs[j] = dist.probs[i];
      ++j;
    }
  }
  return out;
}

namespace detail {
template <typename Scalar>
void check_open_alpha(Scalar alpha) {
  if (!(alpha > Scalar(0) && alpha < Scalar(1)))
    throw std::invalid_argument("expectile alpha must lie in (0, 1), got " +
                                std::to_string(static_cast<double>(alpha)));
}
}  // namespace detail

/// Asymmetric squared loss alpha*u_+^2 + (1-alpha)*u_-^2.
template <typename Scalar>
Scalar expectile_loss(Scalar u, Scalar alpha) {
  detail::check_open_alpha(alpha);
  return u >= Scalar(0) ? alpha * u * u : (Scalar(1) - alpha) * u * u;
}

/// Derivative of expectile_loss in u; 0 at the kink.
template <typename Scalar>
Scalar expectile_loss_grad(Scalar u, Scalar alpha) {
  detail::check_open_alpha(alpha);
  if (u > Scalar(0)) return Scalar(2) * alpha * u;
  if (u < Scalar(0)) return Scalar(2) * (Scalar(1) - alpha) * u;
  return Scalar(0);
}

/// First-order-condition residual alpha*E[(X-m)_+] - (1-alpha)*E[(m-X)_+].
/// Continuous and strictly decreasing in m.
template <typename Scalar>
Scalar expectile_residual(const DiscreteDistribution<Scalar>& dist, Scalar alpha, Scalar m) {
  Scalar up = 0, down = 0;
  for (Eigen::Index i = 0; i < dist.size(); ++i) {
    const Scalar d = dist.values[i] - m;
    if (d > Scalar(0))
      up += dist.probs[i] * d;
    else
      down -= dist.probs[i] * d;
  }
  return alpha * up - (Scalar(1) - alpha) * down;
}

/// Expectile of a finite distribution by bisection on the first-order
/// condition over [min value, max value].
template <typename Scalar>
Scalar expectile_discrete(const DiscreteDistribution<Scalar>& dist, Scalar alpha,
                          Scalar tol = Scalar(1e-10)) {
  detail::check_open_alpha(alpha);
  if (!(tol > Scalar(0))) throw std::invalid_argument("expectile tolerance must be positive");
  dist.validate();

  Scalar lo = std::numeric_limits<Scalar>::infinity();
  Scalar hi = -lo;
  for (Eigen::Index i = 0; i < dist.size(); ++i) {
    if (dist.probs[i] <= Scalar(0)) continue;
    lo = std::min(lo, dist.values[i]);
    hi = std::max(hi, dist.values[i]);
  }
  if (lo == hi) return lo;

  Scalar m = Scalar(0.5) * (lo + hi);
  Scalar g = expectile_residual(dist, alpha, m);
  for (int it = 0; it < 400 && std::abs(g) >= tol; ++it) {
    if (g > Scalar(0))
      lo = m;
    else
      hi = m;
    const Scalar mid = Scalar(0.5) * (lo + hi);
    if (mid == m) break;
    m = mid;
    g = expectile_residual(dist, alpha, m);
  }

  // The residual is piecewise linear; one secant step on the local slope
  // lands on the root unless it crosses an atom.
  Scalar slope = 0;
  for (Eigen::Index i = 0; i < dist.size(); ++i) {
    if (dist.values[i] > m)
      slope += alpha * dist.probs[i];
    else if (dist.values[i] < m)
      slope += (Scalar(1) - alpha) * dist.probs[i];
  }
  if (slope > Scalar(0)) {
    const Scalar polished = std::clamp(m + g / slope, lo, hi);
    if (std::abs(expectile_residual(dist, alpha, polished)) < std::abs(g)) m = polished;
  }
  return m;
}

/// Value of min sum_i Q_i x_i over eta*lower*P_i <= Q_i <= eta*upper*P_i,
/// sum Q = 1, for a fixed eta. `order` lists indices by ascending value
/// (ties by index). Solved greedily: every atom starts at its lower bound and
/// the remaining mass fills the smallest values first.
template <typename Scalar>
Scalar expectile_inner_lp(const DiscreteDistribution<Scalar>& dist, const ExpectileSpec<Scalar>& spec,
                          Scalar eta, const std::vector<Eigen::Index>& order) {
  const Scalar lo = spec.lower_ratio(), up = spec.upper_ratio();
  const Scalar slack = Scalar(64) * std::numeric_limits<Scalar>::epsilon();
  if (eta < lo * (Scalar(1) - slack) || eta > up * (Scalar(1) + slack))
    throw std::invalid_argument("eta outside the feasible range [lower_ratio, upper_ratio]");

  Scalar budget = Scalar(1) - eta * lo;
  Scalar value = eta * lo * dist.mean();
  for (Eigen::Index i : order) {
    if (budget <= Scalar(0)) break;
    const Scalar add = std::min(eta * (up - lo) * dist.probs[i], budget);
    value += add * dist.values[i];
    budget -= add;
  }
  return value;
}

/// Ascending-value order with index as secondary key.
template <typename Scalar>
std::vector<Eigen::Index> ascending_order(const Vec<Scalar>& values) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values[a] < values[b]; });
  return order;
}

/// Expectile through its dual representation min_{Q in E} E_Q[X].
///
/// The outer problem over eta is convex (a mixture of feasible Q's for two
/// etas is feasible for the mixed eta). It is searched on a uniform grid of
/// `eta_grid` points over [lower_ratio, upper_ratio], then refined by
/// golden-section search on the cells adjacent to the best grid point.
template <typename Scalar>
Scalar expectile_variational(const DiscreteDistribution<Scalar>& dist, const ExpectileSpec<Scalar>& spec,
                             int eta_grid = 64, int golden_iterations = 30) {
  dist.validate();
  if (eta_grid < 16) throw std::invalid_argument("eta_grid must be at least 16");
  if ((dist.probs.array() <= Scalar(0)).any())
    throw std::invalid_argument("variational expectile needs strictly positive probabilities; "
                                "drop zero-mass atoms first");

  const auto order = ascending_order(dist.values);
  const Scalar lo = spec.lower_ratio(), up = spec.upper_ratio();
  if (up - lo <= Scalar(0)) return dist.mean();

  auto h = [&](Scalar eta) { return expectile_inner_lp(dist, spec, eta, order); };

  const Scalar step = (up - lo) / Scalar(eta_grid - 1);
  int best_k = 0;
  Scalar best = std::numeric_limits<Scalar>::infinity();
  for (int k = 0; k < eta_grid; ++k) {
    const Scalar eta = k == eta_grid - 1 ? up : lo + step * Scalar(k);
    const Scalar val = h(eta);
    if (val < best) {
      best = val;
      best_k = k;
    }
  }

  Scalar a = lo + step * Scalar(std::max(best_k - 1, 0));
  Scalar b = std::min(lo + step * Scalar(best_k + 1), up);
  const Scalar inv_phi = (std::sqrt(Scalar(5)) - Scalar(1)) / Scalar(2);
  Scalar c = b - inv_phi * (b - a);
  Scalar d = a + inv_phi * (b - a);
  Scalar fc = h(c), fd = h(d);
  for (int it = 0; it < golden_iterations; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = h(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = h(d);
    }
  }
  return std::min({best, fc, fd});
}

}  // namespace expectrl
