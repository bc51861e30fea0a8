#pragma once

// Finite-difference check of MultiHeadNet::backward under the expectile
// loss. Perturbations that flip the sign of any residual fall back to a
// second-order one-sided difference on the side that keeps the signs.

#include "expectrl/approx.hpp"
#include "expectrl/expectile.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace gradcheck {

struct Instance {
  expectrl::MultiHeadNet net;
  Eigen::MatrixXd x;  // input x batch
  Eigen::MatrixXd y;  // heads x batch targets
  double alpha;
};

inline Instance random_instance(expectrl::Rng& rng, double alpha) {
  expectrl::NetShape shape;
  shape.input = 1 + static_cast<int>(rng.uniform_index(8));
  const int depth = static_cast<int>(rng.uniform_index(3));
  for (int l = 0; l < depth; ++l) shape.hidden.push_back(1 + static_cast<int>(rng.uniform_index(16)));
  shape.output = 1;
  shape.heads = 1 + static_cast<int>(rng.uniform_index(3));
  Instance inst{expectrl::MultiHeadNet(shape, rng), {}, {}, alpha};
  for (Eigen::Index i = 0; i < inst.net.n_params(); ++i) inst.net.params()[i] += rng.uniform(-0.1, 0.1);
  const int batch = 1 + static_cast<int>(rng.uniform_index(6));
  inst.x.resize(shape.input, batch);
  for (Eigen::Index i = 0; i < inst.x.size(); ++i) inst.x.data()[i] = rng.uniform(-1.5, 1.5);
  inst.y.resize(shape.heads, batch);
  for (Eigen::Index i = 0; i < inst.y.size(); ++i) inst.y.data()[i] = rng.uniform(-2.0, 2.0);
  return inst;
}

/// Residuals y - Q for every head and sample.
inline Eigen::MatrixXd residuals(const expectrl::MultiHeadNet& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  Eigen::MatrixXd u(y.rows(), y.cols());
  const Eigen::MatrixXd f = net.features(x);
  for (int d = 0; d < net.heads(); ++d) u.row(d) = y.row(d) - net.head_output(d, f);
  return u;
}

inline double loss_of(const Eigen::MatrixXd& u, double alpha) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) total += expectrl::expectile_loss(u.data()[i], alpha);
  return total / static_cast<double>(u.cols());
}

inline bool same_signs(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if ((a.data()[i] > 0.0) != (b.data()[i] > 0.0)) return false;
  return true;
}

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

/// Numerical derivative of f(t) at t = 0 where f reports (loss, residuals).
template <typename F>
double kink_aware_derivative(F f, double h) {
  const auto [l0, u0] = f(0.0);
  const auto [lp, up] = f(h);
  const auto [lm, um] = f(-h);
  const bool plus = same_signs(u0, up), minus = same_signs(u0, um);
  if ((plus && minus) || (!plus && !minus)) return (lp - lm) / (2.0 * h);
  const double s = plus ? h : -h;
  const auto [l2, u2] = f(2.0 * s);
  return (-3.0 * l0 + 4.0 * (plus ? lp : lm) - l2) / (2.0 * s);
}

/// Max relative error over all parameters and inputs.
inline double max_relative_error(const Instance& inst, double h = 1e-5) {
  expectrl::MultiHeadNet::Cache cache;
  const Eigen::MatrixXd f = inst.net.features(inst.x, &cache);
  std::vector<std::pair<int, Eigen::MatrixXd>> grads;
  const double batch = static_cast<double>(inst.x.cols());
  for (int d = 0; d < inst.net.heads(); ++d) {
    const Eigen::MatrixXd q = inst.net.head_output(d, f);
    Eigen::MatrixXd g(1, q.cols());
    for (Eigen::Index i = 0; i < q.cols(); ++i)
      g(0, i) = -expectrl::expectile_loss_grad(inst.y(d, i) - q(0, i), inst.alpha) / batch;
    grads.emplace_back(d, std::move(g));
  }
  Eigen::VectorXd analytic;
  const Eigen::MatrixXd dx = inst.net.backward(cache, grads, analytic);

  double worst = 0.0;
  expectrl::MultiHeadNet probe = inst.net;
  for (Eigen::Index j = 0; j < probe.n_params(); ++j) {
    const double base = probe.params()[j];
    auto at = [&](double t) {
      probe.params()[j] = base + t;
      const Eigen::MatrixXd u = residuals(probe, inst.x, inst.y);
      probe.params()[j] = base;
      return std::pair{loss_of(u, inst.alpha), u};
    };
    worst = std::max(worst, relative_error(analytic[j], kink_aware_derivative(at, h)));
  }
  Eigen::MatrixXd x = inst.x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double base = x.data()[j];
    auto at = [&](double t) {
      x.data()[j] = base + t;
      const Eigen::MatrixXd u = residuals(inst.net, x, inst.y);
      x.data()[j] = base;
      return std::pair{loss_of(u, inst.alpha), u};
    };
    worst = std::max(worst, relative_error(dx.data()[j], kink_aware_derivative(at, h)));
  }
  return worst;
}

}  // namespace gradcheck
