#pragma once

#include "expectrl/expectile.hpp"
#include "expectrl/mdp.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace expectrl {

enum class OperatorType {
  classical_policy,
  classical_optimal,
  expectile_policy,
  expectile_optimal,
  robust_policy,
  robust_optimal,
};

/// Which Bellman operator to apply. Expectile and robust operators carry a
/// pessimism level; classical ones ignore it.
struct OperatorKind {
  OperatorType type = OperatorType::classical_optimal;
  double alpha = 0.5;

  static OperatorKind classical(bool optimal);
  static OperatorKind expectile(double alpha, bool optimal);
  static OperatorKind robust(double alpha, bool optimal);

  bool optimal() const;
  bool is_expectile() const;
  bool is_robust() const;
  std::string name() const;
};

/// Result of a fixed-point iteration. `policy` is the greedy policy for
/// optimal kinds and the evaluated policy otherwise.
struct FixedPointResult {
  ValueFunction value;
  std::optional<Policy> policy;
  int iterations = 0;
  double final_residual = 0.0;
  bool converged = false;
};

/// Precomputed per-row supports; applies one operator sweep.
///
/// Rows keep their nonzero successors and probabilities so that the
/// expectile and robust statistics only touch the support.
class BellmanOperator {
 public:
  BellmanOperator(const TabularMdp& mdp, OperatorKind kind);

  const TabularMdp& mdp() const { return *mdp_; }
  const OperatorKind& kind() const { return kind_; }

  /// q(s, a) = r(s, a) + gamma * stat(P_sa, v).
  QFunction q_values(const ValueFunction& v) const;

  /// Full backup: max over actions for optimal kinds, policy average otherwise.
  ValueFunction apply(const ValueFunction& v, const Policy* policy = nullptr) const;

 private:
  double row_statistic(Eigen::Index row, const ValueFunction& v) const;

  const TabularMdp* mdp_;
  OperatorKind kind_;
  std::optional<ExpectileSpec<double>> spec_;
  std::vector<std::vector<Eigen::Index>> support_;
  std::vector<Eigen::VectorXd> support_probs_;
};

/// (T^pi_alpha v)(s) = sum_a pi(a|s) (r(s,a) + gamma m_alpha(P_sa, v)).
ValueFunction apply_policy_operator(const ValueFunction& v, const TabularMdp& mdp, const Policy& policy,
                                    double alpha);

/// (T*_alpha v)(s) = max_a (r(s,a) + gamma m_alpha(P_sa, v)).
ValueFunction apply_optimal_operator(const ValueFunction& v, const TabularMdp& mdp, double alpha);

/// min over Q in the expectile uncertainty set around `row` of <Q, v>,
/// restricted to the row's support.
double robust_inner_min(const ValueFunction& v, const Eigen::Ref<const Eigen::RowVectorXd>& row,
                        const ExpectileSpec<double>& spec);

/// Greedy policy, ties to the lowest action index.
Policy greedy_policy(const QFunction& q);

/// Iterate the operator from v0 = 0 until the sup-norm step is below
/// tol * (1 - gamma) / gamma, which bounds the distance to the fixed point
/// by tol. Policy kinds require `policy`.
FixedPointResult value_iteration(const TabularMdp& mdp, const OperatorKind& kind, double tol, int max_iter,
                                 const Policy* policy = nullptr);

/// Value iteration with the brute-force robust backup over the expectile
/// uncertainty set. Evaluates `policy` if given, else solves the optimal
/// robust problem.
FixedPointResult robust_value_iteration(const TabularMdp& mdp, double alpha, double tol, int max_iter,
                                        const Policy* policy = nullptr);

/// Largest observed ||T v1 - T v2|| / ||v1 - v2|| over random pairs with
/// entries uniform in [-10, 10]. Identical pairs are skipped.
double contraction_probe(const TabularMdp& mdp, const OperatorKind& kind, int n_trials, std::uint64_t seed,
                         const Policy* policy = nullptr);

/// Exact discounted value of a policy under the classical operator, by a
/// dense linear solve of (I - gamma P_pi) v = r_pi.
ValueFunction evaluate_policy_exact(const TabularMdp& mdp, const Policy& policy);

nlohmann::json to_json(const FixedPointResult& result);

}  // namespace expectrl
