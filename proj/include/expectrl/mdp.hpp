#pragma once

#include "expectrl/expectile.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace expectrl {

using ValueFunction = Eigen::VectorXd;
/// Action values, shape n_states x n_actions.
using QFunction = Eigen::MatrixXd;

/// Finite MDP <S, A, P, P0, r, gamma> with a dense kernel.
///
/// The kernel is stored as an (S*A) x S matrix; row s*A + a is P(. | s, a).
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  Eigen::MatrixXd transitions;
  Eigen::MatrixXd rewards;  // S x A
  double gamma = 0.9;
  Eigen::VectorXd initial_dist;

  TabularMdp() = default;
  TabularMdp(int states, int actions, double discount);

  Eigen::Index row(int s, int a) const { return static_cast<Eigen::Index>(s) * n_actions + a; }
  auto kernel_row(int s, int a) const { return transitions.row(row(s, a)); }
  auto kernel_row(int s, int a) { return transitions.row(row(s, a)); }

  double r_max() const { return rewards.size() ? rewards.cwiseAbs().maxCoeff() : 0.0; }
};

/// Outcome of validate(): empty when valid.
struct Violation {
  std::string what;
  int state = -1;
  int action = -1;
};

/// Reports the first violated invariant, or nullopt. Never throws.
std::optional<Violation> validate(const TabularMdp& mdp);

/// Throws std::invalid_argument carrying the violation text.
void require_valid(const TabularMdp& mdp);

/// Deterministic or stochastic policy.
class Policy {
 public:
  static Policy deterministic(std::vector<int> actions, int n_actions);
  static Policy stochastic(Eigen::MatrixXd probs);
  static Policy uniform(int n_states, int n_actions);

  bool is_deterministic() const { return std::holds_alternative<std::vector<int>>(rep_); }
  int n_states() const;
  int n_actions() const { return n_actions_; }

  /// pi(a | s).
  double prob(int s, int a) const;
  /// Greedy action for deterministic policies; argmax probability otherwise.
  int action(int s) const;
  const std::vector<int>& actions() const { return std::get<std::vector<int>>(rep_); }
  Eigen::MatrixXd as_matrix() const;

 private:
  std::variant<std::vector<int>, Eigen::MatrixXd> rep_;
  int n_actions_ = 0;
};

/// Random Garnet instance: each (s, a) row has `branching` nonzero entries
/// drawn from a flat Dirichlet over distinct successor states; each reward is
/// zero with probability `reward_sparsity` and uniform [0, 1] otherwise.
TabularMdp garnet(int n_states, int n_actions, int branching, double reward_sparsity,
                  std::uint64_t seed, double gamma = 0.9);

/// Axis-aligned box of uncertainty parameters.
struct OmegaBox {
  Eigen::VectorXd low;
  Eigen::VectorXd high;

  int dim() const { return static_cast<int>(low.size()); }
  bool contains(const Eigen::VectorXd& omega, double slack = 1e-12) const;
};

/// A kernel family P_omega over a box. `build` must be deterministic and
/// `build(nominal)` is the nominal MDP.
struct KernelFamily {
  std::string name;
  OmegaBox box;
  Eigen::VectorXd nominal;
  std::function<TabularMdp(const Eigen::VectorXd&)> build;
};

/// Instance of `family` at omega. Rejects omega outside the box.
TabularMdp perturb_kernel(const KernelFamily& family, const Eigen::VectorXd& omega);

/// With probability `slip` the executed action is drawn uniformly from the
/// other actions: P(s,a) = (1-slip) P0(s,a) + slip/(A-1) sum_{b != a} P0(s,b).
TabularMdp apply_action_slip(const TabularMdp& base, double slip);

/// Convex combination (1-w) P_a + w P_b of two kernels on the same spaces.
TabularMdp mix_kernels(const TabularMdp& a, const TabularMdp& b, double weight);

// JSON document {version, n_states, n_actions, gamma, transitions, rewards,
// initial_dist}; transitions nested [s][a][s'].
inline constexpr int kMdpSchemaVersion = 1;
nlohmann::json to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const Policy& policy);
Policy policy_from_json(const nlohmann::json& doc);

}  // namespace expectrl
