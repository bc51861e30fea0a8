#pragma once

#include "expectrl/mdp.hpp"
#include "expectrl/rng.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace expectrl {

/// Discrete (n actions) or continuous box action space.
struct ActionSpace {
  int n_discrete = 0;
  Eigen::VectorXd low;
  Eigen::VectorXd high;

  static ActionSpace discrete(int n) { return {n, {}, {}}; }
  static ActionSpace box(Eigen::VectorXd lo, Eigen::VectorXd hi) { return {0, std::move(lo), std::move(hi)}; }

  bool is_discrete() const { return n_discrete > 0; }
  /// Dimension of the action vector passed to step(): 1 for discrete spaces.
  int dim() const { return is_discrete() ? 1 : static_cast<int>(low.size()); }
};

struct StepResult {
  Eigen::VectorXd observation;
  double reward = 0.0;
  bool terminated = false;  // entered a terminal state; do not bootstrap
  bool truncated = false;   // hit the horizon cap

  bool done() const { return terminated || truncated; }
};

/// Single-threaded episodic environment. Discrete actions are passed as a
/// one-element vector holding the action index; tabular observations are a
/// one-element vector holding the state index.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual Eigen::VectorXd reset(std::uint64_t seed) = 0;
  virtual StepResult step(const Eigen::VectorXd& action) = 0;

  virtual const ActionSpace& action_space() const = 0;
  virtual int observation_dim() const = 0;
  virtual int horizon() const = 0;
  /// Bound on |reward| excluding additive noise.
  virtual double r_max() const = 0;
  virtual double gamma() const = 0;
};

/// Environment backed by a finite MDP.
///
/// Per-step reward is base(s, a) + arrival[s'] + noise, where the noise is
/// Gaussian with std `terminal_noise` on transitions into terminal states.
/// `expected_mdp()` folds the expected arrival reward into r(s, a).
class TabularEnvironment final : public Environment {
 public:
  struct Details {
    std::vector<bool> terminal;
    Eigen::VectorXd arrival;  // empty means zero
    double terminal_noise = 0.0;
    int horizon = 100;
  };

  TabularEnvironment(TabularMdp base, Details details);

  Eigen::VectorXd reset(std::uint64_t seed) override;
  StepResult step(const Eigen::VectorXd& action) override;

  const ActionSpace& action_space() const override { return space_; }
  int observation_dim() const override { return 1; }
  int horizon() const override { return details_.horizon; }
  double r_max() const override;
  double gamma() const override { return base_.gamma; }

  int state() const { return state_; }
  const std::vector<bool>& terminal() const { return details_.terminal; }
  const TabularMdp& expected_mdp() const { return expected_; }

  /// Exact expected undiscounted return of `policy` over one episode,
  /// by forward propagation of the state distribution over the horizon.
  double expected_episode_return(const Policy& policy) const;

 private:
  TabularMdp base_;
  TabularMdp expected_;
  Details details_;
  ActionSpace space_;
  Rng rng_;
  int state_ = 0;
  int t_ = 0;
};

/// Point-mass pendulum. Angle 0 is upright; observation (cos, sin, velocity).
///
///   accel    = (g / length) sin(theta) + torque / (mass length^2),  g = 10
///   velocity <- clip(velocity + accel dt, -8, 8)
///   theta    <- theta + velocity dt,                                 dt = 0.05
///   reward   = -(wrap(theta)^2 + 0.1 velocity^2 + 0.001 torque^2)
///
/// Torque is clipped to [-2, 2]. Episodes last 200 steps; reset draws theta
/// uniform in [-pi, pi] and velocity uniform in [-1, 1].
class PendulumLite final : public Environment {
 public:
  static constexpr double kGravity = 10.0;
  static constexpr double kDt = 0.05;
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kMaxTorque = 2.0;
  static constexpr int kHorizon = 200;

  PendulumLite(double mass, double length);

  Eigen::VectorXd reset(std::uint64_t seed) override;
  StepResult step(const Eigen::VectorXd& action) override;

  const ActionSpace& action_space() const override { return space_; }
  int observation_dim() const override { return 3; }
  int horizon() const override { return kHorizon; }
  double r_max() const override;
  double gamma() const override { return 0.99; }

  void set_state(double theta, double velocity);
  double theta() const { return theta_; }
  double velocity() const { return velocity_; }

 private:
  Eigen::VectorXd observe() const;

  double mass_, length_;
  double theta_ = 0.0, velocity_ = 0.0;
  int t_ = 0;
  ActionSpace space_;
  Rng rng_;
};

/// Continuous-action task with a scripted reward, for trainer diagnostics.
/// Observation is a constant 1-vector. reward = sample(rng) - penalty * |a|^2.
class ScriptedContinuousTask final : public Environment {
 public:
  ScriptedContinuousTask(std::vector<double> outcomes, std::vector<double> probs, double action_penalty,
                         int horizon, double gamma);

  Eigen::VectorXd reset(std::uint64_t seed) override;
  StepResult step(const Eigen::VectorXd& action) override;

  const ActionSpace& action_space() const override { return space_; }
  int observation_dim() const override { return 1; }
  int horizon() const override { return horizon_; }
  double r_max() const override;
  double gamma() const override { return gamma_; }

 private:
  std::vector<double> outcomes_, probs_;
  double penalty_;
  int horizon_;
  double gamma_;
  int t_ = 0;
  ActionSpace space_;
  Rng rng_;
};

/// Parameterized environment family with its uncertainty box.
struct EnvFamily {
  std::string id;
  OmegaBox box;
  Eigen::VectorXd nominal;
  std::function<std::unique_ptr<Environment>(const Eigen::VectorXd&)> builder;
  /// Present for tabular families.
  std::function<std::unique_ptr<TabularEnvironment>(const Eigen::VectorXd&)> tabular_builder;

  bool tabular() const { return static_cast<bool>(tabular_builder); }
  int omega_dim() const { return box.dim(); }

  /// Environment at omega; rejects omega outside the box.
  std::unique_ptr<Environment> make(const Eigen::VectorXd& omega) const;
  std::unique_ptr<TabularEnvironment> make_tabular(const Eigen::VectorXd& omega) const;
  /// Kernel family view (tabular families only).
  KernelFamily kernel_family() const;
};

/// Gridworld layout: 'S' start, 'G' goal (+1 on exit), 'H' hazard (-1 on
/// exit), '#' wall, '.' free. Actions up, down, left, right; bumping a wall or
/// the border stays in place. Goal and hazard cells move to an absorbing
/// terminal state on any action.
TabularEnvironment make_gridworld(const std::vector<std::string>& layout, double slip, double gamma, int horizon);

/// SlipGrid, CliffGrid, WindyChain, PendulumLite plus diagnostic families
/// SafeRisky, ArmSeparation, ConstantZero, TwoPointBandit.
const std::vector<EnvFamily>& builtin_families();
const EnvFamily& find_family(const std::string& id);

/// Grid of evaluation points; equally spaced per dimension, Cartesian product.
struct OmegaGrid {
  std::vector<Eigen::VectorXd> points;

  /// `per_dim` points per dimension including both endpoints; dimensions with
  /// low == high contribute a single point; per_dim == 1 takes the center.
  static OmegaGrid regular(const OmegaBox& box, int per_dim = 10);
  static OmegaGrid single(const Eigen::VectorXd& omega);

  std::size_t size() const { return points.size(); }
};

/// Uniform draw over the box.
Eigen::VectorXd dr_sample(const OmegaBox& box, Rng& rng);

/// Stateless map from observation to action; must be safe to call
/// concurrently.
using PolicyFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

PolicyFn tabular_policy_fn(const Policy& policy);

struct EvalReport {
  std::string family;
  std::vector<Eigen::VectorXd> omegas;
  std::vector<double> per_point_return;
  std::vector<int> truncated_episodes;  // informational
  double worst = 0.0;
  double average = 0.0;
  int n_eval = 0;
  std::uint64_t seed = 0;
};

/// Mean undiscounted return over `n_eval` episodes at each grid point.
/// Episode e at point k is seeded with derive_seed(seed, {k, e}); the result
/// does not depend on `jobs`.
EvalReport evaluate(const PolicyFn& policy, const EnvFamily& family, const OmegaGrid& grid, int n_eval,
                    std::uint64_t seed, int jobs = 1);

/// Undiscounted return of one episode.
double run_episode(Environment& env, const PolicyFn& policy, std::uint64_t seed, bool* truncated = nullptr);

inline constexpr int kEvalSchemaVersion = 1;
nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& doc);
/// Columns: family, omega_0..omega_{d-1}, R_k.
std::string to_csv(const EvalReport& report);

}  // namespace expectrl
