#pragma once

// Sample-based learners: tabular expectile Q-learning, a single-critic TD3
// variant trained with the expectile loss, domain-randomized training, and
// the multi-arm AutoExpectRL learner with its EWA bandit over alphas.
//
// Expectile updates use the residual u = target - estimate, so alpha < 0.5
// pulls estimates below the mean of the bootstrapped target.

#include "expectrl/approx.hpp"
#include "expectrl/envs.hpp"
#include "expectrl/mdp.hpp"
#include "expectrl/rng.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace expectrl {

// ---------------------------------------------------------------------------
// Replay

struct Batch {
  Eigen::MatrixXd obs, action, next_obs;  // one column per sample
  Eigen::VectorXd reward;
  Eigen::VectorXd terminal;  // 1 where the transition entered a terminal state
};

/// Fixed-capacity ring buffer with uniform sampling (with replacement).
class ReplayBuffer {
 public:
  ReplayBuffer(int obs_dim, int action_dim, std::size_t capacity);

  void push(const Eigen::VectorXd& obs, const Eigen::VectorXd& action, double reward, const Eigen::VectorXd& next_obs,
            bool terminal);
  Batch sample(std::size_t batch, Rng& rng) const;
  /// Indices drawn by sample() for the same rng state.
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t inserted() const { return inserted_; }

 private:
  Eigen::MatrixXd obs_, action_, next_obs_;
  Eigen::VectorXd reward_, terminal_;
  std::size_t capacity_, size_ = 0, next_ = 0;
  std::uint64_t inserted_ = 0;
};

// ---------------------------------------------------------------------------
// Bandit

/// EWA forecaster over alpha arms: p is proportional to exp(w).
struct BanditState {
  std::vector<double> arms;
  Eigen::VectorXd weights;
  double lr = 0.2;
  std::optional<double> last_return;

  static constexpr double kWeightClamp = 50.0;

  explicit BanditState(std::vector<double> arms = {0.2, 0.3, 0.4, 0.5}, double lr = 0.2);
  Eigen::VectorXd probs() const;
};

int bandit_sample(const BanditState& state, Rng& rng);
/// f = R - R_prev (0 on the first call); w[arm] += lr * f / p[arm], clamped.
void bandit_update(BanditState& state, int arm, double episode_return);

// ---------------------------------------------------------------------------
// Training log

enum class OmegaMode { nominal, domain_randomization };

struct EpisodeRecord {
  int episode = 0;
  long step = 0;  // environment steps so far, including this episode
  int arm = 0;
  double alpha = 0.5;
  double episode_return = 0.0;
  double critic_loss = 0.0;  // mean over this episode's updates; 0 if none
  Eigen::VectorXd omega;
  std::vector<double> bandit_probs;
};

struct TrainingLog {
  std::vector<EpisodeRecord> episodes;
  bool log_omega = false;
  bool diverged = false;
  std::string message;
};

/// Columns: episode, step, arm, alpha, return, critic_loss, [omega_i...],
/// bandit_prob_d...
std::string to_csv(const TrainingLog& log);

// ---------------------------------------------------------------------------
// Tabular learners

struct QLearningConfig {
  double alpha = 0.5;
  double lr = 0.5;  // step for visit n is lr / (1 + n)^lr_decay
  double lr_decay = 0.6;
  int episodes = 20000;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.5;  // share of episodes spent annealing
  std::uint64_t seed = 0;
};

struct AutoConfig {
  std::vector<double> arms{0.2, 0.3, 0.4, 0.5};
  double bandit_lr = 0.2;
};

struct TabularAgent {
  std::vector<double> alphas;
  std::vector<Eigen::MatrixXd> q;  // one S x A table per head
  int best_head = 0;
  std::optional<BanditState> bandit;
  TrainingLog log;

  /// Greedy policy of a head, ties to the lowest action.
  Policy greedy(int head) const;
  Policy greedy() const { return greedy(best_head); }
};

TabularAgent q_learning_expectile(const EnvFamily& family, const QLearningConfig& config,
                                  OmegaMode mode = OmegaMode::nominal);
/// Learner on a bare MDP: no terminal states, episodes of `horizon` steps.
TabularAgent q_learning_expectile(const TabularMdp& mdp, const QLearningConfig& config, int horizon);
/// D independent Q-tables (one per arm) fed the same transitions; the arm
/// picked by the bandit chooses the behaviour table for each episode.
TabularAgent auto_train_tabular(const EnvFamily& family, const QLearningConfig& config, const AutoConfig& arms,
                                OmegaMode mode = OmegaMode::nominal);

// ---------------------------------------------------------------------------
// Neural learners

struct Td3LiteConfig {
  double alpha = 0.5;
  double lr_actor = 3e-4;
  double lr_critic = 3e-3;
  int batch = 100;
  int memory = 300000;
  double gamma = 0.99;
  double tau = 0.995;  // weight on the old target
  int actor_delay = 2;
  double exploration_noise = 0.1;  // std, relative to the action half-range
  int warmup_steps = 1000;
  long total_steps = 20000;
  std::vector<int> hidden{64, 64};
  Optimizer::Kind optimizer = Optimizer::Kind::sgd;
  std::uint64_t seed = 0;

  void validate() const;
};

struct NeuralAgent {
  std::vector<double> alphas;
  MultiHeadNet actor, critic;
  ActionSpace space;
  int best_head = 0;
  std::optional<BanditState> bandit;
  TrainingLog log;

  /// Deterministic action of a head for one observation.
  Eigen::VectorXd act(const Eigen::VectorXd& obs, int head) const;
  PolicyFn policy(int head) const;
  PolicyFn policy() const { return policy(best_head); }
};

/// Training stops, marking the log diverged, once |Q| exceeds this bound:
/// max(r_max, 1) / (1 - gamma) * 10.
double divergence_bound(double r_max, double gamma);

NeuralAgent td3_lite_train(const EnvFamily& family, const Td3LiteConfig& config, OmegaMode mode = OmegaMode::nominal);
/// Multi-head critic and actor, one head per arm; refuses domain randomization.
NeuralAgent auto_train(const EnvFamily& family, const Td3LiteConfig& config, const AutoConfig& arms,
                       OmegaMode mode = OmegaMode::nominal);

inline TabularAgent dr_train(const EnvFamily& family, const QLearningConfig& config) {
  return q_learning_expectile(family, config, OmegaMode::domain_randomization);
}
inline NeuralAgent dr_train(const EnvFamily& family, const Td3LiteConfig& config) {
  return td3_lite_train(family, config, OmegaMode::domain_randomization);
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointSchemaVersion = 1;
nlohmann::json to_json(const TabularAgent& agent);
nlohmann::json to_json(const NeuralAgent& agent);
/// Policy of the best head stored in a checkpoint.
PolicyFn policy_from_checkpoint(const nlohmann::json& doc);

}  // namespace expectrl
