#include "expectrl/agents.hpp"

#include "expectrl/expectile.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace expectrl {

namespace {

// Independent random streams derived from the run seed.
constexpr std::uint64_t kEpisodeStream = 1;
constexpr std::uint64_t kAgentStream = 2;
constexpr std::uint64_t kBanditStream = 3;
constexpr std::uint64_t kOmegaStream = 4;
constexpr std::uint64_t kInitStream = 5;

int argmax_lowest(const Eigen::RowVectorXd& row) {
  int best = 0;
  for (int a = 1; a < row.size(); ++a)
    if (row[a] > row[best]) best = a;
  return best;
}

int argmax_lowest(const Eigen::VectorXd& v) { return argmax_lowest(Eigen::RowVectorXd(v.transpose())); }

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 0.5)) throw std::invalid_argument("alpha must lie in (0, 0.5]");
}

std::vector<double> probs_vector(const std::optional<BanditState>& bandit) {
  if (!bandit) return {1.0};
  const Eigen::VectorXd p = bandit->probs();
  return {p.data(), p.data() + p.size()};
}

int pick_best(const std::optional<BanditState>& bandit) { return bandit ? argmax_lowest(bandit->probs()) : 0; }

}  // namespace

// ---------------------------------------------------------------------------
// Replay

ReplayBuffer::ReplayBuffer(int obs_dim, int action_dim, std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  const auto cap = static_cast<Eigen::Index>(capacity);
  obs_.resize(obs_dim, cap);
  action_.resize(action_dim, cap);
  next_obs_.resize(obs_dim, cap);
  reward_.resize(cap);
  terminal_.resize(cap);
}

void ReplayBuffer::push(const Eigen::VectorXd& obs, const Eigen::VectorXd& action, double reward,
                        const Eigen::VectorXd& next_obs, bool terminal) {
  const auto i = static_cast<Eigen::Index>(next_);
  obs_.col(i) = obs;
  action_.col(i) = action;
  next_obs_.col(i) = next_obs;
  reward_[i] = reward;
  terminal_[i] = terminal ? 1.0 : 0.0;
  next_ = (next_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
  ++inserted_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, Rng& rng) const {
  if (size_ == 0) throw std::logic_error("sampling from an empty replay buffer");
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = rng.uniform_index(size_);
  return idx;
}

Batch ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  const auto idx = sample_indices(batch, rng);
  const auto n = static_cast<Eigen::Index>(batch);
  Batch b{Eigen::MatrixXd(obs_.rows(), n), Eigen::MatrixXd(action_.rows(), n), Eigen::MatrixXd(obs_.rows(), n),
          Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto i = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)]);
    b.obs.col(j) = obs_.col(i);
    b.action.col(j) = action_.col(i);
    b.next_obs.col(j) = next_obs_.col(i);
    b.reward[j] = reward_[i];
    b.terminal[j] = terminal_[i];
  }
  return b;
}

// ---------------------------------------------------------------------------
// Bandit

BanditState::BanditState(std::vector<double> a, double rate)
    : arms(std::move(a)), weights(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(arms.size()))), lr(rate) {
  if (arms.empty()) throw std::invalid_argument("bandit needs at least one arm");
  for (double alpha : arms) check_alpha(alpha);
  if (!(lr > 0.0)) throw std::invalid_argument("bandit learning rate must be positive");
}

Eigen::VectorXd BanditState::probs() const {
  const Eigen::ArrayXd e = (weights.array() - weights.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

int bandit_sample(const BanditState& state, Rng& rng) {
  const Eigen::VectorXd p = state.probs();
  return static_cast<int>(rng.categorical(std::span<const double>(p.data(), static_cast<std::size_t>(p.size()))));
}

void bandit_update(BanditState& state, int arm, double episode_return) {
  if (arm < 0 || arm >= state.weights.size()) throw std::invalid_argument("bandit arm out of range");
  const double f = state.last_return ? episode_return - *state.last_return : 0.0;
  state.last_return = episode_return;
  if (f == 0.0) return;
  const double p = state.probs()[arm];
  state.weights[arm] =
      std::clamp(state.weights[arm] + state.lr * f / p, -BanditState::kWeightClamp, BanditState::kWeightClamp);
}

// ---------------------------------------------------------------------------
// Log

std::string to_csv(const TrainingLog& log) {
  std::ostringstream out;
  out.precision(17);
  const std::size_t arms = log.episodes.empty() ? 1 : log.episodes.front().bandit_probs.size();
  const Eigen::Index omega_dim = log.log_omega && !log.episodes.empty() ? log.episodes.front().omega.size() : 0;
  out << "episode,step,arm,alpha,return,critic_loss";
  for (Eigen::Index d = 0; d < omega_dim; ++d) out << ",omega_" << d;
  for (std::size_t d = 0; d < arms; ++d) out << ",bandit_prob_" << d;
  out << '\n';
  for (const auto& e : log.episodes) {
    out << e.episode << ',' << e.step << ',' << e.arm << ',' << e.alpha << ',' << e.episode_return << ','
        << e.critic_loss;
    for (Eigen::Index d = 0; d < omega_dim; ++d) out << ',' << e.omega[d];
    for (double p : e.bandit_probs) out << ',' << p;
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Tabular

Policy TabularAgent::greedy(int head) const {
  const Eigen::MatrixXd& table = q.at(static_cast<std::size_t>(head));
  std::vector<int> actions(static_cast<std::size_t>(table.rows()));
  for (Eigen::Index s = 0; s < table.rows(); ++s) actions[static_cast<std::size_t>(s)] = argmax_lowest(Eigen::RowVectorXd(table.row(s)));
  return Policy::deterministic(std::move(actions), static_cast<int>(table.cols()));
}

namespace {

void validate(const QLearningConfig& c) {
  check_alpha(c.alpha);
  if (!(c.lr > 0.0) || !(c.lr_decay >= 0.0)) throw std::invalid_argument("invalid Q-learning step schedule");
  if (c.episodes < 1) throw std::invalid_argument("episodes must be positive");
  if (!(c.epsilon_start >= 0.0 && c.epsilon_start <= 1.0 && c.epsilon_end >= 0.0 && c.epsilon_end <= 1.0))
    throw std::invalid_argument("exploration rates must lie in [0, 1]");
  if (!(c.epsilon_decay_fraction >= 0.0 && c.epsilon_decay_fraction <= 1.0))
    throw std::invalid_argument("epsilon_decay_fraction must lie in [0, 1]");
}

double epsilon_at(const QLearningConfig& c, int episode) {
  const double span = c.epsilon_decay_fraction * c.episodes;
  if (span <= 0.0 || episode >= span) return c.epsilon_end;
  return c.epsilon_start + (c.epsilon_end - c.epsilon_start) * (episode / span);
}

TabularAgent train_tabular(const EnvFamily& family, const QLearningConfig& config, const std::vector<double>& alphas,
                           std::optional<double> bandit_lr, OmegaMode mode) {
  if (!family.tabular()) throw std::invalid_argument("tabular learner needs a tabular family, got " + family.id);
  validate(config);
  for (double a : alphas) check_alpha(a);

  TabularAgent agent;
  agent.alphas = alphas;
  if (bandit_lr) agent.bandit.emplace(alphas, *bandit_lr);
  agent.log.log_omega = mode == OmegaMode::domain_randomization;

  Rng agent_rng(derive_seed(config.seed, {kAgentStream}));
  Rng bandit_rng(derive_seed(config.seed, {kBanditStream}));
  Rng omega_rng(derive_seed(config.seed, {kOmegaStream}));

  auto env = family.make_tabular(family.nominal);
  const int n_states = env->expected_mdp().n_states;
  const int n_actions = env->expected_mdp().n_actions;
  const double gamma = env->gamma();
  agent.q.assign(alphas.size(), Eigen::MatrixXd::Zero(n_states, n_actions));
  Eigen::MatrixXd visits = Eigen::MatrixXd::Zero(n_states, n_actions);

  long steps = 0;
  for (int episode = 0; episode < config.episodes; ++episode) {
    Eigen::VectorXd omega = family.nominal;
    if (mode == OmegaMode::domain_randomization) {
      omega = dr_sample(family.box, omega_rng);
      env = family.make_tabular(omega);
    }
    const int arm = agent.bandit ? bandit_sample(*agent.bandit, bandit_rng) : 0;
    const Eigen::MatrixXd& behaviour = agent.q[static_cast<std::size_t>(arm)];
    const double eps = epsilon_at(config, episode);

    int s = static_cast<int>(env->reset(derive_seed(config.seed, {kEpisodeStream, static_cast<std::uint64_t>(episode)}))[0]);
    double ret = 0.0, loss = 0.0;
    long updates = 0;
    for (;;) {
      int a;
      if (agent_rng.uniform() < eps)
        a = static_cast<int>(agent_rng.uniform_index(static_cast<std::size_t>(n_actions)));
      else
        a = argmax_lowest(Eigen::RowVectorXd(behaviour.row(s)));
      const StepResult r = env->step(Eigen::VectorXd::Constant(1, a));
      const int next = static_cast<int>(r.observation[0]);
      const double step_size = config.lr / std::pow(1.0 + visits(s, a), config.lr_decay);
      visits(s, a) += 1.0;
      for (std::size_t d = 0; d < alphas.size(); ++d) {
        Eigen::MatrixXd& q = agent.q[d];
        const double target = r.reward + (r.terminated ? 0.0 : gamma * q.row(next).maxCoeff());
        const double u = target - q(s, a);
        q(s, a) += step_size * expectile_loss_grad(u, alphas[d]);
        loss += expectile_loss(u, alphas[d]);
      }
      ++updates;
      ++steps;
      ret += r.reward;
      if (r.done()) break;
      s = next;
    }
    if (agent.bandit) bandit_update(*agent.bandit, arm, ret);
    agent.log.episodes.push_back({episode, steps, arm, alphas[static_cast<std::size_t>(arm)], ret,
                                  updates ? loss / static_cast<double>(updates) : 0.0, omega,
                                  probs_vector(agent.bandit)});
  }
  agent.best_head = pick_best(agent.bandit);
  return agent;
}

}  // namespace

TabularAgent q_learning_expectile(const EnvFamily& family, const QLearningConfig& config, OmegaMode mode) {
  return train_tabular(family, config, {config.alpha}, std::nullopt, mode);
}

TabularAgent q_learning_expectile(const TabularMdp& mdp, const QLearningConfig& config, int horizon) {
  require_valid(mdp);
  EnvFamily family;
  family.id = "mdp";
  family.box = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
  family.nominal = Eigen::VectorXd::Zero(1);
  family.tabular_builder = [mdp, horizon](const Eigen::VectorXd&) {
    TabularEnvironment::Details details;
    details.terminal.assign(static_cast<std::size_t>(mdp.n_states), false);
    details.horizon = horizon;
    return std::make_unique<TabularEnvironment>(mdp, std::move(details));
  };
  return q_learning_expectile(family, config);
}

TabularAgent auto_train_tabular(const EnvFamily& family, const QLearningConfig& config, const AutoConfig& arms,
                                OmegaMode mode) {
  if (mode == OmegaMode::domain_randomization)
    throw std::invalid_argument("AutoExpectRL does not support domain randomization");
  return train_tabular(family, config, arms.arms, arms.bandit_lr, mode);
}

// ---------------------------------------------------------------------------
// Neural

void Td3LiteConfig::validate() const {
  check_alpha(alpha);
  if (!(lr_actor > 0.0 && lr_critic > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (batch < 1 || memory < batch) throw std::invalid_argument("need 1 <= batch <= memory");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0, 1]");
  if (actor_delay < 1) throw std::invalid_argument("actor_delay must be at least 1");
  if (!(exploration_noise >= 0.0)) throw std::invalid_argument("exploration_noise must be nonnegative");
  if (warmup_steps < 0 || total_steps < 1) throw std::invalid_argument("invalid step budget");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("hidden widths must be positive");
}

// r_max is floored at 1 so reward-free tasks keep a usable bound.
double divergence_bound(double r_max, double gamma) { return std::max(r_max, 1.0) / (1.0 - gamma) * 10.0; }

namespace {

struct ActionScale {
  Eigen::VectorXd center, half;

  explicit ActionScale(const ActionSpace& space)
      : center(0.5 * (space.low + space.high)), half(0.5 * (space.high - space.low)) {}
  Eigen::MatrixXd squash(const Eigen::MatrixXd& raw) const {
    return (raw.array().tanh().colwise() * half.array()).colwise() + center.array();
  }
};

Eigen::MatrixXd stack(const Eigen::MatrixXd& top, const Eigen::MatrixXd& bottom) {
  Eigen::MatrixXd out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

NeuralAgent train_neural(const EnvFamily& family, const Td3LiteConfig& config, const std::vector<double>& alphas,
                         std::optional<double> bandit_lr, OmegaMode mode) {
  config.validate();
  for (double a : alphas) check_alpha(a);
  auto env = family.make(family.nominal);
  if (env->action_space().is_discrete())
    throw std::invalid_argument("actor-critic learner needs a continuous action space, got " + family.id);

  NeuralAgent agent;
  agent.alphas = alphas;
  agent.space = env->action_space();
  if (bandit_lr) agent.bandit.emplace(alphas, *bandit_lr);
  agent.log.log_omega = mode == OmegaMode::domain_randomization;

  const int obs_dim = env->observation_dim();
  const int act_dim = agent.space.dim();
  const int heads = static_cast<int>(alphas.size());
  Rng init_rng(derive_seed(config.seed, {kInitStream}));
  agent.critic = MultiHeadNet(NetShape{obs_dim + act_dim, config.hidden, 1, heads}, init_rng);
  agent.actor = MultiHeadNet(NetShape{obs_dim, config.hidden, act_dim, heads}, init_rng);
  TargetCopy critic_target(agent.critic, config.tau), actor_target(agent.actor, config.tau);
  Optimizer critic_opt(config.optimizer, config.lr_critic), actor_opt(config.optimizer, config.lr_actor);
  ReplayBuffer buffer(obs_dim, act_dim, static_cast<std::size_t>(config.memory));
  const ActionScale scale(agent.space);

  Rng agent_rng(derive_seed(config.seed, {kAgentStream}));
  Rng bandit_rng(derive_seed(config.seed, {kBanditStream}));
  Rng omega_rng(derive_seed(config.seed, {kOmegaStream}));
  const double bound = divergence_bound(env->r_max(), config.gamma);
  const double inv_batch = 1.0 / config.batch;

  auto diverge = [&](double value) {
    agent.log.diverged = true;
    std::ostringstream msg;
    msg << "critic diverged: |Q| = " << value << " exceeds " << bound;
    agent.log.message = msg.str();
  };

  // One critic step on all heads; returns the summed loss, or NaN on divergence.
  auto update_critic = [&](const Batch& b) {
    const Eigen::MatrixXd next_features = actor_target.net.features(b.next_obs);
    MultiHeadNet::Cache cache;
    const Eigen::MatrixXd features = agent.critic.features(stack(b.obs, b.action), &cache);
    std::vector<std::pair<int, Eigen::MatrixXd>> grads;
    double loss = 0.0;
    for (int d = 0; d < heads; ++d) {
      const Eigen::MatrixXd next_action = scale.squash(actor_target.net.head_output(d, next_features));
      const Eigen::RowVectorXd next_q = critic_target.net.forward(stack(b.next_obs, next_action), d);
      const Eigen::RowVectorXd y =
          b.reward.transpose() + config.gamma * (1.0 - b.terminal.transpose().array()).matrix().cwiseProduct(next_q);
      const Eigen::RowVectorXd q = agent.critic.head_output(d, features);
      const double peak = std::max(q.cwiseAbs().maxCoeff(), y.cwiseAbs().maxCoeff());
      if (!(peak <= bound)) {
        diverge(peak);
        return std::numeric_limits<double>::quiet_NaN();
      }
      Eigen::MatrixXd g(1, q.size());
      const double alpha = alphas[static_cast<std::size_t>(d)];
      for (Eigen::Index i = 0; i < q.size(); ++i) {
        const double u = y[i] - q[i];
        loss += expectile_loss(u, alpha) * inv_batch;
        g(0, i) = -expectile_loss_grad(u, alpha) * inv_batch;
      }
      grads.emplace_back(d, std::move(g));
    }
    Eigen::VectorXd grad;
    agent.critic.backward(cache, grads, grad);
    critic_opt.step(agent.critic.params(), grad);
    return loss;
  };

  // Ascent on the summed per-head objective mean Q_d(s, pi_d(s)).
  auto update_actor = [&](const Batch& b) {
    MultiHeadNet::Cache cache;
    const Eigen::MatrixXd features = agent.actor.features(b.obs, &cache);
    std::vector<std::pair<int, Eigen::MatrixXd>> grads;
    for (int d = 0; d < heads; ++d) {
      const Eigen::MatrixXd squashed = agent.actor.head_output(d, features).array().tanh().matrix();
      const Eigen::MatrixXd action = (squashed.array().colwise() * scale.half.array()).colwise() + scale.center.array();
      MultiHeadNet::Cache critic_cache;
      agent.critic.forward(stack(b.obs, action), d, &critic_cache);
      Eigen::VectorXd unused;
      const Eigen::MatrixXd dx =
          agent.critic.backward(critic_cache, {{d, Eigen::MatrixXd::Constant(1, b.obs.cols(), -inv_batch)}}, unused);
      const Eigen::MatrixXd d_action = dx.bottomRows(act_dim);
      grads.emplace_back(d, (d_action.array().colwise() * scale.half.array() * (1.0 - squashed.array().square())).matrix());
    }
    Eigen::VectorXd grad;
    agent.actor.backward(cache, grads, grad);
    actor_opt.step(agent.actor.params(), grad);
    critic_target.update(agent.critic);
    actor_target.update(agent.actor);
  };

  long steps = 0, updates = 0;
  for (int episode = 0; steps < config.total_steps && !agent.log.diverged; ++episode) {
    Eigen::VectorXd omega = family.nominal;
    if (mode == OmegaMode::domain_randomization) {
      omega = dr_sample(family.box, omega_rng);
      env = family.make(omega);
    }
    const int arm = agent.bandit ? bandit_sample(*agent.bandit, bandit_rng) : 0;
    Eigen::VectorXd obs = env->reset(derive_seed(config.seed, {kEpisodeStream, static_cast<std::uint64_t>(episode)}));
    double ret = 0.0, loss = 0.0;
    long episode_updates = 0;
    for (;;) {
      Eigen::VectorXd action(act_dim);
      if (steps < config.warmup_steps) {
        for (int i = 0; i < act_dim; ++i) action[i] = agent_rng.uniform(agent.space.low[i], agent.space.high[i]);
      } else {
        action = agent.act(obs, arm);
        for (int i = 0; i < act_dim; ++i)
          action[i] = std::clamp(action[i] + config.exploration_noise * scale.half[i] * agent_rng.normal(),
                                 agent.space.low[i], agent.space.high[i]);
      }
      StepResult r = env->step(action);
      buffer.push(obs, action, r.reward, r.observation, r.terminated);
      ++steps;
      ret += r.reward;
      if (steps >= config.warmup_steps && buffer.size() >= static_cast<std::size_t>(config.batch)) {
        const Batch b = buffer.sample(static_cast<std::size_t>(config.batch), agent_rng);
        const double l = update_critic(b);
        if (agent.log.diverged) break;
        loss += l;
        ++episode_updates;
        if (++updates % config.actor_delay == 0) update_actor(b);
      }
      if (r.done()) break;
      obs = std::move(r.observation);
    }
    if (agent.log.diverged) break;
    if (agent.bandit) bandit_update(*agent.bandit, arm, ret);
    agent.log.episodes.push_back({episode, steps, arm, alphas[static_cast<std::size_t>(arm)], ret,
                                  episode_updates ? loss / static_cast<double>(episode_updates) : 0.0, omega,
                                  probs_vector(agent.bandit)});
  }
  agent.best_head = pick_best(agent.bandit);
  return agent;
}

}  // namespace

Eigen::VectorXd NeuralAgent::act(const Eigen::VectorXd& obs, int head) const {
  const ActionScale scale(space);
  return scale.squash(actor.forward(obs, head)).col(0);
}

PolicyFn NeuralAgent::policy(int head) const {
  return [actor = actor, space = space, head](const Eigen::VectorXd& obs) {
    const ActionScale scale(space);
    return Eigen::VectorXd(scale.squash(actor.forward(obs, head)).col(0));
  };
}

NeuralAgent td3_lite_train(const EnvFamily& family, const Td3LiteConfig& config, OmegaMode mode) {
  return train_neural(family, config, {config.alpha}, std::nullopt, mode);
}

NeuralAgent auto_train(const EnvFamily& family, const Td3LiteConfig& config, const AutoConfig& arms, OmegaMode mode) {
  if (mode == OmegaMode::domain_randomization)
    throw std::invalid_argument("AutoExpectRL does not support domain randomization");
  return train_neural(family, config, arms.arms, arms.bandit_lr, mode);
}

// ---------------------------------------------------------------------------
// Checkpoints

nlohmann::json to_json(const TabularAgent& agent) {
  nlohmann::json tables = nlohmann::json::array();
  for (const auto& q : agent.q) {
    std::vector<double> row_major;
    for (Eigen::Index s = 0; s < q.rows(); ++s)
      for (Eigen::Index a = 0; a < q.cols(); ++a) row_major.push_back(q(s, a));
    tables.push_back(std::move(row_major));
  }
  return {{"version", kCheckpointSchemaVersion},
          {"kind", "tabular"},
          {"alphas", agent.alphas},
          {"best_head", agent.best_head},
          {"n_states", agent.q.empty() ? 0 : agent.q.front().rows()},
          {"n_actions", agent.q.empty() ? 0 : agent.q.front().cols()},
          {"q", std::move(tables)}};
}

nlohmann::json to_json(const NeuralAgent& agent) {
  const auto& lo = agent.space.low;
  const auto& hi = agent.space.high;
  return {{"version", kCheckpointSchemaVersion},
          {"kind", "neural"},
          {"alphas", agent.alphas},
          {"best_head", agent.best_head},
          {"action_low", std::vector<double>(lo.data(), lo.data() + lo.size())},
          {"action_high", std::vector<double>(hi.data(), hi.data() + hi.size())},
          {"actor", to_json(agent.actor)},
          {"critic", to_json(agent.critic)}};
}

PolicyFn policy_from_checkpoint(const nlohmann::json& doc) {
  if (doc.at("version").get<int>() != kCheckpointSchemaVersion) throw std::invalid_argument("unsupported checkpoint version");
  const auto kind = doc.at("kind").get<std::string>();
  const int head = doc.at("best_head").get<int>();
  if (kind == "tabular") {
    TabularAgent agent;
    const auto rows = doc.at("n_states").get<Eigen::Index>();
    const auto cols = doc.at("n_actions").get<Eigen::Index>();
    for (const auto& t : doc.at("q")) {
      const auto v = t.get<std::vector<double>>();
      if (v.size() != static_cast<std::size_t>(rows * cols)) throw std::invalid_argument("Q-table size mismatch");
      agent.q.emplace_back(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          v.data(), rows, cols));
    }
    if (head < 0 || head >= static_cast<int>(agent.q.size())) throw std::invalid_argument("checkpoint head out of range");
    return tabular_policy_fn(agent.greedy(head));
  }
  if (kind == "neural") {
    NeuralAgent agent;
    const auto lo = doc.at("action_low").get<std::vector<double>>();
    const auto hi = doc.at("action_high").get<std::vector<double>>();
    agent.space = ActionSpace::box(Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size())),
                                   Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size())));
    agent.actor = net_from_json(doc.at("actor"));
    if (head < 0 || head >= agent.actor.heads()) throw std::invalid_argument("checkpoint head out of range");
    return agent.policy(head);
  }
  throw std::invalid_argument("unknown checkpoint kind: " + kind);
}

}  // namespace expectrl
