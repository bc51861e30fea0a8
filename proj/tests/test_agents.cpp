#include "expectrl/agents.hpp"
#include "expectrl/bellman.hpp"
#include "expectrl/expectile.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace expectrl;

namespace {

Td3LiteConfig small_td3(double alpha, std::uint64_t seed) {
  Td3LiteConfig c;
  c.alpha = alpha;
  c.hidden = {16, 16};
  c.warmup_steps = 200;
  c.total_steps = 3000;
  c.optimizer = Optimizer::Kind::adam;
  c.lr_critic = 3e-2;
  c.seed = seed;
  return c;
}

double critic_at(const NeuralAgent& agent, double obs, double action, int head = 0) {
  Eigen::MatrixXd in(2, 1);
  in << obs, action;
  return agent.critic.forward(in, head)(0, 0);
}

}  // namespace

TEST_CASE("replay buffer") {
  ReplayBuffer buffer(1, 1, 100);
  for (int i = 0; i < 250; ++i)
    buffer.push(Eigen::VectorXd::Constant(1, i), Eigen::VectorXd::Zero(1), i, Eigen::VectorXd::Zero(1), false);
  CHECK(buffer.size() == 100);
  CHECK(buffer.inserted() == 250);

  Rng rng(1);
  const Batch b = buffer.sample(10, rng);
  CHECK(b.obs.cols() == 10);
  for (Eigen::Index j = 0; j < 10; ++j) {
    CHECK(b.obs(0, j) >= 150);
    CHECK(b.reward[j] == b.obs(0, j));
  }

  // Uniform sampling: every slot within 3 sigma of n / 100.
  std::vector<int> counts(100, 0);
  constexpr int kDraws = 100000;
  for (auto i : buffer.sample_indices(kDraws, rng)) ++counts[i];
  const double mean = kDraws / 100.0, sigma = std::sqrt(kDraws * 0.01 * 0.99);
  for (int c : counts) CHECK(std::abs(c - mean) < 3.0 * sigma + 1.0);

  ReplayBuffer empty(1, 1, 4);
  CHECK_THROWS_AS(empty.sample(1, rng), std::logic_error);
}

TEST_CASE("bandit sampling") {
  BanditState state;
  CHECK(state.arms == std::vector<double>{0.2, 0.3, 0.4, 0.5});
  CHECK((state.probs() - Eigen::Vector4d::Constant(0.25)).cwiseAbs().maxCoeff() < 1e-15);

  state.weights << 10, -10, -10, -10;
  CHECK(state.probs()[0] > 0.999);
  Rng rng(2);
  int zeros = 0;
  for (int i = 0; i < 10000; ++i) zeros += bandit_sample(state, rng) == 0;
  CHECK(zeros > 9980);

  Rng w(3);
  for (int trial = 0; trial < 100; ++trial) {
    for (int d = 0; d < 4; ++d) state.weights[d] = w.uniform(-50, 50);
    CHECK(std::abs(state.probs().sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("bandit update") {
  BanditState state;
  bandit_update(state, 2, 5.0);
  CHECK(state.weights.isZero(0.0));
  CHECK(state.last_return == 5.0);

  BanditState s2;
  s2.last_return = 0.0;
  bandit_update(s2, 1, 1.0);
  CHECK(s2.weights[0] == 0.0);
  CHECK(s2.weights[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(s2.weights[2] == 0.0);
  CHECK(s2.weights[3] == 0.0);
  const Eigen::VectorXd before = s2.weights;
  bandit_update(s2, 3, 1.0);
  CHECK(s2.weights == before);

  // Only the pulled arm moves; clamp keeps weights in range.
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const int arm = bandit_sample(s2, rng);
    const Eigen::VectorXd prev = s2.weights;
    bandit_update(s2, arm, rng.uniform(-100, 100));
    for (int d = 0; d < 4; ++d)
      if (d != arm) CHECK(s2.weights[d] == prev[d]);
    CHECK(s2.weights.cwiseAbs().maxCoeff() <= 50.0);
    CHECK(std::abs(s2.probs().sum() - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(bandit_update(s2, 4, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(BanditState({0.7}), std::invalid_argument);
}

TEST_CASE("tabular Q-learning examples") {
  TabularMdp one(1, 1, 0.5);
  one.transitions(0, 0) = 1.0;
  one.rewards(0, 0) = 1.0;
  QLearningConfig c;
  c.episodes = 200;
  const TabularAgent a = q_learning_expectile(one, c, 50);
  CHECK(std::abs(a.q[0](0, 0) - 2.0) < 0.01);

  // Deterministic 3-state chain with two actions.
  TabularMdp chain(3, 2, 0.9);
  for (int s = 0; s < 3; ++s) {
    chain.transitions(chain.row(s, 0), s) = 1.0;
    chain.transitions(chain.row(s, 1), (s + 1) % 3) = 1.0;
    chain.rewards(s, 0) = 0.1 * s;
    chain.rewards(s, 1) = s == 2 ? 1.0 : 0.0;
  }
  c.episodes = 3000;
  const TabularAgent b = q_learning_expectile(chain, c, 30);
  const auto vi = value_iteration(chain, OperatorKind::classical(true), 1e-12, 100000);
  const Eigen::MatrixXd q_star = BellmanOperator(chain, OperatorKind::classical(true)).q_values(vi.value);
  CHECK((b.q[0] - q_star).cwiseAbs().maxCoeff() < 0.05);

  CHECK_THROWS_AS(q_learning_expectile(find_family("PendulumLite"), QLearningConfig{}), std::invalid_argument);
  QLearningConfig bad;
  bad.alpha = 0.7;
  CHECK_THROWS_AS(q_learning_expectile(find_family("SafeRisky"), bad), std::invalid_argument);
}

TEST_CASE("expectile Q-learning on the safe/risky MDP") {
  const double target = expectile_discrete(DiscreteDistribution<double>{Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(0.5, 0.5)}, 0.2);
  CHECK(target == doctest::Approx(0.2).epsilon(1e-9));
  QLearningConfig c;
  c.alpha = 0.2;
  c.seed = 1;
  c.epsilon_end = 0.2;
  const TabularAgent agent = q_learning_expectile(find_family("SafeRisky"), c);
  CHECK(std::abs(agent.q[0](0, 1) - target) < 0.05);
  CHECK(agent.greedy().action(0) == 0);

  c.alpha = 0.5;
  const TabularAgent neutral = q_learning_expectile(find_family("SafeRisky"), c);
  CHECK(std::abs(neutral.q[0](0, 1) - 0.5) < 0.05);
}

TEST_CASE("training logs") {
  QLearningConfig c;
  c.episodes = 50;
  c.seed = 9;
  const TabularAgent a = q_learning_expectile(find_family("CliffGrid"), c);
  const TabularAgent b = q_learning_expectile(find_family("CliffGrid"), c);
  CHECK(to_csv(a.log) == to_csv(b.log));
  CHECK(a.q[0] == b.q[0]);
  const std::string csv = to_csv(a.log);
  CHECK(csv.rfind("episode,step,arm,alpha,return,critic_loss,bandit_prob_0\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 51);
  for (std::size_t i = 1; i < a.log.episodes.size(); ++i) CHECK(a.log.episodes[i].step > a.log.episodes[i - 1].step);
}

TEST_CASE("domain randomization") {
  QLearningConfig c;
  c.episodes = 300;
  c.seed = 4;
  const EnvFamily& fixed = find_family("SafeRisky");
  CHECK(q_learning_expectile(fixed, c).q[0] == dr_train(fixed, c).q[0]);

  c.episodes = 1000;
  const TabularAgent agent = dr_train(find_family("SlipGrid"), c);
  std::vector<double> omegas;
  for (const auto& e : agent.log.episodes) omegas.push_back(e.omega[0]);
  std::sort(omegas.begin(), omegas.end());
  // Kolmogorov-Smirnov statistic against uniform on [0, 0.5].
  double d = 0.0;
  const double n = static_cast<double>(omegas.size());
  for (std::size_t i = 0; i < omegas.size(); ++i) {
    const double cdf = omegas[i] / 0.5;
    d = std::max({d, (i + 1) / n - cdf, cdf - i / n});
  }
  CHECK(d * std::sqrt(n) < 1.63);  // 1% critical value
  CHECK(to_csv(agent.log).find("omega_0") != std::string::npos);
}

TEST_CASE("tabular auto variant") {
  QLearningConfig c;
  c.episodes = 100;
  const TabularAgent a = auto_train_tabular(find_family("CliffGrid"), c, AutoConfig{});
  CHECK(a.q.size() == 4);
  CHECK(a.bandit.has_value());
  for (const auto& e : a.log.episodes) {
    CHECK(e.bandit_probs.size() == 4);
    CHECK(e.alpha == a.alphas[static_cast<std::size_t>(e.arm)]);
  }
  CHECK_THROWS_AS(auto_train_tabular(find_family("CliffGrid"), c, AutoConfig{}, OmegaMode::domain_randomization),
                  std::invalid_argument);

  // Constant returns give f = 0, so the bandit stays uniform.
  const TabularAgent flat = auto_train_tabular(find_family("SafeRisky"), QLearningConfig{.episodes = 20, .epsilon_start = 0.0, .epsilon_end = 0.0}, AutoConfig{});
  CHECK(flat.bandit->weights.isZero(0.0));
}

TEST_CASE("single-critic learner on diagnostic tasks") {
  Td3LiteConfig zc = small_td3(0.5, 1);
  zc.lr_critic = 3e-3;
  zc.gamma = 0.9;
  zc.total_steps = 5000;
  const NeuralAgent zero = td3_lite_train(find_family("ConstantZero"), zc);
  CHECK_FALSE(zero.log.diverged);
  for (double a : {-1.0, -0.3, 0.0, 0.5, 1.0}) CHECK(std::abs(critic_at(zero, 1.0, a)) < 0.1);

  for (double alpha : {0.2, 0.5}) {
    const NeuralAgent agent = td3_lite_train(find_family("TwoPointBandit"), small_td3(alpha, 2));
    const double target =
        expectile_discrete(DiscreteDistribution<double>{Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(0.5, 0.5)}, alpha);
    CHECK(std::abs(critic_at(agent, 1.0, 0.0) - target) < 0.05);
    CHECK(std::abs(agent.act(Eigen::VectorXd::Ones(1), 0)[0]) < 0.1);
  }
  CHECK_THROWS_AS(td3_lite_train(find_family("SlipGrid"), small_td3(0.5, 1)), std::invalid_argument);
}

TEST_CASE("trainer determinism and degenerate bandit") {
  Td3LiteConfig c = small_td3(0.3, 5);
  c.total_steps = 600;
  const NeuralAgent a = td3_lite_train(find_family("TwoPointBandit"), c);
  const NeuralAgent b = td3_lite_train(find_family("TwoPointBandit"), c);
  CHECK(to_csv(a.log) == to_csv(b.log));
  CHECK(a.critic.params() == b.critic.params());

  const NeuralAgent single = auto_train(find_family("TwoPointBandit"), c, AutoConfig{{0.3}, 0.2});
  CHECK(to_csv(single.log) == to_csv(a.log));
  CHECK(single.critic.params() == a.critic.params());
  CHECK(single.actor.params() == a.actor.params());

  CHECK_THROWS_AS(auto_train(find_family("TwoPointBandit"), c, AutoConfig{}, OmegaMode::domain_randomization),
                  std::invalid_argument);
}

TEST_CASE("multi-head learner") {
  Td3LiteConfig c = small_td3(0.5, 6);
  c.total_steps = 400;
  const NeuralAgent agent = auto_train(find_family("ConstantZero"), c, AutoConfig{});
  CHECK(agent.critic.heads() == 4);
  CHECK(agent.actor.heads() == 4);
  // All returns are 0, so every f after the first is 0.
  CHECK(agent.bandit->weights.isZero(0.0));
  const std::string csv = to_csv(agent.log);
  CHECK(csv.find("bandit_prob_3") != std::string::npos);
}

TEST_CASE("divergence guard") {
  CHECK(divergence_bound(2.0, 0.9) == doctest::Approx(200.0));
  CHECK(divergence_bound(0.0, 0.5) == doctest::Approx(20.0));
  Td3LiteConfig c = small_td3(0.5, 7);
  c.lr_critic = 50.0;
  c.optimizer = Optimizer::Kind::sgd;
  c.total_steps = 2000;
  const NeuralAgent agent = td3_lite_train(find_family("TwoPointBandit"), c);
  CHECK(agent.log.diverged);
  CHECK(agent.log.message.find("diverged") != std::string::npos);
}

TEST_CASE("checkpoints") {
  QLearningConfig qc;
  qc.episodes = 200;
  const TabularAgent tab = q_learning_expectile(find_family("CliffGrid"), qc);
  const PolicyFn restored = policy_from_checkpoint(nlohmann::json::parse(to_json(tab).dump()));
  const Policy greedy = tab.greedy();
  for (int s = 0; s < 33; ++s) CHECK(restored(Eigen::VectorXd::Constant(1, s))[0] == greedy.action(s));

  Td3LiteConfig c = small_td3(0.5, 8);
  c.total_steps = 300;
  const NeuralAgent net = td3_lite_train(find_family("TwoPointBandit"), c);
  const PolicyFn p = policy_from_checkpoint(nlohmann::json::parse(to_json(net).dump()));
  CHECK(p(Eigen::VectorXd::Ones(1)) == net.act(Eigen::VectorXd::Ones(1), 0));

  auto doc = to_json(tab);
  doc["version"] = 7;
  CHECK_THROWS_AS(policy_from_checkpoint(doc), std::invalid_argument);
}
