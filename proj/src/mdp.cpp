#include "expectrl/mdp.hpp"

#include "expectrl/rng.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace expectrl {

TabularMdp::TabularMdp(int states, int actions, double discount)
    : n_states(states),
      n_actions(actions),
      transitions(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(states) * actions, states)),
      rewards(Eigen::MatrixXd::Zero(states, actions)),
      gamma(discount),
      initial_dist(Eigen::VectorXd::Zero(states)) {
  if (states < 1 || actions < 1) throw std::invalid_argument("MDP needs at least one state and one action");
  initial_dist[0] = 1.0;
}

std::optional<Violation> validate(const TabularMdp& mdp) {
  constexpr double kTol = 1e-10;
  if (mdp.n_states < 1 || mdp.n_actions < 1) return Violation{"empty state or action set"};
  if (mdp.transitions.rows() != static_cast<Eigen::Index>(mdp.n_states) * mdp.n_actions ||
      mdp.transitions.cols() != mdp.n_states)
    return Violation{"transition tensor has the wrong shape"};
  if (mdp.rewards.rows() != mdp.n_states || mdp.rewards.cols() != mdp.n_actions)
    return Violation{"reward table has the wrong shape"};
  if (mdp.initial_dist.size() != mdp.n_states) return Violation{"initial distribution has the wrong length"};
  if (!(mdp.gamma > 0.0 && mdp.gamma < 1.0)) return Violation{"gamma must lie in (0, 1)"};

  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      const auto row = mdp.kernel_row(s, a);
      if (!row.allFinite()) return Violation{"non-finite transition probability", s, a};
      if ((row.array() < 0.0).any()) return Violation{"negative transition probability", s, a};
      const double sum = row.sum();
      if (std::abs(sum - 1.0) > kTol) {
        std::ostringstream msg;
        msg << "transition row sums to " << sum;
        return Violation{msg.str(), s, a};
      }
      if (!std::isfinite(mdp.rewards(s, a))) return Violation{"non-finite reward", s, a};
    }
  }
  if (!mdp.initial_dist.allFinite() || (mdp.initial_dist.array() < 0.0).any() ||
      std::abs(mdp.initial_dist.sum() - 1.0) > kTol)
    return Violation{"initial distribution is not a probability vector"};
  return std::nullopt;
}

void require_valid(const TabularMdp& mdp) {
  if (auto v = validate(mdp)) {
    std::ostringstream msg;
    msg << "invalid MDP: " << v->what;
    if (v->state >= 0) msg << " at (s=" << v->state << ", a=" << v->action << ")";
    throw std::invalid_argument(msg.str());
  }
}

// ---------------------------------------------------------------------------

Policy Policy::deterministic(std::vector<int> actions, int n_actions) {
  for (int a : actions)
    if (a < 0 || a >= n_actions) throw std::invalid_argument("policy action index out of range");
  Policy p;
  p.rep_ = std::move(actions);
  p.n_actions_ = n_actions;
  return p;
}

Policy Policy::stochastic(Eigen::MatrixXd probs) {
  for (Eigen::Index s = 0; s < probs.rows(); ++s) {
    if ((probs.row(s).array() < 0.0).any() || std::abs(probs.row(s).sum() - 1.0) > 1e-10)
      throw std::invalid_argument("stochastic policy row is not a distribution");
  }
  Policy p;
  p.n_actions_ = static_cast<int>(probs.cols());
  p.rep_ = std::move(probs);
  return p;
}

Policy Policy::uniform(int n_states, int n_actions) {
  return stochastic(Eigen::MatrixXd::Constant(n_states, n_actions, 1.0 / n_actions));
}

int Policy::n_states() const {
  if (is_deterministic()) return static_cast<int>(std::get<std::vector<int>>(rep_).size());
  return static_cast<int>(std::get<Eigen::MatrixXd>(rep_).rows());
}

double Policy::prob(int s, int a) const {
  if (is_deterministic()) return std::get<std::vector<int>>(rep_)[s] == a ? 1.0 : 0.0;
  return std::get<Eigen::MatrixXd>(rep_)(s, a);
}

int Policy::action(int s) const {
  if (is_deterministic()) return std::get<std::vector<int>>(rep_)[s];
  Eigen::Index best;
  std::get<Eigen::MatrixXd>(rep_).row(s).maxCoeff(&best);
  return static_cast<int>(best);
}

Eigen::MatrixXd Policy::as_matrix() const {
  if (!is_deterministic()) return std::get<Eigen::MatrixXd>(rep_);
  const auto& acts = std::get<std::vector<int>>(rep_);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(acts.size()), n_actions_);
  for (std::size_t s = 0; s < acts.size(); ++s) m(static_cast<Eigen::Index>(s), acts[s]) = 1.0;
  return m;
}

// ---------------------------------------------------------------------------

TabularMdp garnet(int n_states, int n_actions, int branching, double reward_sparsity, std::uint64_t seed,
                  double gamma) {
  if (branching < 1 || branching > n_states)
    throw std::invalid_argument("garnet branching must lie in [1, n_states]");
  if (!(reward_sparsity >= 0.0 && reward_sparsity <= 1.0))
    throw std::invalid_argument("garnet reward sparsity must lie in [0, 1]");

  TabularMdp mdp(n_states, n_actions, gamma);
  Rng rng(seed);
  std::vector<int> states(static_cast<std::size_t>(n_states));
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      // Partial Fisher-Yates picks `branching` distinct successors.
      std::iota(states.begin(), states.end(), 0);
      for (int k = 0; k < branching; ++k) {
        const auto j = k + rng.uniform_index(static_cast<std::size_t>(n_states - k));
        std::swap(states[static_cast<std::size_t>(k)], states[j]);
      }
      std::vector<double> mass(static_cast<std::size_t>(branching));
      double total = 0.0;
      for (auto& m : mass) {
        do {
          m = rng.gamma(1.0);
        } while (m <= 0.0);
        total += m;
      }
      auto row = mdp.kernel_row(s, a);
      for (int k = 0; k < branching; ++k) row[states[static_cast<std::size_t>(k)]] = mass[static_cast<std::size_t>(k)] / total;
      const double r = rng.uniform();
      mdp.rewards(s, a) = rng.uniform() < reward_sparsity ? 0.0 : r;
    }
  }
  mdp.initial_dist.setConstant(1.0 / n_states);
  return mdp;
}

// ---------------------------------------------------------------------------

bool OmegaBox::contains(const Eigen::VectorXd& omega, double slack) const {
  if (omega.size() != low.size()) return false;
  return ((omega.array() >= low.array() - slack) && (omega.array() <= high.array() + slack)).all();
}

TabularMdp perturb_kernel(const KernelFamily& family, const Eigen::VectorXd& omega) {
  if (!family.box.contains(omega))
    throw std::invalid_argument("omega outside the uncertainty box of family " + family.name);
  TabularMdp out = family.build(omega);
  require_valid(out);
  return out;
}

TabularMdp apply_action_slip(const TabularMdp& base, double slip) {
  if (!(slip >= 0.0 && slip <= 1.0)) throw std::invalid_argument("slip probability must lie in [0, 1]");
  TabularMdp out = base;
  if (base.n_actions < 2 || slip == 0.0) return out;
  const double other = slip / (base.n_actions - 1);
  for (int s = 0; s < base.n_states; ++s) {
    Eigen::RowVectorXd total = Eigen::RowVectorXd::Zero(base.n_states);
    for (int a = 0; a < base.n_actions; ++a) total += base.kernel_row(s, a);
    for (int a = 0; a < base.n_actions; ++a) {
      const Eigen::RowVectorXd own = base.kernel_row(s, a);
      out.kernel_row(s, a) = (1.0 - slip) * own + other * (total - own);
    }
  }
  return out;
}

TabularMdp mix_kernels(const TabularMdp& a, const TabularMdp& b, double weight) {
  if (a.transitions.rows() != b.transitions.rows() || a.transitions.cols() != b.transitions.cols())
    throw std::invalid_argument("cannot mix kernels of different shapes");
  if (!(weight >= 0.0 && weight <= 1.0)) throw std::invalid_argument("mixing weight must lie in [0, 1]");
  TabularMdp out = a;
  out.transitions = (1.0 - weight) * a.transitions + weight * b.transitions;
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const TabularMdp& mdp) {
  nlohmann::json trans = nlohmann::json::array();
  nlohmann::json rewards = nlohmann::json::array();
  for (int s = 0; s < mdp.n_states; ++s) {
    nlohmann::json per_action = nlohmann::json::array();
    nlohmann::json rrow = nlohmann::json::array();
    for (int a = 0; a < mdp.n_actions; ++a) {
      const auto row = mdp.kernel_row(s, a);
      nlohmann::json probs = nlohmann::json::array();
      for (int t = 0; t < mdp.n_states; ++t) probs.push_back(row[t]);
      per_action.push_back(std::move(probs));
      rrow.push_back(mdp.rewards(s, a));
    }
    trans.push_back(std::move(per_action));
    rewards.push_back(std::move(rrow));
  }
  return {{"version", kMdpSchemaVersion},
          {"n_states", mdp.n_states},
          {"n_actions", mdp.n_actions},
          {"gamma", mdp.gamma},
          {"transitions", std::move(trans)},
          {"rewards", std::move(rewards)},
          {"initial_dist", std::vector<double>(mdp.initial_dist.data(), mdp.initial_dist.data() + mdp.initial_dist.size())}};
}

TabularMdp mdp_from_json(const nlohmann::json& doc) {
  if (!doc.contains("version") || doc.at("version").get<int>() != kMdpSchemaVersion)
    throw std::invalid_argument("unsupported MDP document version");
  for (const auto& [key, _] : doc.items()) {
    if (key != "version" && key != "n_states" && key != "n_actions" && key != "gamma" && key != "transitions" &&
        key != "rewards" && key != "initial_dist")
      throw std::invalid_argument("unknown key in MDP document: " + key);
  }
  TabularMdp mdp(doc.at("n_states").get<int>(), doc.at("n_actions").get<int>(), doc.at("gamma").get<double>());
  const auto& trans = doc.at("transitions");
  const auto& rewards = doc.at("rewards");
  if (trans.size() != static_cast<std::size_t>(mdp.n_states) || rewards.size() != static_cast<std::size_t>(mdp.n_states))
    throw std::invalid_argument("MDP document arrays do not match n_states");
  for (int s = 0; s < mdp.n_states; ++s) {
    if (trans[s].size() != static_cast<std::size_t>(mdp.n_actions) ||
        rewards[s].size() != static_cast<std::size_t>(mdp.n_actions))
      throw std::invalid_argument("MDP document arrays do not match n_actions");
    for (int a = 0; a < mdp.n_actions; ++a) {
      const auto& row = trans[s][a];
      if (row.size() != static_cast<std::size_t>(mdp.n_states))
        throw std::invalid_argument("MDP transition row has the wrong length");
      for (int t = 0; t < mdp.n_states; ++t) mdp.transitions(mdp.row(s, a), t) = row[t].get<double>();
      mdp.rewards(s, a) = rewards[s][a].get<double>();
    }
  }
  const auto init = doc.at("initial_dist").get<std::vector<double>>();
  if (init.size() != static_cast<std::size_t>(mdp.n_states))
    throw std::invalid_argument("initial_dist has the wrong length");
  mdp.initial_dist = Eigen::Map<const Eigen::VectorXd>(init.data(), static_cast<Eigen::Index>(init.size()));
  require_valid(mdp);
  return mdp;
}

nlohmann::json to_json(const Policy& policy) {
  if (policy.is_deterministic())
    return {{"kind", "deterministic"}, {"n_actions", policy.n_actions()}, {"actions", policy.actions()}};
  const Eigen::MatrixXd m = policy.as_matrix();
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index s = 0; s < m.rows(); ++s) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index a = 0; a < m.cols(); ++a) row.push_back(m(s, a));
    rows.push_back(std::move(row));
  }
  return {{"kind", "stochastic"}, {"n_actions", policy.n_actions()}, {"probs", std::move(rows)}};
}

Policy policy_from_json(const nlohmann::json& doc) {
  const auto kind = doc.at("kind").get<std::string>();
  const int n_actions = doc.at("n_actions").get<int>();
  if (kind == "deterministic") return Policy::deterministic(doc.at("actions").get<std::vector<int>>(), n_actions);
  if (kind != "stochastic") throw std::invalid_argument("unknown policy kind: " + kind);
  const auto& rows = doc.at("probs");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), n_actions);
  for (std::size_t s = 0; s < rows.size(); ++s)
    for (int a = 0; a < n_actions; ++a) m(static_cast<Eigen::Index>(s), a) = rows[s][static_cast<std::size_t>(a)].get<double>();
  return Policy::stochastic(std::move(m));
}

}  // namespace expectrl
