#include "expectrl/envs.hpp"

#include "expectrl/parallel.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace expectrl {

// ---------------------------------------------------------------------------
// TabularEnvironment

TabularEnvironment::TabularEnvironment(TabularMdp base, Details details)
    : base_(std::move(base)), details_(std::move(details)), space_(ActionSpace::discrete(base_.n_actions)) {
  require_valid(base_);
  if (details_.terminal.size() != static_cast<std::size_t>(base_.n_states))
    throw std::invalid_argument("terminal mask length must equal n_states");
  if (details_.arrival.size() == 0) details_.arrival = Eigen::VectorXd::Zero(base_.n_states);
  if (details_.arrival.size() != base_.n_states) throw std::invalid_argument("arrival reward length must equal n_states");
  if (details_.horizon < 1) throw std::invalid_argument("horizon must be positive");
  expected_ = base_;
  // Terminal states are absorbing and never stepped from, so they earn nothing.
  for (int s = 0; s < base_.n_states; ++s) {
    if (details_.terminal[static_cast<std::size_t>(s)]) continue;
    for (int a = 0; a < base_.n_actions; ++a) expected_.rewards(s, a) += base_.kernel_row(s, a).dot(details_.arrival);
  }
}

Eigen::VectorXd TabularEnvironment::reset(std::uint64_t seed) {
  rng_ = Rng(seed);
  std::span<const double> init(base_.initial_dist.data(), static_cast<std::size_t>(base_.initial_dist.size()));
  state_ = static_cast<int>(rng_.categorical(init));
  t_ = 0;
  return Eigen::VectorXd::Constant(1, state_);
}

StepResult TabularEnvironment::step(const Eigen::VectorXd& action) {
  const int a = static_cast<int>(action[0]);
  if (a < 0 || a >= base_.n_actions) throw std::invalid_argument("action index out of range");
  // Rows of the column-major kernel are strided; sample from a contiguous copy.
  const Eigen::RowVectorXd row = base_.kernel_row(state_, a);
  const int next = static_cast<int>(rng_.categorical(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
  StepResult out;
  out.reward = base_.rewards(state_, a) + details_.arrival[next];
  out.terminated = details_.terminal[static_cast<std::size_t>(next)];
  if (out.terminated && details_.terminal_noise > 0.0) out.reward += details_.terminal_noise * rng_.normal();
  state_ = next;
  ++t_;
  out.truncated = !out.terminated && t_ >= details_.horizon;
  out.observation = Eigen::VectorXd::Constant(1, state_);
  return out;
}

double TabularEnvironment::r_max() const {
  return base_.r_max() + (details_.arrival.size() ? details_.arrival.cwiseAbs().maxCoeff() : 0.0);
}

double TabularEnvironment::expected_episode_return(const Policy& policy) const {
  Eigen::RowVectorXd dist = base_.initial_dist.transpose();
  double total = 0.0;
  for (int t = 0; t < details_.horizon; ++t) {
    Eigen::RowVectorXd next = Eigen::RowVectorXd::Zero(base_.n_states);
    for (int s = 0; s < base_.n_states; ++s) {
      if (dist[s] == 0.0) continue;
      for (int a = 0; a < base_.n_actions; ++a) {
        const double w = dist[s] * policy.prob(s, a);
        if (w == 0.0) continue;
        total += w * expected_.rewards(s, a);
        next += w * base_.kernel_row(s, a);
      }
    }
    for (int s = 0; s < base_.n_states; ++s)
      if (details_.terminal[static_cast<std::size_t>(s)]) next[s] = 0.0;
    dist = std::move(next);
  }
  return total;
}

// ---------------------------------------------------------------------------
// PendulumLite

PendulumLite::PendulumLite(double mass, double length)
    : mass_(mass),
      length_(length),
      space_(ActionSpace::box(Eigen::VectorXd::Constant(1, -kMaxTorque), Eigen::VectorXd::Constant(1, kMaxTorque))) {
  if (!(mass > 0.0 && length > 0.0)) throw std::invalid_argument("pendulum mass and length must be positive");
}

Eigen::VectorXd PendulumLite::reset(std::uint64_t seed) {
  rng_ = Rng(seed);
  theta_ = rng_.uniform(-std::numbers::pi, std::numbers::pi);
  velocity_ = rng_.uniform(-1.0, 1.0);
  t_ = 0;
  return observe();
}

void PendulumLite::set_state(double theta, double velocity) {
  theta_ = theta;
  velocity_ = velocity;
}

Eigen::VectorXd PendulumLite::observe() const { return Eigen::Vector3d(std::cos(theta_), std::sin(theta_), velocity_); }

StepResult PendulumLite::step(const Eigen::VectorXd& action) {
  const double torque = std::clamp(action[0], -kMaxTorque, kMaxTorque);
  const double wrapped = std::remainder(theta_, 2.0 * std::numbers::pi);
  StepResult out;
  out.reward = -(wrapped * wrapped + 0.1 * velocity_ * velocity_ + 0.001 * torque * torque);
  const double accel = kGravity / length_ * std::sin(theta_) + torque / (mass_ * length_ * length_);
  velocity_ = std::clamp(velocity_ + accel * kDt, -kMaxSpeed, kMaxSpeed);
  theta_ += velocity_ * kDt;
  ++t_;
  out.truncated = t_ >= kHorizon;
  out.observation = observe();
  return out;
}

double PendulumLite::r_max() const {
  return std::numbers::pi * std::numbers::pi + 0.1 * kMaxSpeed * kMaxSpeed + 0.001 * kMaxTorque * kMaxTorque;
}

// ---------------------------------------------------------------------------
// ScriptedContinuousTask

ScriptedContinuousTask::ScriptedContinuousTask(std::vector<double> outcomes, std::vector<double> probs,
                                               double action_penalty, int horizon, double gamma)
    : outcomes_(std::move(outcomes)),
      probs_(std::move(probs)),
      penalty_(action_penalty),
      horizon_(horizon),
      gamma_(gamma),
      space_(ActionSpace::box(Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 1.0))) {
  if (outcomes_.size() != probs_.size() || outcomes_.empty())
    throw std::invalid_argument("scripted task needs matching outcome and probability lists");
}

Eigen::VectorXd ScriptedContinuousTask::reset(std::uint64_t seed) {
  rng_ = Rng(seed);
  t_ = 0;
  return Eigen::VectorXd::Ones(1);
}

StepResult ScriptedContinuousTask::step(const Eigen::VectorXd& action) {
  const double a = std::clamp(action[0], -1.0, 1.0);
  StepResult out;
  out.reward = outcomes_[rng_.categorical(probs_)] - penalty_ * a * a;
  ++t_;
  out.terminated = t_ >= horizon_;
  out.observation = Eigen::VectorXd::Ones(1);
  return out;
}

double ScriptedContinuousTask::r_max() const {
  double m = 0.0;
  for (double o : outcomes_) m = std::max(m, std::abs(o));
  return m + penalty_;
}

// ---------------------------------------------------------------------------
// Families

std::unique_ptr<Environment> EnvFamily::make(const Eigen::VectorXd& omega) const {
  if (!box.contains(omega)) throw std::invalid_argument("omega outside the uncertainty box of family " + id);
  return builder(omega);
}

std::unique_ptr<TabularEnvironment> EnvFamily::make_tabular(const Eigen::VectorXd& omega) const {
  if (!tabular()) throw std::invalid_argument("family " + id + " is not tabular");
  if (!box.contains(omega)) throw std::invalid_argument("omega outside the uncertainty box of family " + id);
  return tabular_builder(omega);
}

KernelFamily EnvFamily::kernel_family() const {
  if (!tabular()) throw std::invalid_argument("family " + id + " is not tabular");
  auto build = tabular_builder;
  return {id, box, nominal, [build](const Eigen::VectorXd& omega) { return build(omega)->expected_mdp(); }};
}

TabularEnvironment make_gridworld(const std::vector<std::string>& layout, double slip, double gamma, int horizon) {
  const int rows = static_cast<int>(layout.size());
  if (rows == 0) throw std::invalid_argument("empty grid layout");
  const int cols = static_cast<int>(layout[0].size());
  const int cells = rows * cols;
  const int terminal = cells;
  TabularMdp base(cells + 1, 4, gamma);
  base.initial_dist.setZero();

  auto cell = [&](int r, int c) { return layout[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]; };
  constexpr int kDr[4] = {-1, 1, 0, 0};
  constexpr int kDc[4] = {0, 0, -1, 1};
  bool has_start = false;
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(layout[static_cast<std::size_t>(r)].size()) != cols)
      throw std::invalid_argument("grid layout rows differ in length");
    for (int c = 0; c < cols; ++c) {
      const int s = r * cols + c;
      const char ch = cell(r, c);
      if (ch == 'G' || ch == 'H') {
        for (int a = 0; a < 4; ++a) {
          base.transitions(base.row(s, a), terminal) = 1.0;
          base.rewards(s, a) = ch == 'G' ? 1.0 : -1.0;
        }
        continue;
      }
      if (ch == 'S') {
        base.initial_dist[s] = 1.0;
        has_start = true;
      }
      for (int a = 0; a < 4; ++a) {
        int nr = r + kDr[a], nc = c + kDc[a];
        if (nr < 0 || nr >= rows || nc < 0 || nc >= cols || cell(nr, nc) == '#') {
          nr = r;
          nc = c;
        }
        base.transitions(base.row(s, a), nr * cols + nc) = 1.0;
      }
    }
  }
  if (!has_start) throw std::invalid_argument("grid layout has no start cell");
  for (int a = 0; a < 4; ++a) base.transitions(base.row(terminal, a), terminal) = 1.0;

  TabularEnvironment::Details details;
  details.terminal.assign(static_cast<std::size_t>(cells + 1), false);
  details.terminal[static_cast<std::size_t>(terminal)] = true;
  details.horizon = horizon;
  return TabularEnvironment(apply_action_slip(base, slip), std::move(details));
}

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

template <typename MakeTabular>
EnvFamily tabular_family(std::string id, OmegaBox box, Eigen::VectorXd nominal, MakeTabular make) {
  EnvFamily f;
  f.id = std::move(id);
  f.box = std::move(box);
  f.nominal = std::move(nominal);
  f.tabular_builder = [make](const Eigen::VectorXd& omega) { return std::make_unique<TabularEnvironment>(make(omega)); };
  f.builder = [make](const Eigen::VectorXd& omega) -> std::unique_ptr<Environment> {
    return std::make_unique<TabularEnvironment>(make(omega));
  };
  return f;
}

const std::vector<std::string> kSlipGridLayout = {
    "........",  //
    "........",  //
    "..HHHH..",  //
    "S......G",  //
    "..HHHH..",  //
    "........",  //
    "........",  //
    "........",  //
};

const std::vector<std::string> kCliffGridLayout = {
    "........",  //
    "........",  //
    "........",  //
    "SHHHHHHG",  //
};

constexpr double kGridGamma = 0.95;
constexpr int kGridHorizon = 100;

TabularEnvironment windy_chain(double wind, double noise) {
  constexpr int kLength = 20;
  const int terminal = kLength;
  TabularMdp base(kLength + 1, 2, kGridGamma);
  for (int s = 0; s < kLength; ++s) {
    const int left = std::max(s - 1, 0);
    const int right = s + 1 == kLength ? terminal : s + 1;
    base.transitions(base.row(s, 0), left) += 1.0;
    base.transitions(base.row(s, 1), right) += 1.0 - wind;
    base.transitions(base.row(s, 1), left) += wind;
  }
  for (int a = 0; a < 2; ++a) base.transitions(base.row(terminal, a), terminal) = 1.0;
  // The goal reward is paid on arrival at the terminal state.
  TabularEnvironment::Details details;
  details.terminal.assign(kLength + 1, false);
  details.terminal[terminal] = true;
  details.arrival = Eigen::VectorXd::Zero(kLength + 1);
  details.arrival[terminal] = 1.0;
  details.terminal_noise = noise;
  details.horizon = kGridHorizon;
  return TabularEnvironment(std::move(base), std::move(details));
}

TabularEnvironment safe_risky() {
  // 0 start; 1 safe outcome; 2 risky win; 3 risky loss. 1-3 are terminal.
  TabularMdp base(4, 2, 0.9);
  base.transitions(base.row(0, 0), 1) = 1.0;
  base.transitions(base.row(0, 1), 2) = 0.5;
  base.transitions(base.row(0, 1), 3) = 0.5;
  for (int s = 1; s < 4; ++s)
    for (int a = 0; a < 2; ++a) base.transitions(base.row(s, a), s) = 1.0;
  TabularEnvironment::Details details;
  details.terminal = {false, true, true, true};
  details.arrival = vec({0.0, 0.5, 1.0, 0.0});
  details.horizon = 10;
  return TabularEnvironment(std::move(base), std::move(details));
}

TabularEnvironment arm_separation_env() {
  // From the start, action 1 walks a chain and collects +1 after kSafeDelay
  // steps. Action 0 branches: w.p. 0.8 collect +1 next step and -1 after
  // kRiskyDelay more steps, w.p. 0.2 the reverse. Undiscounted returns are 1
  // and 0, but with discount 0.5 only alpha = 0.2 prefers action 1. Greedy
  // ties go to action 0, so an untrained learner takes the risky branch.
  constexpr int kSafeDelay = 4;
  constexpr int kRiskyDelay = 6;
  constexpr double kGamma = 0.5;
  // States: 0 start | safe chain | good branch chain | bad branch chain | terminal.
  const int safe0 = 1;
  const int good0 = safe0 + kSafeDelay;
  const int bad0 = good0 + kRiskyDelay + 1;
  const int terminal = bad0 + kRiskyDelay + 1;
  const int n = terminal + 1;
  TabularMdp base(n, 2, kGamma);
  auto both = [&](int s, int next, double reward) {
    for (int a = 0; a < 2; ++a) {
      base.transitions(base.row(s, a), next) = 1.0;
      base.rewards(s, a) = reward;
    }
  };
  base.transitions(base.row(0, 1), safe0) = 1.0;
  base.transitions(base.row(0, 0), good0) = 0.8;
  base.transitions(base.row(0, 0), bad0) = 0.2;
  for (int i = 0; i < kSafeDelay; ++i) {
    const int s = safe0 + i;
    if (i + 1 < kSafeDelay)
      both(s, s + 1, 0.0);
    else
      both(s, terminal, 1.0);
  }
  for (int branch = 0; branch < 2; ++branch) {
    const int first = branch == 0 ? good0 : bad0;
    const double sign = branch == 0 ? 1.0 : -1.0;
    for (int i = 0; i <= kRiskyDelay; ++i) {
      const int s = first + i;
      if (i == 0)
        both(s, s + 1, sign);
      else if (i < kRiskyDelay)
        both(s, s + 1, 0.0);
      else
        both(s, terminal, -sign);
    }
  }
  both(terminal, terminal, 0.0);
  TabularEnvironment::Details details;
  details.terminal.assign(static_cast<std::size_t>(n), false);
  details.terminal[static_cast<std::size_t>(terminal)] = true;
  details.terminal_noise = 0.1;
  details.horizon = 20;
  return TabularEnvironment(std::move(base), std::move(details));
}

}  // namespace

const std::vector<EnvFamily>& builtin_families() {
  static const std::vector<EnvFamily> families = [] {
    std::vector<EnvFamily> out;
    out.push_back(tabular_family("SlipGrid", {vec({0.0}), vec({0.5})}, vec({0.1}), [](const Eigen::VectorXd& w) {
      return make_gridworld(kSlipGridLayout, w[0], kGridGamma, kGridHorizon);
    }));
    out.push_back(tabular_family("WindyChain", {vec({0.0, 0.0}), vec({0.4, 1.0})}, vec({0.1, 0.0}),
                                 [](const Eigen::VectorXd& w) { return windy_chain(w[0], w[1]); }));
    {
      EnvFamily f;
      f.id = "PendulumLite";
      f.box = {vec({0.5, 0.5}), vec({2.0, 2.0})};
      f.nominal = vec({1.0, 1.0});
      f.builder = [](const Eigen::VectorXd& w) -> std::unique_ptr<Environment> {
        return std::make_unique<PendulumLite>(w[0], w[1]);
      };
      out.push_back(std::move(f));
    }
    out.push_back(tabular_family("CliffGrid", {vec({0.0}), vec({0.4})}, vec({0.1}), [](const Eigen::VectorXd& w) {
      return make_gridworld(kCliffGridLayout, w[0], kGridGamma, kGridHorizon);
    }));
    out.push_back(tabular_family("SafeRisky", {vec({0.0}), vec({0.0})}, vec({0.0}),
                                 [](const Eigen::VectorXd&) { return safe_risky(); }));
    out.push_back(tabular_family("ArmSeparation", {vec({0.0}), vec({0.0})}, vec({0.0}),
                                 [](const Eigen::VectorXd&) { return arm_separation_env(); }));
    for (const auto& [id, outcomes, probs, penalty, horizon] :
         {std::tuple{"ConstantZero", std::vector<double>{0.0}, std::vector<double>{1.0}, 0.0, 20},
          std::tuple{"TwoPointBandit", std::vector<double>{0.0, 1.0}, std::vector<double>{0.5, 0.5}, 1.0, 1}}) {
      EnvFamily f;
      f.id = id;
      f.box = {vec({0.0}), vec({0.0})};
      f.nominal = vec({0.0});
      f.builder = [outcomes, probs, penalty, horizon](const Eigen::VectorXd&) -> std::unique_ptr<Environment> {
        return std::make_unique<ScriptedContinuousTask>(outcomes, probs, penalty, horizon, 0.9);
      };
      out.push_back(std::move(f));
    }
    return out;
  }();
  return families;
}

const EnvFamily& find_family(const std::string& id) {
  for (const auto& f : builtin_families())
    if (f.id == id) return f;
  throw std::invalid_argument("unknown environment family: " + id);
}

// ---------------------------------------------------------------------------
// Grids, sampling, evaluation

OmegaGrid OmegaGrid::regular(const OmegaBox& box, int per_dim) {
  if (per_dim < 1) throw std::invalid_argument("grid needs at least one point per dimension");
  std::vector<std::vector<double>> axes;
  for (int d = 0; d < box.dim(); ++d) {
    const double lo = box.low[d], hi = box.high[d];
    std::vector<double> axis;
    if (lo == hi) {
      axis.push_back(lo);
    } else if (per_dim == 1) {
      axis.push_back(0.5 * (lo + hi));
    } else {
      for (int k = 0; k < per_dim; ++k)
        axis.push_back(k == per_dim - 1 ? hi : lo + (hi - lo) * k / (per_dim - 1));
    }
    axes.push_back(std::move(axis));
  }
  OmegaGrid grid;
  std::vector<std::size_t> idx(axes.size(), 0);
  for (;;) {
    Eigen::VectorXd p(box.dim());
    for (int d = 0; d < box.dim(); ++d) p[d] = axes[static_cast<std::size_t>(d)][idx[static_cast<std::size_t>(d)]];
    grid.points.push_back(std::move(p));
    // Last dimension varies fastest.
    int d = box.dim() - 1;
    for (; d >= 0; --d) {
      auto& i = idx[static_cast<std::size_t>(d)];
      if (++i < axes[static_cast<std::size_t>(d)].size()) break;
      i = 0;
    }
    if (d < 0) break;
  }
  return grid;
}

OmegaGrid OmegaGrid::single(const Eigen::VectorXd& omega) { return OmegaGrid{{omega}}; }

Eigen::VectorXd dr_sample(const OmegaBox& box, Rng& rng) {
  Eigen::VectorXd w(box.dim());
  for (int d = 0; d < box.dim(); ++d) w[d] = box.low[d] + (box.high[d] - box.low[d]) * rng.uniform();
  return w;
}

PolicyFn tabular_policy_fn(const Policy& policy) {
  return [policy](const Eigen::VectorXd& obs) {
    return Eigen::VectorXd::Constant(1, policy.action(static_cast<int>(obs[0])));
  };
}

double run_episode(Environment& env, const PolicyFn& policy, std::uint64_t seed, bool* truncated) {
  Eigen::VectorXd obs = env.reset(seed);
  double total = 0.0;
  for (;;) {
    StepResult r = env.step(policy(obs));
    total += r.reward;
    if (r.done()) {
      if (truncated) *truncated = r.truncated;
      break;
    }
    obs = std::move(r.observation);
  }
  return total;
}

EvalReport evaluate(const PolicyFn& policy, const EnvFamily& family, const OmegaGrid& grid, int n_eval,
                    std::uint64_t seed, int jobs) {
  if (n_eval < 1) throw std::invalid_argument("n_eval must be at least 1");
  if (grid.size() == 0) throw std::invalid_argument("evaluation grid is empty");
  EvalReport report;
  report.family = family.id;
  report.omegas = grid.points;
  report.n_eval = n_eval;
  report.seed = seed;
  const std::size_t k_points = grid.size();
  std::vector<double> returns(k_points * static_cast<std::size_t>(n_eval));
  std::vector<char> truncated(returns.size(), 0);
  parallel_for(returns.size(), jobs, [&](std::size_t cell) {
    const std::size_t k = cell / static_cast<std::size_t>(n_eval);
    const std::size_t e = cell % static_cast<std::size_t>(n_eval);
    auto env = family.make(grid.points[k]);
    bool cut = false;
    returns[cell] = run_episode(*env, policy, derive_seed(seed, {k, e}), &cut);
    truncated[cell] = cut;
  });
  report.per_point_return.assign(k_points, 0.0);
  report.truncated_episodes.assign(k_points, 0);
  for (std::size_t cell = 0; cell < returns.size(); ++cell) {
    const std::size_t k = cell / static_cast<std::size_t>(n_eval);
    report.per_point_return[k] += returns[cell];
    report.truncated_episodes[k] += truncated[cell];
  }
  double sum = 0.0;
  report.worst = std::numeric_limits<double>::infinity();
  for (auto& r : report.per_point_return) {
    r /= n_eval;
    sum += r;
    report.worst = std::min(report.worst, r);
  }
  report.average = sum / static_cast<double>(k_points);
  return report;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json omegas = nlohmann::json::array();
  for (const auto& w : report.omegas) omegas.push_back(std::vector<double>(w.data(), w.data() + w.size()));
  return {{"version", kEvalSchemaVersion},
          {"family", report.family},
          {"omegas", std::move(omegas)},
          {"per_point_return", report.per_point_return},
          {"truncated_episodes", report.truncated_episodes},
          {"worst", report.worst},
          {"average", report.average},
          {"n_eval", report.n_eval},
          {"seed", report.seed}};
}

EvalReport eval_report_from_json(const nlohmann::json& doc) {
  if (doc.at("version").get<int>() != kEvalSchemaVersion) throw std::invalid_argument("unsupported eval report version");
  EvalReport r;
  r.family = doc.at("family").get<std::string>();
  for (const auto& w : doc.at("omegas")) {
    const auto v = w.get<std::vector<double>>();
    r.omegas.emplace_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  r.per_point_return = doc.at("per_point_return").get<std::vector<double>>();
  r.truncated_episodes = doc.at("truncated_episodes").get<std::vector<int>>();
  r.worst = doc.at("worst").get<double>();
  r.average = doc.at("average").get<double>();
  r.n_eval = doc.at("n_eval").get<int>();
  r.seed = doc.at("seed").get<std::uint64_t>();
  return r;
}

std::string to_csv(const EvalReport& report) {
  std::ostringstream out;
  out.precision(17);
  const int dim = report.omegas.empty() ? 0 : static_cast<int>(report.omegas.front().size());
  out << "family";
  for (int d = 0; d < dim; ++d) out << ",omega_" << d;
  out << ",R_k\n";
  for (std::size_t k = 0; k < report.omegas.size(); ++k) {
    out << report.family;
    for (int d = 0; d < dim; ++d) out << ',' << report.omegas[k][d];
    out << ',' << report.per_point_return[k] << '\n';
  }
  return out.str();
}

}  // namespace expectrl
