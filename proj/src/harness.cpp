#include "expectrl/harness.hpp"

#include "expectrl/expectile.hpp"
#include "expectrl/parallel.hpp"
#include "svg.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace expectrl {

namespace fs = std::filesystem;
using nlohmann::json;

#ifndef EXPECTRL_VERSION
#define EXPECTRL_VERSION "0.0.0"
#endif

std::string toolkit_version() { return EXPECTRL_VERSION; }

namespace {

const std::vector<std::pair<Algorithm, std::string>> kAlgorithmNames = {
    {Algorithm::vi, "vi"},           {Algorithm::robust_vi, "robust_vi"}, {Algorithm::q_expectile, "q_expectile"},
    {Algorithm::td3lite, "td3lite"}, {Algorithm::dr, "dr"},               {Algorithm::auto_alpha, "auto"},
};

void reject_unknown(const json& doc, const std::set<std::string>& allowed, const std::string& where) {
  if (!doc.is_object()) throw std::invalid_argument(where + " must be a JSON object");
  for (const auto& [key, value] : doc.items())
    if (!allowed.count(key)) throw std::invalid_argument("unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& doc, const char* key, T& out) {
  if (doc.contains(key)) out = doc.at(key).get<T>();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

}  // namespace

std::string to_string(Algorithm a) {
  for (const auto& [alg, name] : kAlgorithmNames)
    if (alg == a) return name;
  return "unknown";
}

Algorithm algorithm_from_string(const std::string& name) {
  for (const auto& [alg, n] : kAlgorithmNames)
    if (n == name) return alg;
  throw std::invalid_argument("unknown algorithm: " + name + " (expected vi, robust_vi, q_expectile, td3lite, dr or auto)");
}

// ---------------------------------------------------------------------------
// Config

void RunConfig::validate() const {
  const EnvFamily& f = find_family(family);
  const bool needs_tabular =
      algorithm == Algorithm::vi || algorithm == Algorithm::robust_vi || algorithm == Algorithm::q_expectile;
  if (needs_tabular && !f.tabular())
    throw std::invalid_argument(to_string(algorithm) + " needs a tabular family; " + family + " is continuous");
  if (algorithm == Algorithm::td3lite && f.tabular())
    throw std::invalid_argument("td3lite needs a continuous family; " + family + " is tabular");
  if (!(alpha > 0.0 && alpha <= 0.5)) throw std::invalid_argument("alpha must lie in (0, 0.5]");
  BanditState check(arms.arms, arms.bandit_lr);
  if (n_seeds < 1) throw std::invalid_argument("n_seeds must be at least 1");
  if (n_eval < 1) throw std::invalid_argument("n_eval must be at least 1");
  if (grid_per_dim < 1) throw std::invalid_argument("grid_per_dim must be at least 1");
  if (jobs < 1) throw std::invalid_argument("jobs must be at least 1");
  if (!(solver_tol > 0.0) || solver_max_iter < 1) throw std::invalid_argument("invalid solver settings");
  if (run_id.find('/') != std::string::npos || run_id == "." || run_id == "..")
    throw std::invalid_argument("run_id must be a plain directory name");
  if (!(tabular.lr > 0.0) || tabular.lr_decay < 0.0 || tabular.episodes < 1 || tabular.epsilon_start < 0.0 ||
      tabular.epsilon_start > 1.0 || tabular.epsilon_end < 0.0 || tabular.epsilon_end > 1.0 ||
      tabular.epsilon_decay_fraction < 0.0 || tabular.epsilon_decay_fraction > 1.0)
    throw std::invalid_argument("invalid tabular learner settings");
  Td3LiteConfig t = td3;
  t.alpha = alpha;
  t.validate();
}

RunConfig run_config_from_json(const json& doc) {
  reject_unknown(doc,
                 {"version", "family", "algorithm", "alpha", "arms", "bandit_lr", "n_seeds", "seed", "n_eval",
                  "eval_seed", "grid_per_dim", "jobs", "run_id", "tabular", "td3", "solver"},
                 "run config");
  if (doc.contains("version") && doc.at("version").get<int>() != kConfigSchemaVersion)
    throw std::invalid_argument("unsupported run config version");
  RunConfig c;
  read(doc, "family", c.family);
  if (doc.contains("algorithm")) c.algorithm = algorithm_from_string(doc.at("algorithm").get<std::string>());
  read(doc, "alpha", c.alpha);
  read(doc, "arms", c.arms.arms);
  read(doc, "bandit_lr", c.arms.bandit_lr);
  read(doc, "n_seeds", c.n_seeds);
  read(doc, "seed", c.seed);
  read(doc, "n_eval", c.n_eval);
  read(doc, "eval_seed", c.eval_seed);
  read(doc, "grid_per_dim", c.grid_per_dim);
  read(doc, "jobs", c.jobs);
  read(doc, "run_id", c.run_id);
  if (doc.contains("tabular")) {
    const json& t = doc.at("tabular");
    reject_unknown(t, {"lr", "lr_decay", "episodes", "epsilon_start", "epsilon_end", "epsilon_decay_fraction"},
                   "tabular");
    read(t, "lr", c.tabular.lr);
    read(t, "lr_decay", c.tabular.lr_decay);
    read(t, "episodes", c.tabular.episodes);
    read(t, "epsilon_start", c.tabular.epsilon_start);
    read(t, "epsilon_end", c.tabular.epsilon_end);
    read(t, "epsilon_decay_fraction", c.tabular.epsilon_decay_fraction);
  }
  if (doc.contains("td3")) {
    const json& t = doc.at("td3");
    reject_unknown(t,
                   {"lr_actor", "lr_critic", "batch", "memory", "gamma", "tau", "actor_delay", "exploration_noise",
                    "warmup_steps", "total_steps", "hidden", "optimizer"},
                   "td3");
    read(t, "lr_actor", c.td3.lr_actor);
    read(t, "lr_critic", c.td3.lr_critic);
    read(t, "batch", c.td3.batch);
    read(t, "memory", c.td3.memory);
    read(t, "gamma", c.td3.gamma);
    read(t, "tau", c.td3.tau);
    read(t, "actor_delay", c.td3.actor_delay);
    read(t, "exploration_noise", c.td3.exploration_noise);
    read(t, "warmup_steps", c.td3.warmup_steps);
    read(t, "total_steps", c.td3.total_steps);
    read(t, "hidden", c.td3.hidden);
    if (t.contains("optimizer")) {
      const auto name = t.at("optimizer").get<std::string>();
      if (name == "sgd")
        c.td3.optimizer = Optimizer::Kind::sgd;
      else if (name == "adam")
        c.td3.optimizer = Optimizer::Kind::adam;
      else
        throw std::invalid_argument("unknown optimizer: " + name);
    }
  }
  if (doc.contains("solver")) {
    const json& s = doc.at("solver");
    reject_unknown(s, {"tol", "max_iter"}, "solver");
    read(s, "tol", c.solver_tol);
    read(s, "max_iter", c.solver_max_iter);
  }
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  return {{"version", kConfigSchemaVersion},
          {"family", c.family},
          {"algorithm", to_string(c.algorithm)},
          {"alpha", c.alpha},
          {"arms", c.arms.arms},
          {"bandit_lr", c.arms.bandit_lr},
          {"n_seeds", c.n_seeds},
          {"seed", c.seed},
          {"n_eval", c.n_eval},
          {"eval_seed", c.eval_seed},
          {"grid_per_dim", c.grid_per_dim},
          {"jobs", c.jobs},
          {"run_id", c.run_id},
          {"tabular",
           {{"lr", c.tabular.lr},
            {"lr_decay", c.tabular.lr_decay},
            {"episodes", c.tabular.episodes},
            {"epsilon_start", c.tabular.epsilon_start},
            {"epsilon_end", c.tabular.epsilon_end},
            {"epsilon_decay_fraction", c.tabular.epsilon_decay_fraction}}},
          {"td3",
           {{"lr_actor", c.td3.lr_actor},
            {"lr_critic", c.td3.lr_critic},
            {"batch", c.td3.batch},
            {"memory", c.td3.memory},
            {"gamma", c.td3.gamma},
            {"tau", c.td3.tau},
            {"actor_delay", c.td3.actor_delay},
            {"exploration_noise", c.td3.exploration_noise},
            {"warmup_steps", c.td3.warmup_steps},
            {"total_steps", c.td3.total_steps},
            {"hidden", c.td3.hidden},
            {"optimizer", c.td3.optimizer == Optimizer::Kind::sgd ? "sgd" : "adam"}}},
          {"solver", {{"tol", c.solver_tol}, {"max_iter", c.solver_max_iter}}}};
}

std::string derive_run_id(const RunConfig& config) {
  RunConfig c = config;
  c.run_id.clear();
  c.jobs = 1;  // results do not depend on it
  const std::string text = to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : text) h = (h ^ ch) * 0x100000001b3ULL;
  std::ostringstream id;
  id << to_string(config.algorithm) << '-' << config.family << '-' << std::hex << std::setw(8) << std::setfill('0')
     << (h & 0xffffffffULL);
  return id.str();
}

fs::path default_output_root() {
  if (const char* env = std::getenv("EXPECTRL_OUTPUT_ROOT"); env && *env) return env;
  return "runs";
}

// ---------------------------------------------------------------------------
// Training

OmegaGrid evaluation_grid(const EnvFamily& family, int per_dim) { return OmegaGrid::regular(family.box, per_dim); }

namespace {

QLearningConfig tabular_config(const RunConfig& c, std::uint64_t seed) {
  QLearningConfig q = c.tabular;
  q.alpha = c.alpha;
  q.seed = seed;
  return q;
}

Td3LiteConfig td3_config(const RunConfig& c, std::uint64_t seed) {
  Td3LiteConfig t = c.td3;
  t.alpha = c.alpha;
  t.seed = seed;
  return t;
}

TabularAgent planned_agent(const RunConfig& c, const EnvFamily& family) {
  const auto env = family.make_tabular(family.nominal);
  const TabularMdp& mdp = env->expected_mdp();
  const OperatorKind kind =
      c.algorithm == Algorithm::vi ? OperatorKind::expectile(c.alpha, true) : OperatorKind::robust(c.alpha, true);
  const FixedPointResult r = kind.is_robust() ? robust_value_iteration(mdp, c.alpha, c.solver_tol, c.solver_max_iter)
                                              : value_iteration(mdp, kind, c.solver_tol, c.solver_max_iter);
  if (!r.converged) throw std::runtime_error("value iteration did not converge");
  TabularAgent agent;
  agent.alphas = {c.alpha};
  agent.q = {BellmanOperator(mdp, kind).q_values(r.value)};
  return agent;
}

template <typename Agent>
TrainedPolicy package(const Agent& agent, const RunConfig& config) {
  TrainedPolicy out;
  out.checkpoint = to_json(agent);
  out.checkpoint["config"] = to_json(config);
  out.log_csv = to_csv(agent.log);
  out.diverged = agent.log.diverged;
  out.message = agent.log.message;
  if constexpr (std::is_same_v<Agent, TabularAgent>)
    out.policy = tabular_policy_fn(agent.greedy());
  else
    out.policy = agent.policy();
  return out;
}

}  // namespace

TrainedPolicy train_one(const RunConfig& config, std::uint64_t seed) {
  config.validate();
  const EnvFamily& family = find_family(config.family);
  switch (config.algorithm) {
    case Algorithm::vi:
    case Algorithm::robust_vi:
      return package(planned_agent(config, family), config);
    case Algorithm::q_expectile:
      return package(q_learning_expectile(family, tabular_config(config, seed)), config);
    case Algorithm::td3lite:
      return package(td3_lite_train(family, td3_config(config, seed)), config);
    case Algorithm::dr:
      if (family.tabular()) return package(dr_train(family, tabular_config(config, seed)), config);
      return package(dr_train(family, td3_config(config, seed)), config);
    case Algorithm::auto_alpha:
      if (family.tabular()) return package(auto_train_tabular(family, tabular_config(config, seed), config.arms), config);
      return package(auto_train(family, td3_config(config, seed), config.arms), config);
  }
  throw std::logic_error("unhandled algorithm");
}

bool RunRecord::ok() const {
  for (const auto& s : seeds)
    if (s.status != "ok") return false;
  return true;
}

RunRecord run_training(const RunConfig& input, const fs::path& root) {
  RunConfig config = input;
  config.validate();
  if (config.run_id.empty()) config.run_id = derive_run_id(config);
  const auto start = std::chrono::steady_clock::now();

  RunRecord record;
  record.config = config;
  record.directory = root / config.run_id;
  fs::create_directories(record.directory);
  write_text(record.directory / "config.json", dump(to_json(config)));

  const EnvFamily& family = find_family(config.family);
  const OmegaGrid grid = evaluation_grid(family, config.grid_per_dim);
  record.seeds.resize(static_cast<std::size_t>(config.n_seeds));
  // Seeds run in parallel when there are several; otherwise evaluation does.
  const int outer = config.n_seeds > 1 ? config.jobs : 1;
  const int inner = config.n_seeds > 1 ? 1 : config.jobs;
  parallel_for(record.seeds.size(), outer, [&](std::size_t k) {
    SeedOutcome& out = record.seeds[k];
    out.index = static_cast<int>(k);
    out.seed = config.seed + k;
    const fs::path dir = record.directory / ("seed-" + std::to_string(k));
    try {
      fs::create_directories(dir);
      const TrainedPolicy trained = train_one(config, out.seed);
      write_text(dir / "log.csv", trained.log_csv);
      write_text(dir / "checkpoint.json", dump(trained.checkpoint));
      if (trained.diverged) {
        out.status = "diverged";
        out.message = trained.message;
        return;
      }
      out.eval = evaluate(trained.policy, family, grid, config.n_eval, config.eval_seed, inner);
      write_text(dir / "eval.json", dump(to_json(*out.eval)));
      write_text(dir / "eval.csv", to_csv(*out.eval));
      out.status = "ok";
    } catch (const std::exception& e) {
      out.status = "error";
      out.message = e.what();
    }
  });
  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json seeds = json::array();
  for (const auto& s : record.seeds) {
    json entry = {{"index", s.index}, {"seed", s.seed}, {"status", s.status}, {"message", s.message}};
    if (s.eval) {
      entry["worst"] = s.eval->worst;
      entry["average"] = s.eval->average;
    }
    seeds.push_back(std::move(entry));
  }
  write_text(record.directory / "run.json", dump({{"version", kConfigSchemaVersion},
                                                  {"toolkit_version", toolkit_version()},
                                                  {"run_id", config.run_id},
                                                  {"config", to_json(config)},
                                                  {"seeds", std::move(seeds)},
                                                  {"wall_seconds", record.wall_seconds}}));
  return record;
}

// ---------------------------------------------------------------------------
// Solve

SolveOutcome solve_mdp(const TabularMdp& mdp, const SolveOptions& o) {
  require_valid(mdp);
  if ((o.robust || o.check_coincidence) && !o.alpha)
    throw std::invalid_argument("robust solves and the coincidence check need an alpha");
  SolveOutcome out;
  if (o.robust) {
    out.primary = robust_value_iteration(mdp, *o.alpha, o.tol, o.max_iter);
  } else {
    const OperatorKind kind = o.alpha ? OperatorKind::expectile(*o.alpha, true) : OperatorKind::classical(true);
    out.primary = value_iteration(mdp, kind, o.tol, o.max_iter);
  }
  if (o.check_coincidence) {
    const FixedPointResult expectile =
        o.robust ? value_iteration(mdp, OperatorKind::expectile(*o.alpha, true), o.tol, o.max_iter) : out.primary;
    out.robust = o.robust ? out.primary : robust_value_iteration(mdp, *o.alpha, o.tol, o.max_iter);
    out.optimal_gap = (expectile.value - out.robust->value).cwiseAbs().maxCoeff();
    const Policy& pi = *expectile.policy;
    const FixedPointResult e_pi = value_iteration(mdp, OperatorKind::expectile(*o.alpha, false), o.tol, o.max_iter, &pi);
    const FixedPointResult r_pi = robust_value_iteration(mdp, *o.alpha, o.tol, o.max_iter, &pi);
    out.evaluation_gap = (e_pi.value - r_pi.value).cwiseAbs().maxCoeff();
    if (!expectile.converged || !out.robust->converged || !e_pi.converged || !r_pi.converged)
      out.primary.converged = false;
  }
  return out;
}

json to_json(const SolveOutcome& o) {
  json doc = {{"version", 1}, {"solution", to_json(o.primary)}};
  if (o.robust) {
    doc["robust_solution"] = to_json(*o.robust);
    doc["optimal_gap"] = o.optimal_gap;
    doc["evaluation_gap"] = o.evaluation_gap;
  }
  return doc;
}

// ---------------------------------------------------------------------------
// Report

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary m;
  m.n = static_cast<int>(values.size());
  if (m.n == 0) return m;
  for (double v : values) m.mean += v;
  m.mean /= m.n;
  if (m.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.stderr_ = std::sqrt(ss / (m.n - 1)) / std::sqrt(static_cast<double>(m.n));
  }
  return m;
}

namespace {

std::string run_label(const RunConfig& c) {
  std::ostringstream out;
  out << to_string(c.algorithm);
  if (c.algorithm == Algorithm::auto_alpha) {
    out << '(';
    for (std::size_t i = 0; i < c.arms.arms.size(); ++i) out << (i ? "/" : "") << c.arms.arms[i];
    out << ')';
  } else {
    out << "(alpha=" << c.alpha << ')';
  }
  return out.str();
}

std::vector<std::vector<double>> read_bandit_columns(const fs::path& csv) {
  std::istringstream in(read_text(csv));
  std::string line;
  std::getline(in, line);
  std::vector<std::size_t> cols;
  {
    std::istringstream header(line);
    std::string name;
    for (std::size_t i = 0; std::getline(header, name, ','); ++i)
      if (name.rfind("bandit_prob_", 0) == 0) cols.push_back(i);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string cell;
    std::vector<double> probs;
    for (std::size_t i = 0, c = 0; std::getline(row, cell, ','); ++i)
      if (c < cols.size() && cols[c] == i) {
        probs.push_back(std::stod(cell));
        ++c;
      }
    rows.push_back(std::move(probs));
  }
  return rows;
}

}  // namespace

std::vector<RunSummary> load_runs(const std::vector<fs::path>& run_dirs) {
  std::vector<RunSummary> runs;
  std::map<std::string, std::pair<std::string, std::vector<Eigen::VectorXd>>> grids;  // family -> (run, omegas)
  for (const auto& dir : run_dirs) {
    const RunConfig c = run_config_from_json(json::parse(read_text(dir / "config.json")));
    RunSummary s;
    s.run_id = c.run_id;
    s.family = c.family;
    s.algorithm = to_string(c.algorithm);
    s.label = run_label(c);
    std::vector<double> worst, average;
    std::vector<std::vector<double>> per_point;
    std::vector<std::vector<std::vector<double>>> bandit;
    for (int k = 0; k < c.n_seeds; ++k) {
      const fs::path seed_dir = dir / ("seed-" + std::to_string(k));
      if (!fs::exists(seed_dir / "eval.json"))
        throw std::runtime_error("run " + c.run_id + " has no evaluation for seed " + std::to_string(k));
      const EvalReport r = eval_report_from_json(json::parse(read_text(seed_dir / "eval.json")));
      if (k == 0) s.omegas = r.omegas;
      worst.push_back(r.worst);
      average.push_back(r.average);
      per_point.push_back(r.per_point_return);
      if (c.algorithm == Algorithm::auto_alpha) bandit.push_back(read_bandit_columns(seed_dir / "log.csv"));
    }
    s.worst = summarize(worst);
    s.average = summarize(average);
    for (std::size_t p = 0; p < s.omegas.size(); ++p) {
      std::vector<double> column;
      for (const auto& seed : per_point) column.push_back(seed[p]);
      s.per_point.push_back(summarize(column));
    }
    if (!bandit.empty()) {
      std::size_t episodes = bandit.front().size();
      for (const auto& b : bandit) episodes = std::min(episodes, b.size());
      for (std::size_t e = 0; e < episodes; ++e) {
        std::vector<double> mean(bandit.front()[e].size(), 0.0);
        for (const auto& b : bandit)
          for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += b[e][d] / static_cast<double>(bandit.size());
        s.bandit_probs.push_back(std::move(mean));
      }
    }
    auto [it, inserted] = grids.try_emplace(s.family, s.run_id, s.omegas);
    if (!inserted) {
      const auto& other = it->second.second;
      bool same = other.size() == s.omegas.size();
      for (std::size_t p = 0; same && p < other.size(); ++p)
        same = other[p].size() == s.omegas[p].size() && (other[p] - s.omegas[p]).cwiseAbs().maxCoeff() <= 1e-12;
      if (!same)
        throw std::invalid_argument("runs " + it->second.first + " and " + s.run_id + " evaluate " + s.family +
                                    " on different grids");
    }
    runs.push_back(std::move(s));
  }
  return runs;
}

void write_report(const std::vector<RunSummary>& runs, const fs::path& out) {
  fs::create_directories(out);
  std::ostringstream summary, points;
  summary.precision(17);
  points.precision(17);
  summary << "run_id,family,algorithm,label,n_seeds,worst_mean,worst_stderr,average_mean,average_stderr\n";
  points << "run_id,family,label,k,omega,mean,stderr\n";
  std::vector<std::string> labels;
  std::vector<double> worst, worst_err, average, average_err;
  std::vector<svg::Series> curves;
  for (const auto& r : runs) {
    summary << r.run_id << ',' << r.family << ',' << r.algorithm << ',' << r.label << ',' << r.worst.n << ','
            << r.worst.mean << ',' << r.worst.stderr_ << ',' << r.average.mean << ',' << r.average.stderr_ << '\n';
    svg::Series curve{r.family + " " + r.label, {}, {}};
    for (std::size_t k = 0; k < r.per_point.size(); ++k) {
      points << r.run_id << ',' << r.family << ',' << r.label << ',' << k << ',';
      for (Eigen::Index d = 0; d < r.omegas[k].size(); ++d) points << (d ? ";" : "") << r.omegas[k][d];
      points << ',' << r.per_point[k].mean << ',' << r.per_point[k].stderr_ << '\n';
      curve.x.push_back(static_cast<double>(k));
      curve.y.push_back(r.per_point[k].mean);
    }
    curves.push_back(std::move(curve));
    labels.push_back(r.family + " " + r.label);
    worst.push_back(r.worst.mean);
    worst_err.push_back(r.worst.stderr_);
    average.push_back(r.average.mean);
    average_err.push_back(r.average.stderr_);

    if (!r.bandit_probs.empty()) {
      std::ostringstream csv;
      csv.precision(17);
      csv << "episode";
      const std::size_t arms = r.bandit_probs.front().size();
      for (std::size_t d = 0; d < arms; ++d) csv << ",bandit_prob_" << d;
      csv << '\n';
      std::vector<svg::Series> arm_curves(arms);
      for (std::size_t d = 0; d < arms; ++d) arm_curves[d].name = "arm " + std::to_string(d);
      for (std::size_t e = 0; e < r.bandit_probs.size(); ++e) {
        csv << e;
        for (std::size_t d = 0; d < arms; ++d) {
          csv << ',' << r.bandit_probs[e][d];
          arm_curves[d].x.push_back(static_cast<double>(e));
          arm_curves[d].y.push_back(r.bandit_probs[e][d]);
        }
        csv << '\n';
      }
      write_text(out / ("bandit_" + r.run_id + ".csv"), csv.str());
      write_text(out / ("bandit_" + r.run_id + ".svg"),
                 svg::line_chart("Bandit arm probabilities: " + r.run_id, "episode", "mean probability", arm_curves));
    }
  }
  write_text(out / "summary.csv", summary.str());
  write_text(out / "per_point.csv", points.str());
  write_text(out / "worst.svg", svg::bar_chart("R_worst (mean +- stderr)", "return", labels, worst, worst_err));
  write_text(out / "average.svg", svg::bar_chart("R_average (mean +- stderr)", "return", labels, average, average_err));
  write_text(out / "per_point.svg", svg::line_chart("Return per grid point", "grid index k", "R_k", curves));
}

// ---------------------------------------------------------------------------
// Oracle suites

OracleCheckResult run_oracle_check(int expectile_cases, int garnets, std::uint64_t seed, double expectile_tol,
                                   double coincidence_tol) {
  OracleCheckResult r;
  Rng rng(derive_seed(seed, {1}));
  for (int i = 0; i < expectile_cases; ++i) {
    const int n = 1 + static_cast<int>(rng.uniform_index(10));
    Eigen::VectorXd values(n), probs(n);
    for (int j = 0; j < n; ++j) {
      values[j] = rng.uniform(-5.0, 5.0);
      probs[j] = rng.gamma(1.0) + 1e-9;
    }
    probs /= probs.sum();
    const DiscreteDistribution<double> dist(values, probs);
    for (double alpha : {0.1, 0.2, 0.3, 0.4, 0.5}) {
      const double primal = expectile_discrete(dist, alpha);
      const double dual = expectile_variational(dist, ExpectileSpec<double>(alpha));
      r.max_expectile_gap = std::max(r.max_expectile_gap, std::abs(primal - dual));
      ++r.expectile_cases;
    }
  }
  Rng g(derive_seed(seed, {2}));
  for (int i = 0; i < garnets; ++i) {
    const int states = 2 + static_cast<int>(g.uniform_index(9));
    const int actions = 1 + static_cast<int>(g.uniform_index(4));
    const int branching = 1 + static_cast<int>(g.uniform_index(static_cast<std::size_t>(states)));
    const TabularMdp mdp = garnet(states, actions, branching, 0.3, g.next_u64(), 0.9);
    for (double alpha : {0.2, 0.3, 0.4}) {
      const SolveOutcome o = solve_mdp(mdp, {alpha, false, true, 1e-9, 100000});
      r.max_coincidence_gap = std::max({r.max_coincidence_gap, o.optimal_gap, o.evaluation_gap});
      ++r.coincidence_instances;
    }
  }
  r.passed = r.max_expectile_gap < expectile_tol && r.max_coincidence_gap < coincidence_tol;
  return r;
}

}  // namespace expectrl
