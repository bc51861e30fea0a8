// expectrl: solve, train, evaluate and report on expectile RL experiments.

#include "expectrl/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace expectrl;

namespace {

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void save(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Deterministic pseudo-random policy: the action is a hash of (seed, observation).
PolicyFn random_policy(const ActionSpace& space, std::uint64_t seed) {
  return [space, seed](const Eigen::VectorXd& obs) -> Eigen::VectorXd {
    std::uint64_t h = splitmix64(seed);
    for (Eigen::Index i = 0; i < obs.size(); ++i) {
      std::uint64_t bits;
      const double x = obs[i];
      std::memcpy(&bits, &x, sizeof bits);
      h = splitmix64(h ^ bits);
    }
    if (space.is_discrete()) return Eigen::VectorXd::Constant(1, static_cast<double>(h % space.n_discrete));
    Eigen::VectorXd a(space.low.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      h = splitmix64(h + static_cast<std::uint64_t>(i));
      a[i] = space.low[i] + (space.high[i] - space.low[i]) * static_cast<double>(h >> 11) * 0x1.0p-53;
    }
    return a;
  };
}

void print_eval(const EvalReport& r) {
  std::printf("family %s, %zu grid points, %d episodes each\n", r.family.c_str(), r.omegas.size(), r.n_eval);
  std::printf("R_worst   = %.6f\nR_average = %.6f\n", r.worst, r.average);
}

// ---------------------------------------------------------------------------

struct SolveArgs {
  std::string family, mdp_file, out;
  std::vector<double> omega;
  std::uint64_t garnet_seed = 0;
  int states = 10, actions = 4, branching = 3;
  double sparsity = 0.0, gamma = 0.9;
  double alpha = 0.5;
  bool robust = false, coincidence = false;
  double tol = 1e-10;
  int max_iter = 100000;
};

int cmd_solve(const SolveArgs& a, CLI::App& app) {
  TabularMdp mdp;
  if (!a.mdp_file.empty()) {
    mdp = mdp_from_json(load_json(a.mdp_file));
  } else if (!a.family.empty()) {
    const EnvFamily& f = find_family(a.family);
    if (!f.tabular()) throw std::invalid_argument(a.family + " is not tabular");
    mdp = f.make_tabular(a.omega.empty() ? f.nominal : to_vector(a.omega))->expected_mdp();
  } else if (app.count("--garnet-seed")) {
    mdp = garnet(a.states, a.actions, a.branching, a.sparsity, a.garnet_seed, a.gamma);
  } else {
    throw std::invalid_argument("solve needs --family, --mdp or --garnet-seed");
  }
  SolveOptions o;
  if (app.count("--alpha")) o.alpha = a.alpha;
  o.robust = a.robust;
  o.check_coincidence = a.coincidence;
  o.tol = a.tol;
  o.max_iter = a.max_iter;
  const SolveOutcome r = solve_mdp(mdp, o);

  const std::string op = o.robust ? "robust" : o.alpha ? "expectile" : "classical";
  std::printf("operator %s", op.c_str());
  if (o.alpha) std::printf(" (alpha = %g)", *o.alpha);
  std::printf(", %d states, %d actions, gamma %g\n", mdp.n_states, mdp.n_actions, mdp.gamma);
  std::printf("converged %s after %d iterations, residual %.3g\n", r.primary.converged ? "yes" : "no",
              r.primary.iterations, r.primary.final_residual);
  std::printf("v* =");
  for (Eigen::Index s = 0; s < r.primary.value.size() && s < 16; ++s) std::printf(" %.6f", r.primary.value[s]);
  std::printf(r.primary.value.size() > 16 ? " ...\n" : "\n");
  if (r.robust) {
    std::printf("expectile vs robust fixed point: optimal gap %.3e, policy-evaluation gap %.3e\n", r.optimal_gap,
                r.evaluation_gap);
  }
  if (!a.out.empty()) save(a.out, to_json(r).dump(2) + "\n");
  if (!r.primary.converged) {
    std::fprintf(stderr, "error: value iteration did not converge\n");
    return 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config_file, family, algorithm, out, run_id;
  double alpha = 0.5;
  std::vector<double> arms;
  int seeds = 1, n_eval = 30, per_dim = 10, episodes = 0, jobs = 1;
  long total_steps = 0;
  std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a, CLI::App& app) {
  json doc = a.config_file.empty() ? json::object() : load_json(a.config_file);
  if (app.count("--family")) doc["family"] = a.family;
  if (app.count("--algorithm")) doc["algorithm"] = a.algorithm;
  if (app.count("--alpha")) doc["alpha"] = a.alpha;
  if (app.count("--arms")) doc["arms"] = a.arms;
  if (app.count("--seeds")) doc["n_seeds"] = a.seeds;
  if (app.count("--seed")) doc["seed"] = a.seed;
  if (app.count("--n-eval")) doc["n_eval"] = a.n_eval;
  if (app.count("--per-dim")) doc["grid_per_dim"] = a.per_dim;
  if (app.count("--jobs")) doc["jobs"] = a.jobs;
  if (app.count("--run-id")) doc["run_id"] = a.run_id;
  if (app.count("--episodes")) doc["tabular"]["episodes"] = a.episodes;
  if (app.count("--total-steps")) doc["td3"]["total_steps"] = a.total_steps;
  const RunConfig config = run_config_from_json(doc);

  const fs::path root = a.out.empty() ? default_output_root() : fs::path(a.out);
  const RunRecord record = run_training(config, root);
  std::printf("run %s -> %s (%.1f s)\n", record.config.run_id.c_str(), record.directory.string().c_str(),
              record.wall_seconds);
  for (const auto& s : record.seeds) {
    if (s.eval)
      std::printf("  seed %d (%llu): %s  R_worst %.4f  R_average %.4f\n", s.index,
                  static_cast<unsigned long long>(s.seed), s.status.c_str(), s.eval->worst, s.eval->average);
    else
      std::printf("  seed %d (%llu): %s  %s\n", s.index, static_cast<unsigned long long>(s.seed), s.status.c_str(),
                  s.message.c_str());
  }
  return record.ok() ? 0 : 1;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, family, out;
  std::uint64_t random_seed = 0;
  std::vector<double> omega;
  int per_dim = 10, n_eval = 30, jobs = 1;
  std::uint64_t seed = 20240101;
};

int cmd_eval(const EvalArgs& a, CLI::App& app) {
  std::string family_id = a.family;
  PolicyFn policy;
  if (!a.checkpoint.empty()) {
    const json doc = load_json(a.checkpoint);
    if (family_id.empty() && doc.contains("config")) family_id = doc.at("config").at("family").get<std::string>();
    if (family_id.empty()) throw std::invalid_argument("--family is required for this checkpoint");
    policy = policy_from_checkpoint(doc);
  } else if (app.count("--random-policy")) {
    if (family_id.empty()) throw std::invalid_argument("--family is required with --random-policy");
    const EnvFamily& f = find_family(family_id);
    policy = random_policy(f.make(f.nominal)->action_space(), a.random_seed);
  } else {
    throw std::invalid_argument("eval needs --checkpoint or --random-policy");
  }
  const EnvFamily& family = find_family(family_id);
  const OmegaGrid grid =
      a.omega.empty() ? evaluation_grid(family, a.per_dim) : OmegaGrid::single(to_vector(a.omega));
  const EvalReport report = evaluate(policy, family, grid, a.n_eval, a.seed, a.jobs);
  print_eval(report);
  const fs::path out = a.out.empty() ? default_output_root() / "eval" : fs::path(a.out);
  save(out / "eval.json", to_json(report).dump(2) + "\n");
  save(out / "eval.csv", to_csv(report));
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_report(const std::vector<std::string>& dirs, const std::string& out_arg) {
  std::vector<fs::path> paths(dirs.begin(), dirs.end());
  const std::vector<RunSummary> runs = load_runs(paths);
  const fs::path out =
      out_arg.empty() ? fs::absolute(paths.front()).lexically_normal().parent_path() / "report" : fs::path(out_arg);
  write_report(runs, out);
  std::printf("%-28s %-12s %-28s %22s %22s\n", "run", "family", "label", "R_worst", "R_average");
  for (const auto& r : runs)
    std::printf("%-28s %-12s %-28s %12.4f +- %-7.4f %12.4f +- %-7.4f\n", r.run_id.c_str(), r.family.c_str(),
                r.label.c_str(), r.worst.mean, r.worst.stderr_, r.average.mean, r.average.stderr_);
  std::printf("report written to %s\n", out.string().c_str());
  return 0;
}

int cmd_oracle(int cases, int garnets, std::uint64_t seed, double tol) {
  const OracleCheckResult r = run_oracle_check(cases, garnets, seed, tol, tol);
  std::printf("expectile primal vs dual: %d cases, max gap %.3e\n", r.expectile_cases, r.max_expectile_gap);
  std::printf("expectile vs robust fixed points: %d instances, max gap %.3e\n", r.coincidence_instances,
              r.max_coincidence_gap);
  std::printf("%s (tolerance %g)\n", r.passed ? "PASS" : "FAIL", tol);
  return r.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Expectile reinforcement learning toolkit"};
  app.set_version_flag("--version", toolkit_version());
  app.require_subcommand(1);

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "Value iteration on a tabular MDP");
  solve->add_option("--family", sa.family, "Tabular family id");
  solve->add_option("--omega", sa.omega, "Family parameter (default: nominal)");
  solve->add_option("--mdp", sa.mdp_file, "MDP JSON file");
  solve->add_option("--garnet-seed", sa.garnet_seed, "Generate a Garnet MDP with this seed");
  solve->add_option("--states", sa.states, "Garnet states")->capture_default_str();
  solve->add_option("--actions", sa.actions, "Garnet actions")->capture_default_str();
  solve->add_option("--branching", sa.branching, "Garnet successors per row")->capture_default_str();
  solve->add_option("--sparsity", sa.sparsity, "Garnet reward sparsity")->capture_default_str();
  solve->add_option("--gamma", sa.gamma, "Garnet discount")->capture_default_str();
  solve->add_option("--alpha", sa.alpha, "Expectile level in (0, 0.5]; omit for the classical operator");
  solve->add_flag("--robust", sa.robust, "Solve the robust operator");
  solve->add_flag("--check-coincidence,--check-theorem2", sa.coincidence,
                  "Solve both expectile and robust problems and report their gap");
  solve->add_option("--tol", sa.tol, "Distance-to-fixed-point tolerance")->capture_default_str();
  solve->add_option("--max-iter", sa.max_iter)->capture_default_str();
  solve->add_option("--out", sa.out, "Write the result JSON here");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train and evaluate one or more seeds");
  train->add_option("--config", ta.config_file, "Run config JSON");
  train->add_option("--family", ta.family);
  train->add_option("--algorithm", ta.algorithm, "vi, robust_vi, q_expectile, td3lite, dr or auto");
  train->add_option("--alpha", ta.alpha);
  train->add_option("--arms", ta.arms, "Bandit arms for auto");
  train->add_option("--seeds", ta.seeds, "Number of seeds");
  train->add_option("--seed", ta.seed, "First seed");
  train->add_option("--n-eval", ta.n_eval, "Evaluation episodes per grid point");
  train->add_option("--per-dim", ta.per_dim, "Evaluation grid points per dimension");
  train->add_option("--episodes", ta.episodes, "Tabular training episodes");
  train->add_option("--total-steps", ta.total_steps, "Neural training steps");
  train->add_option("--jobs", ta.jobs, "Worker threads");
  train->add_option("--out", ta.out, "Output root (default: $EXPECTRL_OUTPUT_ROOT or ./runs)");
  train->add_option("--run-id", ta.run_id);

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate a policy over an omega grid");
  auto* ckpt = eval->add_option("--checkpoint", ea.checkpoint, "Checkpoint JSON");
  eval->add_option("--random-policy", ea.random_seed, "Use a deterministic random policy with this seed")
      ->excludes(ckpt);
  eval->add_option("--family", ea.family, "Family id (default: from the checkpoint)");
  eval->add_option("--per-dim", ea.per_dim)->capture_default_str();
  eval->add_option("--omega", ea.omega, "Evaluate at a single omega instead of the grid");
  eval->add_option("--n-eval", ea.n_eval)->capture_default_str();
  eval->add_option("--seed", ea.seed)->capture_default_str();
  eval->add_option("--jobs", ea.jobs)->capture_default_str();
  eval->add_option("--out", ea.out, "Output directory");

  std::vector<std::string> report_dirs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Aggregate runs into tables and plots");
  report->add_option("runs", report_dirs, "Run directories")->required();
  report->add_option("--out", report_out, "Output directory (default: <parent>/report)");

  int cases = 1000, garnets = 50;
  std::uint64_t oracle_seed = 0;
  double oracle_tol = 1e-5;
  auto* oracle = app.add_subcommand("oracle-check", "Run the expectile and fixed-point oracle suites");
  oracle->add_option("--cases", cases)->capture_default_str();
  oracle->add_option("--garnets", garnets)->capture_default_str();
  oracle->add_option("--seed", oracle_seed)->capture_default_str();
  oracle->add_option("--tol", oracle_tol)->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*solve) return cmd_solve(sa, *solve);
    if (*train) return cmd_train(ta, *train);
    if (*eval) return cmd_eval(ea, *eval);
    if (*report) return cmd_report(report_dirs, report_out);
    if (*oracle) return cmd_oracle(cases, garnets, oracle_seed, oracle_tol);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
