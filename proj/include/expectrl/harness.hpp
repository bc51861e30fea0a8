#pragma once

// Run configuration, multi-seed orchestration, reporting and the oracle
// suites behind the command-line tool.

#include "expectrl/agents.hpp"
#include "expectrl/bellman.hpp"
#include "expectrl/envs.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace expectrl {

std::string toolkit_version();

enum class Algorithm { vi, robust_vi, q_expectile, td3lite, dr, auto_alpha };
std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);

struct RunConfig {
  std::string family = "SlipGrid";
  Algorithm algorithm = Algorithm::q_expectile;
  double alpha = 0.5;
  AutoConfig arms;
  int n_seeds = 1;
  std::uint64_t seed = 0;  // seed k trains with seed + k
  int n_eval = 30;
  std::uint64_t eval_seed = 20240101;
  int grid_per_dim = 10;
  int jobs = 1;
  std::string run_id;  // empty: derived from the config
  QLearningConfig tabular;
  Td3LiteConfig td3;
  double solver_tol = 1e-8;
  int solver_max_iter = 100000;

  /// Rejects combinations no trainer supports.
  void validate() const;
};

inline constexpr int kConfigSchemaVersion = 1;
/// Missing keys take defaults; unknown keys are an error.
RunConfig run_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const RunConfig& config);
/// Stable id: <algorithm>-<family>-<8 hex digits of a config hash>.
std::string derive_run_id(const RunConfig& config);

/// Output root: $EXPECTRL_OUTPUT_ROOT, else "runs".
std::filesystem::path default_output_root();

struct SeedOutcome {
  int index = 0;
  std::uint64_t seed = 0;
  std::string status;  // "ok", "diverged" or "error"
  std::string message;
  std::optional<EvalReport> eval;
};

struct RunRecord {
  RunConfig config;
  std::filesystem::path directory;
  std::vector<SeedOutcome> seeds;
  double wall_seconds = 0.0;

  bool ok() const;
};

/// Trains every seed and evaluates it on the family's grid, writing
///   <root>/<run-id>/config.json, run.json
///   <root>/<run-id>/seed-<k>/{log.csv, checkpoint.json, eval.json, eval.csv}
RunRecord run_training(const RunConfig& config, const std::filesystem::path& root);

/// Trains one seed in memory; returns the checkpoint, log CSV and policy.
struct TrainedPolicy {
  nlohmann::json checkpoint;
  std::string log_csv;
  PolicyFn policy;
  bool diverged = false;
  std::string message;
};
TrainedPolicy train_one(const RunConfig& config, std::uint64_t seed);

/// Grid used for evaluation: regular with per_dim points per dimension.
OmegaGrid evaluation_grid(const EnvFamily& family, int per_dim);

// ---------------------------------------------------------------------------
// Solve

struct SolveOptions {
  std::optional<double> alpha;  // unset: classical operator
  bool robust = false;          // solve the robust operator instead
  bool check_coincidence = false;  // solve both and report the gap
  double tol = 1e-10;
  int max_iter = 100000;
};

struct SolveOutcome {
  FixedPointResult primary;
  std::optional<FixedPointResult> robust;  // filled by the coincidence check
  double optimal_gap = 0.0;                // sup-norm gap of optimal fixed points
  double evaluation_gap = 0.0;             // gap of policy-evaluation fixed points
};

SolveOutcome solve_mdp(const TabularMdp& mdp, const SolveOptions& options);
nlohmann::json to_json(const SolveOutcome& outcome);

// ---------------------------------------------------------------------------
// Report

struct MetricSummary {
  double mean = 0.0;
  double stderr_ = 0.0;  // sample std / sqrt(n); 0 for n = 1
  int n = 0;
};
MetricSummary summarize(const std::vector<double>& values);

struct RunSummary {
  std::string run_id;
  std::string family;
  std::string algorithm;
  std::string label;  // algorithm plus alpha or arms
  MetricSummary worst, average;
  std::vector<MetricSummary> per_point;
  std::vector<Eigen::VectorXd> omegas;
  /// Mean bandit probabilities per episode across seeds (auto runs only).
  std::vector<std::vector<double>> bandit_probs;
};

/// Loads completed run directories; runs on the same family must share the
/// evaluation grid.
std::vector<RunSummary> load_runs(const std::vector<std::filesystem::path>& run_dirs);
/// Writes summary.csv, per_point.csv, worst.svg, average.svg, per_point.svg
/// and, for auto runs, bandit_<run-id>.csv/.svg into `out`.
void write_report(const std::vector<RunSummary>& runs, const std::filesystem::path& out);

// ---------------------------------------------------------------------------
// Oracle suites

struct OracleCheckResult {
  int expectile_cases = 0;
  double max_expectile_gap = 0.0;  // primal vs. dual
  int coincidence_instances = 0;
  double max_coincidence_gap = 0.0;   // expectile vs. robust fixed points
  bool passed = false;
};

OracleCheckResult run_oracle_check(int expectile_cases, int garnets, std::uint64_t seed, double expectile_tol = 1e-5,
                                   double coincidence_tol = 1e-5);

}  // namespace expectrl
