#include "expectrl/bellman.hpp"

#include "expectrl/rng.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace expectrl {

namespace {
constexpr double kExpectileTol = 1e-12;
}

OperatorKind OperatorKind::classical(bool optimal) {
  return {optimal ? OperatorType::classical_optimal : OperatorType::classical_policy, 0.5};
}

OperatorKind OperatorKind::expectile(double alpha, bool optimal) {
  ExpectileSpec<double> check(alpha);
  return {optimal ? OperatorType::expectile_optimal : OperatorType::expectile_policy, alpha};
}

OperatorKind OperatorKind::robust(double alpha, bool optimal) {
  ExpectileSpec<double> check(alpha);
  return {optimal ? OperatorType::robust_optimal : OperatorType::robust_policy, alpha};
}

bool OperatorKind::optimal() const {
  return type == OperatorType::classical_optimal || type == OperatorType::expectile_optimal ||
         type == OperatorType::robust_optimal;
}

bool OperatorKind::is_expectile() const {
  return type == OperatorType::expectile_policy || type == OperatorType::expectile_optimal;
}

bool OperatorKind::is_robust() const {
  return type == OperatorType::robust_policy || type == OperatorType::robust_optimal;
}

std::string OperatorKind::name() const {
  switch (type) {
    case OperatorType::classical_policy: return "classical_policy";
    case OperatorType::classical_optimal: return "classical_optimal";
    case OperatorType::expectile_policy: return "expectile_policy";
    case OperatorType::expectile_optimal: return "expectile_optimal";
    case OperatorType::robust_policy: return "robust_policy";
    case OperatorType::robust_optimal: return "robust_optimal";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------

BellmanOperator::BellmanOperator(const TabularMdp& mdp, OperatorKind kind) : mdp_(&mdp), kind_(kind) {
  require_valid(mdp);
  if (kind.is_expectile() || kind.is_robust()) spec_.emplace(kind.alpha);
  const auto rows = mdp.transitions.rows();
  support_.resize(static_cast<std::size_t>(rows));
  support_probs_.resize(static_cast<std::size_t>(rows));
  for (Eigen::Index r = 0; r < rows; ++r) {
    auto& idx = support_[static_cast<std::size_t>(r)];
    for (Eigen::Index t = 0; t < mdp.transitions.cols(); ++t)
      if (mdp.transitions(r, t) > 0.0) idx.push_back(t);
    Eigen::VectorXd p(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) p[static_cast<Eigen::Index>(k)] = mdp.transitions(r, idx[k]);
    // Renormalize the support so rows that sum to 1 within the validation
    // tolerance still pass the stricter distribution check.
    p /= p.sum();
    support_probs_[static_cast<std::size_t>(r)] = std::move(p);
  }
}

double BellmanOperator::row_statistic(Eigen::Index row, const ValueFunction& v) const {
  if (!spec_) return mdp_->transitions.row(row).dot(v.transpose());
  const auto& idx = support_[static_cast<std::size_t>(row)];
  DiscreteDistribution<double> dist;
  dist.probs = support_probs_[static_cast<std::size_t>(row)];
  dist.values.resize(dist.probs.size());
  for (std::size_t k = 0; k < idx.size(); ++k) dist.values[static_cast<Eigen::Index>(k)] = v[idx[k]];
  if (kind_.is_expectile()) return expectile_discrete(dist, spec_->alpha(), kExpectileTol);
  return expectile_variational(dist, *spec_);
}

QFunction BellmanOperator::q_values(const ValueFunction& v) const {
  if (v.size() != mdp_->n_states) throw std::invalid_argument("value function has the wrong length");
  QFunction q(mdp_->n_states, mdp_->n_actions);
  for (int s = 0; s < mdp_->n_states; ++s)
    for (int a = 0; a < mdp_->n_actions; ++a)
      q(s, a) = mdp_->rewards(s, a) + mdp_->gamma * row_statistic(mdp_->row(s, a), v);
  return q;
}

ValueFunction BellmanOperator::apply(const ValueFunction& v, const Policy* policy) const {
  const QFunction q = q_values(v);
  if (kind_.optimal()) return q.rowwise().maxCoeff();
  if (policy == nullptr) throw std::invalid_argument(kind_.name() + " operator needs a policy");
  if (policy->n_states() != mdp_->n_states || policy->n_actions() != mdp_->n_actions)
    throw std::invalid_argument("policy shape does not match the MDP");
  ValueFunction out(mdp_->n_states);
  for (int s = 0; s < mdp_->n_states; ++s) {
    double acc = 0.0;
    for (int a = 0; a < mdp_->n_actions; ++a) {
      const double p = policy->prob(s, a);
      if (p > 0.0) acc += p * q(s, a);
    }
    out[s] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------

ValueFunction apply_policy_operator(const ValueFunction& v, const TabularMdp& mdp, const Policy& policy,
                                    double alpha) {
  return BellmanOperator(mdp, OperatorKind::expectile(alpha, false)).apply(v, &policy);
}

ValueFunction apply_optimal_operator(const ValueFunction& v, const TabularMdp& mdp, double alpha) {
  return BellmanOperator(mdp, OperatorKind::expectile(alpha, true)).apply(v);
}

double robust_inner_min(const ValueFunction& v, const Eigen::Ref<const Eigen::RowVectorXd>& row,
                        const ExpectileSpec<double>& spec) {
  if (row.size() != v.size()) throw std::invalid_argument("kernel row and value function lengths differ");
  DiscreteDistribution<double> full;
  full.values = v;
  full.probs = row.transpose();
  full.validate();
  return expectile_variational(drop_zero_mass(full), spec);
}

Policy greedy_policy(const QFunction& q) {
  std::vector<int> acts(static_cast<std::size_t>(q.rows()));
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    int best = 0;
    for (Eigen::Index a = 1; a < q.cols(); ++a)
      if (q(s, a) > q(s, best)) best = static_cast<int>(a);
    acts[static_cast<std::size_t>(s)] = best;
  }
  return Policy::deterministic(std::move(acts), static_cast<int>(q.cols()));
}

FixedPointResult value_iteration(const TabularMdp& mdp, const OperatorKind& kind, double tol, int max_iter,
                                 const Policy* policy) {
  if (!(tol > 0.0)) throw std::invalid_argument("value iteration tolerance must be positive");
  if (!kind.optimal() && policy == nullptr) throw std::invalid_argument("policy evaluation needs a policy");
  const BellmanOperator op(mdp, kind);
  const double threshold = tol * (1.0 - mdp.gamma) / mdp.gamma;

  FixedPointResult result;
  ValueFunction v = ValueFunction::Zero(mdp.n_states);
  result.final_residual = std::numeric_limits<double>::infinity();
  while (result.iterations < max_iter) {
    ValueFunction next = op.apply(v, policy);
    result.final_residual = (next - v).cwiseAbs().maxCoeff();
    v = std::move(next);
    ++result.iterations;
    if (result.final_residual < threshold) {
      result.converged = true;
      break;
    }
  }
  result.value = v;
  if (kind.optimal())
    result.policy = greedy_policy(op.q_values(v));
  else
    result.policy = *policy;
  return result;
}

FixedPointResult robust_value_iteration(const TabularMdp& mdp, double alpha, double tol, int max_iter,
                                        const Policy* policy) {
  return value_iteration(mdp, OperatorKind::robust(alpha, policy == nullptr), tol, max_iter, policy);
}

double contraction_probe(const TabularMdp& mdp, const OperatorKind& kind, int n_trials, std::uint64_t seed,
                         const Policy* policy) {
  if (n_trials < 1) throw std::invalid_argument("contraction probe needs at least one trial");
  const BellmanOperator op(mdp, kind);
  Rng rng(seed);
  double worst = 0.0;
  ValueFunction v1(mdp.n_states), v2(mdp.n_states);
  for (int t = 0; t < n_trials; ++t) {
    for (int s = 0; s < mdp.n_states; ++s) {
      v1[s] = rng.uniform(-10.0, 10.0);
      v2[s] = rng.uniform(-10.0, 10.0);
    }
    const double gap = (v1 - v2).cwiseAbs().maxCoeff();
    if (gap == 0.0) continue;
    const double out = (op.apply(v1, policy) - op.apply(v2, policy)).cwiseAbs().maxCoeff();
    worst = std::max(worst, out / gap);
  }
  return worst;
}

ValueFunction evaluate_policy_exact(const TabularMdp& mdp, const Policy& policy) {
  Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_states);
  Eigen::VectorXd r_pi = Eigen::VectorXd::Zero(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double p = policy.prob(s, a);
      if (p == 0.0) continue;
      p_pi.row(s) += p * mdp.kernel_row(s, a);
      r_pi[s] += p * mdp.rewards(s, a);
    }
  }
  const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * p_pi;
  return system.partialPivLu().solve(r_pi);
}

nlohmann::json to_json(const FixedPointResult& result) {
  nlohmann::json doc{{"value", std::vector<double>(result.value.data(), result.value.data() + result.value.size())},
                     {"iterations", result.iterations},
                     {"final_residual", result.final_residual},
                     {"converged", result.converged}};
  doc["policy"] = result.policy ? to_json(*result.policy) : nlohmann::json(nullptr);
  return doc;
}

}  // namespace expectrl
