#include "expectrl/bellman.hpp"
#include "expectrl/envs.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace expectrl;

namespace {

Eigen::VectorXd one(double x) { return Eigen::VectorXd::Constant(1, x); }

PolicyFn constant_action(double a) {
  return [a](const Eigen::VectorXd&) { return one(a); };
}

}  // namespace

TEST_CASE("builtin families") {
  for (const char* id : {"SlipGrid", "WindyChain", "PendulumLite", "CliffGrid"}) {
    const EnvFamily& f = find_family(id);
    CHECK(f.box.contains(f.nominal));
  }
  CHECK(find_family("SlipGrid").omega_dim() == 1);
  CHECK(find_family("WindyChain").omega_dim() == 2);
  CHECK(find_family("PendulumLite").omega_dim() == 2);
  CHECK_FALSE(find_family("PendulumLite").tabular());
  CHECK_THROWS_AS(find_family("Nope"), std::invalid_argument);
  CHECK_THROWS_AS(find_family("SlipGrid").make(one(0.7)), std::invalid_argument);

  const EnvFamily& slip = find_family("SlipGrid");
  const auto a = slip.make_tabular(slip.nominal);
  const auto b = slip.make_tabular(slip.nominal);
  CHECK(a->expected_mdp().transitions == b->expected_mdp().transitions);
  CHECK(a->expected_mdp().n_states == 65);

  const auto det = slip.make_tabular(one(0.0));
  const auto& p = det->expected_mdp().transitions;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    CHECK(p.row(r).maxCoeff() == 1.0);
    CHECK(p.row(r).sum() == 1.0);
  }
}

TEST_CASE("tabular grid points pass validation") {
  for (const char* id : {"SlipGrid", "WindyChain", "CliffGrid"}) {
    const EnvFamily& f = find_family(id);
    for (const auto& w : OmegaGrid::regular(f.box).points) CHECK_FALSE(validate(f.make_tabular(w)->expected_mdp()));
  }
}

TEST_CASE("pendulum dynamics") {
  PendulumLite env(1.0, 1.0);
  env.reset(3);
  env.set_state(std::numbers::pi, 0.0);
  for (int t = 0; t < 200; ++t) env.step(one(0.0));
  CHECK(std::abs(env.theta() - std::numbers::pi) < 1e-9);
  CHECK(std::abs(env.velocity()) < 1e-9);

  env.set_state(0.0, 0.0);
  const StepResult r = env.step(one(0.0));
  CHECK(r.reward == 0.0);
  CHECK(r.observation[0] == doctest::Approx(1.0));

  // Torque is clipped to the box.
  PendulumLite clipped(1.0, 1.0), exact(1.0, 1.0);
  clipped.reset(0);
  exact.reset(0);
  clipped.set_state(0.3, 0.0);
  exact.set_state(0.3, 0.0);
  clipped.step(one(50.0));
  exact.step(one(2.0));
  CHECK(clipped.theta() == exact.theta());

  PendulumLite episode(1.0, 1.0);
  bool truncated = false;
  run_episode(episode, constant_action(0.0), 5, &truncated);
  CHECK(truncated);
}

TEST_CASE("dr_sample") {
  Rng rng(11);
  const OmegaBox point{one(0.3), one(0.3)};
  for (int i = 0; i < 100; ++i) CHECK(dr_sample(point, rng)[0] == 0.3);

  const OmegaBox unit{one(0.0), one(1.0)};
  double sum = 0.0;
  bool inside = true;
  for (int i = 0; i < 100000; ++i) {
    const double w = dr_sample(unit, rng)[0];
    inside = inside && w >= 0.0 && w <= 1.0;
    sum += w;
  }
  CHECK(inside);
  CHECK(std::abs(sum / 100000 - 0.5) < 0.01);

  Rng r1(5), r2(5);
  const OmegaBox box = find_family("WindyChain").box;
  CHECK(dr_sample(box, r1) == dr_sample(box, r2));
}

TEST_CASE("omega grid") {
  const OmegaGrid g = OmegaGrid::regular(find_family("SlipGrid").box);
  REQUIRE(g.size() == 10);
  CHECK(g.points.front()[0] == 0.0);
  CHECK(g.points.back()[0] == 0.5);
  for (std::size_t k = 1; k < g.size(); ++k)
    CHECK(std::abs(g.points[k][0] - g.points[k - 1][0] - 0.5 / 9) < 1e-12);

  const OmegaGrid two = OmegaGrid::regular(find_family("PendulumLite").box);
  CHECK(two.size() == 100);
  CHECK(two.points[1][0] == 0.5);
  CHECK(two.points[1][1] > 0.5);
  CHECK(two.points.back() == find_family("PendulumLite").box.high);

  CHECK(OmegaGrid::regular(find_family("SafeRisky").box).size() == 1);
}

TEST_CASE("evaluate basics") {
  const EnvFamily& zero = find_family("ConstantZero");
  const EvalReport r = evaluate(constant_action(0.3), zero, OmegaGrid::single(zero.nominal), 4, 1);
  CHECK(r.per_point_return == std::vector<double>{0.0});
  CHECK(r.worst == r.average);

  const EnvFamily& slip = find_family("SlipGrid");
  const EvalReport single = evaluate(constant_action(3), slip, OmegaGrid::single(one(0.2)), 5, 9);
  CHECK(single.worst == single.average);
  CHECK(single.worst == single.per_point_return[0]);

  CHECK_THROWS_AS(evaluate(constant_action(0), slip, OmegaGrid::single(one(0.2)), 0, 1), std::invalid_argument);
}

TEST_CASE("evaluate is deterministic and independent of jobs") {
  const EnvFamily& f = find_family("WindyChain");
  const OmegaGrid grid = OmegaGrid::regular(f.box, 3);
  const PolicyFn right = constant_action(1);
  const EvalReport a = evaluate(right, f, grid, 6, 77, 1);
  const EvalReport b = evaluate(right, f, grid, 6, 77, 4);
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(to_csv(a) == to_csv(b));
  CHECK(a.worst <= a.average);
  CHECK(to_json(eval_report_from_json(to_json(a))).dump() == to_json(a).dump());
  const EvalReport c = evaluate(right, f, grid, 6, 78, 1);
  CHECK(to_json(a).dump() != to_json(c).dump());
}

TEST_CASE("nominal-optimal SlipGrid policy matches exact evaluation") {
  const EnvFamily& f = find_family("SlipGrid");
  const auto nominal = f.make_tabular(f.nominal);
  const Policy pi = *value_iteration(nominal->expected_mdp(), OperatorKind::classical(true), 1e-10, 100000).policy;
  const OmegaGrid grid = OmegaGrid::regular(f.box);
  constexpr int kEpisodes = 400;
  const EvalReport r = evaluate(tabular_policy_fn(pi), f, grid, kEpisodes, 2024, 4);

  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double exact = f.make_tabular(grid.points[k])->expected_episode_return(pi);
    CHECK(exact <= previous + 1e-12);
    previous = exact;
    // Episode returns lie in [-1, 1], so sigma <= 1 / sqrt(n).
    CHECK(std::abs(r.per_point_return[k] - exact) < 3.0 / std::sqrt(kEpisodes));
  }
}

TEST_CASE("tabular environment rewards") {
  const EnvFamily& f = find_family("SafeRisky");
  auto env = f.make_tabular(f.nominal);
  CHECK(run_episode(*env, constant_action(0), 1) == 0.5);
  double total = 0.0;
  for (int e = 0; e < 2000; ++e) total += run_episode(*env, constant_action(1), derive_seed(3, {std::uint64_t(e)}));
  CHECK(std::abs(total / 2000 - 0.5) < 0.05);
  CHECK(env->expected_episode_return(Policy::deterministic({1, 0, 0, 0}, 2)) == doctest::Approx(0.5));
}
