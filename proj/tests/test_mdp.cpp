#include "expectrl/mdp.hpp"

#include <doctest.h>

using namespace expectrl;

namespace {

TabularMdp single_state(double reward, double gamma) {
  TabularMdp mdp(1, 1, gamma);
  mdp.transitions(0, 0) = 1.0;
  mdp.rewards(0, 0) = reward;
  return mdp;
}

}  // namespace

TEST_CASE("validate reports the first violation") {
  CHECK_FALSE(validate(single_state(1.0, 0.5)).has_value());

  TabularMdp mdp = garnet(4, 2, 2, 0.0, 1);
  mdp.transitions.row(mdp.row(2, 1)) *= 0.9;
  auto v = validate(mdp);
  REQUIRE(v.has_value());
  CHECK(v->state == 2);
  CHECK(v->action == 1);

  mdp = garnet(4, 2, 4, 0.0, 1);
  mdp.transitions(mdp.row(1, 0), 0) -= 2.0;
  mdp.transitions(mdp.row(1, 0), 1) += 2.0;
  v = validate(mdp);
  REQUIRE(v.has_value());
  CHECK(v->what.find("negative") != std::string::npos);
  CHECK(v->state == 1);

  mdp = single_state(1.0, 0.5);
  mdp.gamma = 1.0;
  CHECK(validate(mdp).has_value());
  CHECK_THROWS_AS(require_valid(mdp), std::invalid_argument);
}

TEST_CASE("garnet instances") {
  const TabularMdp mdp = garnet(5, 2, 3, 0.5, 7);
  CHECK_FALSE(validate(mdp).has_value());
  for (Eigen::Index r = 0; r < mdp.transitions.rows(); ++r) CHECK((mdp.transitions.row(r).array() > 0).count() == 3);

  const TabularMdp again = garnet(5, 2, 3, 0.5, 7);
  CHECK(again.transitions == mdp.transitions);
  CHECK(again.rewards == mdp.rewards);

  const TabularMdp tiny = garnet(1, 1, 1, 0.0, 0);
  CHECK(tiny.transitions(0, 0) == 1.0);

  CHECK_THROWS_AS(garnet(3, 2, 4, 0.0, 1), std::invalid_argument);

  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const int s = 1 + static_cast<int>(seed % 9);
    const TabularMdp g = garnet(s, 1 + static_cast<int>(seed % 4), 1 + static_cast<int>(seed % s), 0.3, seed);
    CHECK_FALSE(validate(g).has_value());
  }
}

TEST_CASE("action slip construction") {
  // Four actions on a line of five cells, cell 2 is interior.
  TabularMdp base(5, 4, 0.9);
  for (int s = 0; s < 5; ++s) {
    base.transitions(base.row(s, 0), std::max(s - 1, 0)) = 1.0;
    base.transitions(base.row(s, 1), std::min(s + 1, 4)) = 1.0;
    base.transitions(base.row(s, 2), std::max(s - 2, 0)) = 1.0;
    base.transitions(base.row(s, 3), std::min(s + 2, 4)) = 1.0;
  }
  const TabularMdp slipped = apply_action_slip(base, 0.3);
  CHECK_FALSE(validate(slipped).has_value());
  CHECK(slipped.transitions(slipped.row(2, 1), 3) == doctest::Approx(0.7));
  CHECK(slipped.transitions(slipped.row(2, 1), 1) == doctest::Approx(0.1));
  CHECK(apply_action_slip(base, 0.0).transitions == base.transitions);
  CHECK_THROWS_AS(apply_action_slip(base, 1.5), std::invalid_argument);
}

TEST_CASE("perturb_kernel over a mixing family") {
  const TabularMdp a = garnet(6, 3, 2, 0.0, 1);
  TabularMdp b = garnet(6, 3, 3, 0.0, 2);
  b.rewards = a.rewards;
  KernelFamily family{"mix", {Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 1.0)},
                      Eigen::VectorXd::Constant(1, 0.0),
                      [=](const Eigen::VectorXd& w) { return mix_kernels(a, b, w[0]); }};

  const TabularMdp nominal = perturb_kernel(family, family.nominal);
  CHECK(nominal.transitions == a.transitions);
  for (double w : {0.1, 0.5, 0.9, 1.0}) {
    const TabularMdp m = perturb_kernel(family, Eigen::VectorXd::Constant(1, w));
    CHECK_FALSE(validate(m).has_value());
    CHECK(m.n_states == a.n_states);
    CHECK(m.rewards == a.rewards);
    CHECK(m.gamma == a.gamma);
  }
  CHECK_THROWS_AS(perturb_kernel(family, Eigen::VectorXd::Constant(1, 1.5)), std::invalid_argument);
}

TEST_CASE("MDP JSON document") {
  const TabularMdp mdp = garnet(4, 3, 2, 0.2, 12, 0.95);
  const auto doc = to_json(mdp);
  CHECK(doc.at("version") == kMdpSchemaVersion);
  const TabularMdp back = mdp_from_json(doc);
  CHECK(back.transitions == mdp.transitions);
  CHECK(back.rewards == mdp.rewards);
  CHECK(back.gamma == mdp.gamma);
  CHECK(back.initial_dist == mdp.initial_dist);

  auto bad = doc;
  bad["extra"] = 1;
  CHECK_THROWS_AS(mdp_from_json(bad), std::invalid_argument);
  bad = doc;
  bad["version"] = 99;
  CHECK_THROWS_AS(mdp_from_json(bad), std::invalid_argument);
  bad = doc;
  bad["transitions"][0][0][0] = 5.0;
  CHECK_THROWS_AS(mdp_from_json(bad), std::invalid_argument);
}

TEST_CASE("policy representation") {
  const Policy det = Policy::deterministic({1, 0, 2}, 3);
  CHECK(det.prob(0, 1) == 1.0);
  CHECK(det.prob(0, 0) == 0.0);
  CHECK(det.as_matrix().rowwise().sum().isOnes());
  CHECK_THROWS_AS(Policy::deterministic({3}, 3), std::invalid_argument);
  CHECK_THROWS_AS(Policy::stochastic(Eigen::MatrixXd::Constant(2, 2, 0.4)), std::invalid_argument);
  const Policy back = policy_from_json(to_json(Policy::uniform(2, 4)));
  CHECK(back.prob(1, 3) == 0.25);
}
