#include "expectrl/approx.hpp"
#include "gradcheck.hpp"

#include <doctest.h>

#include <cmath>

using namespace expectrl;

TEST_CASE("forward examples") {
  MultiHeadNet zero(NetShape{3, {4, 5}, 2, 1});
  zero.bias(zero.params(), zero.head_layer(0)) << 0.25, -1.5;
  const Eigen::MatrixXd out = zero.forward(Eigen::MatrixXd::Random(3, 4));
  for (Eigen::Index j = 0; j < 4; ++j) {
    CHECK(out(0, j) == 0.25);
    CHECK(out(1, j) == -1.5);
  }

  Mlp identity({3, 3});
  identity.weight(identity.params(), 0) = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 5);
  CHECK(identity.forward(x) == x);

  CHECK_THROWS_AS(identity.forward(Eigen::MatrixXd::Zero(2, 1)), std::invalid_argument);
  CHECK_THROWS_AS(MultiHeadNet(NetShape{2, {0}, 1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(MultiHeadNet(NetShape{2, {}, 1, 0}), std::invalid_argument);
}

TEST_CASE("forward matches a hand-rolled evaluation") {
  Rng rng(4);
  Mlp net({2, 3, 2, 1}, rng);
  const Eigen::Vector2d x(0.3, -0.7);
  // Dense evaluation from the flat parameter layout, written out by hand.
  const Eigen::VectorXd& p = net.params();
  std::size_t k = 0;
  auto dense = [&](const std::vector<double>& in, int rows, bool squash) {
    const int cols = static_cast<int>(in.size());
    std::vector<double> out(static_cast<std::size_t>(rows), 0.0);
    for (int c = 0; c < cols; ++c)
      for (int r = 0; r < rows; ++r) out[static_cast<std::size_t>(r)] += p[static_cast<Eigen::Index>(k + c * rows + r)] * in[static_cast<std::size_t>(c)];
    k += static_cast<std::size_t>(rows * cols);
    for (int r = 0; r < rows; ++r) {
      out[static_cast<std::size_t>(r)] += p[static_cast<Eigen::Index>(k++)];
      if (squash) out[static_cast<std::size_t>(r)] = std::tanh(out[static_cast<std::size_t>(r)]);
    }
    return out;
  };
  const auto h1 = dense({x[0], x[1]}, 3, true);
  const auto h2 = dense(h1, 2, true);
  const auto y = dense(h2, 1, false);
  CHECK(net.forward(x)(0, 0) == doctest::Approx(y[0]).epsilon(1e-14));

  // Repeated forward passes are bit-identical.
  CHECK(net.forward(x) == net.forward(x));
}

TEST_CASE("backward examples") {
  Rng rng(5);
  MultiHeadNet net(NetShape{3, {6}, 1, 2}, rng);
  MultiHeadNet::Cache cache;
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 4);
  net.forward(x, 0, &cache);
  Eigen::VectorXd grad;
  const Eigen::MatrixXd dx = net.backward(cache, {{0, Eigen::MatrixXd::Zero(1, 4)}, {1, Eigen::MatrixXd::Zero(1, 4)}}, grad);
  CHECK(grad.isZero(0.0));
  CHECK(dx.isZero(0.0));

  MultiHeadNet::Cache empty;
  Eigen::VectorXd g2;
  CHECK_THROWS_AS(net.backward(empty, {}, g2), std::logic_error);
}

TEST_CASE("linear net under squared loss gives the normal-equation gradient") {
  Rng rng(6);
  Mlp net({4, 1}, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 20);
  const Eigen::RowVectorXd y = Eigen::RowVectorXd::Random(20);
  MultiHeadNet::Cache cache;
  const Eigen::MatrixXd pred = net.forward(x, 0, &cache);
  // L = 1/2 sum (Xw + b - y)^2
  const Eigen::RowVectorXd residual = pred.row(0) - y;
  Eigen::VectorXd grad;
  net.backward(cache, {{0, residual}}, grad);
  const Eigen::VectorXd w = net.weight(net.params(), 0).transpose();
  const double b = net.bias(net.params(), 0)[0];
  const Eigen::VectorXd expected_w = x * x.transpose() * w + x * Eigen::VectorXd::Constant(20, b) - x * y.transpose();
  CHECK((net.weight(grad, 0).transpose() - expected_w).norm() < 1e-12);
  CHECK(net.bias(grad, 0)[0] == doctest::Approx(residual.sum()));
}

TEST_CASE("finite-difference gradient check") {
  Rng rng(7);
  for (int i = 0; i < 40; ++i) {
    const auto inst = gradcheck::random_instance(rng, i % 2 ? 0.2 : 0.5);
    CHECK(gradcheck::max_relative_error(inst) < 1e-4);
  }
}

TEST_CASE("heads are isolated") {
  Rng rng(8);
  MultiHeadNet net(NetShape{2, {5, 4}, 1, 3}, rng);
  MultiHeadNet::Cache cache;
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 7);
  net.forward(x, 1, &cache);
  Eigen::VectorXd grad;
  net.backward(cache, {{1, Eigen::MatrixXd::Ones(1, 7)}}, grad);
  MultiHeadNet stepped = net;
  Sgd{0.1}.step(stepped.params(), grad);
  for (int d : {0, 2}) {
    const auto [lo, hi] = net.head_param_range(d);
    CHECK(stepped.params().segment(lo, hi - lo) == net.params().segment(lo, hi - lo));
  }
  const auto [lo, hi] = net.head_param_range(1);
  CHECK(stepped.params().segment(lo, hi - lo) != net.params().segment(lo, hi - lo));
  CHECK(stepped.params().head(net.head_param_range(0).first) != net.params().head(net.head_param_range(0).first));
}

TEST_CASE("polyak update") {
  Eigen::VectorXd target = Eigen::VectorXd::Zero(1), source = Eigen::VectorXd::Ones(1);
  polyak_update(target, source, 0.995);
  CHECK(target[0] == doctest::Approx(0.005).epsilon(1e-15));

  Eigen::VectorXd t = Eigen::VectorXd::Random(5), s = Eigen::VectorXd::Random(5);
  const Eigen::VectorXd before = t;
  polyak_update(t, s, 1.0);
  CHECK(t == before);
  polyak_update(t, s, 0.0);
  CHECK(t == s);
  Eigen::VectorXd wrong = Eigen::VectorXd::Zero(4);
  CHECK_THROWS_AS(polyak_update(wrong, s, 0.5), std::invalid_argument);

  Rng rng(9);
  MultiHeadNet a(NetShape{2, {3}, 1, 1}, rng), b(NetShape{2, {3}, 1, 1}, rng);
  TargetCopy copy(a, 0.9);
  copy.update(b);
  CHECK((copy.net.params() - (0.9 * a.params() + 0.1 * b.params())).norm() < 1e-15);
  CHECK_THROWS_AS(copy.update(MultiHeadNet(NetShape{2, {4}, 1, 1})), std::invalid_argument);
}

TEST_CASE("optimizers") {
  // Minimize 1/2 |p - c|^2.
  const Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(4, -1.0, 2.0);
  for (auto kind : {Optimizer::Kind::sgd, Optimizer::Kind::adam}) {
    Optimizer opt(kind, kind == Optimizer::Kind::sgd ? 0.1 : 0.05);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(4);
    for (int i = 0; i < 2000; ++i) opt.step(p, p - c);
    CHECK((p - c).norm() < 1e-3);
  }
  Adam adam;
  adam.lr = 0.1;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(2);
  adam.step(p, Eigen::Vector2d(3.0, -0.5));
  // The first bias-corrected step has magnitude lr per coordinate.
  CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(0.1).epsilon(1e-6));
  CHECK_THROWS_AS(Optimizer(Optimizer::Kind::sgd, 0.0), std::invalid_argument);
}

TEST_CASE("parameter serialization") {
  Rng rng(10);
  MultiHeadNet net(NetShape{3, {4, 2}, 2, 2}, rng);
  const auto doc = to_json(net);
  CHECK(doc["layers"][0]["rows"] == 4);
  CHECK(doc["layers"][0]["weight"][1].get<double>() == net.weight(net.params(), 0)(0, 1));
  const MultiHeadNet back = net_from_json(nlohmann::json::parse(doc.dump()));
  CHECK(back.shape() == net.shape());
  CHECK(back.params() == net.params());

  auto bad = doc;
  bad["version"] = 99;
  CHECK_THROWS_AS(net_from_json(bad), std::invalid_argument);
  bad = doc;
  bad["layers"][1]["cols"] = 5;
  CHECK_THROWS(net_from_json(bad));
}
