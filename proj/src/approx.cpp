#include "expectrl/approx.hpp"

#include <cmath>
#include <stdexcept>

namespace expectrl {

MultiHeadNet::MultiHeadNet(NetShape shape) : shape_(std::move(shape)) {
  if (shape_.input < 1 || shape_.output < 1 || shape_.heads < 1)
    throw std::invalid_argument("network needs positive input, output and head counts");
  for (int h : shape_.hidden)
    if (h < 1) throw std::invalid_argument("hidden layer widths must be positive");
  layout();
}

MultiHeadNet::MultiHeadNet(NetShape shape, Rng& rng) : MultiHeadNet(std::move(shape)) {
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const auto& b = blocks_[l];
    const double limit = std::sqrt(6.0 / (b.rows + b.cols));
    auto w = weight(params_, static_cast<int>(l));
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-limit, limit);
  }
}

void MultiHeadNet::layout() {
  blocks_.clear();
  Eigen::Index offset = 0;
  int in = shape_.input;
  for (int h : shape_.hidden) {
    blocks_.push_back({offset, h, in});
    offset += static_cast<Eigen::Index>(h) * in + h;
    in = h;
  }
  for (int d = 0; d < shape_.heads; ++d) {
    blocks_.push_back({offset, shape_.output, in});
    offset += static_cast<Eigen::Index>(shape_.output) * in + shape_.output;
  }
  params_ = Eigen::VectorXd::Zero(offset);
}

Eigen::Map<const Eigen::MatrixXd> MultiHeadNet::weight(const Eigen::VectorXd& flat, int layer) const {
  const auto& b = blocks_[static_cast<std::size_t>(layer)];
  return {flat.data() + b.offset, b.rows, b.cols};
}

Eigen::Map<const Eigen::VectorXd> MultiHeadNet::bias(const Eigen::VectorXd& flat, int layer) const {
  const auto& b = blocks_[static_cast<std::size_t>(layer)];
  return {flat.data() + b.offset + static_cast<Eigen::Index>(b.rows) * b.cols, b.rows};
}

Eigen::Map<Eigen::MatrixXd> MultiHeadNet::weight(Eigen::VectorXd& flat, int layer) const {
  const auto& b = blocks_[static_cast<std::size_t>(layer)];
  return {flat.data() + b.offset, b.rows, b.cols};
}

Eigen::Map<Eigen::VectorXd> MultiHeadNet::bias(Eigen::VectorXd& flat, int layer) const {
  const auto& b = blocks_[static_cast<std::size_t>(layer)];
  return {flat.data() + b.offset + static_cast<Eigen::Index>(b.rows) * b.cols, b.rows};
}

std::pair<Eigen::Index, Eigen::Index> MultiHeadNet::head_param_range(int d) const {
  const auto& b = blocks_[static_cast<std::size_t>(head_layer(d))];
  return {b.offset, b.offset + static_cast<Eigen::Index>(b.rows) * b.cols + b.rows};
}

Eigen::MatrixXd MultiHeadNet::features(const Eigen::MatrixXd& x, Cache* cache) const {
  if (x.rows() != shape_.input) throw std::invalid_argument("network input has the wrong dimension");
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(x);
  }
  Eigen::MatrixXd a = x;
  for (int l = 0; l < trunk_layers(); ++l) {
    Eigen::MatrixXd z = weight(params_, l) * a;
    z.colwise() += bias(params_, l);
    a = z.array().tanh().matrix();
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

Eigen::MatrixXd MultiHeadNet::head_output(int d, const Eigen::MatrixXd& f) const {
  if (d < 0 || d >= shape_.heads) throw std::invalid_argument("head index out of range");
  Eigen::MatrixXd y = weight(params_, head_layer(d)) * f;
  y.colwise() += bias(params_, head_layer(d));
  return y;
}

Eigen::MatrixXd MultiHeadNet::forward(const Eigen::MatrixXd& x, int head, Cache* cache) const {
  return head_output(head, features(x, cache));
}

Eigen::MatrixXd MultiHeadNet::backward(const Cache& cache,
                                       const std::vector<std::pair<int, Eigen::MatrixXd>>& head_grads,
                                       Eigen::VectorXd& grad) const {
  if (!cache.filled()) throw std::logic_error("backward called without a forward cache");
  if (grad.size() == 0) grad = Eigen::VectorXd::Zero(n_params());
  if (grad.size() != n_params()) throw std::invalid_argument("gradient vector has the wrong size");

  const Eigen::MatrixXd& f = cache.activations.back();
  Eigen::MatrixXd da = Eigen::MatrixXd::Zero(f.rows(), f.cols());
  for (const auto& [d, dy] : head_grads) {
    if (d < 0 || d >= shape_.heads) throw std::invalid_argument("head index out of range");
    if (dy.rows() != shape_.output || dy.cols() != f.cols())
      throw std::invalid_argument("head output gradient has the wrong shape");
    const int l = head_layer(d);
    weight(grad, l).noalias() += dy * f.transpose();
    bias(grad, l) += dy.rowwise().sum();
    da.noalias() += weight(params_, l).transpose() * dy;
  }
  for (int l = trunk_layers() - 1; l >= 0; --l) {
    const Eigen::MatrixXd& a = cache.activations[static_cast<std::size_t>(l) + 1];
    const Eigen::MatrixXd& prev = cache.activations[static_cast<std::size_t>(l)];
    const Eigen::MatrixXd dz = (da.array() * (1.0 - a.array().square())).matrix();
    weight(grad, l).noalias() += dz * prev.transpose();
    bias(grad, l) += dz.rowwise().sum();
    da = weight(params_, l).transpose() * dz;
  }
  return da;
}

NetShape Mlp::shape_from(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("an MLP needs at least input and output sizes");
  return NetShape{sizes.front(), std::vector<int>(sizes.begin() + 1, sizes.end() - 1), sizes.back(), 1};
}

Mlp::Mlp(const std::vector<int>& sizes) : MultiHeadNet(shape_from(sizes)) {}
Mlp::Mlp(const std::vector<int>& sizes, Rng& rng) : MultiHeadNet(shape_from(sizes), rng) {}

// ---------------------------------------------------------------------------

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (m.size() != params.size()) {
    m = Eigen::VectorXd::Zero(params.size());
    v = Eigen::VectorXd::Zero(params.size());
    t = 0;
  }
  ++t;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

Optimizer::Optimizer(Kind kind, double lr) : kind_(kind) {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  sgd_.lr = lr;
  adam_.lr = lr;
}

void Optimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (kind_ == Kind::sgd)
    sgd_.step(params, grad);
  else
    adam_.step(params, grad);
}

void polyak_update(Eigen::VectorXd& target, const Eigen::VectorXd& source, double tau) {
  if (target.size() != source.size()) throw std::invalid_argument("Polyak update between different shapes");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("Polyak tau must lie in [0, 1]");
  target = tau * target + (1.0 - tau) * source;
}

TargetCopy::TargetCopy(const MultiHeadNet& source, double t) : net(source), tau(t) {}

void TargetCopy::update(const MultiHeadNet& source) {
  if (!(source.shape() == net.shape())) throw std::invalid_argument("target copy shape mismatch");
  polyak_update(net.params(), source.params(), tau);
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const MultiHeadNet& net) {
  const auto& s = net.shape();
  nlohmann::json layers = nlohmann::json::array();
  const int n_layers = net.trunk_layers() + net.heads();
  for (int l = 0; l < n_layers; ++l) {
    const auto w = net.weight(net.params(), l);
    const auto b = net.bias(net.params(), l);
    std::vector<double> row_major;
    row_major.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) row_major.push_back(w(i, j));
    const std::string name = l < net.trunk_layers() ? "trunk" + std::to_string(l)
                                                    : "head" + std::to_string(l - net.trunk_layers());
    layers.push_back({{"name", name},
                      {"rows", w.rows()},
                      {"cols", w.cols()},
                      {"weight", std::move(row_major)},
                      {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
  }
  return {{"version", kNetSchemaVersion},
          {"shape", {{"input", s.input}, {"hidden", s.hidden}, {"output", s.output}, {"heads", s.heads}}},
          {"layers", std::move(layers)}};
}

MultiHeadNet net_from_json(const nlohmann::json& doc) {
  if (doc.at("version").get<int>() != kNetSchemaVersion) throw std::invalid_argument("unsupported network version");
  const auto& js = doc.at("shape");
  NetShape shape{js.at("input").get<int>(), js.at("hidden").get<std::vector<int>>(), js.at("output").get<int>(),
                 js.at("heads").get<int>()};
  MultiHeadNet net(shape);
  const auto& layers = doc.at("layers");
  const int n_layers = net.trunk_layers() + net.heads();
  if (layers.size() != static_cast<std::size_t>(n_layers)) throw std::invalid_argument("network layer count mismatch");
  for (int l = 0; l < n_layers; ++l) {
    const auto& layer = layers[static_cast<std::size_t>(l)];
    auto w = net.weight(net.params(), l);
    auto b = net.bias(net.params(), l);
    const auto wv = layer.at("weight").get<std::vector<double>>();
    const auto bv = layer.at("bias").get<std::vector<double>>();
    if (layer.at("rows").get<Eigen::Index>() != w.rows() || layer.at("cols").get<Eigen::Index>() != w.cols() ||
        wv.size() != static_cast<std::size_t>(w.size()) || bv.size() != static_cast<std::size_t>(b.size()))
      throw std::invalid_argument("network layer shape mismatch");
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = wv[static_cast<std::size_t>(i * w.cols() + j)];
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = bv[static_cast<std::size_t>(i)];
  }
  if (!net.params().allFinite()) throw std::invalid_argument("network parameters must be finite");
  return net;
}

}  // namespace expectrl
