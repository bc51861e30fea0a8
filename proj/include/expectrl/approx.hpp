#pragma once

// Small dense networks with hand-written reverse mode.
//
// A MultiHeadNet is a tanh trunk followed by D independent linear heads that
// all read the trunk's last activation. With no hidden layers the heads read
// the input directly. Parameters live in one flat vector laid out as
//   trunk layer 0 (W column-major, then b), ...,
//   head 0 (W, b), ..., head D-1 (W, b)
// so optimizers and Polyak averaging act on whole vectors.

#include "expectrl/rng.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace expectrl {

struct NetShape {
  int input = 1;
  std::vector<int> hidden;
  int output = 1;
  int heads = 1;

  bool operator==(const NetShape&) const = default;
};

class MultiHeadNet {
 public:
  /// Activations kept by forward() for backward().
  struct Cache {
    std::vector<Eigen::MatrixXd> activations;  // input, then each hidden layer
    bool filled() const { return !activations.empty(); }
  };

  MultiHeadNet() = default;
  /// Zero parameters.
  explicit MultiHeadNet(NetShape shape);
  /// Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases.
  MultiHeadNet(NetShape shape, Rng& rng);

  const NetShape& shape() const { return shape_; }
  int heads() const { return shape_.heads; }
  Eigen::Index n_params() const { return params_.size(); }
  const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& params() { return params_; }

  /// Layer views into a flat parameter (or gradient) vector.
  Eigen::Map<const Eigen::MatrixXd> weight(const Eigen::VectorXd& flat, int layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(const Eigen::VectorXd& flat, int layer) const;
  Eigen::Map<Eigen::MatrixXd> weight(Eigen::VectorXd& flat, int layer) const;
  Eigen::Map<Eigen::VectorXd> bias(Eigen::VectorXd& flat, int layer) const;

  int trunk_layers() const { return static_cast<int>(shape_.hidden.size()); }
  /// Layer index of head d.
  int head_layer(int d) const { return trunk_layers() + d; }
  /// [begin, end) of head d's parameters in the flat vector.
  std::pair<Eigen::Index, Eigen::Index> head_param_range(int d) const;

  /// Trunk features for a batch (input x batch columns).
  Eigen::MatrixXd features(const Eigen::MatrixXd& x, Cache* cache = nullptr) const;
  Eigen::MatrixXd head_output(int d, const Eigen::MatrixXd& features) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, int head = 0, Cache* cache = nullptr) const;

  /// Reverse pass. `head_grads` pairs a head index with dL/d(head output);
  /// parameter gradients are added into `grad` (resized and zeroed if
  /// empty). Returns dL/d(input).
  Eigen::MatrixXd backward(const Cache& cache, const std::vector<std::pair<int, Eigen::MatrixXd>>& head_grads,
                           Eigen::VectorXd& grad) const;

 private:
  struct Block {
    Eigen::Index offset;
    int rows, cols;
  };
  void layout();

  NetShape shape_;
  std::vector<Block> blocks_;  // one per layer: trunk then heads
  Eigen::VectorXd params_;
};

/// Single-head network from layer sizes {input, hidden..., output}.
class Mlp : public MultiHeadNet {
 public:
  Mlp() = default;
  explicit Mlp(const std::vector<int>& sizes);
  Mlp(const std::vector<int>& sizes, Rng& rng);

 private:
  static NetShape shape_from(const std::vector<int>& sizes);
};

/// Plain gradient descent.
struct Sgd {
  double lr = 1e-3;
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) { params.noalias() -= lr * grad; }
};

/// Adaptive first/second-moment optimizer.
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Eigen::VectorXd m, v;
  long t = 0;

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
};

/// Optimizer chosen at run time.
class Optimizer {
 public:
  enum class Kind { sgd, adam };
  Optimizer(Kind kind, double lr);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
  Sgd sgd_;
  Adam adam_;
};

/// target <- tau * target + (1 - tau) * source. tau weighs the old target.
void polyak_update(Eigen::VectorXd& target, const Eigen::VectorXd& source, double tau);

/// Slowly tracking copy of a network.
struct TargetCopy {
  MultiHeadNet net;
  double tau = 0.995;

  TargetCopy() = default;
  TargetCopy(const MultiHeadNet& source, double tau);
  void update(const MultiHeadNet& source);
};

inline constexpr int kNetSchemaVersion = 1;
/// {version, shape, layers: [{name, rows, cols, weight (row-major), bias}]}.
nlohmann::json to_json(const MultiHeadNet& net);
MultiHeadNet net_from_json(const nlohmann::json& doc);

}  // namespace expectrl
