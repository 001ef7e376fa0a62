#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "fbee/rng.hpp"

namespace fbee {
class BinaryWriter;
class BinaryReader;
}  // namespace fbee

namespace fbee::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when a gradient, parameter or loss stops being finite.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

/// Same shape as an Mlp's parameters; used for gradients and Adam moments.
using ParameterSet = std::vector<Layer>;

ParameterSet zeros_like(const ParameterSet& params);
void add_scaled(ParameterSet& into, const ParameterSet& other, double scale);
bool all_finite(const ParameterSet& params);
std::vector<double> flatten(const ParameterSet& params);

/// Column batch of network inputs whose leading `hot_width` entries form a
/// sparse block with `hot_per_sample` unit entries per column (one-hot state
/// and action codes); the remaining entries are held densely.
struct InputBatch {
  int hot_width = 0;
  int hot_per_sample = 0;
  std::vector<int> hot;  // hot_per_sample indices per column, column-major
  Matrix dense;          // (input_dim - hot_width) x batch

  Eigen::Index size() const { return dense.cols(); }
  int input_dim() const { return hot_width + static_cast<int>(dense.rows()); }
  Matrix to_dense() const;
  static InputBatch from_dense(Matrix columns);
};

/// Fully connected network: ReLU on hidden layers, identity output.
/// At a pre-activation of exactly zero the ReLU subgradient is taken as 0.
class Mlp {
 public:
  Mlp() = default;
  /// Weights and biases uniform in +-1/sqrt(fan_in), drawn layer by layer.
  Mlp(std::vector<int> layer_sizes, Rng& rng);
  static Mlp zeros(std::vector<int> layer_sizes);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  std::size_t parameter_count() const;

  ParameterSet& parameters() { return layers_; }
  const ParameterSet& parameters() const { return layers_; }

  Vector forward(const Vector& input) const;
  Matrix forward(const Matrix& inputs) const;
  Matrix forward(const InputBatch& inputs) const;

  /// Hidden activations recorded by forward() for a later backward().
  struct Tape {
    std::vector<Matrix> hidden;
  };
  Matrix forward(const InputBatch& inputs, Tape& tape) const;

  /// Reverse-mode gradients of sum(upstream .* output) with respect to the
  /// parameters; optionally also the gradient with respect to the input.
  ParameterSet backward(const InputBatch& inputs, const Tape& tape, const Matrix& upstream,
                        Matrix* input_gradient = nullptr) const;

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  Matrix first_layer(const InputBatch& inputs) const;
  void check_input(const InputBatch& inputs) const;

  std::vector<int> sizes_;
  ParameterSet layers_;
};

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  ParameterSet first_moment;
  ParameterSet second_moment;
  std::int64_t step = 0;

  static AdamState for_network(const Mlp& net, AdamConfig config);
};

/// Bias-corrected Adam. Rejects non-finite gradients before touching state.
void adam_step(Mlp& net, const ParameterSet& grads, AdamState& state);

/// Slow-moving copy of a network used for TD targets. Only polyak_update
/// changes it.
struct TargetCopy {
  Mlp net;
  double tau = 0.99;

  TargetCopy() = default;
  TargetCopy(const Mlp& source, double tau);
};

/// target <- tau * target + (1 - tau) * source, elementwise.
void polyak_update(TargetCopy& target, const Mlp& source);

void write_mlp(BinaryWriter& out, const Mlp& net);
Mlp read_mlp(BinaryReader& in);
void write_parameters(BinaryWriter& out, const ParameterSet& params);
ParameterSet read_parameters(BinaryReader& in);

}  // namespace fbee::nn
