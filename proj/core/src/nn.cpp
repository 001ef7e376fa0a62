#include "fbee/nn.hpp"

#include <cmath>
#include <string>

#include "fbee/binary_io.hpp"

namespace fbee::nn {

ParameterSet zeros_like(const ParameterSet& params) {
  ParameterSet out;
  out.reserve(params.size());
  for (const auto& layer : params) {
    out.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                   Vector::Zero(layer.bias.size())});
  }
  return out;
}

void add_scaled(ParameterSet& into, const ParameterSet& other, double scale) {
  if (into.size() != other.size()) throw std::invalid_argument("add_scaled: layer count mismatch");
  for (std::size_t l = 0; l < into.size(); ++l) {
    into[l].weight.noalias() += scale * other[l].weight;
    into[l].bias.noalias() += scale * other[l].bias;
  }
}

bool all_finite(const ParameterSet& params) {
  for (const auto& layer : params) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

std::vector<double> flatten(const ParameterSet& params) {
  std::vector<double> flat;
  for (const auto& layer : params) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) flat.push_back(layer.weight(r, c));
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) flat.push_back(layer.bias(i));
  }
  return flat;
}

Matrix InputBatch::to_dense() const {
  Matrix out = Matrix::Zero(input_dim(), size());
  for (Eigen::Index n = 0; n < size(); ++n) {
    for (int k = 0; k < hot_per_sample; ++k) {
      out(hot[static_cast<std::size_t>(n) * hot_per_sample + k], n) += 1.0;
    }
  }
  out.bottomRows(dense.rows()) = dense;
  return out;
}

InputBatch InputBatch::from_dense(Matrix columns) {
  InputBatch batch;
  batch.dense = std::move(columns);
  return batch;
}

Mlp::Mlp(std::vector<int> layer_sizes, Rng& rng) : Mlp(zeros(std::move(layer_sizes))) {
  for (auto& layer : layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
    std::uniform_real_distribution<double> init(-bound, bound);
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = init(rng);
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = init(rng);
  }
}

Mlp Mlp::zeros(std::vector<int> layer_sizes) {
  if (layer_sizes.size() < 2) throw std::invalid_argument("Mlp needs at least input and output sizes");
  for (int size : layer_sizes) {
    if (size < 1) throw std::invalid_argument("Mlp layer sizes must be positive");
  }
  Mlp net;
  net.sizes_ = std::move(layer_sizes);
  for (std::size_t l = 1; l < net.sizes_.size(); ++l) {
    net.layers_.push_back({Matrix::Zero(net.sizes_[l], net.sizes_[l - 1]), Vector::Zero(net.sizes_[l])});
  }
  return net;
}

std::size_t Mlp::parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : layers_) count += layer.weight.size() + layer.bias.size();
  return count;
}

void Mlp::check_input(const InputBatch& inputs) const {
  if (inputs.input_dim() != input_dim()) {
    throw std::invalid_argument("Mlp: input has " + std::to_string(inputs.input_dim()) +
                                " features, network expects " + std::to_string(input_dim()));
  }
  if (inputs.hot.size() != static_cast<std::size_t>(inputs.size()) * inputs.hot_per_sample) {
    throw std::invalid_argument("Mlp: one-hot index count does not match the batch");
  }
}

Matrix Mlp::first_layer(const InputBatch& inputs) const {
  const auto& layer = layers_.front();
  Matrix pre(layer.weight.rows(), inputs.size());
  if (inputs.dense.rows() > 0) {
    pre.noalias() = layer.weight.rightCols(inputs.dense.rows()) * inputs.dense;
  } else {
    pre.setZero();
  }
  pre.colwise() += layer.bias;
  if (inputs.hot_per_sample > 0) {
    const int* hot = inputs.hot.data();
    for (Eigen::Index n = 0; n < inputs.size(); ++n) {
      for (int k = 0; k < inputs.hot_per_sample; ++k) pre.col(n) += layer.weight.col(*hot++);
    }
  }
  return pre;
}

Vector Mlp::forward(const Vector& input) const {
  return forward(Matrix(input)).col(0);
}

Matrix Mlp::forward(const Matrix& inputs) const {
  return forward(InputBatch::from_dense(inputs));
}

Matrix Mlp::forward(const InputBatch& inputs) const {
  Tape tape;
  return forward(inputs, tape);
}

Matrix Mlp::forward(const InputBatch& inputs, Tape& tape) const {
  check_input(inputs);
  tape.hidden.resize(layers_.size() - 1);
  Matrix activation = first_layer(inputs);
  for (std::size_t l = 1; l < layers_.size(); ++l) {
    Matrix& hidden = tape.hidden[l - 1];
    hidden.swap(activation);
    hidden = hidden.cwiseMax(0.0);
    activation.resize(layers_[l].weight.rows(), hidden.cols());
    activation.noalias() = layers_[l].weight * hidden;
    activation.colwise() += layers_[l].bias;
  }
  return activation;
}

ParameterSet Mlp::backward(const InputBatch& inputs, const Tape& tape, const Matrix& upstream,
                           Matrix* input_gradient) const {
  check_input(inputs);
  if (upstream.rows() != output_dim() || upstream.cols() != inputs.size()) {
    throw std::invalid_argument("Mlp::backward: upstream gradient shape mismatch");
  }
  if (tape.hidden.size() != layers_.size() - 1) {
    throw std::invalid_argument("Mlp::backward: tape does not belong to this network");
  }
  ParameterSet grads(layers_.size());
  Matrix delta = upstream;
  Matrix next;
  for (std::size_t l = layers_.size() - 1; l >= 1; --l) {
    const Matrix& below = tape.hidden[l - 1];
    grads[l].weight.noalias() = delta * below.transpose();
    grads[l].bias = delta.rowwise().sum();
    next.resize(layers_[l].weight.cols(), delta.cols());
    next.noalias() = layers_[l].weight.transpose() * delta;
    next = (below.array() > 0.0).select(next, 0.0);
    delta.swap(next);
  }
  const auto& first = layers_.front();
  auto& g = grads.front();
  g.weight = Matrix::Zero(first.weight.rows(), first.weight.cols());
  if (inputs.dense.rows() > 0) {
    g.weight.rightCols(inputs.dense.rows()).noalias() = delta * inputs.dense.transpose();
  }
  if (inputs.hot_per_sample > 0) {
    const int* hot = inputs.hot.data();
    for (Eigen::Index n = 0; n < inputs.size(); ++n) {
      for (int k = 0; k < inputs.hot_per_sample; ++k) g.weight.col(*hot++) += delta.col(n);
    }
  }
  g.bias = delta.rowwise().sum();
  if (input_gradient != nullptr) {
    input_gradient->resize(first.weight.cols(), delta.cols());
    input_gradient->noalias() = first.weight.transpose() * delta;
  }
  return grads;
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.sizes_ != b.sizes_) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    if (a.layers_[l].weight != b.layers_[l].weight || a.layers_[l].bias != b.layers_[l].bias) {
      return false;
    }
  }
  return true;
}

AdamState AdamState::for_network(const Mlp& net, AdamConfig config) {
  AdamState state;
  state.config = config;
  state.first_moment = zeros_like(net.parameters());
  state.second_moment = zeros_like(net.parameters());
  return state;
}

void adam_step(Mlp& net, const ParameterSet& grads, AdamState& state) {
  auto& params = net.parameters();
  if (grads.size() != params.size() || state.first_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient/state shapes disagree");
  }
  for (std::size_t l = 0; l < params.size(); ++l) {
    if (grads[l].weight.rows() != params[l].weight.rows() ||
        grads[l].weight.cols() != params[l].weight.cols() ||
        grads[l].bias.size() != params[l].bias.size()) {
      throw std::invalid_argument("adam_step: gradient shape mismatch in layer " + std::to_string(l));
    }
    if (!grads[l].weight.allFinite() || !grads[l].bias.allFinite()) {
      throw NonFiniteError("adam_step: non-finite gradient in layer " + std::to_string(l));
    }
  }
  const auto& cfg = state.config;
  ++state.step;
  const double correction1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const double step_size = cfg.learning_rate / correction1;
  const double root_correction2 = std::sqrt(correction2);

  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    param.array() -= step_size * m.array() / (v.array().sqrt() / root_correction2 + cfg.epsilon);
  };
  for (std::size_t l = 0; l < params.size(); ++l) {
    update(params[l].weight, grads[l].weight, state.first_moment[l].weight,
           state.second_moment[l].weight);
    update(params[l].bias, grads[l].bias, state.first_moment[l].bias, state.second_moment[l].bias);
  }
}

TargetCopy::TargetCopy(const Mlp& source, double tau_) : net(source), tau(tau_) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("target momentum must lie in (0, 1)");
}

void polyak_update(TargetCopy& target, const Mlp& source) {
  if (target.net.layer_sizes() != source.layer_sizes()) {
    throw std::invalid_argument("polyak_update: target and source shapes differ");
  }
  auto& dst = target.net.parameters();
  const auto& src = source.parameters();
  const double tau = target.tau;
  for (std::size_t l = 0; l < dst.size(); ++l) {
    dst[l].weight = tau * dst[l].weight + (1.0 - tau) * src[l].weight;
    dst[l].bias = tau * dst[l].bias + (1.0 - tau) * src[l].bias;
  }
}

namespace {
constexpr std::uint32_t kMlpTag = 0x4d4c5031;  // "MLP1"
constexpr std::uint32_t kParamTag = 0x50524d31;
}  // namespace

void write_parameters(BinaryWriter& out, const ParameterSet& params) {
  out.u32(kParamTag);
  out.u64(params.size());
  for (const auto& layer : params) {
    out.matrix(layer.weight);
    out.vector(layer.bias);
  }
}

ParameterSet read_parameters(BinaryReader& in) {
  in.expect_tag(kParamTag, "parameters");
  const auto n = in.u64();
  if (n > 64) throw std::runtime_error("checkpoint: implausible layer count");
  ParameterSet params(n);
  for (auto& layer : params) {
    layer.weight = in.matrix();
    layer.bias = in.vector();
  }
  return params;
}

void write_mlp(BinaryWriter& out, const Mlp& net) {
  out.u32(kMlpTag);
  out.ints(net.layer_sizes());
  write_parameters(out, net.parameters());
}

Mlp read_mlp(BinaryReader& in) {
  in.expect_tag(kMlpTag, "mlp");
  Mlp net = Mlp::zeros(in.ints());
  auto params = read_parameters(in);
  if (params.size() != net.parameters().size()) throw std::runtime_error("checkpoint: layer count mismatch");
  for (std::size_t l = 0; l < params.size(); ++l) {
    const auto& expect = net.parameters()[l];
    if (params[l].weight.rows() != expect.weight.rows() || params[l].weight.cols() != expect.weight.cols() ||
        params[l].bias.size() != expect.bias.size()) {
      throw std::runtime_error("checkpoint: layer shape mismatch");
    }
  }
  net.parameters() = std::move(params);
  return net;
}

}  // namespace fbee::nn
