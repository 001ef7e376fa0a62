#include <gtest/gtest.h>

#include <sstream>

#include "fbee/binary_io.hpp"
#include "fbee/nn.hpp"
#include "oracles.hpp"

using namespace fbee;
using namespace fbee::nn;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> gauss;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
  return m;
}

// Straight-line evaluation of a two-hidden-layer network.
Vector hand_forward(const Mlp& net, const Vector& x) {
  const auto& p = net.parameters();
  Vector h1 = p[0].weight * x + p[0].bias;
  for (Eigen::Index i = 0; i < h1.size(); ++i) h1(i) = h1(i) > 0.0 ? h1(i) : 0.0;
  Vector h2 = p[1].weight * h1 + p[1].bias;
  for (Eigen::Index i = 0; i < h2.size(); ++i) h2(i) = h2(i) > 0.0 ? h2(i) : 0.0;
  return p[2].weight * h2 + p[2].bias;
}

// One-hot prefix plus dense tail, in both representations.
struct MixedInput {
  InputBatch sparse;
  Matrix dense;
};

MixedInput mixed_input(int hot_width, int hot_per_sample, int dense_rows, int batch, Rng& rng) {
  MixedInput in;
  in.sparse.hot_width = hot_width;
  in.sparse.hot_per_sample = hot_per_sample;
  in.sparse.dense = random_matrix(dense_rows, batch, rng);
  in.dense = Matrix::Zero(hot_width + dense_rows, batch);
  const int block = hot_width / std::max(hot_per_sample, 1);
  for (int n = 0; n < batch; ++n) {
    for (int k = 0; k < hot_per_sample; ++k) {
      const int index = k * block + static_cast<int>(rng() % block);
      in.sparse.hot.push_back(index);
      in.dense(index, n) = 1.0;
    }
  }
  in.dense.bottomRows(dense_rows) = in.sparse.dense;
  return in;
}

double weighted_output(const Mlp& net, const Matrix& inputs, const Matrix& weights) {
  return net.forward(inputs).cwiseProduct(weights).sum();
}

}  // namespace

TEST(Forward, ZeroNetworkOutputsTheOutputBias) {
  auto net = Mlp::zeros({3, 5, 2});
  net.parameters().back().bias << 0.25, -1.5;
  const Vector out = net.forward(Vector(Vector::Constant(3, 7.0)));
  EXPECT_EQ(out(0), 0.25);
  EXPECT_EQ(out(1), -1.5);
}

TEST(Forward, IdentityLinearLayer) {
  auto net = Mlp::zeros({4, 4});
  net.parameters()[0].weight.setIdentity();
  const Vector x = (Vector(4) << 1, -2, 3, -4).finished();
  EXPECT_EQ(net.forward(x), x);
}

TEST(Forward, MatchesHandRolledArithmetic) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Mlp net({6, 9, 7, 3}, rng);
    const Vector x = random_matrix(6, 1, rng).col(0);
    EXPECT_LT((net.forward(x) - hand_forward(net, x)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Forward, SparseAndDenseInputsAgree) {
  Rng rng(2);
  const Mlp net({12 + 5, 16, 16, 4}, rng);
  const auto in = mixed_input(12, 2, 5, 9, rng);
  EXPECT_LT((net.forward(in.sparse) - net.forward(in.dense)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, RepeatedCallsAreBitIdentical) {
  Rng rng(3);
  const Mlp net({10, 32, 32, 8}, rng);
  const Matrix x = random_matrix(10, 17, rng);
  const Matrix a = net.forward(x);
  const Matrix b = net.forward(x);
  EXPECT_EQ(a, b);
}

TEST(Forward, RejectsShapeMismatch) {
  Rng rng(4);
  const Mlp net({3, 4, 2}, rng);
  EXPECT_THROW(net.forward(Vector(Vector::Zero(4))), std::invalid_argument);
  EXPECT_THROW(Mlp::zeros({3}), std::invalid_argument);
}

TEST(Backward, LinearNetGradientIsTheOuterProduct) {
  Rng rng(5);
  const Mlp net({3, 2}, rng);
  const Vector x = (Vector(3) << 0.5, -1.0, 2.0).finished();
  Mlp::Tape tape;
  const auto input = InputBatch::from_dense(Matrix(x));
  net.forward(input, tape);
  const auto grads = net.backward(input, tape, Matrix::Ones(2, 1));
  const Matrix expected = Vector::Ones(2) * x.transpose();
  EXPECT_EQ(grads[0].weight, expected);
  EXPECT_EQ(grads[0].bias, Vector::Ones(2));
}

TEST(Backward, MatchesCentralDifferences) {
  Rng rng(6);
  for (const auto& sizes : std::vector<std::vector<int>>{{5, 8, 3}, {7, 12, 12, 4}, {4, 6, 6, 6, 2}}) {
    for (int trial = 0; trial < 10; ++trial) {
      Mlp net(sizes, rng);
      const Matrix x = random_matrix(sizes.front(), 3, rng);
      const Matrix w = random_matrix(sizes.back(), 3, rng);
      Mlp::Tape tape;
      const auto input = InputBatch::from_dense(x);
      net.forward(input, tape);
      Matrix input_grad;
      const auto grads = net.backward(input, tape, w, &input_grad);
      const auto analytic = flatten(grads);
      const auto numeric = ref::central_differences(ref::parameter_addresses(net.parameters()),
                                                        [&] { return weighted_output(net, x, w); });
      EXPECT_LT(ref::max_relative_error(analytic, numeric), 1e-4);

      Matrix probe = x;
      std::vector<double*> cells;
      for (Eigen::Index i = 0; i < probe.size(); ++i) cells.push_back(probe.data() + i);
      const auto numeric_input = ref::central_differences(cells, [&] { return weighted_output(net, probe, w); });
      const std::vector<double> analytic_input(input_grad.data(), input_grad.data() + input_grad.size());
      EXPECT_LT(ref::max_relative_error(analytic_input, numeric_input), 1e-4);
    }
  }
}

TEST(Backward, SparseInputGradientsMatchDense) {
  Rng rng(7);
  const Mlp net({10 + 3, 8, 8, 2}, rng);
  const auto in = mixed_input(10, 2, 3, 6, rng);
  const Matrix w = random_matrix(2, 6, rng);
  Mlp::Tape sparse_tape, dense_tape;
  net.forward(in.sparse, sparse_tape);
  const auto dense = InputBatch::from_dense(in.dense);
  net.forward(dense, dense_tape);
  const auto a = flatten(net.backward(in.sparse, sparse_tape, w));
  const auto b = flatten(net.backward(dense, dense_tape, w));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Backward, ReluAtZeroUsesZeroSubgradient) {
  auto net = Mlp::zeros({1, 1, 1});
  net.parameters()[0].weight(0, 0) = 1.0;
  net.parameters()[1].weight(0, 0) = 1.0;
  const auto input = InputBatch::from_dense(Matrix::Zero(1, 1));  // pre-activation exactly 0
  Mlp::Tape tape;
  net.forward(input, tape);
  const auto grads = net.backward(input, tape, Matrix::Ones(1, 1));
  EXPECT_EQ(grads[0].bias(0), 0.0);
  EXPECT_EQ(grads[0].weight(0, 0), 0.0);
}

TEST(Backward, RejectsShapeMismatch) {
  Rng rng(8);
  const Mlp net({3, 4, 2}, rng);
  const auto input = InputBatch::from_dense(Matrix::Zero(3, 2));
  Mlp::Tape tape;
  net.forward(input, tape);
  EXPECT_THROW(net.backward(input, tape, Matrix::Zero(2, 3)), std::invalid_argument);
  EXPECT_THROW(net.backward(input, Mlp::Tape{}, Matrix::Zero(2, 2)), std::invalid_argument);
}

TEST(Adam, ZeroGradientsLeaveParametersAndDecayMoments) {
  Rng rng(9);
  Mlp net({2, 3, 1}, rng);
  const Mlp before = net;
  auto state = AdamState::for_network(net, {0.1});
  state.first_moment[0].weight.setConstant(1.0);
  state.second_moment[0].weight.setConstant(1.0);
  adam_step(net, zeros_like(net.parameters()), state);
  // The pre-seeded moments move the first layer; zero-initialised ones do not.
  EXPECT_EQ(net.parameters()[1].weight, before.parameters()[1].weight);
  EXPECT_EQ(net.parameters()[1].bias, before.parameters()[1].bias);
  EXPECT_DOUBLE_EQ(state.first_moment[0].weight(0, 0), 0.9);
  EXPECT_DOUBLE_EQ(state.second_moment[0].weight(0, 0), 0.999);
  EXPECT_EQ(state.step, 1);

  Mlp fresh({2, 3, 1}, rng);
  const Mlp fresh_before = fresh;
  auto fresh_state = AdamState::for_network(fresh, {0.1});
  adam_step(fresh, zeros_like(fresh.parameters()), fresh_state);
  EXPECT_EQ(fresh, fresh_before);
}

TEST(Adam, FirstStepIsBoundedByTheLearningRate) {
  Rng rng(10);
  Mlp net({4, 5, 3}, rng);
  const auto before = flatten(net.parameters());
  auto state = AdamState::for_network(net, {0.01});
  ParameterSet grads = zeros_like(net.parameters());
  for (auto& layer : grads) {
    layer.weight = random_matrix(layer.weight.rows(), layer.weight.cols(), rng) * 100.0;
    layer.bias = random_matrix(layer.bias.size(), 1, rng).col(0) * 1e-3;
  }
  adam_step(net, grads, state);
  const auto after = flatten(net.parameters());
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_LE(std::abs(after[i] - before[i]), 0.01 * (1 + 1e-9));
}

TEST(Adam, MinimizesAScalarQuadraticLikeTheReference) {
  auto net = Mlp::zeros({1, 1});
  net.parameters()[0].bias(0) = 1.0;
  auto state = AdamState::for_network(net, {0.1});
  for (int t = 0; t < 200; ++t) {
    auto grads = zeros_like(net.parameters());
    grads[0].bias(0) = 2.0 * net.parameters()[0].bias(0);
    adam_step(net, grads, state);
  }
  const double w = net.parameters()[0].bias(0);
  EXPECT_LT(std::abs(w), 0.05);
  EXPECT_NEAR(w, ref::scalar_adam_quadratic(1.0, 0.1, 200), 1e-12);
}

TEST(Adam, RejectsNonFiniteGradientsWithoutTouchingState) {
  Rng rng(11);
  Mlp net({2, 2}, rng);
  const Mlp before = net;
  auto state = AdamState::for_network(net, {});
  auto grads = zeros_like(net.parameters());
  grads[0].weight(1, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(adam_step(net, grads, state), NonFiniteError);
  EXPECT_EQ(net, before);
  EXPECT_EQ(state.step, 0);
}

TEST(Polyak, FixedPointWhenTargetEqualsSource) {
  Rng rng(12);
  const Mlp source({3, 4, 2}, rng);
  TargetCopy target(source, 0.99);
  polyak_update(target, source);
  const auto a = flatten(target.net.parameters());
  const auto b = flatten(source.parameters());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
}

TEST(Polyak, ZeroTowardOne) {
  auto source = Mlp::zeros({1, 1});
  TargetCopy target(source, 0.99);
  source.parameters()[0].weight(0, 0) = 1.0;
  polyak_update(target, source);
  EXPECT_NEAR(target.net.parameters()[0].weight(0, 0), 0.01, 1e-15);
}

TEST(Polyak, GapShrinksGeometrically) {
  Rng rng(13);
  const Mlp source({3, 5, 2}, rng);
  TargetCopy target(Mlp({3, 5, 2}, rng), 0.99);
  auto gap = [&] {
    double g = 0.0;
    const auto a = flatten(target.net.parameters());
    const auto b = flatten(source.parameters());
    for (std::size_t i = 0; i < a.size(); ++i) g = std::max(g, std::abs(a[i] - b[i]));
    return g;
  };
  double previous = gap();
  for (int t = 0; t < 300; ++t) {
    polyak_update(target, source);
    const double current = gap();
    EXPECT_NEAR(current / previous, 0.99, 1e-6);
    previous = current;
  }
  EXPECT_EQ(target.net.layer_sizes(), source.layer_sizes());
}

TEST(Polyak, RejectsShapeMismatch) {
  TargetCopy target(Mlp::zeros({2, 2}), 0.9);
  EXPECT_THROW(polyak_update(target, Mlp::zeros({2, 3})), std::invalid_argument);
  EXPECT_THROW(TargetCopy(Mlp::zeros({2, 2}), 1.0), std::invalid_argument);
}

TEST(Serialization, NetworkRoundTripIsExact) {
  Rng rng(14);
  const Mlp net({5, 7, 3}, rng);
  std::stringstream buffer;
  BinaryWriter out(buffer);
  write_mlp(out, net);
  BinaryReader in(buffer);
  EXPECT_EQ(read_mlp(in), net);
}

TEST(Serialization, CorruptTagIsRejected) {
  std::stringstream buffer;
  BinaryWriter out(buffer);
  out.u32(0xdeadbeef);
  BinaryReader in(buffer);
  EXPECT_THROW(read_mlp(in), std::runtime_error);
}

TEST(Serialization, TruncatedStreamIsRejected) {
  Rng rng(15);
  std::stringstream buffer;
  BinaryWriter out(buffer);
  write_mlp(out, Mlp({5, 7, 3}, rng));
  std::string bytes = buffer.str();
  bytes.resize(bytes.size() / 2);
  std::stringstream half(bytes);
  BinaryReader in(half);
  EXPECT_THROW(read_mlp(in), std::runtime_error);
}
