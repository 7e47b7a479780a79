#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/gradcheck.hpp"
#include "tsf/graph_fusion/graph.hpp"
#include "tsf/numerics/ops.hpp"

using namespace tsf::graph_fusion;
using namespace tsf::numerics;
using tsf::testing::grad_check;
using tsf::testing::random_tensor;

namespace {

Eigen::MatrixXd random_signed_adjacency(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) a(i, j) = a(j, i) = d(rng);
  return a;
}

Eigen::MatrixXd random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

// Ã_ij = tanh(w2 · relu(W1 (x_i ⊙ x_j) + b1) + b2), evaluated one pair at a time.
Eigen::MatrixXd pairwise_oracle(const Eigen::MatrixXd& x, const EdgeMlp& mlp) {
  const Eigen::MatrixXd w1 = to_matrix(mlp.hidden.weight.tensor);
  const auto b1 = mlp.hidden.bias.tensor.values();
  const Eigen::MatrixXd w2 = to_matrix(mlp.output.weight.tensor);
  const double b2 = mlp.output.bias.tensor[0];
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::VectorXd feat = x.row(i).cwiseProduct(x.row(j)).transpose();
      Eigen::VectorXd h = w1 * feat;
      for (Eigen::Index k = 0; k < h.size(); ++k) h(k) = std::max(0.0, h(k) + b1[k]);
      a(i, j) = std::tanh((w2 * h)(0) + b2);
    }
  return a;
}

void zero_parameters(EdgeMlp& mlp) {
  ParameterList ps;
  mlp.collect(ps);
  for (Parameter* p : ps)
    for (double& v : p->tensor.values_mut()) v = 0.0;
}

Eigen::MatrixXd relu_m(const Eigen::MatrixXd& m) { return m.cwiseMax(0.0); }

}  // namespace

TEST(DynamicAdjacency, SymmetricAndBounded) {
  Rng rng(3);
  EdgeMlp mlp("e", 16, rng);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Tensor x = random_tensor({4, 6, 16}, seed, false, 0.5);
    const Tensor a = build_dynamic_adjacency(x, mlp);
    ASSERT_EQ(a.shape(), (Shape{4, 6, 6}));
    for (std::size_t g = 0; g < 4; ++g)
      for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) {
          EXPECT_EQ(a[(g * 6 + i) * 6 + j], a[(g * 6 + j) * 6 + i]);
          EXPECT_LT(std::abs(a[(g * 6 + i) * 6 + j]), 1.0);
        }
  }
  // Large activations saturate tanh to exactly ±1 in double precision.
  const Tensor big = build_dynamic_adjacency(random_tensor({2, 5, 16}, 9, false, 10.0), mlp);
  for (double v : big.values()) EXPECT_LE(std::abs(v), 1.0);
}

TEST(DynamicAdjacency, ZeroMlpGivesZeroGraph) {
  Rng rng(4);
  EdgeMlp mlp("e", 8, rng);
  zero_parameters(mlp);
  const Tensor a = build_dynamic_adjacency(random_tensor({5, 8}, 1, false), mlp);
  for (double v : a.values()) EXPECT_EQ(v, 0.0);
}

TEST(DynamicAdjacency, MatchesPairwiseOracle) {
  Rng rng(5);
  EdgeMlp mlp("e", 10, rng);
  const Tensor x = random_tensor({3, 10}, 7, false);
  const Eigen::MatrixXd got = to_matrix(build_dynamic_adjacency(x, mlp));
  const Eigen::MatrixXd want = pairwise_oracle(to_matrix(x), mlp);
  EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DynamicAdjacency, RejectsSingleNode) {
  Rng rng(5);
  EdgeMlp mlp("e", 4, rng);
  EXPECT_THROW(build_dynamic_adjacency(random_tensor({1, 4}, 1, false), mlp), DimensionError);
}

TEST(GraphFilters, SumToTwiceIdentity) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto [fl, fh] = graph_filters(random_signed_adjacency(7, seed));
    const Eigen::MatrixXd two = 2.0 * Eigen::MatrixXd::Identity(7, 7);
    EXPECT_EQ((fl + fh - two).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(GraphFilters, TwoNodeLaplacianSpectrum) {
  Eigen::MatrixXd a(2, 2);
  a << 0, 1, 1, 0;
  const auto [fl, fh] = graph_filters(a);
  Eigen::MatrixXd lap(2, 2);
  lap << 1, -1, -1, 1;
  EXPECT_LT((fh - lap).cwiseAbs().maxCoeff(), 1e-7);
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(fh).eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    EXPECT_GE(ev(i), -1e-12);
    EXPECT_LE(ev(i), 2.0 + 1e-12);
  }
}

TEST(GraphFilters, SignedSpectrumWithinBounds) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::size_t n = 2 + seed % 9;
    const auto [fl, fh] = graph_filters(random_signed_adjacency(n, 100 + seed));
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(fh).eigenvalues();
    EXPECT_GE(ev.minCoeff(), -1e-9);
    EXPECT_LE(ev.maxCoeff(), 2.0 + 1e-9);
  }
}

TEST(AdaptiveFilter, ZeroGraphIsPlainProjection) {
  const Tensor x = random_tensor({5, 6}, 1, false);
  const Tensor w = random_tensor({6, 6}, 2, false);
  const Tensor y = adaptive_filter_layer(x, Tensor::zeros({5, 5}), w);
  const Eigen::MatrixXd want = relu_m(to_matrix(x) * to_matrix(w).transpose());
  EXPECT_LT((to_matrix(y) - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AdaptiveFilter, HomogeneousSmoothing) {
  std::vector<double> row = tsf::testing::random_values(8, 3);
  std::vector<double> xs;
  for (int i = 0; i < 4; ++i) xs.insert(xs.end(), row.begin(), row.end());
  const Tensor x({4, 8}, xs);
  const Tensor y = propagate(Tensor::full({4, 4}, 0.7), x);
  for (std::size_t i = 1; i < 4; ++i)
    for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(y[i * 8 + k], y[k], 1e-14);
}

TEST(AdaptiveFilter, ComplementaryMixEqualsSignedPropagation) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Eigen::MatrixXd a = random_signed_adjacency(6, seed);
    const Eigen::MatrixXd x = random_matrix(6, 5, 50 + seed);
    const double al = u(rng);
    const double ah = 1.0 - al;
    const auto [fl, fh] = graph_filters(a);
    const Eigen::MatrixXd mixed = al * fl * x + ah * fh * x;
    const Eigen::MatrixXd signed_form = x + (al - ah) * propagation_matrix(a) * x;
    EXPECT_LT((mixed - signed_form).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(AdaptiveFilter, PropagateMatchesMatrixForm) {
  const Eigen::MatrixXd a = random_signed_adjacency(5, 4);
  const Eigen::MatrixXd x = random_matrix(5, 3, 8);
  const Tensor y = propagate(from_matrix(a), from_matrix(x));
  const Eigen::MatrixXd want = x + propagation_matrix(a) * x;
  EXPECT_LT((to_matrix(y) - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AdaptiveFilter, PropagateGradients) {
  Tensor a = random_tensor({2, 4, 4}, 1, true, 0.5);
  Tensor x = random_tensor({2, 4, 3}, 2);
  const Tensor probe = random_tensor({2, 4, 3}, 3, false);
  const auto r = grad_check([&] { return sum(mul(propagate(a, x), probe)); }, {a, x});
  EXPECT_LT(r.max_rel_error, 1e-5);
}

TEST(AdaptiveFilter, LayerGradientsThroughAdjacency) {
  Rng rng(11);
  EdgeMlp mlp("e", 6, rng);
  Tensor x = random_tensor({3, 4, 6}, 4);
  Tensor w = random_tensor({6, 6}, 5);
  const Tensor probe = random_tensor({3, 4, 6}, 6, false);
  ParameterList ps;
  mlp.collect(ps);
  std::vector<Tensor> inputs{x, w};
  for (Parameter* p : ps) inputs.push_back(p->tensor);
  const auto r = grad_check(
      [&] { return sum(mul(adaptive_filter_layer(x, build_dynamic_adjacency(x, mlp), w), probe)); },
      inputs);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(NodeFusion, IdenticalNodesGiveNodeOutput) {
  Rng rng(12);
  NodeFusionOptions o{8, 5, 2, GraphMode::kDynamic};
  ModalityNodeFusion block("g", o, rng);
  const std::vector<double> node = tsf::testing::random_values(8 * 6, 1);
  std::vector<double> xs(node);
  xs.insert(xs.end(), node.begin(), node.end());
  const Tensor out = block.forward(Tensor({1, 2, 8, 6}, xs)).fused;
  // With both nodes equal, the node mean is the per-node squeeze output.
  const Tensor xt = permute(Tensor({1, 8, 6}, node), {0, 2, 1});
  Tensor a = build_dynamic_adjacency(concat({xt.reshape({6, 1, 8}), xt.reshape({6, 1, 8})}, 1),
                                     block.edge_mlp);
  Tensor two = concat({xt.reshape({6, 1, 8}), xt.reshape({6, 1, 8})}, 1);
  Tensor y1 = adaptive_filter_layer(two, a, block.layer_weights[0].tensor);
  Tensor y2 = adaptive_filter_layer(y1, a, block.layer_weights[1].tensor);
  const Tensor z = block.squeeze(concat({two, y1, y2}, 2));
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t c = 0; c < 5; ++c) {
      EXPECT_NEAR(out[c * 6 + t], z[(t * 2 + 0) * 5 + c], 1e-12);
      EXPECT_NEAR(out[c * 6 + t], z[(t * 2 + 1) * 5 + c], 1e-12);
    }
}

TEST(NodeFusion, TimestampPermutationEquivariance) {
  Rng rng(13);
  ModalityNodeFusion block("g", {6, 4, 2, GraphMode::kDynamic}, rng);
  const std::size_t b = 2, n = 3, c = 6, len = 7;
  const Tensor x = random_tensor({b, n, c, len}, 5, false);
  const std::vector<std::size_t> perm{3, 0, 6, 1, 5, 2, 4};
  std::vector<double> xp(x.numel());
  for (std::size_t i = 0; i < b * n * c; ++i)
    for (std::size_t t = 0; t < len; ++t) xp[i * len + t] = x[i * len + perm[t]];
  const Tensor y = block.forward(x).fused;
  const Tensor yp = block.forward(Tensor({b, n, c, len}, xp)).fused;
  for (std::size_t i = 0; i < b * 4; ++i)
    for (std::size_t t = 0; t < len; ++t) EXPECT_NEAR(yp[i * len + t], y[i * len + perm[t]], 1e-12);
}

TEST(NodeFusion, MatchesScriptedComposition) {
  Rng rng(14);
  ModalityNodeFusion block("g", {4, 3, 2, GraphMode::kDynamic}, rng);
  const std::size_t n = 2, c = 4, len = 8;
  const Tensor x = random_tensor({1, n, c, len}, 6, false);
  const NodeFusionOutput out = block.forward(x);
  const Eigen::MatrixXd w0 = to_matrix(block.layer_weights[0].tensor);
  const Eigen::MatrixXd w1 = to_matrix(block.layer_weights[1].tensor);
  const Eigen::MatrixXd ws = to_matrix(block.squeeze.weight.tensor);
  const auto bs = block.squeeze.bias.tensor.values();
  for (std::size_t t = 0; t < len; ++t) {
    Eigen::MatrixXd xt(n, c);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < c; ++k) xt(i, k) = x[(i * c + k) * len + t];
    const Eigen::MatrixXd a = pairwise_oracle(xt, block.edge_mlp);
    const Eigen::MatrixXd p = propagation_matrix(a);
    const Eigen::MatrixXd y1 = relu_m((xt + p * xt) * w0.transpose());
    const Eigen::MatrixXd y2 = relu_m((y1 + p * y1) * w1.transpose());
    Eigen::MatrixXd cat(n, 3 * c);
    cat << xt, y1, y2;
    Eigen::MatrixXd z = cat * ws.transpose();
    for (Eigen::Index i = 0; i < z.rows(); ++i)
      for (Eigen::Index k = 0; k < z.cols(); ++k) z(i, k) += bs[k];
    const Eigen::VectorXd mean = z.colwise().mean().transpose();
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(out.fused[k * len + t], mean(k), 1e-12);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        EXPECT_NEAR(out.adjacency[(t * n + i) * n + j], a(i, j), 1e-12);
  }
}

TEST(NodeFusion, AblationModesShapes) {
  for (GraphMode m : {GraphMode::kDynamic, GraphMode::kStatic, GraphMode::kOff}) {
    Rng rng(15);
    ModalityNodeFusion block("g", {6, 5, 2, m}, rng);
    const Tensor y = block.forward(random_tensor({2, 4, 6, 3}, 1, false)).fused;
    EXPECT_EQ(y.shape(), (Shape{2, 5, 3}));
  }
}

TEST(NodeFusion, OffModeIsSqueezedNodeMean) {
  Rng rng(16);
  ModalityNodeFusion block("g", {3, 2, 2, GraphMode::kOff}, rng);
  const Tensor x = random_tensor({1, 2, 3, 1}, 2, false);
  const Tensor y = block.forward(x).fused;
  const Eigen::MatrixXd w = to_matrix(block.squeeze.weight.tensor);
  Eigen::VectorXd m(3);
  for (std::size_t k = 0; k < 3; ++k) m(k) = 0.5 * (x[k] + x[3 + k]);
  const Eigen::VectorXd want = w * m;
  for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(y[k], want(k) + block.squeeze.bias.tensor[k], 1e-12);
}

TEST(NodeFusion, RejectsDegenerateGraphAndBadChannels) {
  Rng rng(17);
  ModalityNodeFusion block("g", {4, 4, 2, GraphMode::kDynamic}, rng);
  EXPECT_THROW(block.forward(random_tensor({1, 1, 4, 3}, 1, false)), DimensionError);
  EXPECT_THROW(block.forward(random_tensor({1, 2, 5, 3}, 1, false)), DimensionError);
}

TEST(NodeFusion, Gradients) {
  Rng rng(18);
  ModalityNodeFusion block("g", {4, 3, 2, GraphMode::kDynamic}, rng);
  Tensor x = random_tensor({2, 3, 4, 2}, 3);
  const Tensor probe = random_tensor({2, 3, 2}, 4, false);
  ParameterList ps;
  block.collect(ps);
  std::vector<Tensor> inputs{x};
  for (Parameter* p : ps) inputs.push_back(p->tensor);
  const auto r = grad_check([&] { return sum(mul(block.forward(x).fused, probe)); }, inputs);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(Gft, Reconstruction) {
  const Eigen::MatrixXd a = random_signed_adjacency(6, 21);
  const Eigen::MatrixXd x = random_matrix(6, 4, 22);
  const GraphSpectrum s = gft_analyze(a, x);
  EXPECT_LT((s.eigenvectors * s.coefficients - x).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Gft, ConstantSignalOnLowestFrequency) {
  Eigen::MatrixXd ring = Eigen::MatrixXd::Zero(6, 6);
  for (int i = 0; i < 6; ++i) ring(i, (i + 1) % 6) = ring((i + 1) % 6, i) = 1.0;
  const GraphSpectrum s = gft_analyze(ring, Eigen::MatrixXd::Ones(6, 1));
  // The degree offset ε shifts the lowest eigenvalue to ε / (d + ε).
  EXPECT_NEAR(s.eigenvalues(0), 0.0, 1e-8);
  const double total = s.coefficients.squaredNorm();
  EXPECT_GT(s.coefficients(0, 0) * s.coefficients(0, 0) / total, 1.0 - 1e-9);

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.5, 1.0);
  Eigen::MatrixXd w(8, 8);
  for (int i = 0; i < 8; ++i)
    for (int j = i; j < 8; ++j) w(i, j) = w(j, i) = u(rng);
  const GraphSpectrum sw = gft_analyze(w, Eigen::MatrixXd::Ones(8, 1));
  EXPECT_NEAR(sw.eigenvalues(0), 0.0, 1e-7);
  EXPECT_GT(sw.coefficients(0, 0) * sw.coefficients(0, 0) / sw.coefficients.squaredNorm(), 0.95);
}

TEST(Gft, SpectralFilterMatchesLowPassMatrix) {
  const Eigen::MatrixXd a = random_signed_adjacency(7, 31);
  const Eigen::MatrixXd x = random_matrix(7, 3, 32);
  const GraphSpectrum s = gft_analyze(a, x);
  const Eigen::VectorXd h = (2.0 - s.eigenvalues.array()).matrix();
  const Eigen::MatrixXd filtered = s.eigenvectors * h.asDiagonal() * s.coefficients;
  EXPECT_LT((filtered - graph_filters(a).first * x).cwiseAbs().maxCoeff(), 1e-9);
}
