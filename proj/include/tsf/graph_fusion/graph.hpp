#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>

#include "tsf/numerics/layers.hpp"

namespace tsf::graph_fusion {

using numerics::Tensor;

inline constexpr double kDegreeEps = 1e-8;

/// Two-layer perceptron C -> C/2 (ReLU) -> 1 followed by tanh, applied to x_i ⊙ x_j.
class EdgeMlp {
 public:
  EdgeMlp() = default;
  /// The output bias starts at 1 so that the initial graph is close to fully connected.
  EdgeMlp(const std::string& name, std::size_t channels, numerics::Rng& rng);

  /// Edge weights in (-1, 1) for pair features [..., C] -> [...].
  Tensor operator()(const Tensor& pair_features) const;
  void collect(numerics::ParameterList& out);

  numerics::Linear hidden;
  numerics::Linear output;
};

/// x_i ⊙ x_j for every unordered pair i <= j of X [G, N, C] -> [G, N(N+1)/2, C].
Tensor pair_products(const Tensor& x);
/// Expands per-pair values [G, N(N+1)/2] into symmetric matrices [G, N, N].
Tensor symmetric_from_pairs(const Tensor& pairs, std::size_t nodes);

/// Signed adjacency Ã_ij = tanh(mlp(x_i ⊙ x_j)) for X [G, N, C] -> [G, N, N]
/// (rank-2 X [N, C] gives [N, N]). Symmetric by construction.
Tensor build_dynamic_adjacency(const Tensor& x, const EdgeMlp& mlp);

/// X + D^{-1/2} Ã D^{-1/2} X per graph, with D_ii = Σ_j |Ã_ij| + ε.
/// A is [G, N, N] and X is [G, N, C] (or rank 2 for a single graph).
Tensor propagate(const Tensor& adjacency, const Tensor& x);

/// relu((X + P X) W); `weight` is stored as [C_out, C_in] like a linear layer.
Tensor adaptive_filter_layer(const Tensor& x, const Tensor& adjacency, const Tensor& weight);

/// D^{-1/2} Ã D^{-1/2} with the signed degree |Ã| row sums + ε.
Eigen::MatrixXd propagation_matrix(const Eigen::MatrixXd& adjacency);

/// F_L = I + P, F_H = I - P.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> graph_filters(const Eigen::MatrixXd& adjacency);

struct GraphSpectrum {
  Eigen::VectorXd eigenvalues;   // of I - P, ascending
  Eigen::MatrixXd eigenvectors;  // columns, orthonormal
  Eigen::MatrixXd coefficients;  // Uᵀ X
};

/// Graph Fourier analysis of node signals X [N, C] on the signed graph.
GraphSpectrum gft_analyze(const Eigen::MatrixXd& adjacency, const Eigen::MatrixXd& x);

Eigen::MatrixXd to_matrix(const Tensor& t);
Tensor from_matrix(const Eigen::MatrixXd& m);

enum class GraphMode { kDynamic, kStatic, kOff };

struct NodeFusionOptions {
  std::size_t channels = 128;
  std::size_t out_channels = 128;
  std::size_t layers = 2;
  GraphMode mode = GraphMode::kDynamic;
};

struct NodeFusionOutput {
  Tensor fused;      // [B, C_out, L]
  Tensor adjacency;  // [B, L, N, N] (values only; undefined when the graph is off)
};

/// Per timestamp: dynamic adjacency, stacked adaptive filter layers sharing Ã,
/// 1x1 squeeze of concat(X, Y_1, ..., Y_k) and the mean over nodes.
/// kStatic fixes Ã to all ones; kOff replaces the block by the node mean
/// followed by the squeeze (C -> C_out).
class ModalityNodeFusion {
 public:
  ModalityNodeFusion() = default;
  ModalityNodeFusion(const std::string& name, const NodeFusionOptions& options, numerics::Rng& rng);

  /// X is [B, N, C, L].
  NodeFusionOutput forward(const Tensor& x) const;
  void collect(numerics::ParameterList& out);

  NodeFusionOptions options;
  EdgeMlp edge_mlp;
  std::vector<numerics::Parameter> layer_weights;
  numerics::Linear squeeze;
};

}  // namespace tsf::graph_fusion
