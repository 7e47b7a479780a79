#include "tsf/graph_fusion/graph.hpp"

#include <cmath>

#include "tsf/numerics/flops.hpp"
#include "tsf/numerics/ops.hpp"

namespace tsf::graph_fusion {

using numerics::DimensionError;
using numerics::Shape;

EdgeMlp::EdgeMlp(const std::string& name, std::size_t channels, numerics::Rng& rng)
    : hidden(name + "/hidden", channels, std::max<std::size_t>(channels / 2, 1), rng),
      output(name + "/output", std::max<std::size_t>(channels / 2, 1), 1, rng) {
  output.bias.tensor.values_mut()[0] = 1.0;
}

Tensor EdgeMlp::operator()(const Tensor& pair_features) const {
  Shape out_shape = pair_features.shape();
  out_shape.pop_back();
  return numerics::tanh(output(numerics::relu(hidden(pair_features)))).reshape(out_shape);
}

void EdgeMlp::collect(numerics::ParameterList& out) {
  hidden.collect(out);
  output.collect(out);
}

Tensor pair_products(const Tensor& x) {
  if (x.rank() != 3) throw DimensionError("pair_products: expected [G, N, C]");
  const std::size_t g = x.dim(0), n = x.dim(1), c = x.dim(2);
  const std::size_t pairs = n * (n + 1) / 2;
  const auto xv = x.values();
  std::vector<double> out(g * pairs * c);
  for (std::size_t gi = 0; gi < g; ++gi) {
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j, ++p) {
        const double* a = xv.data() + (gi * n + i) * c;
        const double* b = xv.data() + (gi * n + j) * c;
        double* o = out.data() + (gi * pairs + p) * c;
        for (std::size_t k = 0; k < c; ++k) o[k] = a[k] * b[k];
      }
  }
  return Tensor::from_op({g, pairs, c}, std::move(out), {x},
                         [x, g, n, c, pairs](std::span<const double>, std::span<const double> grad) {
                           auto gx = x.grad_mut();
                           const auto xv = x.values();
                           for (std::size_t gi = 0; gi < g; ++gi) {
                             std::size_t p = 0;
                             for (std::size_t i = 0; i < n; ++i)
                               for (std::size_t j = i; j < n; ++j, ++p) {
                                 const double* go = grad.data() + (gi * pairs + p) * c;
                                 const double* a = xv.data() + (gi * n + i) * c;
                                 const double* b = xv.data() + (gi * n + j) * c;
                                 double* ga = gx.data() + (gi * n + i) * c;
                                 double* gb = gx.data() + (gi * n + j) * c;
                                 for (std::size_t k = 0; k < c; ++k) {
                                   ga[k] += go[k] * b[k];
                                   gb[k] += go[k] * a[k];
                                 }
                               }
                           }
                         });
}

Tensor symmetric_from_pairs(const Tensor& pairs, std::size_t n) {
  if (pairs.rank() != 2 || pairs.dim(1) != n * (n + 1) / 2) {
    throw DimensionError("symmetric_from_pairs: expected [G, N(N+1)/2]");
  }
  const std::size_t g = pairs.dim(0), np = pairs.dim(1);
  const auto pv = pairs.values();
  std::vector<double> out(g * n * n);
  for (std::size_t gi = 0; gi < g; ++gi) {
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j, ++p) {
        out[(gi * n + i) * n + j] = pv[gi * np + p];
        out[(gi * n + j) * n + i] = pv[gi * np + p];
      }
  }
  return Tensor::from_op({g, n, n}, std::move(out), {pairs},
                         [pairs, g, n, np](std::span<const double>, std::span<const double> grad) {
                           auto gp = pairs.grad_mut();
                           for (std::size_t gi = 0; gi < g; ++gi) {
                             std::size_t p = 0;
                             for (std::size_t i = 0; i < n; ++i)
                               for (std::size_t j = i; j < n; ++j, ++p) {
                                 gp[gi * np + p] += grad[(gi * n + i) * n + j];
                                 if (j != i) gp[gi * np + p] += grad[(gi * n + j) * n + i];
                               }
                           }
                         });
}

Tensor build_dynamic_adjacency(const Tensor& x, const EdgeMlp& mlp) {
  if (x.rank() == 2) return build_dynamic_adjacency(x.reshape({1, x.dim(0), x.dim(1)}), mlp).reshape({x.dim(0), x.dim(0)});
  if (x.rank() != 3) throw DimensionError("build_dynamic_adjacency: expected [G, N, C]");
  const std::size_t n = x.dim(1);
  if (n < 2) throw DimensionError("build_dynamic_adjacency: a graph needs at least 2 nodes");
  return symmetric_from_pairs(mlp(pair_products(x)), n);
}

Tensor propagate(const Tensor& a_in, const Tensor& x_in) {
  const bool single = x_in.rank() == 2;
  const Tensor a = single ? a_in.reshape({1, a_in.dim(0), a_in.dim(1)}) : a_in;
  const Tensor x = single ? x_in.reshape({1, x_in.dim(0), x_in.dim(1)}) : x_in;
  if (a.rank() != 3 || x.rank() != 3 || a.dim(0) != x.dim(0) || a.dim(1) != a.dim(2) ||
      a.dim(1) != x.dim(1)) {
    throw DimensionError("propagate: expected A [G, N, N] and X [G, N, C]");
  }
  const std::size_t g = x.dim(0), n = x.dim(1), c = x.dim(2);
  const auto av = a.values();
  const auto xv = x.values();
  std::vector<double> scale(g * n);
  std::vector<double> p(g * n * n);
  std::vector<double> out(xv.begin(), xv.end());
  for (std::size_t gi = 0; gi < g; ++gi) {
    const double* ag = av.data() + gi * n * n;
    double* s = scale.data() + gi * n;
    for (std::size_t i = 0; i < n; ++i) {
      double d = kDegreeEps;
      for (std::size_t j = 0; j < n; ++j) d += std::abs(ag[i * n + j]);
      s[i] = 1.0 / std::sqrt(d);
    }
    double* pg = p.data() + gi * n * n;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) pg[i * n + j] = s[i] * ag[i * n + j] * s[j];
    const double* xg = xv.data() + gi * n * c;
    double* og = out.data() + gi * n * c;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double w = pg[i * n + j];
        const double* xr = xg + j * c;
        double* orow = og + i * c;
        for (std::size_t k = 0; k < c; ++k) orow[k] += w * xr[k];
      }
  }
  numerics::FlopCounter::record(2.0 * static_cast<double>(g * n * n * c));
  Tensor result = Tensor::from_op(
      {g, n, c}, std::move(out), {a, x},
      [a, x, g, n, c, scale = std::move(scale), p = std::move(p)](std::span<const double>,
                                                                  std::span<const double> grad) {
        const auto av = a.values();
        const auto xv = x.values();
        if (x.requires_grad()) {
          auto gx = x.grad_mut();
          for (std::size_t gi = 0; gi < g; ++gi) {
            const double* pg = p.data() + gi * n * n;
            const double* gg = grad.data() + gi * n * c;
            double* gxg = gx.data() + gi * n * c;
            for (std::size_t k = 0; k < n * c; ++k) gxg[k] += gg[k];
            for (std::size_t i = 0; i < n; ++i)
              for (std::size_t j = 0; j < n; ++j) {
                const double w = pg[i * n + j];
                const double* gr = gg + i * c;
                double* dst = gxg + j * c;
                for (std::size_t k = 0; k < c; ++k) dst[k] += w * gr[k];
              }
          }
        }
        if (a.requires_grad()) {
          auto ga = a.grad_mut();
          std::vector<double> dp(n * n), ds(n);
          for (std::size_t gi = 0; gi < g; ++gi) {
            const double* ag = av.data() + gi * n * n;
            const double* s = scale.data() + gi * n;
            const double* gg = grad.data() + gi * n * c;
            const double* xg = xv.data() + gi * n * c;
            for (std::size_t i = 0; i < n; ++i)
              for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < c; ++k) acc += gg[i * c + k] * xg[j * c + k];
                dp[i * n + j] = acc;
              }
            std::fill(ds.begin(), ds.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i)
              for (std::size_t j = 0; j < n; ++j) {
                ds[i] += dp[i * n + j] * ag[i * n + j] * s[j];
                ds[j] += dp[i * n + j] * ag[i * n + j] * s[i];
              }
            double* gag = ga.data() + gi * n * n;
            for (std::size_t i = 0; i < n; ++i) {
              // s = d^{-1/2}, so ds/dd = -s^3 / 2.
              const double dd = -0.5 * ds[i] * s[i] * s[i] * s[i];
              for (std::size_t j = 0; j < n; ++j) {
                const double aij = ag[i * n + j];
                const double sign = aij > 0.0 ? 1.0 : (aij < 0.0 ? -1.0 : 0.0);
                gag[i * n + j] += dp[i * n + j] * s[i] * s[j] + dd * sign;
              }
            }
          }
        }
      });
  return single ? result.reshape({n, c}) : result;
}

Tensor adaptive_filter_layer(const Tensor& x, const Tensor& adjacency, const Tensor& weight) {
  return numerics::relu(numerics::linear(propagate(adjacency, x), weight, Tensor()));
}

Eigen::MatrixXd propagation_matrix(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw DimensionError("propagation_matrix: adjacency must be square");
  const Eigen::VectorXd s =
      (a.cwiseAbs().rowwise().sum().array() + kDegreeEps).rsqrt().matrix();
  return s.asDiagonal() * a * s.asDiagonal();
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> graph_filters(const Eigen::MatrixXd& a) {
  const Eigen::MatrixXd p = propagation_matrix(a);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  return {eye + p, eye - p};
}

GraphSpectrum gft_analyze(const Eigen::MatrixXd& a, const Eigen::MatrixXd& x) {
  if (x.rows() != a.rows()) throw DimensionError("gft_analyze: signal rows must equal node count");
  const Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(a.rows(), a.cols()) - propagation_matrix(a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  GraphSpectrum out;
  out.eigenvalues = solver.eigenvalues();
  out.eigenvectors = solver.eigenvectors();
  out.coefficients = out.eigenvectors.transpose() * x;
  return out;
}

Eigen::MatrixXd to_matrix(const Tensor& t) {
  if (t.rank() != 2) throw DimensionError("to_matrix: expected a rank-2 tensor");
  Eigen::MatrixXd m(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) m(i, j) = t[i * t.dim(1) + j];
  return m;
}

Tensor from_matrix(const Eigen::MatrixXd& m) {
  std::vector<double> v(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
  return Tensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, std::move(v));
}

ModalityNodeFusion::ModalityNodeFusion(const std::string& name, const NodeFusionOptions& o,
                                       numerics::Rng& rng)
    : options(o) {
  if (o.mode == GraphMode::kOff) {
    squeeze = numerics::Linear(name + "/squeeze", o.channels, o.out_channels, rng);
    return;
  }
  if (o.mode == GraphMode::kDynamic) edge_mlp = EdgeMlp(name + "/edge_mlp", o.channels, rng);
  for (std::size_t l = 0; l < o.layers; ++l) {
    layer_weights.emplace_back(name + "/layer" + std::to_string(l) + "/weight",
                               numerics::he_normal({o.channels, o.channels}, o.channels, rng));
  }
  squeeze = numerics::Linear(name + "/squeeze", o.channels * (o.layers + 1), o.out_channels, rng);
}

NodeFusionOutput ModalityNodeFusion::forward(const Tensor& x) const {
  if (x.rank() != 4) throw DimensionError("modality node fusion: expected [B, N, C, L]");
  const std::size_t b = x.dim(0), n = x.dim(1), c = x.dim(2), len = x.dim(3);
  if (c != options.channels) {
    throw DimensionError("modality node fusion: expected " + std::to_string(options.channels) +
                         " channels, got " + std::to_string(c));
  }
  if (n < 2 && options.mode != GraphMode::kOff) {
    throw DimensionError("modality node fusion: degenerate graph with fewer than 2 nodes");
  }
  NodeFusionOutput out;
  // One graph per (sample, timestamp): [B, L, N, C] -> [B*L, N, C].
  const Tensor nodes = numerics::permute(x, {0, 3, 1, 2}).reshape({b * len, n, c});
  Tensor z;
  if (options.mode == GraphMode::kOff) {
    z = squeeze(numerics::mean(nodes, 1));
  } else {
    Tensor adj;
    if (options.mode == GraphMode::kDynamic) {
      adj = build_dynamic_adjacency(nodes, edge_mlp);
    } else {
      adj = Tensor::full({b * len, n, n}, 1.0);
    }
    out.adjacency = adj.detach().reshape({b, len, n, n});
    std::vector<Tensor> parts{nodes};
    Tensor h = nodes;
    for (const numerics::Parameter& w : layer_weights) {
      h = adaptive_filter_layer(h, adj, w.tensor);
      parts.push_back(h);
    }
    z = numerics::mean(squeeze(numerics::concat(parts, 2)), 1);
  }
  out.fused = numerics::permute(z.reshape({b, len, options.out_channels}), {0, 2, 1});
  return out;
}

void ModalityNodeFusion::collect(numerics::ParameterList& out) {
  if (options.mode == GraphMode::kDynamic) edge_mlp.collect(out);
  for (numerics::Parameter& w : layer_weights) out.push_back(&w);
  squeeze.collect(out);
}

}  // namespace tsf::graph_fusion
