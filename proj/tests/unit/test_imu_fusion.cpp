#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support/gradcheck.hpp"
#include "tsf/imu_fusion/block.hpp"
#include "tsf/imu_fusion/complementary.hpp"
#include "tsf/numerics/ops.hpp"

using namespace tsf::imu_fusion;
using namespace tsf::numerics;
using tsf::testing::grad_check;
using tsf::testing::random_tensor;

namespace {

Rows random_rows(std::size_t a, std::size_t t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  Rows r(a, std::vector<double>(t));
  for (auto& row : r)
    for (double& v : row) v = d(rng);
  return r;
}

// Expanded form: α^t g(0) + Σ_{i=1..t} α^{t-i} ((1-α) g(i) + α w(i) T).
double expanded(const std::vector<double>& g, const std::vector<double>& w, double alpha, double dt,
                std::size_t t) {
  double s = std::pow(alpha, static_cast<double>(t)) * g[0];
  for (std::size_t i = 1; i <= t; ++i) {
    s += std::pow(alpha, static_cast<double>(t - i)) * ((1 - alpha) * g[i] + alpha * w[i] * dt);
  }
  return s;
}

}  // namespace

TEST(ComplementaryFilter, AlphaFromTimeConstant) {
  ComplementaryFilterParams p{0.98, 0.02};
  EXPECT_DOUBLE_EQ(p.alpha(), 0.98 / 1.0);
  EXPECT_THROW((ComplementaryFilterParams{0.0, 0.02}.alpha()), std::invalid_argument);
}

TEST(ComplementaryFilter, LimitCases) {
  const auto g = random_rows(2, 30, 1);
  const auto w = random_rows(2, 30, 2);
  const auto zero = complementary_filter(g, w, 0.0, 0.02);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t t = 0; t < 30; ++t) EXPECT_EQ(zero[a][t], g[a][t]);
  const auto one = complementary_filter(g, w, 1.0, 0.02);
  for (std::size_t a = 0; a < 2; ++a) {
    double integral = g[a][0];
    for (std::size_t t = 1; t < 30; ++t) {
      integral += w[a][t] * 0.02;
      EXPECT_NEAR(one[a][t], integral, 1e-12);
    }
  }
}

TEST(ComplementaryFilter, RecursiveMatchesExpandedForm) {
  for (double alpha : {0.1, 0.5, 0.9, 0.98}) {
    const auto g = random_rows(3, 20, 3);
    const auto w = random_rows(3, 20, 4);
    const auto att = complementary_filter(g, w, alpha, 0.01);
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t t = 0; t < 20; ++t)
        EXPECT_LT(std::abs(att[a][t] - expanded(g[a], w[a], alpha, 0.01, t)), 1e-10);
  }
}

TEST(ComplementaryFilter, LengthMismatchThrows) {
  Rows g(1, std::vector<double>(5)), w(1, std::vector<double>(4));
  EXPECT_THROW(complementary_filter(g, w, 0.5, 0.01), std::invalid_argument);
}

TEST(GravToAngles, ReferencePoses) {
  const double g = 9.81;
  auto a = grav_to_angles({{0.0}, {0.0}, {g}});
  EXPECT_EQ(a[0][0], 0.0);
  EXPECT_EQ(a[1][0], 0.0);
  a = grav_to_angles({{0.0}, {g}, {0.0}});
  EXPECT_DOUBLE_EQ(a[0][0], std::numbers::pi / 2);
  a = grav_to_angles({{g}, {0.0}, {0.0}});
  EXPECT_DOUBLE_EQ(a[1][0], -std::numbers::pi / 2);
  EXPECT_THROW(grav_to_angles({{0.0}, {0.0}, {0.0}}), std::invalid_argument);
}

class ImuBlockTest : public ::testing::Test {
 protected:
  Rng rng{42};
  ImuFusionBlock block{"imu", ImuFusionOptions{}, rng};
};

TEST_F(ImuBlockTest, AttentionSumsToOne) {
  auto out = block.forward(random_tensor({2, 3, 40}, 1, false), random_tensor({2, 3, 40}, 2, false),
                           random_tensor({2, 3, 40}, 3, false));
  ASSERT_EQ(out.attention.shape(), (Shape{2, 2, 40}));
  ASSERT_EQ(out.posture.shape(), (Shape{2, 64, 40}));
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < 40; ++t)
      EXPECT_NEAR(out.attention[(b * 2) * 40 + t] + out.attention[(b * 2 + 1) * 40 + t], 1.0, 1e-12);
}

TEST_F(ImuBlockTest, IdenticalBranchesGiveEvenAttention) {
  block.cconv_gyro = block.cconv_grav;
  auto x = random_tensor({1, 3, 16}, 4, false);
  auto out = block.forward(x, x, x);
  for (std::size_t i = 0; i < out.attention.numel(); ++i) EXPECT_EQ(out.attention[i], 0.5);
}

TEST_F(ImuBlockTest, MatchesScriptedComposition) {
  auto g = random_tensor({1, 3, 16}, 5, false);
  auto w = random_tensor({1, 3, 16}, 6, false);
  auto l = random_tensor({1, 3, 16}, 7, false);
  auto out = block.forward(g, w, l);
  auto cconv = [](const Tensor& x, const Conv1d& c, std::size_t o, std::size_t t) {
    const std::size_t width = c.width();
    double s = c.bias.tensor[o];
    for (std::size_t ci = 0; ci < 3; ++ci)
      for (std::size_t k = 0; k < width; ++k) {
        const long src = static_cast<long>(t + k) - static_cast<long>(width - 1);
        if (src >= 0) s += c.weight.tensor[(o * 3 + ci) * width + k] * x[ci * 16 + src];
      }
    return s;
  };
  for (std::size_t t = 0; t < 16; ++t) {
    double mu[2] = {block.attn_proj.bias.tensor[0], block.attn_proj.bias.tensor[0]};
    std::vector<double> vg(64), vy(64);
    for (std::size_t o = 0; o < 64; ++o) {
      vg[o] = cconv(g, block.cconv_grav, o, t);
      vy[o] = cconv(w, block.cconv_gyro, o, t);
      mu[0] += block.attn_proj.weight.tensor[o] * vg[o];
      mu[1] += block.attn_proj.weight.tensor[o] * vy[o];
    }
    const double e0 = std::exp(std::tanh(mu[0])), e1 = std::exp(std::tanh(mu[1]));
    const double a0 = e0 / (e0 + e1), a1 = e1 / (e0 + e1);
    EXPECT_LT(std::abs(out.attention[t] - a0), 1e-12);
    EXPECT_LT(std::abs(out.attention[16 + t] - a1), 1e-12);
    for (std::size_t o = 0; o < 64; ++o) {
      EXPECT_LT(std::abs(out.posture[o * 16 + t] - (a0 * vg[o] + a1 * vy[o])), 1e-12);
      EXPECT_LT(std::abs(out.motion[o * 16 + t] - cconv(l, block.cconv_lacc, o, t)), 1e-12);
    }
  }
}

TEST_F(ImuBlockTest, CausalInEverySensor) {
  auto g = random_tensor({1, 3, 24}, 8, false);
  auto w = random_tensor({1, 3, 24}, 9, false);
  auto l = random_tensor({1, 3, 24}, 10, false);
  auto base = block.forward(g, w, l);
  const std::size_t t0 = 13;
  for (int which = 0; which < 3; ++which) {
    Tensor gg = g.clone(), ww = w.clone(), ll = l.clone();
    Tensor& target = which == 0 ? gg : which == 1 ? ww : ll;
    for (std::size_t a = 0; a < 3; ++a) target.values_mut()[a * 24 + t0] += 5.0;
    auto pert = block.forward(gg, ww, ll);
    for (std::size_t o = 0; o < 64; ++o)
      for (std::size_t t = 0; t < t0; ++t) {
        EXPECT_EQ(pert.posture[o * 24 + t], base.posture[o * 24 + t]);
        EXPECT_EQ(pert.motion[o * 24 + t], base.motion[o * 24 + t]);
      }
  }
}

TEST_F(ImuBlockTest, KernelWidths) {
  EXPECT_EQ(block.cconv_grav.width(), block.cconv_gyro.width() + 1);
  EXPECT_EQ(block.cconv_lacc.width(), 11u);
}

TEST(ImuBlock, Gradients) {
  for (std::uint64_t s = 0; s < 3; ++s) {
    Rng rng(100 + s);
    ImuFusionOptions o;
    o.channels = 6;
    ImuFusionBlock block("imu", o, rng);
    auto g = random_tensor({2, 3, 14}, 11 + s);
    auto w = random_tensor({2, 3, 14}, 21 + s);
    auto l = random_tensor({2, 3, 14}, 31 + s);
    auto r1 = random_tensor({2, 6, 14}, 41 + s, false);
    auto r2 = random_tensor({2, 6, 14}, 51 + s, false);
    ParameterList params;
    block.collect(params);
    std::vector<Tensor> inputs{g, w, l};
    for (auto* p : params) inputs.push_back(p->tensor);
    auto res = grad_check(
        [&] {
          auto out = block.forward(g, w, l);
          return add(sum(mul(out.posture, r1)), sum(mul(out.motion, r2)));
        },
        inputs);
    EXPECT_LT(res.max_rel_error, 1e-4);
  }
}

TEST(ImuBlock, ShapeMismatchThrows) {
  Rng rng(1);
  ImuFusionBlock block("imu", ImuFusionOptions{}, rng);
  EXPECT_THROW(block.forward(Tensor::zeros({1, 3, 10}), Tensor::zeros({1, 3, 11}),
                             Tensor::zeros({1, 3, 10})),
               DimensionError);
}
