#include "tsf/imu_fusion/complementary.hpp"

#include <cmath>
#include <string>

namespace tsf::imu_fusion {

double ComplementaryFilterParams::alpha() const {
  if (!(tau > 0.0) || !(dt > 0.0)) {
    throw std::invalid_argument("complementary filter: tau and T must be positive");
  }
  return tau / (tau + dt);
}

Rows complementary_filter(const Rows& grav_ang, const Rows& gyro, const ComplementaryFilterParams& p) {
  return complementary_filter(grav_ang, gyro, p.alpha(), p.dt);
}

Rows complementary_filter(const Rows& grav_ang, const Rows& gyro, double alpha, double dt) {
  if (grav_ang.size() != gyro.size()) {
    throw std::invalid_argument("complementary filter: axis count mismatch");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("complementary filter: alpha must lie in [0, 1]");
  }
  Rows att(grav_ang.size());
  for (std::size_t a = 0; a < grav_ang.size(); ++a) {
    const auto& g = grav_ang[a];
    const auto& w = gyro[a];
    if (g.size() != w.size()) {
      throw std::invalid_argument("complementary filter: length mismatch on axis " +
                                  std::to_string(a));
    }
    auto& out = att[a];
    out.resize(g.size());
    if (g.empty()) continue;
    out[0] = g[0];
    for (std::size_t t = 1; t < g.size(); ++t) {
      out[t] = alpha * (out[t - 1] + w[t] * dt) + (1.0 - alpha) * g[t];
    }
  }
  return att;
}

Rows grav_to_angles(const Rows& gravity) {
  if (gravity.size() != 3) throw std::invalid_argument("grav_to_angles: expected 3 axes");
  const std::size_t n = gravity[0].size();
  if (gravity[1].size() != n || gravity[2].size() != n) {
    throw std::invalid_argument("grav_to_angles: axis length mismatch");
  }
  Rows out(2, std::vector<double>(n));
  for (std::size_t t = 0; t < n; ++t) {
    const double gx = gravity[0][t], gy = gravity[1][t], gz = gravity[2][t];
    if (gx == 0.0 && gy == 0.0 && gz == 0.0) {
      throw std::invalid_argument("grav_to_angles: zero gravity vector at t = " + std::to_string(t));
    }
    out[0][t] = std::atan2(gy, gz);
    out[1][t] = std::atan2(-gx, std::sqrt(gy * gy + gz * gz));
  }
  return out;
}

}  // namespace tsf::imu_fusion
