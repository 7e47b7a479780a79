#pragma once

#include <stdexcept>
#include <vector>

namespace tsf::imu_fusion {

using Rows = std::vector<std::vector<double>>;

struct ComplementaryFilterParams {
  double tau = 1.0;
  double dt = 0.02;

  /// τ / (τ + T); throws std::invalid_argument unless τ > 0 and T > 0.
  double alpha() const;
};

/// att(0) = grav_ang(0); att(t) = α (att(t-1) + gyro(t) T) + (1 - α) grav_ang(t).
Rows complementary_filter(const Rows& grav_ang, const Rows& gyro, const ComplementaryFilterParams& p);
/// Same recursion with α given directly (α in [0, 1]).
Rows complementary_filter(const Rows& grav_ang, const Rows& gyro, double alpha, double dt);

/// Roll = atan2(g_y, g_z), pitch = atan2(-g_x, sqrt(g_y² + g_z²)) per timestamp.
/// Input is [3][T]; output is [2][T]. Zero vectors are rejected.
Rows grav_to_angles(const Rows& gravity);

}  // namespace tsf::imu_fusion
