#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace elevodom {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Stacked (rotation vector, translation), rotation first.
using Twist = Vec6;

/// Rigid transform x -> R x + p.
struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 p = Vec3::Zero();

  static Pose Identity() { return {}; }

  Vec3 operator*(const Vec3& x) const { return R * x + p; }
  Pose operator*(const Pose& other) const { return {R * other.R, R * other.p + p}; }
  Pose inverse() const { return {R.transpose(), -(R.transpose() * p)}; }
};

namespace so3 {

/// Angles below this use the Taylor branch in exp/log.
inline constexpr double kSmallAngle = 1e-6;

Mat3 skew(const Vec3& a);

Mat3 exp(const Vec3& theta);

/// Inverse of exp. Throws ErrorCode::kInvalidRotation when R is not a
/// proper rotation within 1e-6.
Vec3 log(const Mat3& R);

/// Perturbation of a unit vector on S^2: normalize(n + (I - n n^T) delta).
/// Throws ErrorCode::kInvalidNormal when |n| deviates from 1 by more than 1e-9.
Vec3 s2_oplus(const Vec3& n, const Vec3& delta);

bool is_rotation(const Mat3& R, double tol = 1e-9);

/// Projects an almost-orthonormal matrix onto SO(3).
Mat3 orthonormalize(const Mat3& R);

}  // namespace so3

/// Maps (theta, p) to (Exp(theta), p); the SO(3) x R^3 chart used by
/// the registration correction, not the SE(3) exponential.
Pose pose_from_twist(const Twist& tau);
Twist twist_from_pose(const Pose& T);

}  // namespace elevodom
