#include "elevodom/so3.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "elevodom/error.hpp"

namespace elevodom {
namespace so3 {

Mat3 skew(const Vec3& a) {
  Mat3 S;
  S << 0.0, -a.z(), a.y(),
       a.z(), 0.0, -a.x(),
       -a.y(), a.x(), 0.0;
  return S;
}

Mat3 exp(const Vec3& theta) {
  const double angle2 = theta.squaredNorm();
  const double angle = std::sqrt(angle2);
  const Mat3 W = skew(theta);
  if (angle < kSmallAngle) {
    return Mat3::Identity() + W + 0.5 * W * W;
  }
  return Mat3::Identity() + (std::sin(angle) / angle) * W +
         ((1.0 - std::cos(angle)) / angle2) * W * W;
}

bool is_rotation(const Mat3& R, double tol) {
  if (!R.allFinite()) return false;
  return (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(R.determinant() - 1.0) <= tol;
}

Vec3 log(const Mat3& R) {
  if (!is_rotation(R, 1e-6)) {
    throw Error(ErrorCode::kInvalidRotation, "log_so3: matrix is not a rotation");
  }
  const Vec3 vee(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  const double sin_angle = 0.5 * vee.norm();
  const double cos_angle = 0.5 * (R.trace() - 1.0);
  const double angle = std::atan2(sin_angle, cos_angle);

  if (angle < kSmallAngle) {
    return 0.5 * (1.0 + angle * angle / 6.0) * vee;
  }
  if (cos_angle > -0.99) {
    return (0.5 * angle / sin_angle) * vee;
  }
  // Near pi the antisymmetric part vanishes; recover the axis from the
  // symmetric part, (R + R^T)/2 = cos I + (1 - cos) a a^T.
  const Mat3 sym = 0.5 * (R + R.transpose()) - cos_angle * Mat3::Identity();
  Eigen::Index col = 0;
  sym.diagonal().maxCoeff(&col);
  Vec3 axis = sym.col(col).normalized();
  if (axis.dot(vee) < 0.0) axis = -axis;
  return angle * axis;
}

Vec3 s2_oplus(const Vec3& n, const Vec3& delta) {
  if (!n.allFinite() || std::abs(n.norm() - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidNormal, "s2_oplus: normal is not unit length");
  }
  const Vec3 tangent = delta - n * n.dot(delta);
  return (n + tangent).normalized();
}

Mat3 orthonormalize(const Mat3& R) {
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 U = svd.matrixU();
  const Mat3 V = svd.matrixV();
  if ((U * V.transpose()).determinant() < 0.0) U.col(2) *= -1.0;
  return U * V.transpose();
}

}  // namespace so3

Pose pose_from_twist(const Twist& tau) {
  return {so3::exp(tau.head<3>()), tau.tail<3>()};
}

Twist twist_from_pose(const Pose& T) {
  Twist tau;
  tau << so3::log(T.R), T.p;
  return tau;
}

}  // namespace elevodom
