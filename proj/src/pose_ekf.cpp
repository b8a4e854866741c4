#include "elevodom/pose_ekf.hpp"

#include <Eigen/Cholesky>
#include <boost/math/distributions/chi_squared.hpp>

#include "elevodom/error.hpp"

namespace elevodom {

double innovation_gate_threshold(double gate_probability) {
  if (!(gate_probability > 0.0 && gate_probability < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "gate probability must be in (0, 1)");
  }
  return boost::math::quantile(boost::math::chi_squared(6.0), gate_probability);
}

EkfState predict(const EkfState& state, const OdometryIncrement& inc) {
  Mat6 F = Mat6::Identity();
  F.topLeftCorner<3, 3>() = inc.delta_R.transpose();
  F.bottomLeftCorner<3, 3>() = -state.R * so3::skew(inc.delta_p);
  Mat6 G = Mat6::Identity();
  G.bottomRightCorner<3, 3>() = state.R;

  EkfState next;
  next.p = state.p + state.R * inc.delta_p;
  next.R = so3::orthonormalize(state.R * inc.delta_R);
  next.P = F * state.P * F.transpose() + G * inc.Q * G.transpose();
  next.P = 0.5 * (next.P + next.P.transpose());
  return next;
}

Pose camera_pose_from_state(const EkfState& state, const Extrinsics& ext) {
  return {state.R * ext.R_IC, state.p + state.R * ext.p_IC};
}

Mat6 icp_measurement_covariance(const Mat6& var_tau, const Pose& icp_camera_pose) {
  Mat6 M = Mat6::Zero();
  M.topLeftCorner<3, 3>() = icp_camera_pose.R.transpose();
  M.bottomLeftCorner<3, 3>() = -so3::skew(icp_camera_pose.p);
  M.bottomRightCorner<3, 3>() = Mat3::Identity();
  const Mat6 out = M * var_tau * M.transpose();
  return 0.5 * (out + out.transpose());
}

Mat6 icp_measurement_jacobian(const EkfState& state, const Extrinsics& ext) {
  Mat6 H = Mat6::Zero();
  H.topLeftCorner<3, 3>() = ext.R_IC.transpose();
  H.bottomLeftCorner<3, 3>() = -state.R * so3::skew(ext.p_IC);
  H.bottomRightCorner<3, 3>() = Mat3::Identity();
  return H;
}

UpdateOutcome update_with_icp(const EkfState& state, const Extrinsics& ext,
                              const IcpMeasurement& meas, double gate_threshold) {
  const Pose predicted = camera_pose_from_state(state, ext);
  UpdateOutcome out;
  out.state = state;
  out.innovation.head<3>() = so3::log(predicted.R.transpose() * meas.camera_pose.R);
  out.innovation.tail<3>() = meas.camera_pose.p - predicted.p;

  const Mat6 H = icp_measurement_jacobian(state, ext);
  Mat6 S = H * state.P * H.transpose() + meas.R_meas;
  S = 0.5 * (S + S.transpose());
  const Eigen::LDLT<Mat6> S_ldlt(S);
  if (S_ldlt.info() != Eigen::Success || !S.allFinite()) {
    throw Error(ErrorCode::kSingularSystem, "update_with_icp: innovation covariance is singular");
  }
  out.nis = out.innovation.dot(S_ldlt.solve(out.innovation));
  if (!(out.nis <= gate_threshold)) return out;

  // K = P H^T S^-1, computed as (S^-1 H P)^T since S and P are symmetric.
  const Eigen::Matrix<double, 6, 6> K = S_ldlt.solve(H * state.P).transpose();
  const Vec6 dx = K * out.innovation;
  out.state.R = so3::orthonormalize(state.R * so3::exp(dx.head<3>()));
  out.state.p = state.p + dx.tail<3>();
  const Mat6 IKH = Mat6::Identity() - K * H;
  Mat6 P = IKH * state.P * IKH.transpose() + K * meas.R_meas * K.transpose();
  out.state.P = 0.5 * (P + P.transpose());
  out.applied = true;
  return out;
}

}  // namespace elevodom
