#pragma once

#include "elevodom/so3.hpp"

namespace elevodom {

/// Reference-body pose with error-state covariance over (dtheta, dp).
/// Rotation errors are right perturbations: R = R_hat * Exp(dtheta).
struct EkfState {
  Mat3 R = Mat3::Identity();
  Vec3 p = Vec3::Zero();
  Mat6 P = Mat6::Zero();
};

/// Camera pose relative to the reference body.
struct Extrinsics {
  Mat3 R_IC = Mat3::Identity();
  Vec3 p_IC = Vec3::Zero();
};

/// Body-frame motion over one proprioceptive interval. Q covers the
/// (rotation, translation) increment noise, rotation first.
struct OdometryIncrement {
  double t = 0.0;  // end of the interval, s
  double dt = 0.0;
  Mat3 delta_R = Mat3::Identity();
  Vec3 delta_p = Vec3::Zero();
  Mat6 Q = Mat6::Zero();
};

struct IcpMeasurement {
  Pose camera_pose;
  Mat6 R_meas = Mat6::Zero();
};

struct EkfConfig {
  /// Chi-square(6) probability used to gate ICP innovations.
  double gate_probability = 0.999;
};

/// Innovation threshold for the given gate probability.
double innovation_gate_threshold(double gate_probability);

EkfState predict(const EkfState& state, const OdometryIncrement& inc);

Pose camera_pose_from_state(const EkfState& state, const Extrinsics& ext);

/// M Var(tau) M^T with M = [[R_C^T, 0], [-skew(p_C), I]], symmetrized.
Mat6 icp_measurement_covariance(const Mat6& var_tau, const Pose& icp_camera_pose);

struct UpdateOutcome {
  EkfState state;
  Vec6 innovation = Vec6::Zero();
  double nis = 0.0;  // normalized innovation squared
  bool applied = false;
};

/// Measurement Jacobian of the camera pose w.r.t. (dtheta_I, dp_I).
Mat6 icp_measurement_jacobian(const EkfState& state, const Extrinsics& ext);

/// Joseph-form update with the registered camera pose. When the NIS exceeds
/// the gate threshold the prior state is returned with applied == false.
UpdateOutcome update_with_icp(const EkfState& state, const Extrinsics& ext,
                              const IcpMeasurement& meas, double gate_threshold);

}  // namespace elevodom
