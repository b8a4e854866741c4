#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "elevodom/dataset_io.hpp"
#include "elevodom/key_value_config.hpp"
#include "elevodom/pose_ekf.hpp"

namespace elevodom::sim {

/// Axis-aligned solid block resting on the floor.
struct Box {
  double x0, x1, y0, y1;
  double height;
};

/// Solid wedge over a rectangular footprint whose top rises linearly from
/// h_start to h_end along `axis` (0 = x, 1 = y).
struct Ramp {
  double x0, x1, y0, y1;
  double h_start, h_end;
  int axis = 0;
};

struct TerrainSpec {
  double x_min = -2.0, x_max = 2.0, y_min = -2.0, y_max = 2.0;  // floor extents
  std::vector<Box> boxes;
  std::vector<Ramp> ramps;

  /// Terrain height (floor at 0); nullopt outside the floor extents.
  std::optional<double> height_at(double x, double y) const;
};

struct SensorSpec {
  double fov_h = 87.0 * std::numbers::pi / 180.0;  // rad
  double fov_v = 58.0 * std::numbers::pi / 180.0;  // rad
  int width = 160;
  int height = 90;
  double depth_noise_std = 0.005;        // m, along the ray
  bool noise_scales_with_range = false;  // std *= range^2 (range in m)
  double min_range = 0.1;
  double max_range = 3.0;
};

struct TrajectorySpec {
  std::vector<Vec2> waypoints;
  double speed = 0.25;                // m/s
  double turn_rate = std::numbers::pi / 4.0;  // rad/s, in-place turns between legs
  double body_height = 0.95;          // reference body above the ground, m
  double gait_height_amplitude = 0.01;
  double gait_pitch_amplitude = 0.05;  // rad
  double gait_frequency = 1.0;         // Hz
  double ground_smoothing = 0.15;      // half-width of the ground-height average, m
  /// Odometry bias per metre walked, in the heading-aligned frame.
  Vec3 drift_translation = Vec3::Zero();
  /// Rotation bias per metre walked, body-frame rotation vector.
  Vec3 drift_rotation = Vec3::Zero();
  double noise_translation = 0.0;  // m / sqrt(s)
  double noise_rotation = 0.0;     // rad / sqrt(s)
  /// Noise densities written to Q; negative means "use the true values".
  double reported_noise_translation = -1.0;
  double reported_noise_rotation = -1.0;
};

struct Rates {
  double odometry_hz = 50.0;
  int frame_every = 10;  // one depth frame per this many odometry ticks
};

struct Scenario {
  std::uint64_t seed = 1;
  TerrainSpec terrain;
  SensorSpec sensor;
  TrajectorySpec trajectory;
  Extrinsics extrinsics;
  Rates rates;
  Vec6 initial_covariance_diagonal = Vec6::Constant(1e-6);
};

/// Pinhole ray cast against the terrain with Gaussian range noise, in the
/// sensor frame (z forward, x right, y down). Deterministic per seed.
std::vector<Vec3> render_depth(const TerrainSpec& terrain, const Pose& camera_pose,
                               const SensorSpec& sensor, std::uint64_t seed);

/// Ray direction (unit, sensor frame) of pixel (u, v).
Vec3 pixel_ray(const SensorSpec& sensor, int u, int v);

/// True body poses sampled at the odometry rate, starting at t = 0.
std::vector<StampedPose> true_body_trajectory(const TerrainSpec& terrain,
                                              const TrajectorySpec& traj, double odometry_hz);

/// Ground truth, drifted odometry and rendered frames for a scenario.
Dataset generate_dataset(const Scenario& scenario);

Scenario scenario_from(const KeyValueConfig& kv);
KeyValueConfig to_key_value(const Scenario& scenario);

/// Knee-height camera pitched 50 degrees down, slightly to the right.
Extrinsics knee_camera_extrinsics();

/// 4 m arena with a 1.2 x 0.8 x 0.11 m box; starts on the box, descends three
/// times and climbs twice; +1 cm/m vertical odometry drift, 5 mm depth noise.
Scenario step_arena_scenario(std::uint64_t seed);

/// Floor with two perpendicular ramped steps (x-rising and y-rising), each
/// below the 20 degree normal gate, so every degree of freedom is observable.
TerrainSpec two_step_terrain();

}  // namespace elevodom::sim
