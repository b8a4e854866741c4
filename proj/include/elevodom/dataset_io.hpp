#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "elevodom/pose_ekf.hpp"
#include "elevodom/so3.hpp"

namespace elevodom {

struct StampedPose {
  double t = 0.0;
  Pose pose;
};

struct Frame {
  double t = 0.0;
  std::vector<Vec3> points;  // sensor frame, m
};

/// In-memory form of a dataset directory:
///
///   dataset.cfg        extrinsics + initial state (key-value)
///   odometry.csv       t, dt, rotvec xyz, dp xyz, 21 upper-triangle entries of Q
///   frames/index.txt   "<timestamp> <file>" per line, files relative to frames/
///   frames/*.bin       f64 timestamp, u32 count, count x (f32 x, y, z), little-endian
///   ground_truth.tum   optional body trajectory
struct Dataset {
  std::vector<OdometryIncrement> odometry;
  std::vector<Frame> frames;
  Extrinsics extrinsics;
  double start_time = 0.0;
  EkfState initial_state;
  std::vector<StampedPose> ground_truth;
};

/// Throws ErrorCode::kFormat unless each stream is strictly increasing in time
/// and every increment has dt > 0.
void validate_dataset(const Dataset& ds);

void write_dataset(const Dataset& ds, const std::string& dir);
Dataset read_dataset(const std::string& dir);

void write_frame(const Frame& frame, std::ostream& out);
Frame read_frame(std::istream& in);

void write_odometry_csv(const std::vector<OdometryIncrement>& odom, std::ostream& out);
std::vector<OdometryIncrement> read_odometry_csv(std::istream& in);

/// TUM text format: "timestamp tx ty tz qx qy qz qw" per line, '#' comments.
void write_tum(const std::vector<StampedPose>& poses, std::ostream& out);
std::vector<StampedPose> read_tum(std::istream& in);
void save_tum(const std::vector<StampedPose>& poses, const std::string& path);
std::vector<StampedPose> load_tum(const std::string& path);

}  // namespace elevodom
