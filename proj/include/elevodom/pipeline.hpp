#pragma once

#include <span>
#include <vector>

#include "elevodom/dataset_io.hpp"
#include "elevodom/elevation_map.hpp"
#include "elevodom/em_icp.hpp"
#include "elevodom/key_value_config.hpp"
#include "elevodom/pose_ekf.hpp"

namespace elevodom {

enum class Mode { kProprioceptiveOnly, kIcpFused };

const char* to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct GridGeometry {
  double resolution = 0.01;  // m
  double side_m = 4.0;       // m
};

struct PipelineConfig {
  IcpConfig icp;
  MapUpdateConfig map;
  GridGeometry grid;
  EkfConfig ekf;
  Mode mode = Mode::kIcpFused;
  /// Registration starts once the grid holds this many times
  /// icp.min_correspondences occupied cells.
  int bootstrap_factor = 4;

  void validate() const;
};

/// Reads [pipeline], [map], [icp] and [ekf] sections; absent keys keep defaults.
PipelineConfig pipeline_config_from(const KeyValueConfig& kv);
KeyValueConfig to_key_value(const PipelineConfig& cfg);

enum class FrameOutcome {
  kFused,               // registered and applied to the filter
  kBootstrap,           // map too small to register against
  kProprioceptiveOnly,  // mode disables registration
  kRegistrationFailed,
  kGated,               // innovation rejected by the chi-square gate
  kNoPoints,            // nothing of the cloud falls inside the grid
};

const char* to_string(FrameOutcome o);

struct TrajectoryRecord {
  double t = 0.0;
  Pose prior_camera;
  Pose posterior_camera;
  Pose integration_camera;  // pose used to place the cloud in the map
  EkfState state;           // after the frame
  IcpResult icp;
  bool registration_attempted = false;
  FrameOutcome outcome = FrameOutcome::kBootstrap;
  Vec6 innovation = Vec6::Zero();
  double nis = 0.0;
  std::size_t downsampled_points = 0;
  IntegrateStats integration;
  CellIndex recenter_shift;
};

/// One depth frame: register against the grid, correct the filter, integrate
/// the downsampled cloud at the a-posteriori camera pose, recentre the grid.
/// `state` must already be propagated to the frame time.
TrajectoryRecord process_frame(EkfState& state, ElevationGrid& grid, const Extrinsics& ext,
                               double t, std::span<const Vec3> cloud, const PipelineConfig& cfg);

/// Sequential odometry-and-mapping loop over a single state and grid.
class Pipeline {
 public:
  Pipeline(PipelineConfig cfg, Extrinsics ext, EkfState initial, double start_time);

  void predict(const OdometryIncrement& inc);
  TrajectoryRecord process_frame(double t, std::span<const Vec3> cloud);

  const EkfState& state() const { return state_; }
  const ElevationGrid& grid() const { return grid_; }
  double time() const { return time_; }
  const PipelineConfig& config() const { return cfg_; }
  const Extrinsics& extrinsics() const { return ext_; }

 private:
  PipelineConfig cfg_;
  Extrinsics ext_;
  EkfState state_;
  double time_;
  double gate_threshold_;
  ElevationGrid grid_;
};

struct RunResult {
  std::vector<TrajectoryRecord> records;
  std::vector<StampedPose> trajectory;  // body pose after every increment and frame
  ElevationGrid grid;
};

/// Merges the odometry and frame streams by time. A frame is processed at the
/// propagated state time nearest to its timestamp. Throws ErrorCode::kFormat
/// for unordered streams.
RunResult run(const Dataset& ds, const PipelineConfig& cfg);

/// Per-frame diagnostics as CSV.
void write_frame_diagnostics(const std::vector<TrajectoryRecord>& records, std::ostream& out);

}  // namespace elevodom
