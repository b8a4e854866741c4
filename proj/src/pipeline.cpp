#include "elevodom/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "elevodom/error.hpp"

namespace elevodom {

const char* to_string(Mode m) {
  return m == Mode::kIcpFused ? "icp-fused" : "proprioceptive-only";
}

Mode mode_from_string(const std::string& s) {
  if (s == "icp-fused") return Mode::kIcpFused;
  if (s == "proprioceptive-only") return Mode::kProprioceptiveOnly;
  throw Error(ErrorCode::kInvalidArgument, "unknown mode '" + s + "' (icp-fused | proprioceptive-only)");
}

const char* to_string(FrameOutcome o) {
  switch (o) {
    case FrameOutcome::kFused: return "fused";
    case FrameOutcome::kBootstrap: return "bootstrap";
    case FrameOutcome::kProprioceptiveOnly: return "proprioceptive_only";
    case FrameOutcome::kRegistrationFailed: return "registration_failed";
    case FrameOutcome::kGated: return "gated";
    case FrameOutcome::kNoPoints: return "no_points";
  }
  return "unknown";
}

void PipelineConfig::validate() const {
  icp.validate();
  if (!(grid.resolution > 0.0) || !(grid.side_m >= grid.resolution)) {
    throw Error(ErrorCode::kInvalidArgument, "grid geometry must be positive");
  }
  if (!(map.lambda > 0.0) || !(map.sigma_z_coeff > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "map lambda and sigma_z_coeff must be positive");
  }
  if (bootstrap_factor < 1) throw Error(ErrorCode::kInvalidArgument, "bootstrap_factor must be >= 1");
  innovation_gate_threshold(ekf.gate_probability);
}

PipelineConfig pipeline_config_from(const KeyValueConfig& kv) {
  PipelineConfig c;
  c.mode = mode_from_string(kv.get_string("pipeline.mode", to_string(c.mode)));
  c.bootstrap_factor = kv.get_int("pipeline.bootstrap_factor", c.bootstrap_factor);
  c.grid.resolution = kv.get_double("map.resolution", c.grid.resolution);
  c.grid.side_m = kv.get_double("map.size", c.grid.side_m);
  c.map.lambda = kv.get_double("map.lambda", c.map.lambda);
  c.map.sigma_z_coeff = kv.get_double("map.sigma_z_coeff", c.map.sigma_z_coeff);
  c.icp.d_max = kv.get_double("icp.d_max", c.icp.d_max);
  c.icp.phi_max = kv.get_double("icp.phi_max_deg", c.icp.phi_max / kDegToRad) * kDegToRad;
  c.icp.cauchy_scale = kv.get_double("icp.cauchy_scale", c.icp.cauchy_scale);
  c.icp.max_iterations = kv.get_int("icp.max_iterations", c.icp.max_iterations);
  c.icp.translation_tol = kv.get_double("icp.translation_tol", c.icp.translation_tol);
  c.icp.rotation_tol = kv.get_double("icp.rotation_tol_deg", c.icp.rotation_tol / kDegToRad) * kDegToRad;
  const int min_corr = kv.get_int("icp.min_correspondences", static_cast<int>(c.icp.min_correspondences));
  if (min_corr < 0) throw Error(ErrorCode::kInvalidArgument, "icp.min_correspondences must be non-negative");
  c.icp.min_correspondences = static_cast<std::size_t>(min_corr);
  c.icp.sigma_b = kv.get_double("icp.sigma_b", c.icp.sigma_b);
  c.icp.sigma_n = kv.get_double("icp.sigma_n", c.icp.sigma_n);
  c.ekf.gate_probability = kv.get_double("ekf.gate_probability", c.ekf.gate_probability);
  c.validate();
  return c;
}

KeyValueConfig to_key_value(const PipelineConfig& c) {
  KeyValueConfig kv;
  auto num = [](double v) { return format_vector(&v, 1); };
  kv.set("pipeline.mode", to_string(c.mode));
  kv.set("pipeline.bootstrap_factor", std::to_string(c.bootstrap_factor));
  kv.set("map.resolution", num(c.grid.resolution));
  kv.set("map.size", num(c.grid.side_m));
  kv.set("map.lambda", num(c.map.lambda));
  kv.set("map.sigma_z_coeff", num(c.map.sigma_z_coeff));
  kv.set("icp.d_max", num(c.icp.d_max));
  kv.set("icp.phi_max_deg", num(c.icp.phi_max / kDegToRad));
  kv.set("icp.cauchy_scale", num(c.icp.cauchy_scale));
  kv.set("icp.max_iterations", std::to_string(c.icp.max_iterations));
  kv.set("icp.translation_tol", num(c.icp.translation_tol));
  kv.set("icp.rotation_tol_deg", num(c.icp.rotation_tol / kDegToRad));
  kv.set("icp.min_correspondences", std::to_string(c.icp.min_correspondences));
  kv.set("icp.sigma_b", num(c.icp.sigma_b));
  kv.set("icp.sigma_n", num(c.icp.sigma_n));
  kv.set("ekf.gate_probability", num(c.ekf.gate_probability));
  return kv;
}

namespace {

TrajectoryRecord process_frame_impl(EkfState& state, ElevationGrid& grid, const Extrinsics& ext,
                                    double t, std::span<const Vec3> cloud, const PipelineConfig& cfg,
                                    double gate_threshold) {
  TrajectoryRecord rec;
  rec.t = t;
  rec.prior_camera = camera_pose_from_state(state, ext);

  const bool map_ready =
      grid.occupied_count() >= static_cast<std::size_t>(cfg.bootstrap_factor) * cfg.icp.min_correspondences;
  std::vector<DownsampledPoint> downsampled;
  if (cfg.mode == Mode::kProprioceptiveOnly || !map_ready) {
    rec.outcome = cfg.mode == Mode::kProprioceptiveOnly ? FrameOutcome::kProprioceptiveOnly
                                                        : FrameOutcome::kBootstrap;
    try {
      downsampled = downsample(cloud, rec.prior_camera, grid);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateInput) throw;
      rec.outcome = FrameOutcome::kNoPoints;
    }
  } else {
    rec.registration_attempted = true;
    Registration reg = register_cloud(cloud, rec.prior_camera, grid, cfg.icp);
    rec.icp = reg.result;
    downsampled = std::move(reg.downsampled);
    if (downsampled.empty()) {
      rec.outcome = FrameOutcome::kNoPoints;
    } else if (!reg.result.converged) {
      rec.outcome = FrameOutcome::kRegistrationFailed;
    } else {
      IcpMeasurement meas;
      meas.camera_pose = reg.result.correction * rec.prior_camera;
      meas.R_meas = icp_measurement_covariance(reg.result.covariance, meas.camera_pose);
      const UpdateOutcome up = update_with_icp(state, ext, meas, gate_threshold);
      rec.innovation = up.innovation;
      rec.nis = up.nis;
      if (up.applied) {
        state = up.state;
        rec.outcome = FrameOutcome::kFused;
      } else {
        rec.outcome = FrameOutcome::kGated;
      }
    }
  }

  rec.posterior_camera = camera_pose_from_state(state, ext);
  rec.integration_camera = rec.posterior_camera;
  rec.downsampled_points = downsampled.size();
  if (!downsampled.empty()) {
    std::vector<Vec3> sensor(downsampled.size());
    for (std::size_t i = 0; i < sensor.size(); ++i) sensor[i] = downsampled[i].sensor;
    try {
      const auto rebinned = downsample(sensor, rec.integration_camera, grid);
      std::vector<MapPoint> points(rebinned.size());
      for (std::size_t i = 0; i < rebinned.size(); ++i) {
        points[i] = {rebinned[i].world, cfg.map.measurement_variance(rebinned[i].range)};
      }
      rec.integration = grid.integrate_cloud(points, cfg.map);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateInput) throw;
      rec.integration.out_of_bounds = downsampled.size();
    }
  }
  rec.recenter_shift = grid.recenter(state.p.head<2>());
  rec.state = state;
  return rec;
}

}  // namespace

TrajectoryRecord process_frame(EkfState& state, ElevationGrid& grid, const Extrinsics& ext,
                               double t, std::span<const Vec3> cloud, const PipelineConfig& cfg) {
  return process_frame_impl(state, grid, ext, t, cloud, cfg,
                            innovation_gate_threshold(cfg.ekf.gate_probability));
}

Pipeline::Pipeline(PipelineConfig cfg, Extrinsics ext, EkfState initial, double start_time)
    : cfg_(std::move(cfg)),
      ext_(std::move(ext)),
      state_(std::move(initial)),
      time_(start_time),
      gate_threshold_(0.0),
      grid_(ElevationGrid::Centered(cfg_.grid.resolution, cfg_.grid.side_m, state_.p.head<2>())) {
  cfg_.validate();
  gate_threshold_ = innovation_gate_threshold(cfg_.ekf.gate_probability);
}

void Pipeline::predict(const OdometryIncrement& inc) {
  state_ = elevodom::predict(state_, inc);
  time_ = inc.t;
}

TrajectoryRecord Pipeline::process_frame(double t, std::span<const Vec3> cloud) {
  return process_frame_impl(state_, grid_, ext_, t, cloud, cfg_, gate_threshold_);
}

RunResult run(const Dataset& ds, const PipelineConfig& cfg) {
  validate_dataset(ds);
  Pipeline pipe(cfg, ds.extrinsics, ds.initial_state, ds.start_time);
  RunResult out{{}, {}, pipe.grid()};
  out.trajectory.push_back({ds.start_time, {pipe.state().R, pipe.state().p}});
  auto record_pose = [&](double t) {
    const StampedPose s{t, {pipe.state().R, pipe.state().p}};
    if (!out.trajectory.empty() && out.trajectory.back().t == t) {
      out.trajectory.back() = s;
    } else {
      out.trajectory.push_back(s);
    }
  };

  std::size_t next_inc = 0;
  for (const Frame& frame : ds.frames) {
    while (next_inc < ds.odometry.size()) {
      const double t_inc = ds.odometry[next_inc].t;
      const bool before = t_inc <= frame.t;
      const bool nearer = std::abs(t_inc - frame.t) < std::abs(frame.t - pipe.time());
      if (!before && !nearer) break;
      pipe.predict(ds.odometry[next_inc++]);
      record_pose(pipe.time());
    }
    out.records.push_back(pipe.process_frame(frame.t, frame.points));
    record_pose(pipe.time());
  }
  for (; next_inc < ds.odometry.size(); ++next_inc) {
    pipe.predict(ds.odometry[next_inc]);
    record_pose(pipe.time());
  }
  out.grid = pipe.grid();
  return out;
}

void write_frame_diagnostics(const std::vector<TrajectoryRecord>& records, std::ostream& out) {
  out << "timestamp,outcome,registration_status,iterations,n_corr,mean_residual,nis,"
         "downsampled,touched,out_of_bounds,prior_x,prior_y,prior_z,post_x,post_y,post_z\n";
  char buf[512];
  for (const TrajectoryRecord& r : records) {
    std::snprintf(buf, sizeof(buf), "%.9f,%s,%s,%d,%zu,%.9g,%.9g,%zu,%zu,%zu,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f\n",
                  r.t, to_string(r.outcome),
                  r.registration_attempted ? to_string(r.icp.status) : "not_attempted", r.icp.iterations,
                  r.icp.n_corr, r.icp.mean_residual, r.nis, r.downsampled_points, r.integration.touched,
                  r.integration.out_of_bounds, r.prior_camera.p.x(), r.prior_camera.p.y(),
                  r.prior_camera.p.z(), r.posterior_camera.p.x(), r.posterior_camera.p.y(),
                  r.posterior_camera.p.z());
    out << buf;
  }
}

}  // namespace elevodom
