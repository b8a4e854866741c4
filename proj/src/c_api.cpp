#include "elevodom/elevodom.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <string>

#include "elevodom/dataset_io.hpp"
#include "elevodom/elevation_map.hpp"
#include "elevodom/error.hpp"
#include "elevodom/evaluation.hpp"
#include "elevodom/pipeline.hpp"
#include "elevodom/simulator.hpp"

struct eo_grid_s {
  elevodom::ElevationGrid grid;
};

struct eo_pipeline_s {
  elevodom::Pipeline pipeline;
};

namespace {

using namespace elevodom;

thread_local std::string g_last_error;

eo_status fail(eo_status s, std::string msg) {
  g_last_error = std::move(msg);
  return s;
}

template <typename Fn>
eo_status guarded(Fn&& fn) {
  try {
    fn();
    return EO_OK;
  } catch (const Error& e) {
    return fail(static_cast<eo_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(EO_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(EO_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(EO_ERR_INTERNAL, "unknown error");
  }
}

void require(bool cond, const char* what) {
  if (!cond) throw Error(ErrorCode::kInvalidArgument, what);
}

Pose to_pose(const eo_pose& p) {
  Pose out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out.R(r, c) = p.rotation[3 * r + c];
    out.p(r) = p.translation[r];
  }
  if (!so3::is_rotation(out.R, 1e-6)) throw Error(ErrorCode::kInvalidRotation, "pose rotation is not orthonormal");
  out.R = so3::orthonormalize(out.R);
  return out;
}

eo_pose from_pose(const Pose& p) {
  eo_pose out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out.rotation[3 * r + c] = p.R(r, c);
    out.translation[r] = p.p(r);
  }
  return out;
}

void copy_mat6(const Mat6& m, double* out) {
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 6; ++c) out[6 * r + c] = m(r, c);
  }
}

PipelineConfig load_config(const char* path, eo_mode mode) {
  PipelineConfig cfg;
  if (path && *path) cfg = pipeline_config_from(KeyValueConfig::Load(path));
  if (mode == EO_MODE_ICP_FUSED) cfg.mode = Mode::kIcpFused;
  if (mode == EO_MODE_PROPRIOCEPTIVE_ONLY) cfg.mode = Mode::kProprioceptiveOnly;
  cfg.validate();
  return cfg;
}

eo_frame_outcome to_c(FrameOutcome o) {
  switch (o) {
    case FrameOutcome::kFused: return EO_FRAME_FUSED;
    case FrameOutcome::kBootstrap: return EO_FRAME_BOOTSTRAP;
    case FrameOutcome::kProprioceptiveOnly: return EO_FRAME_PROPRIOCEPTIVE_ONLY;
    case FrameOutcome::kRegistrationFailed: return EO_FRAME_REGISTRATION_FAILED;
    case FrameOutcome::kGated: return EO_FRAME_GATED;
    case FrameOutcome::kNoPoints: return EO_FRAME_NO_POINTS;
  }
  return EO_FRAME_NO_POINTS;
}

}  // namespace

extern "C" {

const char* eo_version(void) { return "0.1.0"; }

const char* eo_status_string(eo_status status) {
  switch (status) {
    case EO_OK: return "ok";
    case EO_ERR_INVALID_ARGUMENT: return "invalid argument";
    case EO_ERR_IO: return "i/o error";
    case EO_ERR_FORMAT: return "malformed input";
    case EO_ERR_INVALID_ROTATION: return "invalid rotation";
    case EO_ERR_INVALID_NORMAL: return "invalid normal";
    case EO_ERR_INVALID_MEASUREMENT: return "invalid measurement";
    case EO_ERR_SINGULAR: return "singular system";
    case EO_ERR_EVALUATION: return "evaluation error";
    case EO_ERR_DEGENERATE_INPUT: return "degenerate input";
    case EO_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* eo_last_error(void) { return g_last_error.c_str(); }

eo_status eo_grid_create(double resolution, int side_cells, double origin_x, double origin_y,
                         eo_grid_h* out) {
  return guarded([&] {
    require(out, "out is NULL");
    *out = new eo_grid_s{ElevationGrid(resolution, side_cells, Vec2(origin_x, origin_y))};
  });
}

eo_status eo_grid_load(const char* snapshot_path, eo_grid_h* out) {
  return guarded([&] {
    require(out && snapshot_path, "NULL argument");
    *out = new eo_grid_s{load_snapshot(snapshot_path)};
  });
}

void eo_grid_destroy(eo_grid_h grid) { delete grid; }

eo_status eo_grid_save(eo_grid_h grid, const char* snapshot_path) {
  return guarded([&] {
    require(grid && snapshot_path, "NULL argument");
    save_snapshot(grid->grid, snapshot_path);
  });
}

eo_status eo_grid_export_pgm(eo_grid_h grid, const char* pgm_path, int has_range, double z_min,
                             double z_max) {
  return guarded([&] {
    require(grid && pgm_path, "NULL argument");
    std::optional<PgmRange> range;
    if (has_range) {
      require(z_max > z_min, "z_max must exceed z_min");
      range = PgmRange{z_min, z_max};
    }
    save_pgm(grid->grid, pgm_path, range);
  });
}

eo_status eo_grid_geometry(eo_grid_h grid, double* resolution, int* side_cells, double* origin_x,
                           double* origin_y) {
  return guarded([&] {
    require(grid, "grid is NULL");
    if (resolution) *resolution = grid->grid.resolution();
    if (side_cells) *side_cells = grid->grid.side_cells();
    if (origin_x) *origin_x = grid->grid.origin().x();
    if (origin_y) *origin_y = grid->grid.origin().y();
  });
}

eo_status eo_grid_occupied_count(eo_grid_h grid, size_t* count) {
  return guarded([&] {
    require(grid && count, "NULL argument");
    *count = grid->grid.occupied_count();
  });
}

eo_status eo_grid_cell(eo_grid_h grid, int ix, int iy, int* occupied, double* h, double* var_h) {
  return guarded([&] {
    require(grid, "grid is NULL");
    require(grid->grid.in_bounds({ix, iy}), "cell index out of bounds");
    const Cell& c = grid->grid.at({ix, iy});
    if (occupied) *occupied = c.occupied ? 1 : 0;
    if (h) *h = c.h;
    if (var_h) *var_h = c.var_h;
  });
}

eo_status eo_grid_integrate(eo_grid_h grid, const double* xyz, const double* var_z, size_t count,
                            double lambda, size_t* touched) {
  return guarded([&] {
    require(grid && (count == 0 || (xyz && var_z)), "NULL argument");
    require(lambda > 0.0, "lambda must be positive");
    std::vector<MapPoint> pts(count);
    for (size_t i = 0; i < count; ++i) pts[i] = {Vec3(xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]), var_z[i]};
    MapUpdateConfig cfg;
    cfg.lambda = lambda;
    const IntegrateStats s = grid->grid.integrate_cloud(pts, cfg);
    if (touched) *touched = s.touched;
  });
}

eo_status eo_pipeline_create(const char* config_path, eo_mode mode, const eo_pose* extrinsics,
                             const eo_pose* initial_body_pose, const double initial_covariance[6],
                             double start_time, eo_pipeline_h* out) {
  return guarded([&] {
    require(out, "out is NULL");
    const PipelineConfig cfg = load_config(config_path, mode);
    Extrinsics ext;
    if (extrinsics) {
      const Pose e = to_pose(*extrinsics);
      ext = {e.R, e.p};
    }
    EkfState init;
    if (initial_body_pose) {
      const Pose b = to_pose(*initial_body_pose);
      init.R = b.R;
      init.p = b.p;
    }
    if (initial_covariance) {
      for (int i = 0; i < 6; ++i) {
        require(initial_covariance[i] >= 0.0, "initial covariance must be non-negative");
        init.P(i, i) = initial_covariance[i];
      }
    }
    *out = new eo_pipeline_s{Pipeline(cfg, ext, init, start_time)};
  });
}

void eo_pipeline_destroy(eo_pipeline_h pipeline) { delete pipeline; }

eo_status eo_pipeline_predict(eo_pipeline_h pipeline, const eo_odometry_increment* inc) {
  return guarded([&] {
    require(pipeline && inc, "NULL argument");
    require(inc->dt > 0.0, "dt must be positive");
    require(inc->timestamp > pipeline->pipeline.time(), "increments must be strictly time ordered");
    OdometryIncrement o;
    o.t = inc->timestamp;
    o.dt = inc->dt;
    o.delta_R = so3::exp(Vec3(inc->rotation_vector[0], inc->rotation_vector[1], inc->rotation_vector[2]));
    o.delta_p = Vec3(inc->translation[0], inc->translation[1], inc->translation[2]);
    for (int r = 0; r < 6; ++r) {
      for (int c = 0; c < 6; ++c) o.Q(r, c) = inc->covariance[6 * r + c];
    }
    o.Q = 0.5 * (o.Q + o.Q.transpose());
    pipeline->pipeline.predict(o);
  });
}

eo_status eo_pipeline_process_frame(eo_pipeline_h pipeline, double timestamp, const float* xyz,
                                    size_t count, eo_frame_result* out) {
  return guarded([&] {
    require(pipeline && (count == 0 || xyz), "NULL argument");
    std::vector<Vec3> cloud(count);
    for (size_t i = 0; i < count; ++i) cloud[i] = Vec3(xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]);
    const TrajectoryRecord rec = pipeline->pipeline.process_frame(timestamp, cloud);
    if (out) {
      out->outcome = to_c(rec.outcome);
      out->registration_attempted = rec.registration_attempted ? 1 : 0;
      out->icp_iterations = rec.icp.iterations;
      out->icp_correspondences = rec.icp.n_corr;
      out->nis = rec.nis;
      out->prior_camera = from_pose(rec.prior_camera);
      out->posterior_camera = from_pose(rec.posterior_camera);
      copy_mat6(rec.icp.covariance, out->icp_covariance);
    }
  });
}

eo_status eo_pipeline_body_pose(eo_pipeline_h pipeline, eo_pose* pose, double covariance[36]) {
  return guarded([&] {
    require(pipeline, "pipeline is NULL");
    const EkfState& s = pipeline->pipeline.state();
    if (pose) *pose = from_pose({s.R, s.p});
    if (covariance) copy_mat6(s.P, covariance);
  });
}

eo_status eo_pipeline_copy_grid(eo_pipeline_h pipeline, eo_grid_h* out) {
  return guarded([&] {
    require(pipeline && out, "NULL argument");
    *out = new eo_grid_s{pipeline->pipeline.grid()};
  });
}

eo_status eo_simulate(const char* scenario_path, const char* dataset_dir, int64_t seed_override) {
  return guarded([&] {
    require(dataset_dir, "dataset_dir is NULL");
    sim::Scenario sc = scenario_path ? sim::scenario_from(KeyValueConfig::Load(scenario_path))
                                     : sim::step_arena_scenario(0);
    if (seed_override >= 0) sc.seed = static_cast<std::uint64_t>(seed_override);
    write_dataset(sim::generate_dataset(sc), dataset_dir);
  });
}

eo_status eo_write_default_scenario(const char* scenario_path, uint64_t seed) {
  return guarded([&] {
    require(scenario_path, "NULL argument");
    sim::to_key_value(sim::step_arena_scenario(seed)).save(scenario_path);
  });
}

eo_status eo_run_dataset(const char* dataset_dir, const char* config_path, eo_mode mode,
                         const char* output_dir, eo_run_summary* summary) {
  return guarded([&] {
    require(dataset_dir && output_dir, "NULL argument");
    namespace fs = std::filesystem;
    const PipelineConfig cfg = load_config(config_path, mode);
    const Dataset ds = read_dataset(dataset_dir);
    const RunResult res = run(ds, cfg);

    std::error_code ec;
    fs::create_directories(output_dir, ec);
    if (ec) throw Error(ErrorCode::kIo, std::string("cannot create ") + output_dir);
    const fs::path out(output_dir);
    save_tum(res.trajectory, (out / "trajectory.tum").string());
    std::vector<StampedPose> cam;
    for (const TrajectoryRecord& r : res.records) cam.push_back({r.t, r.posterior_camera});
    save_tum(cam, (out / "camera_trajectory.tum").string());
    {
      std::ofstream diag(out / "frames.csv");
      if (!diag) throw Error(ErrorCode::kIo, "cannot write frames.csv");
      write_frame_diagnostics(res.records, diag);
    }
    save_snapshot(res.grid, (out / "map.eogrid").string());

    eo_run_summary s{};
    s.frames = res.records.size();
    for (const TrajectoryRecord& r : res.records) {
      if (r.outcome == FrameOutcome::kFused) ++s.fused;
      if (r.outcome == FrameOutcome::kBootstrap) ++s.bootstrap;
      if (r.outcome == FrameOutcome::kRegistrationFailed) ++s.registration_failed;
      if (r.outcome == FrameOutcome::kGated) ++s.gated;
    }
    s.trajectory_samples = res.trajectory.size();
    KeyValueConfig kv = to_key_value(cfg);
    kv.set("summary.frames", std::to_string(s.frames));
    kv.set("summary.fused", std::to_string(s.fused));
    kv.set("summary.bootstrap", std::to_string(s.bootstrap));
    kv.set("summary.registration_failed", std::to_string(s.registration_failed));
    kv.set("summary.gated", std::to_string(s.gated));
    kv.set("summary.trajectory_samples", std::to_string(s.trajectory_samples));
    kv.save((out / "summary.txt").string());
    if (summary) *summary = s;
  });
}

eo_status eo_evaluate(const char* estimate_path, const char* ground_truth_path, double window_m,
                      eo_alignment alignment, const char* report_path, const char* kv_path,
                      eo_eval_report* out) {
  return guarded([&] {
    require(estimate_path && ground_truth_path, "NULL argument");
    Alignment a = Alignment::kSE3;
    if (alignment == EO_ALIGN_POSITION_YAW) a = Alignment::kPositionYaw;
    if (alignment == EO_ALIGN_NONE) a = Alignment::kNone;
    const EvalReport r = evaluate(load_tum(estimate_path), load_tum(ground_truth_path), window_m, a);
    if (report_path) {
      std::ofstream f(report_path);
      if (!f) throw Error(ErrorCode::kIo, std::string("cannot write ") + report_path);
      write_report_text(r, f);
    }
    if (kv_path) {
      std::ofstream f(kv_path);
      if (!f) throw Error(ErrorCode::kIo, std::string("cannot write ") + kv_path);
      write_report_key_value(r, f);
    }
    if (out) {
      out->ate_trans_cm = r.ate_trans_cm;
      out->ate_rot_deg = r.ate_rot_deg;
      out->re_trans_median_cm = r.re_trans_median_cm;
      out->re_rot_median_deg = r.re_rot_median_deg;
      out->window_m = r.window_m;
      out->associated = r.associated;
      out->windows = r.windows;
    }
  });
}

}  // extern "C"
