#include <doctest.h>

#include <sstream>

#include "elevodom/error.hpp"
#include "elevodom/pipeline.hpp"
#include "elevodom/simulator.hpp"
#include "support.hpp"

using namespace elevodom;
using testing::max_abs_diff;

namespace {

PipelineConfig calibrated(Mode mode) {
  PipelineConfig cfg = pipeline_config_from(KeyValueConfig::Load(ELEVODOM_SOURCE_DIR "/scenarios/pipeline.ini"));
  cfg.mode = mode;
  return cfg;
}

// Short walk that starts on the box and steps down once.
sim::Scenario short_descent(std::uint64_t seed) {
  sim::Scenario sc = sim::step_arena_scenario(seed);
  sc.trajectory.waypoints = {{0.0, 0.0}, {1.4, 0.0}};
  return sc;
}

// Largest distance between estimated body positions and ground truth at the
// ground-truth timestamps.
double max_deviation(const RunResult& r, const Dataset& ds) {
  double worst = 0.0;
  std::size_t j = 0;
  for (const StampedPose& g : ds.ground_truth) {
    while (j + 1 < r.trajectory.size() && r.trajectory[j].t < g.t - 1e-9) ++j;
    REQUIRE(std::abs(r.trajectory[j].t - g.t) < 1e-9);
    worst = std::max(worst, (r.trajectory[j].pose.p - g.pose.p).norm());
  }
  return worst;
}

}  // namespace

TEST_CASE("configuration round trip and validation") {
  const PipelineConfig cfg = calibrated(Mode::kIcpFused);
  CHECK(cfg.icp.sigma_b == 0.035);
  const PipelineConfig back = pipeline_config_from(to_key_value(cfg));
  CHECK(back.icp.sigma_b == cfg.icp.sigma_b);
  CHECK(back.icp.phi_max == doctest::Approx(cfg.icp.phi_max));
  CHECK(back.mode == cfg.mode);
  CHECK(back.grid.side_m == 4.0);
  CHECK_THROWS_AS(pipeline_config_from(KeyValueConfig::Parse("[map]\nresolution = -1\n")), Error);
  CHECK_THROWS_AS(pipeline_config_from(KeyValueConfig::Parse("[pipeline]\nmode = lidar\n")), Error);
  CHECK(mode_from_string("proprioceptive-only") == Mode::kProprioceptiveOnly);
}

TEST_CASE("first frame bootstraps the map at the prior pose") {
  const sim::Scenario sc = short_descent(1);
  const Dataset ds = sim::generate_dataset(sc);
  Pipeline pipe(calibrated(Mode::kIcpFused), ds.extrinsics, ds.initial_state, ds.start_time);
  const TrajectoryRecord rec = pipe.process_frame(ds.frames[0].t, ds.frames[0].points);
  CHECK(rec.outcome == FrameOutcome::kBootstrap);
  CHECK_FALSE(rec.registration_attempted);
  CHECK(rec.integration.inserted > 1000);
  CHECK(max_abs_diff(rec.integration_camera.p, rec.prior_camera.p) == 0.0);
  CHECK(pipe.grid().occupied_count() == rec.integration.inserted);

  // The same cloud again registers onto its own geometry with near-zero innovation.
  const TrajectoryRecord again = pipe.process_frame(ds.frames[0].t, ds.frames[0].points);
  CHECK(again.registration_attempted);
  CHECK(again.outcome == FrameOutcome::kFused);
  CHECK(again.innovation.tail<3>().norm() < 1e-3);
  CHECK(max_abs_diff(again.integration_camera.p, again.posterior_camera.p) == 0.0);
}

TEST_CASE("empty clouds and clouds outside the grid") {
  const Dataset ds = sim::generate_dataset(short_descent(1));
  Pipeline pipe(calibrated(Mode::kIcpFused), ds.extrinsics, ds.initial_state, ds.start_time);
  CHECK(pipe.process_frame(0.0, {}).outcome == FrameOutcome::kNoPoints);
  const std::vector<Vec3> far = {Vec3(0, 0, 50.0)};
  CHECK(pipe.process_frame(0.0, far).outcome == FrameOutcome::kNoPoints);
}

TEST_CASE("proprioceptive-only mode equals dead reckoning") {
  const Dataset ds = sim::generate_dataset(short_descent(2));
  const RunResult r = run(ds, calibrated(Mode::kProprioceptiveOnly));
  EkfState s = ds.initial_state;
  REQUIRE(r.trajectory.size() == ds.odometry.size() + 1);
  for (std::size_t k = 0; k < ds.odometry.size(); ++k) {
    s = predict(s, ds.odometry[k]);
    CHECK(r.trajectory[k + 1].pose.p == s.p);
    CHECK(r.trajectory[k + 1].pose.R == s.R);
  }
  for (const TrajectoryRecord& rec : r.records) {
    CHECK(rec.outcome == FrameOutcome::kProprioceptiveOnly);
    CHECK_FALSE(rec.registration_attempted);
  }
}

TEST_CASE("no frames gives a pure proprioceptive trajectory") {
  Dataset ds = sim::generate_dataset(short_descent(2));
  const RunResult prop = run(ds, calibrated(Mode::kProprioceptiveOnly));
  ds.frames.clear();
  const RunResult fused = run(ds, calibrated(Mode::kIcpFused));
  CHECK(fused.records.empty());
  REQUIRE(fused.trajectory.size() == prop.trajectory.size());
  for (std::size_t k = 0; k < prop.trajectory.size(); ++k) CHECK(fused.trajectory[k].pose.p == prop.trajectory[k].pose.p);
  CHECK(fused.grid.occupied_count() == 0);
}

TEST_CASE("runs are deterministic") {
  const Dataset ds = sim::generate_dataset(short_descent(3));
  const PipelineConfig cfg = calibrated(Mode::kIcpFused);
  const RunResult a = run(ds, cfg);
  const RunResult b = run(ds, cfg);
  std::ostringstream ta, tb, fa, fb;
  write_tum(a.trajectory, ta);
  write_tum(b.trajectory, tb);
  write_frame_diagnostics(a.records, fa);
  write_frame_diagnostics(b.records, fb);
  CHECK(ta.str() == tb.str());
  CHECK(fa.str() == fb.str());
  CHECK(a.grid.cells().size() == b.grid.cells().size());
  bool same = true;
  for (std::size_t i = 0; i < a.grid.cells().size(); ++i) {
    const Cell& x = a.grid.cells()[i];
    const Cell& y = b.grid.cells()[i];
    same = same && x.occupied == y.occupied && (!x.occupied || (x.h == y.h && x.var_h == y.var_h));
  }
  CHECK(same);
}

TEST_CASE("unordered streams are rejected") {
  Dataset ds = sim::generate_dataset(short_descent(1));
  std::swap(ds.frames[1], ds.frames[2]);
  try {
    run(ds, calibrated(Mode::kIcpFused));
    FAIL("expected a format error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kFormat);
  }
}

TEST_CASE("integration uses the a-posteriori pose and failures fall back to the prior") {
  const Dataset ds = sim::generate_dataset(short_descent(4));
  const RunResult r = run(ds, calibrated(Mode::kIcpFused));
  std::size_t fused = 0;
  for (const TrajectoryRecord& rec : r.records) {
    CHECK(max_abs_diff(rec.integration_camera.p, rec.posterior_camera.p) == 0.0);
    if (rec.outcome == FrameOutcome::kFused) ++fused;
    if (rec.outcome != FrameOutcome::kFused) CHECK(max_abs_diff(rec.posterior_camera.p, rec.prior_camera.p) == 0.0);
  }
  CHECK(fused + 1 >= r.records.size());
}

TEST_CASE("registration does not add error with perfect odometry") {
  sim::Scenario sc = short_descent(5);
  sc.trajectory.drift_translation.setZero();
  sc.trajectory.noise_translation = 0.0;
  sc.trajectory.noise_rotation = 0.0;
  sc.initial_covariance_diagonal = Vec6::Constant(1e-10);
  const Dataset ds = sim::generate_dataset(sc);
  const double prop = max_deviation(run(ds, calibrated(Mode::kProprioceptiveOnly)), ds);
  const double fused = max_deviation(run(ds, calibrated(Mode::kIcpFused)), ds);
  CHECK(prop < 1e-9);
  CHECK(fused <= prop + 1e-3);
}

TEST_CASE("registration removes most of the vertical drift over a step descent") {
  const Dataset ds = sim::generate_dataset(sim::step_arena_scenario(1));
  const RunResult prop = run(ds, calibrated(Mode::kProprioceptiveOnly));
  const RunResult fused = run(ds, calibrated(Mode::kIcpFused));
  const double gt_z = ds.ground_truth.back().pose.p.z();
  const double e_prop = std::abs(prop.trajectory.back().pose.p.z() - gt_z);
  const double e_fused = std::abs(fused.trajectory.back().pose.p.z() - gt_z);
  INFO("proprioceptive " << e_prop << " fused " << e_fused);
  CHECK(e_prop > 0.05);
  CHECK(e_fused < 0.3 * e_prop);
}
