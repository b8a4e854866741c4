#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "elevodom/elevodom.h"

namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  Scratch() {
    std::random_device rd;
    dir = fs::temp_directory_path() / ("elevodom_capi_" + std::to_string(rd()));
    fs::create_directories(dir);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

eo_pose identity_pose() {
  eo_pose p{};
  p.rotation[0] = p.rotation[4] = p.rotation[8] = 1.0;
  return p;
}

// Sensor-frame cloud of a camera looking straight down from 0.5 m at a floor
// with a raised 10 cm block.
std::vector<float> downward_cloud() {
  std::vector<float> xyz;
  for (int i = -40; i <= 40; ++i) {
    for (int j = -40; j <= 40; ++j) {
      const double x = 0.01 * i + 0.005, y = 0.01 * j + 0.005;  // cell centres
      const double h = (x > 0.1 && y > -0.1 && y < 0.2) ? 0.1 : 0.0;
      xyz.push_back(static_cast<float>(x));
      xyz.push_back(static_cast<float>(-y));
      xyz.push_back(static_cast<float>(0.5 - h));
    }
  }
  return xyz;
}

}  // namespace

TEST_CASE("version and status strings") {
  CHECK(std::strlen(eo_version()) > 0);
  CHECK(std::string(eo_status_string(EO_OK)) == "ok");
  for (int s = EO_OK; s <= EO_ERR_INTERNAL; ++s) CHECK(std::strlen(eo_status_string(static_cast<eo_status>(s))) > 0);
  CHECK(eo_last_error() != nullptr);
}

TEST_CASE("grid lifecycle") {
  const Scratch tmp;
  eo_grid_h g = nullptr;
  REQUIRE(eo_grid_create(0.1, 10, 0.0, 0.0, &g) == EO_OK);
  const double xyz[] = {0.15, 0.15, 0.3, 0.15, 0.15, 0.31, 5.0, 5.0, 0.0};
  const double var[] = {1e-4, 1e-4, 1e-4};
  size_t touched = 0;
  CHECK(eo_grid_integrate(g, xyz, var, 3, 0.025, &touched) == EO_OK);
  CHECK(touched == 2);
  size_t count = 0;
  CHECK(eo_grid_occupied_count(g, &count) == EO_OK);
  CHECK(count == 1);
  int occ = 0;
  double h = 0.0, vh = 0.0;
  CHECK(eo_grid_cell(g, 1, 1, &occ, &h, &vh) == EO_OK);
  CHECK(occ == 1);
  CHECK(h == doctest::Approx(0.305));
  CHECK(vh == doctest::Approx(5e-5));
  CHECK(eo_grid_cell(g, 10, 0, &occ, &h, &vh) == EO_ERR_INVALID_ARGUMENT);

  CHECK(eo_grid_save(g, (tmp / "g.eogrid").c_str()) == EO_OK);
  eo_grid_h loaded = nullptr;
  REQUIRE(eo_grid_load((tmp / "g.eogrid").c_str(), &loaded) == EO_OK);
  double res = 0.0, ox = 1.0, oy = 1.0;
  int side = 0;
  CHECK(eo_grid_geometry(loaded, &res, &side, &ox, &oy) == EO_OK);
  CHECK(res == 0.1);
  CHECK(side == 10);
  CHECK(ox == 0.0);
  CHECK(eo_grid_cell(loaded, 1, 1, &occ, &h, &vh) == EO_OK);
  CHECK(h == doctest::Approx(0.305));

  CHECK(eo_grid_export_pgm(loaded, (tmp / "g.pgm").c_str(), 0, 0.0, 0.0) == EO_OK);
  CHECK(fs::file_size(tmp / "g.pgm") > 200);
  CHECK(eo_grid_export_pgm(loaded, (tmp / "g2.pgm").c_str(), 1, 1.0, 0.0) == EO_ERR_INVALID_ARGUMENT);
  eo_grid_destroy(loaded);
  eo_grid_destroy(g);
  eo_grid_destroy(nullptr);
}

TEST_CASE("grid error paths") {
  eo_grid_h g = nullptr;
  CHECK(eo_grid_create(-1.0, 10, 0.0, 0.0, &g) == EO_ERR_INVALID_ARGUMENT);
  CHECK(g == nullptr);
  CHECK(std::strlen(eo_last_error()) > 0);
  CHECK(eo_grid_create(0.1, 10, 0.0, 0.0, nullptr) == EO_ERR_INVALID_ARGUMENT);
  CHECK(eo_grid_load("/nonexistent/map.eogrid", &g) == EO_ERR_IO);
  CHECK(std::string(eo_last_error()).find("/nonexistent/map.eogrid") != std::string::npos);

  const Scratch tmp;
  {
    std::ofstream(tmp / "junk.eogrid") << "not a map";
  }
  CHECK(eo_grid_load((tmp / "junk.eogrid").c_str(), &g) == EO_ERR_FORMAT);

  REQUIRE(eo_grid_create(0.1, 10, 0.0, 0.0, &g) == EO_OK);
  const double xyz[] = {0.15, 0.15, 0.3};
  const double bad_var[] = {-1.0};
  size_t touched = 7;
  CHECK(eo_grid_integrate(g, xyz, bad_var, 1, 0.025, &touched) == EO_OK);
  CHECK(touched == 0);  // invalid measurements are counted, not fatal
  CHECK(eo_grid_integrate(g, nullptr, nullptr, 1, 0.025, &touched) == EO_ERR_INVALID_ARGUMENT);
  eo_grid_destroy(g);
}

TEST_CASE("pipeline handle") {
  eo_pose ext = identity_pose();  // optical axis straight down
  ext.rotation[4] = ext.rotation[8] = -1.0;
  eo_pose body = identity_pose();
  body.translation[2] = 0.5;
  const double cov[6] = {1e-6, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6};

  eo_pose bad = ext;
  bad.rotation[0] = 2.0;
  eo_pipeline_h p = nullptr;
  CHECK(eo_pipeline_create(nullptr, EO_MODE_ICP_FUSED, &bad, &body, cov, 0.0, &p) == EO_ERR_INVALID_ROTATION);
  CHECK(eo_pipeline_create("/nonexistent.ini", EO_MODE_ICP_FUSED, &ext, &body, cov, 0.0, &p) == EO_ERR_IO);
  REQUIRE(eo_pipeline_create(nullptr, EO_MODE_ICP_FUSED, &ext, &body, cov, 0.0, &p) == EO_OK);

  const std::vector<float> cloud = downward_cloud();
  eo_frame_result r{};
  REQUIRE(eo_pipeline_process_frame(p, 0.0, cloud.data(), cloud.size() / 3, &r) == EO_OK);
  CHECK(r.outcome == EO_FRAME_BOOTSTRAP);
  CHECK(r.registration_attempted == 0);
  CHECK(r.prior_camera.translation[2] == doctest::Approx(0.5));

  eo_odometry_increment inc{};
  inc.timestamp = 0.02;
  inc.dt = 0.02;
  inc.translation[2] = 0.004;  // 4 mm of false vertical motion
  for (int i = 0; i < 6; ++i) inc.covariance[7 * i] = 1e-6;
  CHECK(eo_pipeline_predict(p, &inc) == EO_OK);
  CHECK(eo_pipeline_predict(p, &inc) == EO_ERR_INVALID_ARGUMENT);  // not after the current time
  inc.timestamp = 0.04;
  inc.dt = 0.0;
  CHECK(eo_pipeline_predict(p, &inc) == EO_ERR_INVALID_ARGUMENT);

  REQUIRE(eo_pipeline_process_frame(p, 0.02, cloud.data(), cloud.size() / 3, &r) == EO_OK);
  CHECK(r.registration_attempted == 1);
  CHECK(r.outcome == EO_FRAME_FUSED);
  CHECK(r.icp_correspondences > 1000);
  eo_pose pose{};
  double P[36];
  CHECK(eo_pipeline_body_pose(p, &pose, P) == EO_OK);
  CHECK(std::abs(pose.translation[2] - 0.5) < 0.001);
  CHECK(P[35] < 1e-6 + 1e-6);

  eo_grid_h g = nullptr;
  REQUIRE(eo_pipeline_copy_grid(p, &g) == EO_OK);
  size_t count = 0;
  CHECK(eo_grid_occupied_count(g, &count) == EO_OK);
  CHECK(count > 5000);
  eo_grid_destroy(g);
  CHECK(eo_pipeline_process_frame(p, 0.04, nullptr, 5, &r) == EO_ERR_INVALID_ARGUMENT);
  eo_pipeline_destroy(p);
}

TEST_CASE("batch simulate, run and evaluate") {
  const Scratch tmp;
  const std::string scenario = tmp / "scenario.ini";
  REQUIRE(eo_write_default_scenario(scenario.c_str(), 9) == EO_OK);
  {
    // Shorten the walk to keep the test fast.
    std::ifstream in(scenario);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto pos = text.find("waypoints");
    REQUIRE(pos != std::string::npos);
    const auto end = text.find('\n', pos);
    text.replace(pos, end - pos, "waypoints = 0 0 1.4 0");
    std::ofstream(scenario) << text;
  }
  REQUIRE(eo_simulate(scenario.c_str(), (tmp / "ds").c_str(), -1) == EO_OK);
  CHECK(fs::exists(tmp / "ds/odometry.csv"));
  CHECK(fs::exists(tmp / "ds/ground_truth.tum"));

  eo_run_summary s{};
  REQUIRE(eo_run_dataset((tmp / "ds").c_str(), ELEVODOM_SOURCE_DIR "/scenarios/pipeline.ini", EO_MODE_FROM_CONFIG,
                         (tmp / "out").c_str(), &s) == EO_OK);
  CHECK(s.frames > 10);
  CHECK(s.fused + s.bootstrap + s.registration_failed + s.gated <= s.frames);
  CHECK(s.fused > 0);
  for (const char* f : {"trajectory.tum", "camera_trajectory.tum", "frames.csv", "map.eogrid", "summary.txt"}) {
    CHECK_MESSAGE(fs::exists(fs::path(tmp / "out") / f), f);
  }

  eo_eval_report r{};
  const std::string kv = tmp / "report.kv";
  REQUIRE(eo_evaluate((tmp / "out/trajectory.tum").c_str(), (tmp / "ds/ground_truth.tum").c_str(), 1.0,
                      EO_ALIGN_SE3, nullptr, kv.c_str(), &r) == EO_OK);
  CHECK(r.associated > 100);
  CHECK(r.ate_trans_cm < 5.0);
  CHECK(fs::exists(kv));

  CHECK(eo_evaluate((tmp / "missing.tum").c_str(), (tmp / "ds/ground_truth.tum").c_str(), 1.0, EO_ALIGN_SE3,
                    nullptr, nullptr, &r) == EO_ERR_IO);
  CHECK(eo_run_dataset((tmp / "nope").c_str(), nullptr, EO_MODE_FROM_CONFIG, (tmp / "o2").c_str(), &s) == EO_ERR_IO);
  CHECK(eo_simulate(nullptr, nullptr, -1) == EO_ERR_INVALID_ARGUMENT);
}
