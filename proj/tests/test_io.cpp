#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "elevodom/dataset_io.hpp"
#include "elevodom/error.hpp"
#include "elevodom/key_value_config.hpp"
#include "support.hpp"

using namespace elevodom;
using testing::max_abs_diff;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return ErrorCode::kInvalidArgument;
}

Dataset small_dataset() {
  std::mt19937_64 rng(4);
  Dataset ds;
  ds.extrinsics = {testing::random_rotation(rng), Vec3(0.1, -0.12, -0.45)};
  ds.start_time = 0.0;
  ds.initial_state.R = testing::random_rotation(rng);
  ds.initial_state.p = Vec3(0.3, 0.1, 0.95);
  ds.initial_state.P = Vec6(1e-6, 2e-6, 3e-6, 4e-6, 5e-6, 6e-6).asDiagonal();
  for (int k = 1; k <= 20; ++k) {
    OdometryIncrement inc;
    inc.t = 0.02 * k;
    inc.dt = 0.02;
    inc.delta_R = so3::exp(testing::random_vec3(rng, 0.01));
    inc.delta_p = testing::random_vec3(rng, 0.005);
    Eigen::Matrix<double, 6, 6> A = Eigen::Matrix<double, 6, 6>::Random();
    inc.Q = A * A.transpose() * 1e-7;
    ds.odometry.push_back(inc);
  }
  for (int k = 0; k < 3; ++k) {
    Frame f;
    f.t = 0.1 * k + 1e-3;
    for (int i = 0; i < 50 + k; ++i) {
      f.points.push_back(testing::random_vec3(rng, 2.0));  // f32 on disk
    }
    ds.frames.push_back(f);
  }
  for (int k = 0; k <= 20; ++k) {
    ds.ground_truth.push_back({0.02 * k, {so3::exp(testing::random_vec3(rng, 1.0)), testing::random_vec3(rng, 1.0)}});
  }
  return ds;
}

}  // namespace

TEST_CASE("key-value config parsing") {
  const KeyValueConfig kv = KeyValueConfig::Parse(
      "# leading comment\n"
      "; another comment\n"
      "top = 3\n"
      "[icp]\n"
      "sigma_b = 0.035\n"
      "vec = 1, 2 3\n"
      "name = fused\n"
      "bad = 1.5x\n");
  CHECK(kv.get_int("top", 0) == 3);
  CHECK(kv.get_double("icp.sigma_b", 0.0) == 0.035);
  CHECK(kv.get_double("icp.missing", 7.0) == 7.0);
  CHECK(kv.get_string("icp.name", "") == "fused");
  CHECK(kv.get_vector("icp.vec", 3) == std::vector<double>{1, 2, 3});
  CHECK_FALSE(kv.find_vector("icp.none").has_value());
  CHECK(kv.keys("icp") == std::vector<std::string>{"sigma_b", "vec", "name", "bad"});
  CHECK(code_of([&] { kv.get_double("icp.bad", 0.0); }) == ErrorCode::kFormat);
  CHECK(code_of([&] { kv.get_int("icp.sigma_b", 0); }) == ErrorCode::kFormat);
  CHECK(code_of([&] { kv.get_vector("icp.vec", 2); }) == ErrorCode::kFormat);
  CHECK(code_of([&] { kv.require_double("icp.none"); }) == ErrorCode::kFormat);
  CHECK(code_of([] { KeyValueConfig::Parse("[unterminated\n"); }) == ErrorCode::kFormat);
  CHECK(code_of([] { KeyValueConfig::Load("/nonexistent/file.ini"); }) == ErrorCode::kIo);
}

TEST_CASE("key-value config round trips vectors exactly") {
  const double values[] = {0.1, 1.0 / 3.0, -2.5e-9, 123456789.123};
  KeyValueConfig kv;
  kv.set("a.v", format_vector(values, 4));
  const KeyValueConfig back = KeyValueConfig::Parse(kv.to_string());
  const auto v = back.get_vector("a.v", 4);
  for (int i = 0; i < 4; ++i) CHECK(v[static_cast<std::size_t>(i)] == values[i]);
}

TEST_CASE("frame binary format round trip and layout") {
  Frame f;
  f.t = 12.5;
  f.points = {Vec3(1.0, -2.0, 0.5), Vec3(0.25, 0.0, 3.0)};
  std::stringstream ss;
  write_frame(f, ss);
  const std::string bytes = ss.str();
  CHECK(bytes.size() == 8 + 4 + 2 * 12);
  const Frame back = read_frame(ss);
  CHECK(back.t == 12.5);
  REQUIRE(back.points.size() == 2);
  CHECK(back.points[1] == f.points[1]);

  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK(code_of([&] { read_frame(truncated); }) == ErrorCode::kFormat);
}

TEST_CASE("odometry CSV round trip") {
  const Dataset ds = small_dataset();
  std::stringstream ss;
  write_odometry_csv(ds.odometry, ss);
  const auto back = read_odometry_csv(ss);
  REQUIRE(back.size() == ds.odometry.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].t == ds.odometry[i].t);
    CHECK(max_abs_diff(back[i].delta_R, ds.odometry[i].delta_R) < 1e-14);
    CHECK(back[i].delta_p == ds.odometry[i].delta_p);
    CHECK(max_abs_diff(back[i].Q, ds.odometry[i].Q) == 0.0);
  }
  std::stringstream bad("0.02,0.02,1,2,3\n");
  CHECK(code_of([&] { read_odometry_csv(bad); }) == ErrorCode::kFormat);
}

TEST_CASE("TUM round trip") {
  const Dataset ds = small_dataset();
  std::stringstream ss;
  write_tum(ds.ground_truth, ss);
  const auto back = read_tum(ss);
  REQUIRE(back.size() == ds.ground_truth.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].t == ds.ground_truth[i].t);
    CHECK(max_abs_diff(back[i].pose.R, ds.ground_truth[i].pose.R) < 1e-11);
    CHECK(max_abs_diff(back[i].pose.p, ds.ground_truth[i].pose.p) < 1e-9);  // 9 decimals on disk
  }
  std::stringstream comment("# t x y z qx qy qz qw\n1 0 0 0 0 0 0 1\n");
  CHECK(read_tum(comment).size() == 1);
  std::stringstream short_line("1 0 0 0 0 0 1\n");
  CHECK(code_of([&] { read_tum(short_line); }) == ErrorCode::kFormat);
  std::stringstream zero_quat("1 0 0 0 0 0 0 0\n");
  CHECK(code_of([&] { read_tum(zero_quat); }) == ErrorCode::kFormat);
}

TEST_CASE("dataset directory round trip") {
  const testing::TempDir tmp("io");
  const Dataset ds = small_dataset();
  write_dataset(ds, tmp.str("ds"));
  const Dataset back = read_dataset(tmp.str("ds"));
  CHECK(back.odometry.size() == ds.odometry.size());
  REQUIRE(back.frames.size() == ds.frames.size());
  for (std::size_t i = 0; i < ds.frames.size(); ++i) {
    CHECK(back.frames[i].t == ds.frames[i].t);
    REQUIRE(back.frames[i].points.size() == ds.frames[i].points.size());
    for (std::size_t j = 0; j < ds.frames[i].points.size(); ++j) {
      CHECK(max_abs_diff(back.frames[i].points[j], ds.frames[i].points[j]) < 1e-6);
    }
  }
  CHECK(max_abs_diff(back.extrinsics.R_IC, ds.extrinsics.R_IC) < 1e-15);
  CHECK(back.extrinsics.p_IC == ds.extrinsics.p_IC);
  CHECK(max_abs_diff(back.initial_state.P, ds.initial_state.P) == 0.0);
  CHECK(back.initial_state.p == ds.initial_state.p);
  CHECK(back.ground_truth.size() == ds.ground_truth.size());
}

TEST_CASE("dataset validation") {
  Dataset ds = small_dataset();
  validate_dataset(ds);
  Dataset bad_dt = ds;
  bad_dt.odometry[3].dt = 0.0;
  CHECK(code_of([&] { validate_dataset(bad_dt); }) == ErrorCode::kFormat);
  Dataset unordered = ds;
  std::swap(unordered.frames[0], unordered.frames[1]);
  CHECK(code_of([&] { validate_dataset(unordered); }) == ErrorCode::kFormat);
  Dataset odo = ds;
  odo.odometry[5].t = odo.odometry[4].t;
  CHECK(code_of([&] { validate_dataset(odo); }) == ErrorCode::kFormat);
  CHECK(code_of([] { read_dataset("/nonexistent/dataset"); }) == ErrorCode::kIo);

  const testing::TempDir tmp("io_missing");
  write_dataset(ds, tmp.str("ds"));
  std::filesystem::remove(tmp.str("ds") + "/odometry.csv");
  CHECK(code_of([&] { read_dataset(tmp.str("ds")); }) == ErrorCode::kIo);
}
