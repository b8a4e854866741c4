#include "elevodom/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "elevodom/error.hpp"

namespace elevodom::sim {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

// Half-space n . x <= c.
struct HalfSpace {
  Vec3 n;
  double c;
};

std::vector<HalfSpace> halfspaces(const Box& b) {
  return {{{-1, 0, 0}, -b.x0}, {{1, 0, 0}, b.x1}, {{0, -1, 0}, -b.y0},
          {{0, 1, 0}, b.y1},   {{0, 0, -1}, 0.0}, {{0, 0, 1}, b.height}};
}

std::vector<HalfSpace> halfspaces(const Ramp& r) {
  auto out = halfspaces(Box{r.x0, r.x1, r.y0, r.y1, 0.0});
  out.pop_back();
  const double u0 = r.axis == 0 ? r.x0 : r.y0;
  const double u1 = r.axis == 0 ? r.x1 : r.y1;
  const double slope = (r.h_end - r.h_start) / (u1 - u0);
  Vec3 n(0.0, 0.0, 1.0);
  n(r.axis) = -slope;
  out.push_back({n, r.h_start - slope * u0});
  return out;
}

// Entry distance of the ray into a convex solid, or infinity.
double intersect_convex(const std::vector<HalfSpace>& solid, const Vec3& o, const Vec3& d) {
  double t_enter = 0.0;
  double t_exit = std::numeric_limits<double>::infinity();
  for (const HalfSpace& h : solid) {
    const double denom = h.n.dot(d);
    const double dist = h.c - h.n.dot(o);
    if (denom == 0.0) {
      if (dist < 0.0) return std::numeric_limits<double>::infinity();
      continue;
    }
    const double t = dist / denom;
    if (denom < 0.0) {
      t_enter = std::max(t_enter, t);
    } else {
      t_exit = std::min(t_exit, t);
    }
  }
  if (t_enter > t_exit || t_enter <= 0.0) return std::numeric_limits<double>::infinity();
  return t_enter;
}

double cast(const TerrainSpec& terrain, const std::vector<std::vector<HalfSpace>>& solids,
            const Vec3& o, const Vec3& d) {
  double best = std::numeric_limits<double>::infinity();
  if (d.z() < 0.0 && o.z() > 0.0) {
    const double t = -o.z() / d.z();
    const Vec3 hit = o + t * d;
    if (hit.x() >= terrain.x_min && hit.x() <= terrain.x_max && hit.y() >= terrain.y_min &&
        hit.y() <= terrain.y_max) {
      best = t;
    }
  }
  for (const auto& s : solids) best = std::min(best, intersect_convex(s, o, d));
  return best;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Mat3 rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }
Mat3 rot_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }

double wrap_angle(double a) { return std::atan2(std::sin(a), std::cos(a)); }

}  // namespace

std::optional<double> TerrainSpec::height_at(double x, double y) const {
  if (x < x_min || x > x_max || y < y_min || y > y_max) return std::nullopt;
  double h = 0.0;
  for (const Box& b : boxes) {
    if (x >= b.x0 && x <= b.x1 && y >= b.y0 && y <= b.y1) h = std::max(h, b.height);
  }
  for (const Ramp& r : ramps) {
    if (x >= r.x0 && x <= r.x1 && y >= r.y0 && y <= r.y1) {
      const double u = r.axis == 0 ? x : y;
      const double u0 = r.axis == 0 ? r.x0 : r.y0;
      const double u1 = r.axis == 0 ? r.x1 : r.y1;
      h = std::max(h, r.h_start + (r.h_end - r.h_start) * (u - u0) / (u1 - u0));
    }
  }
  return h;
}

Vec3 pixel_ray(const SensorSpec& sensor, int u, int v) {
  const double fx = 0.5 * sensor.width / std::tan(0.5 * sensor.fov_h);
  const double fy = 0.5 * sensor.height / std::tan(0.5 * sensor.fov_v);
  const Vec3 d((u + 0.5 - 0.5 * sensor.width) / fx, (v + 0.5 - 0.5 * sensor.height) / fy, 1.0);
  return d.normalized();
}

std::vector<Vec3> render_depth(const TerrainSpec& terrain, const Pose& camera_pose,
                               const SensorSpec& sensor, std::uint64_t seed) {
  std::vector<std::vector<HalfSpace>> solids;
  for (const Box& b : terrain.boxes) solids.push_back(halfspaces(b));
  for (const Ramp& r : terrain.ramps) solids.push_back(halfspaces(r));

  std::mt19937_64 rng(mix_seed(seed, 0));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Vec3> cloud;
  cloud.reserve(static_cast<std::size_t>(sensor.width) * sensor.height);
  for (int v = 0; v < sensor.height; ++v) {
    for (int u = 0; u < sensor.width; ++u) {
      const Vec3 d_sensor = pixel_ray(sensor, u, v);
      const double noise = gauss(rng);  // drawn for every pixel to keep streams aligned
      const double t = cast(terrain, solids, camera_pose.p, camera_pose.R * d_sensor);
      if (!(t >= sensor.min_range && t <= sensor.max_range)) continue;
      double std_dev = sensor.depth_noise_std;
      if (sensor.noise_scales_with_range) std_dev *= t * t;
      const double range = std::max(t + std_dev * noise, 1e-6);
      cloud.push_back(range * d_sensor);
    }
  }
  return cloud;
}

namespace {

struct Leg {
  double t0, duration;
  Vec2 from, to;
  double yaw_from, yaw_to;
  bool turning;
};

double ground_height(const TerrainSpec& terrain, const Vec2& xy, double half_width) {
  constexpr int kSamples = 5;
  double sum = 0.0;
  int n = 0;
  for (int i = 0; i < kSamples; ++i) {
    for (int j = 0; j < kSamples; ++j) {
      const double dx = half_width * (2.0 * i / (kSamples - 1) - 1.0);
      const double dy = half_width * (2.0 * j / (kSamples - 1) - 1.0);
      if (auto h = terrain.height_at(xy.x() + dx, xy.y() + dy)) {
        sum += *h;
        ++n;
      }
    }
  }
  return n ? sum / n : 0.0;
}

}  // namespace

std::vector<StampedPose> true_body_trajectory(const TerrainSpec& terrain,
                                              const TrajectorySpec& traj, double odometry_hz) {
  if (traj.waypoints.size() < 2 || !(traj.speed > 0.0) || !(traj.turn_rate > 0.0) ||
      !(odometry_hz > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "trajectory needs >= 2 waypoints and positive rates");
  }
  std::vector<Leg> legs;
  double t = 0.0;
  const Vec2 first_dir = traj.waypoints[1] - traj.waypoints[0];
  double yaw = std::atan2(first_dir.y(), first_dir.x());
  for (std::size_t i = 1; i < traj.waypoints.size(); ++i) {
    const Vec2 a = traj.waypoints[i - 1];
    const Vec2 b = traj.waypoints[i];
    const Vec2 dir = b - a;
    if (dir.norm() < 1e-9) continue;
    const double target = std::atan2(dir.y(), dir.x());
    const double turn = wrap_angle(target - yaw);
    if (std::abs(turn) > 1e-9) {
      const double dur = std::abs(turn) / traj.turn_rate;
      legs.push_back({t, dur, a, a, yaw, yaw + turn, true});
      t += dur;
      yaw += turn;
    }
    const double dur = dir.norm() / traj.speed;
    legs.push_back({t, dur, a, b, yaw, yaw, false});
    t += dur;
  }
  const double total = t;

  auto pose_at = [&](double time) {
    auto it = std::upper_bound(legs.begin(), legs.end(), time,
                               [](double x, const Leg& l) { return x < l.t0; });
    const Leg& leg = it == legs.begin() ? legs.front() : *std::prev(it);
    const double s = std::clamp((time - leg.t0) / leg.duration, 0.0, 1.0);
    const Vec2 xy = leg.from + s * (leg.to - leg.from);
    const double heading = leg.yaw_from + s * (leg.yaw_to - leg.yaw_from);
    const double phase = 2.0 * kPi * traj.gait_frequency * time;
    const double pitch = traj.gait_pitch_amplitude * std::sin(phase);
    const double dz = traj.gait_height_amplitude * std::sin(2.0 * phase);
    Pose p;
    p.R = rot_z(heading) * rot_y(pitch);
    p.p = Vec3(xy.x(), xy.y(), ground_height(terrain, xy, traj.ground_smoothing) + traj.body_height + dz);
    return p;
  };

  std::vector<StampedPose> out;
  const auto ticks = static_cast<std::size_t>(std::floor(total * odometry_hz + 1e-9));
  out.reserve(ticks + 1);
  for (std::size_t k = 0; k <= ticks; ++k) {
    const double tk = static_cast<double>(k) / odometry_hz;
    out.push_back({tk, pose_at(tk)});
  }
  return out;
}

Dataset generate_dataset(const Scenario& sc) {
  if (sc.rates.frame_every < 1) throw Error(ErrorCode::kInvalidArgument, "frame_every must be >= 1");
  Dataset ds;
  ds.extrinsics = sc.extrinsics;
  ds.ground_truth = true_body_trajectory(sc.terrain, sc.trajectory, sc.rates.odometry_hz);
  ds.start_time = ds.ground_truth.front().t;
  ds.initial_state.R = ds.ground_truth.front().pose.R;
  ds.initial_state.p = ds.ground_truth.front().pose.p;
  ds.initial_state.P = sc.initial_covariance_diagonal.asDiagonal();

  const TrajectorySpec& tr = sc.trajectory;
  const double q_rot = tr.reported_noise_rotation >= 0.0 ? tr.reported_noise_rotation : tr.noise_rotation;
  const double q_pos =
      tr.reported_noise_translation >= 0.0 ? tr.reported_noise_translation : tr.noise_translation;
  std::mt19937_64 rng(mix_seed(sc.seed, 0x0d0));
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (std::size_t k = 1; k < ds.ground_truth.size(); ++k) {
    const Pose& a = ds.ground_truth[k - 1].pose;
    const Pose& b = ds.ground_truth[k].pose;
    const double walked = (b.p - a.p).head<2>().norm();
    const Vec3 fwd = a.R.col(0);
    const double heading = std::atan2(fwd.y(), fwd.x());

    OdometryIncrement inc;
    inc.t = ds.ground_truth[k].t;
    inc.dt = inc.t - ds.ground_truth[k - 1].t;
    Vec3 rot_noise, pos_noise;
    for (int i = 0; i < 3; ++i) rot_noise(i) = gauss(rng);
    for (int i = 0; i < 3; ++i) pos_noise(i) = gauss(rng);
    const double sq = std::sqrt(inc.dt);
    inc.delta_R = so3::orthonormalize(a.R.transpose() * b.R *
                                      so3::exp(tr.drift_rotation * walked + tr.noise_rotation * sq * rot_noise));
    inc.delta_p = a.R.transpose() * (b.p - a.p) +
                  a.R.transpose() * (rot_z(heading) * tr.drift_translation * walked) +
                  tr.noise_translation * sq * pos_noise;
    inc.Q.topLeftCorner<3, 3>() = Mat3::Identity() * q_rot * q_rot * inc.dt;
    inc.Q.bottomRightCorner<3, 3>() = Mat3::Identity() * q_pos * q_pos * inc.dt;
    ds.odometry.push_back(inc);
  }

  for (std::size_t k = 0; k < ds.ground_truth.size(); k += static_cast<std::size_t>(sc.rates.frame_every)) {
    const Pose camera = ds.ground_truth[k].pose * Pose{sc.extrinsics.R_IC, sc.extrinsics.p_IC};
    Frame f;
    f.t = ds.ground_truth[k].t;
    f.points = render_depth(sc.terrain, camera, sc.sensor, mix_seed(sc.seed, 1000 + k));
    ds.frames.push_back(std::move(f));
  }
  return ds;
}

Extrinsics knee_camera_extrinsics() {
  // Optical frame: z forward, x right, y down; pitched 50 degrees below the
  // body's forward axis.
  const double pitch = 50.0 * kDeg;
  const Vec3 z_axis(std::cos(pitch), 0.0, -std::sin(pitch));
  const Vec3 x_axis(0.0, -1.0, 0.0);
  Extrinsics e;
  e.R_IC.col(0) = x_axis;
  e.R_IC.col(1) = z_axis.cross(x_axis);
  e.R_IC.col(2) = z_axis;
  e.p_IC = Vec3(0.10, -0.12, -0.45);
  return e;
}

Scenario step_arena_scenario(std::uint64_t seed) {
  Scenario sc;
  sc.seed = seed;
  sc.terrain.boxes.push_back({-0.6, 0.6, -0.4, 0.4, 0.11});
  sc.sensor.depth_noise_std = 0.005;
  sc.extrinsics = knee_camera_extrinsics();
  TrajectorySpec& tr = sc.trajectory;
  tr.waypoints = {{0.0, 0.0}, {1.6, 0.0}, {-1.6, 0.15}, {1.6, -0.1}};
  tr.drift_translation = Vec3(0.0, 0.0, 0.01);
  tr.noise_translation = 0.002;
  tr.noise_rotation = 0.1 * kDeg;
  return sc;
}

TerrainSpec two_step_terrain() {
  TerrainSpec t;
  // Step rising along +x, then its landing.
  t.ramps.push_back({0.3, 0.8, -0.6, 0.0, 0.0, 0.11, 0});
  t.boxes.push_back({0.8, 1.3, -0.6, 0.0, 0.11});
  // Step rising along +y, then its landing.
  t.ramps.push_back({0.3, 1.3, 0.1, 0.6, 0.0, 0.11, 1});
  t.boxes.push_back({0.3, 1.3, 0.6, 1.0, 0.11});
  return t;
}

namespace {

Vec3 vec3_from(const std::vector<double>& v) { return {v[0], v[1], v[2]}; }

std::string num(double v) { return format_vector(&v, 1); }

}  // namespace

Scenario scenario_from(const KeyValueConfig& kv) {
  Scenario sc;
  const std::string seed = kv.get_string("scenario.seed", "1");
  try {
    std::size_t pos = 0;
    sc.seed = std::stoull(seed, &pos);
    if (pos != seed.size()) throw std::invalid_argument(seed);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kFormat, "scenario.seed: not an unsigned integer: '" + seed + "'");
  }
  sc.rates.odometry_hz = kv.get_double("rates.odometry_hz", sc.rates.odometry_hz);
  sc.rates.frame_every = kv.get_int("rates.frame_every", sc.rates.frame_every);

  TerrainSpec& t = sc.terrain;
  if (auto e = kv.find_vector("terrain.extents")) {
    if (e->size() != 4) throw Error(ErrorCode::kFormat, "terrain.extents: expected 4 values");
    t.x_min = (*e)[0], t.x_max = (*e)[1], t.y_min = (*e)[2], t.y_max = (*e)[3];
  }
  for (const std::string& key : kv.keys("terrain")) {
    if (key.rfind("box", 0) == 0) {
      const auto v = kv.get_vector("terrain." + key, 5);
      t.boxes.push_back({v[0], v[1], v[2], v[3], v[4]});
    } else if (key.rfind("ramp", 0) == 0) {
      const auto v = kv.get_vector("terrain." + key, 7);
      if (v[6] != 0.0 && v[6] != 1.0) throw Error(ErrorCode::kFormat, key + ": axis must be 0 or 1");
      t.ramps.push_back({v[0], v[1], v[2], v[3], v[4], v[5], static_cast<int>(v[6])});
    }
  }

  SensorSpec& s = sc.sensor;
  s.fov_h = kv.get_double("sensor.fov_h_deg", s.fov_h / kDeg) * kDeg;
  s.fov_v = kv.get_double("sensor.fov_v_deg", s.fov_v / kDeg) * kDeg;
  s.width = kv.get_int("sensor.width", s.width);
  s.height = kv.get_int("sensor.height", s.height);
  s.depth_noise_std = kv.get_double("sensor.depth_noise_std", s.depth_noise_std);
  s.noise_scales_with_range = kv.get_int("sensor.noise_scales_with_range", s.noise_scales_with_range) != 0;
  s.min_range = kv.get_double("sensor.min_range", s.min_range);
  s.max_range = kv.get_double("sensor.max_range", s.max_range);
  if (s.width <= 0 || s.height <= 0 || !(s.fov_h > 0.0) || !(s.fov_v > 0.0) || !(s.max_range > 0.0)) {
    throw Error(ErrorCode::kFormat, "sensor parameters must be positive");
  }

  TrajectorySpec& tr = sc.trajectory;
  const auto wp = kv.find_vector("trajectory.waypoints");
  if (!wp || wp->size() < 4 || wp->size() % 2 != 0) {
    throw Error(ErrorCode::kFormat, "trajectory.waypoints: expected >= 2 (x y) pairs");
  }
  for (std::size_t i = 0; i < wp->size(); i += 2) tr.waypoints.emplace_back((*wp)[i], (*wp)[i + 1]);
  tr.speed = kv.get_double("trajectory.speed", tr.speed);
  tr.turn_rate = kv.get_double("trajectory.turn_rate_deg", tr.turn_rate / kDeg) * kDeg;
  tr.body_height = kv.get_double("trajectory.body_height", tr.body_height);
  tr.gait_height_amplitude = kv.get_double("trajectory.gait_height_amplitude", tr.gait_height_amplitude);
  tr.gait_pitch_amplitude =
      kv.get_double("trajectory.gait_pitch_amplitude_deg", tr.gait_pitch_amplitude / kDeg) * kDeg;
  tr.gait_frequency = kv.get_double("trajectory.gait_frequency", tr.gait_frequency);
  tr.ground_smoothing = kv.get_double("trajectory.ground_smoothing", tr.ground_smoothing);
  if (kv.has("trajectory.drift_translation_per_m")) {
    tr.drift_translation = vec3_from(kv.get_vector("trajectory.drift_translation_per_m", 3));
  }
  if (kv.has("trajectory.drift_rotation_deg_per_m")) {
    tr.drift_rotation = vec3_from(kv.get_vector("trajectory.drift_rotation_deg_per_m", 3)) * kDeg;
  }
  tr.noise_translation = kv.get_double("trajectory.noise_translation", tr.noise_translation);
  tr.noise_rotation = kv.get_double("trajectory.noise_rotation_deg", tr.noise_rotation / kDeg) * kDeg;
  tr.reported_noise_translation =
      kv.get_double("trajectory.reported_noise_translation", tr.reported_noise_translation);
  if (kv.has("trajectory.reported_noise_rotation_deg")) {
    tr.reported_noise_rotation = kv.require_double("trajectory.reported_noise_rotation_deg") * kDeg;
  }
  if (!(tr.speed > 0.0)) throw Error(ErrorCode::kFormat, "trajectory.speed must be positive");

  sc.extrinsics = knee_camera_extrinsics();
  if (kv.has("extrinsics.rotation_quaternion")) {
    const auto q = kv.get_vector("extrinsics.rotation_quaternion", 4);
    sc.extrinsics.R_IC = Eigen::Quaterniond(q[3], q[0], q[1], q[2]).normalized().toRotationMatrix();
  }
  if (kv.has("extrinsics.translation")) {
    sc.extrinsics.p_IC = vec3_from(kv.get_vector("extrinsics.translation", 3));
  }
  if (kv.has("initial.covariance_diagonal")) {
    const auto d = kv.get_vector("initial.covariance_diagonal", 6);
    sc.initial_covariance_diagonal = Eigen::Map<const Vec6>(d.data());
  }
  return sc;
}

KeyValueConfig to_key_value(const Scenario& sc) {
  KeyValueConfig kv;
  kv.set("scenario.seed", std::to_string(sc.seed));
  kv.set("rates.odometry_hz", num(sc.rates.odometry_hz));
  kv.set("rates.frame_every", std::to_string(sc.rates.frame_every));
  const TerrainSpec& t = sc.terrain;
  const double ext[4] = {t.x_min, t.x_max, t.y_min, t.y_max};
  kv.set("terrain.extents", format_vector(ext, 4));
  for (std::size_t i = 0; i < t.boxes.size(); ++i) {
    const Box& b = t.boxes[i];
    const double v[5] = {b.x0, b.x1, b.y0, b.y1, b.height};
    kv.set("terrain.box" + std::to_string(i), format_vector(v, 5));
  }
  for (std::size_t i = 0; i < t.ramps.size(); ++i) {
    const Ramp& r = t.ramps[i];
    const double v[7] = {r.x0, r.x1, r.y0, r.y1, r.h_start, r.h_end, static_cast<double>(r.axis)};
    kv.set("terrain.ramp" + std::to_string(i), format_vector(v, 7));
  }
  const SensorSpec& s = sc.sensor;
  kv.set("sensor.fov_h_deg", num(s.fov_h / kDeg));
  kv.set("sensor.fov_v_deg", num(s.fov_v / kDeg));
  kv.set("sensor.width", std::to_string(s.width));
  kv.set("sensor.height", std::to_string(s.height));
  kv.set("sensor.depth_noise_std", num(s.depth_noise_std));
  kv.set("sensor.noise_scales_with_range", s.noise_scales_with_range ? "1" : "0");
  kv.set("sensor.min_range", num(s.min_range));
  kv.set("sensor.max_range", num(s.max_range));
  const TrajectorySpec& tr = sc.trajectory;
  std::vector<double> wp;
  for (const Vec2& w : tr.waypoints) {
    wp.push_back(w.x());
    wp.push_back(w.y());
  }
  kv.set("trajectory.waypoints", format_vector(wp.data(), wp.size()));
  kv.set("trajectory.speed", num(tr.speed));
  kv.set("trajectory.turn_rate_deg", num(tr.turn_rate / kDeg));
  kv.set("trajectory.body_height", num(tr.body_height));
  kv.set("trajectory.gait_height_amplitude", num(tr.gait_height_amplitude));
  kv.set("trajectory.gait_pitch_amplitude_deg", num(tr.gait_pitch_amplitude / kDeg));
  kv.set("trajectory.gait_frequency", num(tr.gait_frequency));
  kv.set("trajectory.ground_smoothing", num(tr.ground_smoothing));
  kv.set("trajectory.drift_translation_per_m", format_vector(tr.drift_translation.data(), 3));
  const Vec3 drift_rot_deg = tr.drift_rotation / kDeg;
  kv.set("trajectory.drift_rotation_deg_per_m", format_vector(drift_rot_deg.data(), 3));
  kv.set("trajectory.noise_translation", num(tr.noise_translation));
  kv.set("trajectory.noise_rotation_deg", num(tr.noise_rotation / kDeg));
  if (tr.reported_noise_translation >= 0.0) {
    kv.set("trajectory.reported_noise_translation", num(tr.reported_noise_translation));
  }
  if (tr.reported_noise_rotation >= 0.0) {
    kv.set("trajectory.reported_noise_rotation_deg", num(tr.reported_noise_rotation / kDeg));
  }
  const Eigen::Quaterniond q(sc.extrinsics.R_IC);
  const double qv[4] = {q.x(), q.y(), q.z(), q.w()};
  kv.set("extrinsics.rotation_quaternion", format_vector(qv, 4));
  kv.set("extrinsics.translation", format_vector(sc.extrinsics.p_IC.data(), 3));
  kv.set("initial.covariance_diagonal", format_vector(sc.initial_covariance_diagonal.data(), 6));
  return kv;
}

}  // namespace elevodom::sim
