#include "elevodom/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "elevodom/error.hpp"
#include "elevodom/key_value_config.hpp"

namespace elevodom {

namespace fs = std::filesystem;

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw Error(ErrorCode::kFormat, "frame: truncated data");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<double> split_numbers(const std::string& line, char sep, int line_no) {
  std::vector<double> out;
  std::string tok;
  std::istringstream in(line);
  while (std::getline(in, tok, sep)) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0) {
      throw Error(ErrorCode::kFormat, "line " + std::to_string(line_no) + ": bad number '" + tok + "'");
    }
    out.push_back(v);
  }
  return out;
}

bool skip_line(const std::string& line) {
  const auto first = line.find_first_not_of(" \t\r");
  return first == std::string::npos || line[first] == '#';
}

Eigen::Quaterniond quaternion_from(const std::vector<double>& xyzw) {
  Eigen::Quaterniond q(xyzw[3], xyzw[0], xyzw[1], xyzw[2]);
  if (!(q.norm() > 0.5)) throw Error(ErrorCode::kFormat, "quaternion is not normalized");
  return q.normalized();
}

std::string quaternion_string(const Mat3& R) {
  const Eigen::Quaterniond q(R);
  const double v[4] = {q.x(), q.y(), q.z(), q.w()};
  return format_vector(v, 4);
}

}  // namespace

void validate_dataset(const Dataset& ds) {
  for (std::size_t i = 0; i < ds.odometry.size(); ++i) {
    if (!(ds.odometry[i].dt > 0.0)) {
      throw Error(ErrorCode::kFormat, "odometry increment " + std::to_string(i) + ": dt must be positive");
    }
    if (i > 0 && !(ds.odometry[i].t > ds.odometry[i - 1].t)) {
      throw Error(ErrorCode::kFormat, "odometry timestamps are not strictly increasing at row " + std::to_string(i));
    }
  }
  for (std::size_t i = 1; i < ds.frames.size(); ++i) {
    if (!(ds.frames[i].t > ds.frames[i - 1].t)) {
      throw Error(ErrorCode::kFormat, "frame timestamps are not strictly increasing at frame " + std::to_string(i));
    }
  }
  for (std::size_t i = 1; i < ds.ground_truth.size(); ++i) {
    if (!(ds.ground_truth[i].t > ds.ground_truth[i - 1].t)) {
      throw Error(ErrorCode::kFormat, "ground truth timestamps are not strictly increasing");
    }
  }
}

void write_frame(const Frame& frame, std::ostream& out) {
  put_le<double>(out, frame.t);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(frame.points.size()));
  for (const Vec3& p : frame.points) {
    put_le<float>(out, static_cast<float>(p.x()));
    put_le<float>(out, static_cast<float>(p.y()));
    put_le<float>(out, static_cast<float>(p.z()));
  }
}

Frame read_frame(std::istream& in) {
  Frame f;
  f.t = get_le<double>(in);
  const auto count = get_le<std::uint32_t>(in);
  f.points.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const float x = get_le<float>(in);
    const float y = get_le<float>(in);
    const float z = get_le<float>(in);
    f.points.emplace_back(x, y, z);
  }
  return f;
}

void write_odometry_csv(const std::vector<OdometryIncrement>& odom, std::ostream& out) {
  out << "timestamp_s,dt,rotvec_x,rotvec_y,rotvec_z,dp_x,dp_y,dp_z";
  for (int r = 0; r < 6; ++r) {
    for (int c = r; c < 6; ++c) out << ",q" << r << c;
  }
  out << '\n';
  for (const OdometryIncrement& inc : odom) {
    const Vec3 rv = so3::log(inc.delta_R);
    out << fmt(inc.t) << ',' << fmt(inc.dt);
    for (int i = 0; i < 3; ++i) out << ',' << fmt(rv(i));
    for (int i = 0; i < 3; ++i) out << ',' << fmt(inc.delta_p(i));
    for (int r = 0; r < 6; ++r) {
      for (int c = r; c < 6; ++c) out << ',' << fmt(inc.Q(r, c));
    }
    out << '\n';
  }
}

std::vector<OdometryIncrement> read_odometry_csv(std::istream& in) {
  std::vector<OdometryIncrement> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line) || line.rfind("timestamp", 0) == 0) continue;
    const auto v = split_numbers(line, ',', line_no);
    if (v.size() != 29) {
      throw Error(ErrorCode::kFormat, "odometry.csv line " + std::to_string(line_no) + ": expected 29 columns");
    }
    OdometryIncrement inc;
    inc.t = v[0];
    inc.dt = v[1];
    inc.delta_R = so3::exp(Vec3(v[2], v[3], v[4]));
    inc.delta_p = Vec3(v[5], v[6], v[7]);
    std::size_t k = 8;
    for (int r = 0; r < 6; ++r) {
      for (int c = r; c < 6; ++c) {
        inc.Q(r, c) = v[k];
        inc.Q(c, r) = v[k];
        ++k;
      }
    }
    out.push_back(inc);
  }
  return out;
}

void write_tum(const std::vector<StampedPose>& poses, std::ostream& out) {
  char buf[256];
  for (const StampedPose& s : poses) {
    const Eigen::Quaterniond q(s.pose.R);
    std::snprintf(buf, sizeof(buf), "%.9f %.9f %.9f %.9f %.12f %.12f %.12f %.12f\n", s.t, s.pose.p.x(),
                  s.pose.p.y(), s.pose.p.z(), q.x(), q.y(), q.z(), q.w());
    out << buf;
  }
}

std::vector<StampedPose> read_tum(std::istream& in) {
  std::vector<StampedPose> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    std::istringstream ls(line);
    double v[8];
    for (double& x : v) {
      if (!(ls >> x)) {
        throw Error(ErrorCode::kFormat, "TUM line " + std::to_string(line_no) + ": expected 8 numbers");
      }
    }
    StampedPose s;
    s.t = v[0];
    s.pose.p = Vec3(v[1], v[2], v[3]);
    s.pose.R = quaternion_from({v[4], v[5], v[6], v[7]}).toRotationMatrix();
    out.push_back(s);
  }
  return out;
}

void save_tum(const std::vector<StampedPose>& poses, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  write_tum(poses, out);
}

std::vector<StampedPose> load_tum(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  try {
    return read_tum(in);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

void write_dataset(const Dataset& ds, const std::string& dir) {
  validate_dataset(ds);
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "frames", ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir + ": " + ec.message());

  KeyValueConfig cfg;
  cfg.set("dataset.format", "elevodom-dataset-1");
  cfg.set("dataset.start_time", fmt(ds.start_time));
  cfg.set("extrinsics.rotation_quaternion", quaternion_string(ds.extrinsics.R_IC));
  cfg.set("extrinsics.translation", format_vector(ds.extrinsics.p_IC.data(), 3));
  cfg.set("initial_state.orientation_quaternion", quaternion_string(ds.initial_state.R));
  cfg.set("initial_state.position", format_vector(ds.initial_state.p.data(), 3));
  const Vec6 diag = ds.initial_state.P.diagonal();
  cfg.set("initial_state.covariance_diagonal", format_vector(diag.data(), 6));
  cfg.save((fs::path(dir) / "dataset.cfg").string());

  {
    std::ofstream out(fs::path(dir) / "odometry.csv");
    if (!out) throw Error(ErrorCode::kIo, "cannot write odometry.csv");
    write_odometry_csv(ds.odometry, out);
  }
  {
    std::ofstream index(fs::path(dir) / "frames" / "index.txt");
    if (!index) throw Error(ErrorCode::kIo, "cannot write frames/index.txt");
    index << "# timestamp file\n";
    char name[32];
    for (std::size_t i = 0; i < ds.frames.size(); ++i) {
      std::snprintf(name, sizeof(name), "%06zu.bin", i);
      std::ofstream out(fs::path(dir) / "frames" / name, std::ios::binary);
      if (!out) throw Error(ErrorCode::kIo, std::string("cannot write frame ") + name);
      write_frame(ds.frames[i], out);
      index << fmt(ds.frames[i].t) << ' ' << name << '\n';
    }
  }
  if (!ds.ground_truth.empty()) save_tum(ds.ground_truth, (fs::path(dir) / "ground_truth.tum").string());
}

Dataset read_dataset(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw Error(ErrorCode::kIo, "dataset directory not found: " + dir);
  Dataset ds;

  const KeyValueConfig cfg = KeyValueConfig::Load((root / "dataset.cfg").string());
  ds.start_time = cfg.get_double("dataset.start_time", 0.0);
  ds.extrinsics.R_IC = quaternion_from(cfg.get_vector("extrinsics.rotation_quaternion", 4)).toRotationMatrix();
  const auto t = cfg.get_vector("extrinsics.translation", 3);
  ds.extrinsics.p_IC = Vec3(t[0], t[1], t[2]);
  if (cfg.has("initial_state.orientation_quaternion")) {
    ds.initial_state.R =
        quaternion_from(cfg.get_vector("initial_state.orientation_quaternion", 4)).toRotationMatrix();
  }
  if (cfg.has("initial_state.position")) {
    const auto p = cfg.get_vector("initial_state.position", 3);
    ds.initial_state.p = Vec3(p[0], p[1], p[2]);
  }
  if (cfg.has("initial_state.covariance_diagonal")) {
    const auto d = cfg.get_vector("initial_state.covariance_diagonal", 6);
    ds.initial_state.P = Vec6(Eigen::Map<const Vec6>(d.data())).asDiagonal();
  }

  {
    std::ifstream in(root / "odometry.csv");
    if (!in) throw Error(ErrorCode::kIo, "missing odometry.csv in " + dir);
    ds.odometry = read_odometry_csv(in);
  }
  {
    std::ifstream index(root / "frames" / "index.txt");
    if (!index) throw Error(ErrorCode::kIo, "missing frames/index.txt in " + dir);
    std::string line;
    while (std::getline(index, line)) {
      if (skip_line(line)) continue;
      std::istringstream ls(line);
      double stamp = 0.0;
      std::string name;
      if (!(ls >> stamp >> name)) throw Error(ErrorCode::kFormat, "frames/index.txt: malformed line '" + line + "'");
      std::ifstream fin(root / "frames" / name, std::ios::binary);
      if (!fin) throw Error(ErrorCode::kIo, "missing frame file " + name);
      Frame f = read_frame(fin);
      if (f.t != stamp) throw Error(ErrorCode::kFormat, "frame " + name + ": timestamp differs from index");
      ds.frames.push_back(std::move(f));
    }
  }
  if (fs::exists(root / "ground_truth.tum")) ds.ground_truth = load_tum((root / "ground_truth.tum").string());
  validate_dataset(ds);
  return ds;
}

}  // namespace elevodom
