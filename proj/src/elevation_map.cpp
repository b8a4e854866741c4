#include "elevodom/elevation_map.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "elevodom/error.hpp"

namespace elevodom {

Cell update_cell(const Cell& cell, double z, double var_z, const MapUpdateConfig& cfg,
                 CellUpdate* rule) {
  if (!(var_z > 0.0) || !std::isfinite(var_z) || !std::isfinite(z)) {
    throw Error(ErrorCode::kInvalidMeasurement, "update_cell: measurement variance must be positive");
  }
  auto report = [rule](CellUpdate r) {
    if (rule) *rule = r;
  };
  if (!cell.occupied) {
    report(CellUpdate::kInserted);
    return {z, var_z, true};
  }
  const double var_h = cell.var_h;
  const double band = 2.0 * std::sqrt(var_h);
  if (z >= cell.h - band && z <= cell.h + band) {
    report(CellUpdate::kMerged);
    const double denom = var_h + var_z;
    return {(var_h * z + var_z * cell.h) / denom, var_h * var_z / denom, true};
  }
  report(CellUpdate::kInflated);
  const double dz = z - cell.h;
  return {cell.h, var_h + cfg.lambda * dz * dz, true};
}

ElevationGrid::ElevationGrid(double resolution, int side_cells, Vec2 origin)
    : resolution_(resolution), side_(side_cells), origin_(std::move(origin)) {
  if (!(resolution > 0.0) || side_cells <= 0 || !origin_.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "ElevationGrid: resolution and side must be positive");
  }
  cells_.resize(static_cast<std::size_t>(side_) * side_);
}

ElevationGrid ElevationGrid::Centered(double resolution, double side_m, Vec2 center) {
  const int side = static_cast<int>(std::lround(side_m / resolution));
  const Vec2 origin =
      ((center.array() / resolution).round() - 0.5 * side).matrix() * resolution;
  return ElevationGrid(resolution, side, origin);
}

std::optional<CellIndex> ElevationGrid::cell_index(const Vec2& xy) const {
  const double fx = std::floor((xy.x() - origin_.x()) / resolution_);
  const double fy = std::floor((xy.y() - origin_.y()) / resolution_);
  if (!(fx >= 0.0 && fy >= 0.0 && fx < side_ && fy < side_)) return std::nullopt;
  return CellIndex{static_cast<int>(fx), static_cast<int>(fy)};
}

Vec2 ElevationGrid::cell_center(CellIndex c) const {
  return origin_ + resolution_ * Vec2(c.ix + 0.5, c.iy + 0.5);
}

std::size_t ElevationGrid::occupied_count() const {
  return static_cast<std::size_t>(
      std::count_if(cells_.begin(), cells_.end(), [](const Cell& c) { return c.occupied; }));
}

IntegrateStats ElevationGrid::integrate_cloud(std::span<const MapPoint> cloud,
                                              const MapUpdateConfig& cfg) {
  IntegrateStats stats;
  for (const MapPoint& pt : cloud) {
    const auto idx = cell_index(pt.p.head<2>());
    if (!idx) {
      ++stats.out_of_bounds;
      continue;
    }
    Cell& cell = at(*idx);
    CellUpdate rule{};
    try {
      cell = update_cell(cell, pt.p.z(), pt.var_z, cfg, &rule);
    } catch (const Error&) {
      ++stats.rejected;
      continue;
    }
    ++stats.touched;
    switch (rule) {
      case CellUpdate::kInserted: ++stats.inserted; break;
      case CellUpdate::kMerged: ++stats.merged; break;
      case CellUpdate::kInflated: ++stats.inflated; break;
    }
  }
  return stats;
}

std::optional<Vec3> ElevationGrid::normal_at(CellIndex c, double phi_max) const {
  double f[3][3];  // f[dy + 1][dx + 1]
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const CellIndex n{c.ix + dx, c.iy + dy};
      if (!in_bounds(n)) return std::nullopt;
      const Cell& cell = at(n);
      if (!cell.occupied) return std::nullopt;
      f[dy + 1][dx + 1] = cell.h;
    }
  }
  const double scale = 1.0 / (8.0 * resolution_);
  const double dfdx = scale * ((f[0][2] + 2.0 * f[1][2] + f[2][2]) - (f[0][0] + 2.0 * f[1][0] + f[2][0]));
  const double dfdy = scale * ((f[2][0] + 2.0 * f[2][1] + f[2][2]) - (f[0][0] + 2.0 * f[0][1] + f[0][2]));
  const Vec3 n = Vec3(-dfdx, -dfdy, 1.0).normalized();
  if (n.z() < std::cos(phi_max)) return std::nullopt;
  return n;
}

void ElevationGrid::shift(int dx_cells, int dy_cells) {
  if (dx_cells == 0 && dy_cells == 0) return;
  std::vector<Cell> shifted(cells_.size());
  if (std::abs(dx_cells) < side_ && std::abs(dy_cells) < side_) {
    for (int iy = 0; iy < side_; ++iy) {
      const int src_y = iy + dy_cells;
      if (src_y < 0 || src_y >= side_) continue;
      for (int ix = 0; ix < side_; ++ix) {
        const int src_x = ix + dx_cells;
        if (src_x < 0 || src_x >= side_) continue;
        shifted[linear_index({ix, iy})] = cells_[linear_index({src_x, src_y})];
      }
    }
  }
  cells_ = std::move(shifted);
  origin_ += resolution_ * Vec2(dx_cells, dy_cells);
}

CellIndex ElevationGrid::recenter(const Vec2& robot_xy) {
  const int ix = static_cast<int>(std::floor((robot_xy.x() - origin_.x()) / resolution_));
  const int iy = static_cast<int>(std::floor((robot_xy.y() - origin_.y()) / resolution_));
  const int lo = side_ / 4;
  const int hi = side_ - side_ / 4;
  if (ix >= lo && ix < hi && iy >= lo && iy < hi) return {0, 0};
  const CellIndex delta{ix - side_ / 2, iy - side_ / 2};
  shift(delta.ix, delta.iy);
  return delta;
}

namespace {

constexpr char kSnapshotMagic[8] = {'E', 'O', 'G', 'R', 'I', 'D', '0', '1'};

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw Error(ErrorCode::kFormat, "grid snapshot: truncated data");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_snapshot(const ElevationGrid& grid, std::ostream& out) {
  out.write(kSnapshotMagic, sizeof(kSnapshotMagic));
  put_le<double>(out, grid.resolution());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(grid.side_cells()));
  put_le<double>(out, grid.origin().x());
  put_le<double>(out, grid.origin().y());
  for (const Cell& c : grid.cells()) {
    put_le<float>(out, c.occupied ? static_cast<float>(c.h) : std::numeric_limits<float>::quiet_NaN());
    put_le<float>(out, c.occupied ? static_cast<float>(c.var_h) : 0.0f);
  }
  if (!out) throw Error(ErrorCode::kIo, "grid snapshot: write failed");
}

ElevationGrid read_snapshot(std::istream& in) {
  char magic[sizeof(kSnapshotMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kSnapshotMagic, sizeof(magic)) != 0) {
    throw Error(ErrorCode::kFormat, "grid snapshot: bad magic");
  }
  const double resolution = get_le<double>(in);
  const std::uint32_t side = get_le<std::uint32_t>(in);
  const double ox = get_le<double>(in);
  const double oy = get_le<double>(in);
  if (!(resolution > 0.0) || side == 0 || side > 8192) {
    throw Error(ErrorCode::kFormat, "grid snapshot: invalid geometry");
  }
  ElevationGrid grid(resolution, static_cast<int>(side), Vec2(ox, oy));
  for (std::size_t i = 0; i < grid.cells().size(); ++i) {
    const float h = get_le<float>(in);
    const float var = get_le<float>(in);
    Cell& cell = grid.at(grid.from_linear(i));
    if (!std::isnan(h)) cell = {h, var, true};
  }
  return grid;
}

void save_snapshot(const ElevationGrid& grid, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  write_snapshot(grid, out);
}

ElevationGrid load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return read_snapshot(in);
}

void write_pgm(const ElevationGrid& grid, std::ostream& out, std::optional<PgmRange> range) {
  if (!range) {
    PgmRange r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const Cell& c : grid.cells()) {
      if (!c.occupied) continue;
      r.z_min = std::min(r.z_min, c.h);
      r.z_max = std::max(r.z_max, c.h);
    }
    range = r;
  }
  const int side = grid.side_cells();
  out << "P5\n" << side << ' ' << side << "\n65535\n";
  const double span = range->z_max - range->z_min;
  for (int iy = side - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < side; ++ix) {
      const Cell& c = grid.at({ix, iy});
      std::uint16_t gray = 0;
      if (c.occupied) {
        double level = 1.0;
        if (span > 0.0) level = 1.0 + std::round(65534.0 * (c.h - range->z_min) / span);
        gray = static_cast<std::uint16_t>(std::clamp(level, 1.0, 65535.0));
      }
      // PGM samples are big-endian.
      const char bytes[2] = {static_cast<char>(gray >> 8), static_cast<char>(gray & 0xff)};
      out.write(bytes, 2);
    }
  }
  if (!out) throw Error(ErrorCode::kIo, "pgm: write failed");
}

void save_pgm(const ElevationGrid& grid, const std::string& path, std::optional<PgmRange> range) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  write_pgm(grid, out, range);
}

}  // namespace elevodom
