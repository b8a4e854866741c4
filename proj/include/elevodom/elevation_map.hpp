#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elevodom/so3.hpp"

namespace elevodom {

/// Integer cell coordinates: ix counts along world x, iy along world y.
struct CellIndex {
  int ix = 0;
  int iy = 0;

  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

struct Cell {
  double h = 0.0;      // elevation, m; meaningful only when occupied
  double var_h = 0.0;  // elevation variance, m^2
  bool occupied = false;

  friend bool operator==(const Cell&, const Cell&) = default;
};

struct MapUpdateConfig {
  double lambda = 0.025;
  /// sigma_z^2 = sigma_z_coeff * d^2, d = point-to-camera distance.
  double sigma_z_coeff = 1e-4;

  double measurement_variance(double distance) const {
    return sigma_z_coeff * distance * distance;
  }
};

/// Which of the three update rules handled a measurement.
enum class CellUpdate { kInserted, kMerged, kInflated };

/// Applies the insert / merge / inflate rules to one cell.
/// Throws ErrorCode::kInvalidMeasurement for var_z <= 0 (or non-finite input).
Cell update_cell(const Cell& cell, double z, double var_z, const MapUpdateConfig& cfg,
                 CellUpdate* rule = nullptr);

struct MapPoint {
  Vec3 p;        // world frame, m
  double var_z;  // m^2
};

struct IntegrateStats {
  std::size_t touched = 0;
  std::size_t out_of_bounds = 0;
  std::size_t rejected = 0;  // invalid measurements
  std::size_t inserted = 0;
  std::size_t merged = 0;
  std::size_t inflated = 0;
};

/// Robot-centric square 2.5D grid, world-aligned so that recentering is an
/// integer shift. Storage is row-major with rows along y: cell (ix, iy) lives
/// at iy * side + ix.
class ElevationGrid {
 public:
  ElevationGrid(double resolution, int side_cells, Vec2 origin);

  /// Grid of the given metric size centred on `center`, origin snapped to a
  /// multiple of the resolution.
  static ElevationGrid Centered(double resolution, double side_m, Vec2 center);

  double resolution() const { return resolution_; }
  int side_cells() const { return side_; }
  const Vec2& origin() const { return origin_; }

  /// Cell containing xy using half-open intervals; nullopt when outside.
  std::optional<CellIndex> cell_index(const Vec2& xy) const;
  bool in_bounds(CellIndex c) const {
    return c.ix >= 0 && c.iy >= 0 && c.ix < side_ && c.iy < side_;
  }
  Vec2 cell_center(CellIndex c) const;
  std::size_t linear_index(CellIndex c) const {
    return static_cast<std::size_t>(c.iy) * side_ + c.ix;
  }
  CellIndex from_linear(std::size_t i) const {
    return {static_cast<int>(i % side_), static_cast<int>(i / side_)};
  }

  const Cell& at(CellIndex c) const { return cells_[linear_index(c)]; }
  Cell& at(CellIndex c) { return cells_[linear_index(c)]; }
  std::span<const Cell> cells() const { return cells_; }

  std::size_t occupied_count() const;

  /// Per-point update_cell; out-of-bounds points are skipped and counted.
  IntegrateStats integrate_cloud(std::span<const MapPoint> cloud, const MapUpdateConfig& cfg);

  /// Unit surface normal from Sobel derivatives of the 3x3 neighbourhood.
  /// Rejected (nullopt) when any neighbour is empty or out of bounds, or when
  /// the angle to vertical exceeds phi_max.
  std::optional<Vec3> normal_at(CellIndex c, double phi_max) const;

  /// Moves the origin by (dx, dy) cells; retained cells are copied verbatim,
  /// uncovered cells become empty.
  void shift(int dx_cells, int dy_cells);

  /// Shifts the grid to centre on `robot_xy` when the robot has left the
  /// central quarter of the grid. Returns the applied shift in cells.
  CellIndex recenter(const Vec2& robot_xy);

  friend bool operator==(const ElevationGrid&, const ElevationGrid&) = default;

 private:
  double resolution_;
  int side_;
  Vec2 origin_;
  std::vector<Cell> cells_;
};

// Snapshot format (little-endian):
//   char[8]  magic "EOGRID01"
//   f64      resolution
//   u32      side_cells
//   f64      origin_x, origin_y
//   side*side records in storage order: f32 h, f32 var_h (empty: h = NaN, var = 0)
void write_snapshot(const ElevationGrid& grid, std::ostream& out);
ElevationGrid read_snapshot(std::istream& in);
void save_snapshot(const ElevationGrid& grid, const std::string& path);
ElevationGrid load_snapshot(const std::string& path);

struct PgmRange {
  double z_min = 0.0;
  double z_max = 0.0;
};

/// 16-bit binary PGM render, north (max y) at the top. Empty cells are 0;
/// occupied cells map affinely: gray = 1 + round(65534 * (h - z_min) / (z_max - z_min)),
/// clamped to [1, 65535]. Without an explicit range the occupied min/max are
/// used; a degenerate range renders every occupied cell as 1.
void write_pgm(const ElevationGrid& grid, std::ostream& out,
               std::optional<PgmRange> range = std::nullopt);
void save_pgm(const ElevationGrid& grid, const std::string& path,
              std::optional<PgmRange> range = std::nullopt);

}  // namespace elevodom
