#pragma once

#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>

#include "elevodom/elevation_map.hpp"
#include "elevodom/so3.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("elevodom_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline elevodom::Vec3 random_vec3(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  return {g(rng), g(rng), g(rng)};
}

inline elevodom::Mat3 random_rotation(std::mt19937_64& rng, double scale = 1.0) {
  return elevodom::so3::exp(random_vec3(rng, scale));
}

template <typename A, typename B>
double max_abs_diff(const A& a, const B& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

// Occupies every cell with height f(cell centre).
template <typename F>
void fill_grid(elevodom::ElevationGrid& g, F&& f, double var = 1e-4) {
  for (std::size_t i = 0; i < g.cells().size(); ++i) {
    const elevodom::CellIndex c = g.from_linear(i);
    const elevodom::Vec2 xy = g.cell_center(c);
    g.at(c) = {f(xy.x(), xy.y()), var, true};
  }
}

}  // namespace testing
