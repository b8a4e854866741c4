#pragma once

#include <numbers>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "elevodom/elevation_map.hpp"
#include "elevodom/so3.hpp"

namespace elevodom {

inline constexpr double kDegToRad = std::numbers::pi / 180.0;

struct IcpConfig {
  double d_max = 0.05;                     // correspondence gate, m
  double phi_max = 20.0 * kDegToRad;       // normal-to-vertical gate, rad
  double cauchy_scale = 0.02;              // m
  int max_iterations = 30;
  double translation_tol = 5e-4;           // m
  double rotation_tol = 0.05 * kDegToRad;  // rad
  std::size_t min_correspondences = 20;
  double sigma_b = 0.01;                   // residual noise std, m
  double sigma_n = 0.1;                    // normal noise std

  /// Throws ErrorCode::kInvalidArgument when a field is out of range.
  void validate() const;
};

struct DownsampledPoint {
  Vec3 sensor;  // sensor frame, m
  Vec3 world;   // after the prior camera pose, m
  double range = 0.0;
  CellIndex cell;
};

/// Keeps the highest world-frame point per grid cell (first one wins on
/// equal height). Output is ordered by cell storage index. Throws
/// ErrorCode::kDegenerateInput when the cloud is empty or entirely outside
/// the grid.
std::vector<DownsampledPoint> downsample(std::span<const Vec3> cloud, const Pose& prior_camera_pose,
                                         const ElevationGrid& grid);

struct Correspondence {
  Vec3 q;        // source point, world frame
  Vec3 q_prime;  // matched cell as a 3D point
  Vec3 n;        // unit surface normal at the matched cell
  double w = 1.0;
  CellIndex cell;
  std::size_t source = 0;  // index into the queried point list
};

/// Memoizes normal_at per cell. The grid must outlive the cache and stay
/// unmodified while it is in use.
class NormalCache {
 public:
  NormalCache(const ElevationGrid& grid, double phi_max) : grid_(grid), phi_max_(phi_max) {}
  std::optional<Vec3> get(CellIndex c);

 private:
  const ElevationGrid& grid_;
  double phi_max_;
  std::unordered_map<std::size_t, std::optional<Vec3>> cache_;
};

/// Nearest of the occupied 3x3 neighbourhood cells (ties go to the first in
/// row-major order), gated by d_max and by normal acceptance.
std::vector<Correspondence> find_correspondences(std::span<const Vec3> points,
                                                 const ElevationGrid& grid, const IcpConfig& cfg,
                                                 NormalCache* cache = nullptr);

inline double cauchy_weight(double residual, double scale) {
  const double u = residual / scale;
  return 1.0 / (1.0 + u * u);
}

/// Stacked rows a_k^T and right-hand side b_k of the weighted point-to-plane
/// least-squares problem.
struct LinearSystem {
  Eigen::Matrix<double, Eigen::Dynamic, 6> A;
  Eigen::VectorXd b;
};

/// a_k = sqrt(w) (q x n; n), b_k = sqrt(w) n^T (q' - q), using each pair's w.
LinearSystem build_system(std::span<const Correspondence> corrs);

/// (A^T A + eps tr/6 I)^-1 with eps = 1e-10. Throws ErrorCode::kSingularSystem
/// when the repaired matrix is still non-finite or has condition number > 1e12.
Mat6 regularized_inverse(const Mat6& normal_matrix);

Twist solve_least_squares(const LinearSystem& sys);

struct IrlsSolution {
  Twist tau = Twist::Zero();  // total correction (theta, p)
  std::vector<Correspondence> correspondences;  // q at the solution, final weights
  LinearSystem system;                          // at the solution
  int iterations = 0;
  bool converged = false;
};

/// Robust point-to-plane solve over fixed pairs: reweight with the Cauchy
/// loss, solve the linearized problem, apply the increment, repeat.
/// Throws ErrorCode::kInvalidArgument below min_correspondences and
/// ErrorCode::kSingularSystem on an unrecoverable normal matrix.
IrlsSolution solve_irls(std::span<const Correspondence> corrs, const IcpConfig& cfg);

/// Var(a_k) induced by normal noise sigma_n:
/// sigma_n^2 w (skew(q); I) (I - n n^T) (-skew(q)  I).
Mat6 row_covariance(const Correspondence& c, double sigma_n);

/// sigma_b^2 H^-1 + H^-1 [sum b_k^2 Var(a_k)] H^-1 with H = A^T A.
Mat6 icp_covariance(const LinearSystem& sys, std::span<const Correspondence> corrs,
                    const IcpConfig& cfg);

/// The classical sigma_b^2 (A^T A)^-1 model, for comparison.
Mat6 icp_covariance_residual_only(const LinearSystem& sys, const IcpConfig& cfg);

enum class RegistrationStatus {
  kConverged,
  kIterationLimit,
  kInsufficientMap,
  kNoPoints,
  kTooFewCorrespondences,
  kSingularSystem,
};

const char* to_string(RegistrationStatus s);

struct IcpResult {
  Pose correction;  // world-frame left correction: aligned = correction * prior
  Mat6 covariance = Mat6::Zero();
  int iterations = 0;
  bool converged = false;  // true for kConverged and kIterationLimit
  RegistrationStatus status = RegistrationStatus::kInsufficientMap;
  std::size_t n_corr = 0;
  double mean_residual = 0.0;
};

struct Registration {
  IcpResult result;
  std::vector<DownsampledPoint> downsampled;
};

/// Full registration of a sensor-frame cloud against the grid. Failures come
/// back as a non-converged result, never as exceptions.
Registration register_cloud(std::span<const Vec3> cloud, const Pose& prior_camera_pose,
                            const ElevationGrid& grid, const IcpConfig& cfg);

}  // namespace elevodom
