#include "elevodom/em_icp.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "elevodom/error.hpp"

namespace elevodom {

void IcpConfig::validate() const {
  const bool ok = d_max > 0.0 && phi_max > 0.0 && cauchy_scale > 0.0 && max_iterations > 0 &&
                  translation_tol > 0.0 && rotation_tol > 0.0 && min_correspondences >= 6 &&
                  sigma_b > 0.0 && sigma_n > 0.0;
  if (!ok) throw Error(ErrorCode::kInvalidArgument, "IcpConfig: parameters must be positive, min_correspondences >= 6");
}

std::vector<DownsampledPoint> downsample(std::span<const Vec3> cloud, const Pose& prior_camera_pose,
                                         const ElevationGrid& grid) {
  if (cloud.empty()) throw Error(ErrorCode::kDegenerateInput, "downsample: empty cloud");
  if (!prior_camera_pose.R.allFinite() || !prior_camera_pose.p.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "downsample: prior pose is not finite");
  }
  // Highest point per cell; kept sorted by cell so the result is independent
  // of hash iteration order.
  std::unordered_map<std::size_t, DownsampledPoint> best;
  best.reserve(cloud.size());
  for (const Vec3& s : cloud) {
    if (!s.allFinite()) continue;
    const Vec3 w = prior_camera_pose * s;
    const auto idx = grid.cell_index(w.head<2>());
    if (!idx) continue;
    const std::size_t key = grid.linear_index(*idx);
    auto [it, inserted] = best.try_emplace(key, DownsampledPoint{s, w, s.norm(), *idx});
    if (!inserted && w.z() > it->second.world.z()) it->second = DownsampledPoint{s, w, s.norm(), *idx};
  }
  if (best.empty()) throw Error(ErrorCode::kDegenerateInput, "downsample: no point inside the grid");
  std::vector<std::pair<std::size_t, DownsampledPoint>> sorted(best.begin(), best.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<DownsampledPoint> out;
  out.reserve(sorted.size());
  for (auto& [key, pt] : sorted) out.push_back(pt);
  return out;
}

std::optional<Vec3> NormalCache::get(CellIndex c) {
  const std::size_t key = grid_.linear_index(c);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  auto n = grid_.normal_at(c, phi_max_);
  cache_.emplace(key, n);
  return n;
}

std::vector<Correspondence> find_correspondences(std::span<const Vec3> points,
                                                 const ElevationGrid& grid, const IcpConfig& cfg,
                                                 NormalCache* cache) {
  std::optional<NormalCache> local;
  if (!cache) cache = &local.emplace(grid, cfg.phi_max);

  std::vector<Correspondence> out;
  out.reserve(points.size());
  const double gate2 = cfg.d_max * cfg.d_max;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3& q = points[i];
    const auto center = grid.cell_index(q.head<2>());
    if (!center) continue;
    double best2 = std::numeric_limits<double>::infinity();
    CellIndex best_cell;
    Vec3 best_point;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const CellIndex c{center->ix + dx, center->iy + dy};
        if (!grid.in_bounds(c)) continue;
        const Cell& cell = grid.at(c);
        if (!cell.occupied) continue;
        const Vec2 xy = grid.cell_center(c);
        const Vec3 candidate(xy.x(), xy.y(), cell.h);
        const double d2 = (candidate - q).squaredNorm();
        if (d2 < best2) {
          best2 = d2;
          best_cell = c;
          best_point = candidate;
        }
      }
    }
    if (!(best2 <= gate2)) continue;
    const auto n = cache->get(best_cell);
    if (!n) continue;
    out.push_back({q, best_point, *n, 1.0, best_cell, i});
  }
  return out;
}

LinearSystem build_system(std::span<const Correspondence> corrs) {
  LinearSystem sys;
  sys.A.resize(static_cast<Eigen::Index>(corrs.size()), 6);
  sys.b.resize(static_cast<Eigen::Index>(corrs.size()));
  for (std::size_t k = 0; k < corrs.size(); ++k) {
    const Correspondence& c = corrs[k];
    const double sw = std::sqrt(c.w);
    const auto row = static_cast<Eigen::Index>(k);
    sys.A.block<1, 3>(row, 0) = sw * c.q.cross(c.n).transpose();
    sys.A.block<1, 3>(row, 3) = sw * c.n.transpose();
    sys.b(row) = sw * c.n.dot(c.q_prime - c.q);
  }
  return sys;
}

Mat6 regularized_inverse(const Mat6& normal_matrix) {
  constexpr double kTikhonov = 1e-10;
  constexpr double kMaxCondition = 1e12;
  Mat6 H = 0.5 * (normal_matrix + normal_matrix.transpose());
  H.diagonal().array() += kTikhonov * H.trace() / 6.0;
  if (!H.allFinite()) throw Error(ErrorCode::kSingularSystem, "normal equations are not finite");
  Eigen::SelfAdjointEigenSolver<Mat6> eig(H);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxCondition) {
    throw Error(ErrorCode::kSingularSystem, "normal equations are singular");
  }
  return eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

Twist solve_least_squares(const LinearSystem& sys) {
  const Mat6 H = sys.A.transpose() * sys.A;
  return regularized_inverse(H) * (sys.A.transpose() * sys.b);
}

namespace {

Pose compose_increment(const Twist& delta, const Pose& T) {
  return pose_from_twist(delta) * T;
}

bool increment_small(const Twist& delta, const IcpConfig& cfg) {
  return delta.tail<3>().norm() < cfg.translation_tol && delta.head<3>().norm() < cfg.rotation_tol;
}

// Cauchy-reweights pairs whose q is already at the current estimate.
void reweight(std::vector<Correspondence>& corrs, const IcpConfig& cfg) {
  for (Correspondence& c : corrs) {
    c.w = cauchy_weight(c.n.dot(c.q - c.q_prime), cfg.cauchy_scale);
  }
}

double mean_abs_residual(std::span<const Correspondence> corrs) {
  if (corrs.empty()) return 0.0;
  double sum = 0.0;
  for (const Correspondence& c : corrs) sum += std::abs(c.n.dot(c.q - c.q_prime));
  return sum / static_cast<double>(corrs.size());
}

}  // namespace

IrlsSolution solve_irls(std::span<const Correspondence> corrs, const IcpConfig& cfg) {
  if (corrs.size() < cfg.min_correspondences) {
    throw Error(ErrorCode::kInvalidArgument, "solve_irls: too few correspondences");
  }
  Pose T;
  std::vector<Correspondence> current(corrs.begin(), corrs.end());
  IrlsSolution sol;
  for (sol.iterations = 1; sol.iterations <= cfg.max_iterations; ++sol.iterations) {
    for (std::size_t k = 0; k < corrs.size(); ++k) current[k].q = T * corrs[k].q;
    reweight(current, cfg);
    const Twist delta = solve_least_squares(build_system(current));
    T = compose_increment(delta, T);
    if (increment_small(delta, cfg)) {
      sol.converged = true;
      break;
    }
  }
  sol.iterations = std::min(sol.iterations, cfg.max_iterations);
  for (std::size_t k = 0; k < corrs.size(); ++k) current[k].q = T * corrs[k].q;
  reweight(current, cfg);
  sol.system = build_system(current);
  sol.correspondences = std::move(current);
  sol.tau = twist_from_pose(T);
  return sol;
}

Mat6 icp_covariance_residual_only(const LinearSystem& sys, const IcpConfig& cfg) {
  const Mat6 Hinv = regularized_inverse(sys.A.transpose() * sys.A);
  const Mat6 cov = cfg.sigma_b * cfg.sigma_b * Hinv;
  return 0.5 * (cov + cov.transpose());
}

Mat6 row_covariance(const Correspondence& c, double sigma_n) {
  Eigen::Matrix<double, 6, 3> J;
  J.topRows<3>() = so3::skew(c.q);
  J.bottomRows<3>() = Mat3::Identity();
  const Mat3 tangent = Mat3::Identity() - c.n * c.n.transpose();
  return (sigma_n * sigma_n * c.w) * (J * tangent * J.transpose());
}

Mat6 icp_covariance(const LinearSystem& sys, std::span<const Correspondence> corrs,
                    const IcpConfig& cfg) {
  if (static_cast<std::size_t>(sys.b.size()) != corrs.size()) {
    throw Error(ErrorCode::kInvalidArgument, "icp_covariance: system and correspondences differ in size");
  }
  const Mat6 Hinv = regularized_inverse(sys.A.transpose() * sys.A);
  Mat6 normal_noise = Mat6::Zero();
  for (std::size_t k = 0; k < corrs.size(); ++k) {
    const double bk = sys.b(static_cast<Eigen::Index>(k));
    normal_noise.noalias() += (bk * bk) * row_covariance(corrs[k], cfg.sigma_n);
  }
  const Mat6 cov = cfg.sigma_b * cfg.sigma_b * Hinv + Hinv * normal_noise * Hinv;
  return 0.5 * (cov + cov.transpose());
}

const char* to_string(RegistrationStatus s) {
  switch (s) {
    case RegistrationStatus::kConverged: return "converged";
    case RegistrationStatus::kIterationLimit: return "iteration_limit";
    case RegistrationStatus::kInsufficientMap: return "insufficient_map";
    case RegistrationStatus::kNoPoints: return "no_points";
    case RegistrationStatus::kTooFewCorrespondences: return "too_few_correspondences";
    case RegistrationStatus::kSingularSystem: return "singular_system";
  }
  return "unknown";
}

Registration register_cloud(std::span<const Vec3> cloud, const Pose& prior_camera_pose,
                            const ElevationGrid& grid, const IcpConfig& cfg) {
  cfg.validate();
  Registration out;
  IcpResult& res = out.result;
  auto fail = [&res](RegistrationStatus s) {
    res.status = s;
    res.converged = false;
    res.correction = Pose::Identity();
    res.covariance = Mat6::Zero();
  };

  try {
    out.downsampled = downsample(cloud, prior_camera_pose, grid);
  } catch (const Error&) {
    fail(RegistrationStatus::kNoPoints);
    return out;
  }
  if (grid.occupied_count() < cfg.min_correspondences) {
    fail(RegistrationStatus::kInsufficientMap);
    return out;
  }

  std::vector<Vec3> source(out.downsampled.size());
  std::vector<Vec3> moved(out.downsampled.size());
  for (std::size_t i = 0; i < source.size(); ++i) source[i] = out.downsampled[i].world;

  NormalCache normals(grid, cfg.phi_max);
  Pose T;
  bool small_step = false;
  int iter = 0;
  std::vector<Correspondence> corrs;
  try {
    while (iter < cfg.max_iterations && !small_step) {
      ++iter;
      for (std::size_t i = 0; i < source.size(); ++i) moved[i] = T * source[i];
      corrs = find_correspondences(moved, grid, cfg, &normals);
      if (corrs.size() < cfg.min_correspondences) {
        res.iterations = iter;
        res.n_corr = corrs.size();
        fail(RegistrationStatus::kTooFewCorrespondences);
        return out;
      }
      reweight(corrs, cfg);
      const Twist delta = solve_least_squares(build_system(corrs));
      T = compose_increment(delta, T);
      small_step = increment_small(delta, cfg);
    }

    // Covariance is evaluated at the final estimate.
    for (std::size_t i = 0; i < source.size(); ++i) moved[i] = T * source[i];
    corrs = find_correspondences(moved, grid, cfg, &normals);
    res.iterations = iter;
    res.n_corr = corrs.size();
    if (corrs.size() < cfg.min_correspondences) {
      fail(RegistrationStatus::kTooFewCorrespondences);
      return out;
    }
    reweight(corrs, cfg);
    res.covariance = icp_covariance(build_system(corrs), corrs, cfg);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kSingularSystem) throw;
    res.iterations = iter;
    fail(RegistrationStatus::kSingularSystem);
    return out;
  }

  res.correction = T;
  res.converged = true;
  res.status = small_step ? RegistrationStatus::kConverged : RegistrationStatus::kIterationLimit;
  res.mean_residual = mean_abs_residual(corrs);
  return out;
}

}  // namespace elevodom
