#include "elevodom/evaluation.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>

#include "elevodom/error.hpp"

namespace elevodom {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

double rotation_angle(const Mat3& R) {
  const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const Vec3 vee(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  return std::atan2(0.5 * vee.norm(), c);
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

Pose align(const std::vector<Vec3>& est, const std::vector<Vec3>& gt, Alignment mode) {
  const auto n = static_cast<Eigen::Index>(est.size());
  Eigen::Matrix3Xd src(3, n), dst(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    src.col(i) = est[static_cast<std::size_t>(i)];
    dst.col(i) = gt[static_cast<std::size_t>(i)];
  }
  const Vec3 mu_src = src.rowwise().mean();
  const Vec3 mu_dst = dst.rowwise().mean();
  Pose T;
  switch (mode) {
    case Alignment::kNone:
      return T;
    case Alignment::kSE3:
      if (n >= 3) {
        const Eigen::Matrix4d M = Eigen::umeyama(src, dst, false);
        T.R = M.topLeftCorner<3, 3>();
        T.p = M.topRightCorner<3, 1>();
        return T;
      }
      break;
    case Alignment::kPositionYaw: {
      double s = 0.0, c = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const Vec3 a = src.col(i) - mu_src;
        const Vec3 b = dst.col(i) - mu_dst;
        s += a.x() * b.y() - a.y() * b.x();
        c += a.x() * b.x() + a.y() * b.y();
      }
      if (n >= 2 && (s != 0.0 || c != 0.0)) {
        T.R = Eigen::AngleAxisd(std::atan2(s, c), Vec3::UnitZ()).toRotationMatrix();
      }
      break;
    }
  }
  T.p = mu_dst - T.R * mu_src;
  return T;
}

}  // namespace

Alignment alignment_from_string(const std::string& s) {
  if (s == "se3") return Alignment::kSE3;
  if (s == "posyaw" || s == "position-yaw") return Alignment::kPositionYaw;
  if (s == "none") return Alignment::kNone;
  throw Error(ErrorCode::kInvalidArgument, "unknown alignment '" + s + "' (se3 | posyaw | none)");
}

const char* to_string(Alignment a) {
  switch (a) {
    case Alignment::kSE3: return "se3";
    case Alignment::kPositionYaw: return "posyaw";
    case Alignment::kNone: return "none";
  }
  return "unknown";
}

EvalReport evaluate(const std::vector<StampedPose>& estimate,
                    const std::vector<StampedPose>& ground_truth, double window_m,
                    Alignment alignment, double max_dt) {
  if (!(window_m > 0.0)) throw Error(ErrorCode::kInvalidArgument, "window must be positive");
  std::vector<StampedPose> est = estimate;
  std::stable_sort(est.begin(), est.end(), [](const auto& a, const auto& b) { return a.t < b.t; });

  std::vector<const StampedPose*> gt_pairs, est_pairs;
  for (const StampedPose& g : ground_truth) {
    auto it = std::lower_bound(est.begin(), est.end(), g.t,
                               [](const StampedPose& s, double t) { return s.t < t; });
    const StampedPose* best = nullptr;
    double best_dt = max_dt;
    if (it != est.end() && std::abs(it->t - g.t) <= best_dt) {
      best = &*it;
      best_dt = std::abs(it->t - g.t);
    }
    if (it != est.begin() && std::abs(std::prev(it)->t - g.t) < best_dt) best = &*std::prev(it);
    if (best) {
      gt_pairs.push_back(&g);
      est_pairs.push_back(best);
    }
  }
  if (gt_pairs.empty()) {
    throw Error(ErrorCode::kEvaluation, "evaluate: trajectories do not overlap in time");
  }

  EvalReport r;
  r.window_m = window_m;
  r.alignment = alignment;
  r.associated = gt_pairs.size();
  std::vector<Vec3> pe, pg;
  for (std::size_t i = 0; i < gt_pairs.size(); ++i) {
    pe.push_back(est_pairs[i]->pose.p);
    pg.push_back(gt_pairs[i]->pose.p);
  }
  r.aligning_transform = align(pe, pg, alignment);

  double sum_t2 = 0.0, sum_r2 = 0.0;
  for (std::size_t i = 0; i < gt_pairs.size(); ++i) {
    const Pose aligned = r.aligning_transform * est_pairs[i]->pose;
    const double et = (aligned.p - gt_pairs[i]->pose.p).norm();
    const double er = rotation_angle(gt_pairs[i]->pose.R.transpose() * aligned.R);
    r.times.push_back(gt_pairs[i]->t);
    r.trans_errors_cm.push_back(100.0 * et);
    r.rot_errors_deg.push_back(kRadToDeg * er);
    sum_t2 += et * et;
    sum_r2 += er * er;
  }
  const double n = static_cast<double>(gt_pairs.size());
  r.ate_trans_cm = 100.0 * std::sqrt(sum_t2 / n);
  r.ate_rot_deg = kRadToDeg * std::sqrt(sum_r2 / n);

  // Relative error over ground-truth arc-length windows.
  std::vector<double> arc(gt_pairs.size(), 0.0);
  for (std::size_t i = 1; i < gt_pairs.size(); ++i) {
    arc[i] = arc[i - 1] + (gt_pairs[i]->pose.p - gt_pairs[i - 1]->pose.p).norm();
  }
  std::vector<double> re_t, re_r;
  std::size_t j = 0;
  for (std::size_t i = 0; i < gt_pairs.size(); ++i) {
    j = std::max(j, i);
    while (j < gt_pairs.size() && arc[j] - arc[i] < window_m) ++j;
    if (j == gt_pairs.size()) break;
    const Pose dg = gt_pairs[i]->pose.inverse() * gt_pairs[j]->pose;
    const Pose de = est_pairs[i]->pose.inverse() * est_pairs[j]->pose;
    const Pose err = dg.inverse() * de;
    re_t.push_back(100.0 * err.p.norm());
    re_r.push_back(kRadToDeg * rotation_angle(err.R));
  }
  r.windows = re_t.size();
  r.re_trans_median_cm = median(re_t);
  r.re_rot_median_deg = median(re_r);
  return r;
}

void write_report_text(const EvalReport& r, std::ostream& out) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "alignment            %s\n"
                "associated poses     %zu\n"
                "ATE translation      %.4f cm\n"
                "ATE rotation         %.4f deg\n"
                "RE window            %.2f m (%zu windows)\n"
                "RE translation (med) %.4f cm\n"
                "RE rotation (med)    %.4f deg\n",
                to_string(r.alignment), r.associated, r.ate_trans_cm, r.ate_rot_deg, r.window_m,
                r.windows, r.re_trans_median_cm, r.re_rot_median_deg);
  out << buf;
}

void write_report_key_value(const EvalReport& r, std::ostream& out) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "alignment=%s\nassociated=%zu\nate_trans_cm=%.9g\nate_rot_deg=%.9g\n"
                "window_m=%.9g\nwindows=%zu\nre_trans_median_cm=%.9g\nre_rot_median_deg=%.9g\n",
                to_string(r.alignment), r.associated, r.ate_trans_cm, r.ate_rot_deg, r.window_m,
                r.windows, r.re_trans_median_cm, r.re_rot_median_deg);
  out << buf;
}

}  // namespace elevodom
