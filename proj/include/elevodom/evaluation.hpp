#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "elevodom/dataset_io.hpp"

namespace elevodom {

enum class Alignment {
  kSE3,          // rotation + translation (Umeyama, no scale)
  kPositionYaw,  // translation + rotation about the vertical axis
  kNone,
};

Alignment alignment_from_string(const std::string& s);
const char* to_string(Alignment a);

struct EvalReport {
  double ate_trans_cm = 0.0;  // RMSE of aligned positions
  double ate_rot_deg = 0.0;   // RMSE of aligned rotation angles
  double re_trans_median_cm = 0.0;
  double re_rot_median_deg = 0.0;
  double window_m = 0.0;
  std::size_t associated = 0;
  std::size_t windows = 0;  // zero when the path is shorter than the window (RE is NaN)
  Alignment alignment = Alignment::kSE3;
  Pose aligning_transform;  // applied to the estimate
  std::vector<double> times;
  std::vector<double> trans_errors_cm;  // per associated sample, after alignment
  std::vector<double> rot_errors_deg;
};

/// Associates each ground-truth sample with the nearest estimate within
/// max_dt seconds, aligns, and computes ATE and the median relative error
/// over ground-truth arc-length windows of `window_m`. Throws
/// ErrorCode::kEvaluation when nothing associates.
EvalReport evaluate(const std::vector<StampedPose>& estimate,
                    const std::vector<StampedPose>& ground_truth, double window_m,
                    Alignment alignment = Alignment::kSE3, double max_dt = 0.02);

/// Human-readable summary.
void write_report_text(const EvalReport& r, std::ostream& out);
/// Flat `key=value` lines.
void write_report_key_value(const EvalReport& r, std::ostream& out);

}  // namespace elevodom
