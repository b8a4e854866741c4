// Command-line front end over the elevodom C API.
//
// Exit codes:
//   0      success
//   1..10  library status (see eo_status in elevodom.h)
//   64     command-line usage error

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include "elevodom/elevodom.h"

namespace {

constexpr int kExitUsage = 64;

int report(eo_status s, const char* what) {
  if (s == EO_OK) return 0;
  std::fprintf(stderr, "elevodom %s: %s: %s\n", what, eo_status_string(s), eo_last_error());
  return static_cast<int>(s);
}

eo_mode parse_mode(const std::string& m) {
  if (m == "proprioceptive-only") return EO_MODE_PROPRIOCEPTIVE_ONLY;
  if (m == "icp-fused") return EO_MODE_ICP_FUSED;
  return EO_MODE_FROM_CONFIG;
}

eo_alignment parse_alignment(const std::string& a) {
  if (a == "posyaw") return EO_ALIGN_POSITION_YAW;
  if (a == "none") return EO_ALIGN_NONE;
  return EO_ALIGN_SE3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Elevation-map odometry: simulate, run, evaluate and export maps"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(eo_version()));

  // sim
  auto* sim = app.add_subcommand("sim", "Generate a synthetic dataset from a scenario file");
  std::string sim_config, sim_output, sim_write;
  std::optional<std::int64_t> sim_seed;
  sim->add_option("--config", sim_config, "Scenario file (default: built-in step arena)")
      ->check(CLI::ExistingFile);
  sim->add_option("--output", sim_output, "Dataset directory to write");
  sim->add_option("--seed", sim_seed, "Override the scenario seed")->check(CLI::NonNegativeNumber);
  sim->add_option("--write-scenario", sim_write,
                  "Write the built-in scenario to this file and exit");

  // run
  auto* run = app.add_subcommand("run", "Run the odometry pipeline over a dataset");
  std::string run_dataset, run_config, run_output, run_mode;
  run->add_option("--dataset", run_dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  run->add_option("--config", run_config, "Pipeline configuration file")->check(CLI::ExistingFile);
  run->add_option("--output", run_output, "Output directory")->required();
  run->add_option("--mode", run_mode, "Overrides the configured mode")
      ->check(CLI::IsMember({"proprioceptive-only", "icp-fused"}));

  // eval
  auto* eval = app.add_subcommand("eval", "Compare an estimated trajectory against ground truth");
  std::string eval_est, eval_gt, eval_output, eval_align = "se3";
  double eval_window = 4.0;
  eval->add_option("estimate", eval_est, "Estimated trajectory (TUM)")->required()->check(CLI::ExistingFile);
  eval->add_option("ground_truth", eval_gt, "Ground-truth trajectory (TUM)")->required()->check(CLI::ExistingFile);
  eval->add_option("--window-m", eval_window, "Relative-error window length in metres")
      ->check(CLI::PositiveNumber);
  eval->add_option("--alignment", eval_align, "Alignment before ATE")
      ->check(CLI::IsMember({"se3", "posyaw", "none"}));
  eval->add_option("--output", eval_output,
                   "Directory for report.txt and report.kv (default: print only)");

  // export-map
  auto* exp = app.add_subcommand("export-map", "Render a map snapshot as a 16-bit PGM");
  std::string exp_input, exp_output;
  std::optional<double> z_min, z_max;
  exp->add_option("snapshot", exp_input, "Map snapshot")->required()->check(CLI::ExistingFile);
  exp->add_option("--output", exp_output, "PGM file to write")->required();
  exp->add_option("--z-min", z_min, "Height mapped to the darkest occupied gray");
  exp->add_option("--z-max", z_max, "Height mapped to white");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  if (*sim) {
    if (!sim_write.empty()) {
      return report(eo_write_default_scenario(sim_write.c_str(), sim_seed.value_or(0)), "sim");
    }
    if (sim_output.empty()) {
      std::fprintf(stderr, "elevodom sim: --output is required\n");
      return kExitUsage;
    }
    const int rc = report(eo_simulate(sim_config.empty() ? nullptr : sim_config.c_str(),
                                      sim_output.c_str(), sim_seed.value_or(-1)),
                          "sim");
    if (rc == 0) std::printf("dataset written to %s\n", sim_output.c_str());
    return rc;
  }

  if (*run) {
    eo_run_summary s{};
    const int rc = report(eo_run_dataset(run_dataset.c_str(), run_config.empty() ? nullptr : run_config.c_str(),
                                         parse_mode(run_mode), run_output.c_str(), &s),
                          "run");
    if (rc == 0) {
      std::printf("frames %zu  fused %zu  bootstrap %zu  failed %zu  gated %zu\n", s.frames, s.fused,
                  s.bootstrap, s.registration_failed, s.gated);
      std::printf("outputs written to %s\n", run_output.c_str());
    }
    return rc;
  }

  if (*eval) {
    std::string report_path, kv_path;
    if (!eval_output.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(eval_output, ec);
      if (ec) {
        std::fprintf(stderr, "elevodom eval: cannot create %s\n", eval_output.c_str());
        return EO_ERR_IO;
      }
      report_path = (std::filesystem::path(eval_output) / "report.txt").string();
      kv_path = (std::filesystem::path(eval_output) / "report.kv").string();
    }
    eo_eval_report r{};
    const int rc = report(eo_evaluate(eval_est.c_str(), eval_gt.c_str(), eval_window,
                                      parse_alignment(eval_align),
                                      report_path.empty() ? nullptr : report_path.c_str(),
                                      kv_path.empty() ? nullptr : kv_path.c_str(), &r),
                          "eval");
    if (rc == 0) {
      std::printf("alignment            %s\n", eval_align.c_str());
      std::printf("associated poses     %zu\n", r.associated);
      std::printf("ATE translation      %.4f cm\n", r.ate_trans_cm);
      std::printf("ATE rotation         %.4f deg\n", r.ate_rot_deg);
      std::printf("RE window            %.2f m (%zu windows)\n", r.window_m, r.windows);
      std::printf("RE translation (med) %.4f cm\n", r.re_trans_median_cm);
      std::printf("RE rotation (med)    %.4f deg\n", r.re_rot_median_deg);
    }
    return rc;
  }

  if (*exp) {
    if (z_min.has_value() != z_max.has_value()) {
      std::fprintf(stderr, "elevodom export-map: give both --z-min and --z-max or neither\n");
      return kExitUsage;
    }
    eo_grid_h grid = nullptr;
    int rc = report(eo_grid_load(exp_input.c_str(), &grid), "export-map");
    if (rc != 0) return rc;
    rc = report(eo_grid_export_pgm(grid, exp_output.c_str(), z_min.has_value() ? 1 : 0,
                                   z_min.value_or(0.0), z_max.value_or(0.0)),
                "export-map");
    eo_grid_destroy(grid);
    return rc;
  }
  return kExitUsage;
}
