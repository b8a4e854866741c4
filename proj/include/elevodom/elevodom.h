/*
 * C interface to the elevodom library: elevation-map odometry for legged
 * platforms with a limited field-of-view depth sensor.
 *
 * All functions return an eo_status. On failure a description of the most
 * recent error on the calling thread is available from eo_last_error().
 * Handles are opaque and must be released with the matching *_destroy call.
 * A handle may be moved between threads but must not be used concurrently.
 */
#ifndef ELEVODOM_H_
#define ELEVODOM_H_

#include <stddef.h>
#include <stdint.h>

#if defined(ELEVODOM_BUILDING_LIBRARY)
#define EO_API __attribute__((visibility("default")))
#else
#define EO_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum eo_status {
  EO_OK = 0,
  EO_ERR_INVALID_ARGUMENT = 1,
  EO_ERR_IO = 2,
  EO_ERR_FORMAT = 3,
  EO_ERR_INVALID_ROTATION = 4,
  EO_ERR_INVALID_NORMAL = 5,
  EO_ERR_INVALID_MEASUREMENT = 6,
  EO_ERR_SINGULAR = 7,
  EO_ERR_EVALUATION = 8,
  EO_ERR_DEGENERATE_INPUT = 9,
  EO_ERR_INTERNAL = 10
} eo_status;

typedef enum eo_mode {
  EO_MODE_FROM_CONFIG = -1,
  EO_MODE_PROPRIOCEPTIVE_ONLY = 0,
  EO_MODE_ICP_FUSED = 1
} eo_mode;

typedef enum eo_alignment {
  EO_ALIGN_SE3 = 0,
  EO_ALIGN_POSITION_YAW = 1,
  EO_ALIGN_NONE = 2
} eo_alignment;

typedef enum eo_frame_outcome {
  EO_FRAME_FUSED = 0,
  EO_FRAME_BOOTSTRAP = 1,
  EO_FRAME_PROPRIOCEPTIVE_ONLY = 2,
  EO_FRAME_REGISTRATION_FAILED = 3,
  EO_FRAME_GATED = 4,
  EO_FRAME_NO_POINTS = 5
} eo_frame_outcome;

typedef struct eo_grid_s* eo_grid_h;
typedef struct eo_pipeline_s* eo_pipeline_h;

/* Pose as a row-major rotation matrix and a translation. */
typedef struct eo_pose {
  double rotation[9];
  double translation[3];
} eo_pose;

typedef struct eo_odometry_increment {
  double timestamp;
  double dt;
  double rotation_vector[3]; /* body-frame relative rotation, rad */
  double translation[3];     /* body-frame relative translation, m */
  double covariance[36];     /* row-major 6x6, rotation first */
} eo_odometry_increment;

typedef struct eo_frame_result {
  eo_frame_outcome outcome;
  int registration_attempted;
  int icp_iterations;
  size_t icp_correspondences;
  double nis;
  eo_pose prior_camera;
  eo_pose posterior_camera;
  double icp_covariance[36];
} eo_frame_result;

typedef struct eo_run_summary {
  size_t frames;
  size_t fused;
  size_t bootstrap;
  size_t registration_failed;
  size_t gated;
  size_t trajectory_samples;
} eo_run_summary;

typedef struct eo_eval_report {
  double ate_trans_cm;
  double ate_rot_deg;
  double re_trans_median_cm;
  double re_rot_median_deg;
  double window_m;
  size_t associated;
  size_t windows;
} eo_eval_report;

EO_API const char* eo_version(void);
EO_API const char* eo_status_string(eo_status status);
/* Message for the last failing call on this thread; never NULL. */
EO_API const char* eo_last_error(void);

/* ---- elevation grid ---------------------------------------------------- */

EO_API eo_status eo_grid_create(double resolution, int side_cells, double origin_x, double origin_y,
                                eo_grid_h* out);
EO_API eo_status eo_grid_load(const char* snapshot_path, eo_grid_h* out);
EO_API void eo_grid_destroy(eo_grid_h grid);
EO_API eo_status eo_grid_save(eo_grid_h grid, const char* snapshot_path);
/* 16-bit PGM; when has_range is 0 the occupied min/max are used. */
EO_API eo_status eo_grid_export_pgm(eo_grid_h grid, const char* pgm_path, int has_range,
                                    double z_min, double z_max);
EO_API eo_status eo_grid_geometry(eo_grid_h grid, double* resolution, int* side_cells,
                                  double* origin_x, double* origin_y);
EO_API eo_status eo_grid_occupied_count(eo_grid_h grid, size_t* count);
EO_API eo_status eo_grid_cell(eo_grid_h grid, int ix, int iy, int* occupied, double* h,
                              double* var_h);
/* Applies the cell update rules to world-frame points (xyz triplets). */
EO_API eo_status eo_grid_integrate(eo_grid_h grid, const double* xyz, const double* var_z,
                                   size_t count, double lambda, size_t* touched);

/* ---- pipeline ---------------------------------------------------------- */

/* config_path may be NULL for defaults. initial_covariance is the 6-entry
 * diagonal of the error-state covariance (rotation first). */
EO_API eo_status eo_pipeline_create(const char* config_path, eo_mode mode, const eo_pose* extrinsics,
                                    const eo_pose* initial_body_pose,
                                    const double initial_covariance[6], double start_time,
                                    eo_pipeline_h* out);
EO_API void eo_pipeline_destroy(eo_pipeline_h pipeline);
EO_API eo_status eo_pipeline_predict(eo_pipeline_h pipeline, const eo_odometry_increment* inc);
/* xyz holds count sensor-frame points as float triplets. */
EO_API eo_status eo_pipeline_process_frame(eo_pipeline_h pipeline, double timestamp,
                                           const float* xyz, size_t count, eo_frame_result* out);
EO_API eo_status eo_pipeline_body_pose(eo_pipeline_h pipeline, eo_pose* pose, double covariance[36]);
/* Returns a new grid handle holding a copy of the pipeline's map. */
EO_API eo_status eo_pipeline_copy_grid(eo_pipeline_h pipeline, eo_grid_h* out);

/* ---- batch operations used by the command-line tool -------------------- */

/* Reads a scenario file and writes a dataset directory. A NULL scenario_path
 * selects the built-in step-arena scenario. seed_override < 0 keeps the
 * scenario's seed. */
EO_API eo_status eo_simulate(const char* scenario_path, const char* dataset_dir,
                             int64_t seed_override);
/* Writes a scenario file for the built-in step-arena scenario. */
EO_API eo_status eo_write_default_scenario(const char* scenario_path, uint64_t seed);
/* Runs a dataset. Writes trajectory.tum, camera_trajectory.tum, frames.csv,
 * map.eogrid and summary.txt into output_dir. */
EO_API eo_status eo_run_dataset(const char* dataset_dir, const char* config_path, eo_mode mode,
                                const char* output_dir, eo_run_summary* summary);
/* Compares two TUM files. report_path / kv_path may be NULL. */
EO_API eo_status eo_evaluate(const char* estimate_path, const char* ground_truth_path,
                             double window_m, eo_alignment alignment, const char* report_path,
                             const char* kv_path, eo_eval_report* out);

#ifdef __cplusplus
}
#endif

#endif /* ELEVODOM_H_ */
