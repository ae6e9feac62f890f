#ifndef FWGUIDE_H
#define FWGUIDE_H

/* Generated from the Rust sources by cbindgen; do not edit by hand. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Outcome of a C API call.
typedef enum FwgStatus {
  FWG_STATUS_OK = 0,
  // A required pointer argument was null.
  FWG_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  FWG_STATUS_INVALID_UTF8 = 2,
  // The scenario failed to parse or validate.
  FWG_STATUS_CONFIG = 3,
  // A numerical routine failed (e.g. the reference solve diverged).
  FWG_STATUS_SOLVER = 4,
  // A file could not be read or written.
  FWG_STATUS_IO = 5,
  // An index was out of range.
  FWG_STATUS_INDEX_OUT_OF_RANGE = 6,
} FwgStatus;

// Opaque scenario handle.
typedef struct FwgScenario FwgScenario;

// Opaque trajectory handle.
typedef struct FwgTrajectory FwgTrajectory;

// One recorded sample, flattened for C consumers. Only the first `dim`
// entries of each array are meaningful; absent quantities are reported via
// the `has_*` flags.
typedef struct FwgSample {
  double t;
  double position[3];
  double velocity[3];
  double control[3];
  double delta_norm;
  double objective;
  double lyapunov;
  double min_dist;
  double beta;
  bool has_velocity;
  bool has_beta;
} FwgSample;

// Fermat-Weber solve result, flattened for C consumers.
typedef struct FwgSolution {
  double point[3];
  uintptr_t dim;
  double residual;
  uintptr_t iterations;
  bool converged;
} FwgSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread. The pointer
// stays valid until the next failing call on the same thread.
const char *fwg_last_error(void);

// Library version as a static string.
const char *fwg_version(void);

// Parses and validates a scenario from TOML text.
//
// # Safety
// `text` must be a valid NUL-terminated string and `out` a valid pointer.
enum FwgStatus fwg_scenario_from_toml(const char *text, struct FwgScenario **out);

// Loads one of the built-in presets by name.
//
// # Safety
// `name` must be a valid NUL-terminated string and `out` a valid pointer.
enum FwgStatus fwg_scenario_preset(const char *name, struct FwgScenario **out);

// Serializes a scenario back to TOML. Free the result with
// [`fwg_string_free`].
//
// # Safety
// `scenario` must be a live handle and `out` a valid pointer.
enum FwgStatus fwg_scenario_to_toml(const struct FwgScenario *scenario, char **out);

// Overrides the scenario seed.
//
// # Safety
// `scenario` must be a live handle.
enum FwgStatus fwg_scenario_set_seed(struct FwgScenario *scenario, uint64_t seed);

// Overrides the integration step and time horizon. Pass a nonpositive
// value to leave a field unchanged.
//
// # Safety
// `scenario` must be a live handle.
enum FwgStatus fwg_scenario_set_timing(struct FwgScenario *scenario, double dt, double horizon);

// # Safety
// `scenario` must be a handle from this library, not yet freed.
void fwg_scenario_free(struct FwgScenario *scenario);

// Frees a string returned by this library.
//
// # Safety
// `s` must originate from this library and not have been freed already.
void fwg_string_free(char *s);

// Runs the scenario to its horizon (or to the collision guard).
//
// # Safety
// `scenario` must be a live handle and `out` a valid pointer.
enum FwgStatus fwg_simulate(const struct FwgScenario *scenario, struct FwgTrajectory **out);

// Number of recorded samples.
//
// # Safety
// `trajectory` must be a live handle.
uintptr_t fwg_trajectory_len(const struct FwgTrajectory *trajectory);

// Spatial dimension of the run (2 or 3).
//
// # Safety
// `trajectory` must be a live handle.
uintptr_t fwg_trajectory_dim(const struct FwgTrajectory *trajectory);

// True when the run ended early on the collision guard.
//
// # Safety
// `trajectory` must be a live handle.
bool fwg_trajectory_collided(const struct FwgTrajectory *trajectory);

// Copies sample `index` into `out`.
//
// # Safety
// `trajectory` must be a live handle and `out` a valid pointer.
enum FwgStatus fwg_trajectory_sample(const struct FwgTrajectory *trajectory,
                                     uintptr_t index,
                                     struct FwgSample *out);

// Writes the trajectory CSV for `scenario` to `path`.
//
// # Safety
// All handles must be live; `path` must be a valid NUL-terminated string.
enum FwgStatus fwg_trajectory_write_csv(const struct FwgTrajectory *trajectory,
                                        const struct FwgScenario *scenario,
                                        const char *path);

// # Safety
// `trajectory` must be a handle from this library, not yet freed.
void fwg_trajectory_free(struct FwgTrajectory *trajectory);

// Evaluates the law's convergence certificate over a finished run.
// On success `*pass` holds the verdict and `*report` (if non-null) a
// printable report to free with [`fwg_string_free`].
//
// # Safety
// Handles must be live; `pass` must be a valid pointer.
enum FwgStatus fwg_certificate(const struct FwgTrajectory *trajectory,
                               const struct FwgScenario *scenario,
                               bool *pass,
                               char **report);

// Solves the scenario's beacon field for its Fermat-Weber point.
//
// # Safety
// `scenario` must be a live handle and `out` a valid pointer.
enum FwgStatus fwg_solve(const struct FwgScenario *scenario, struct FwgSolution *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FWGUIDE_H */
