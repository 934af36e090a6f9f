#ifndef MDRECON_H
#define MDRECON_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MdStatus {
  MD_STATUS_OK = 0,
  MD_STATUS_INVALID_INPUT = 1,
  MD_STATUS_DIMENSION_MISMATCH = 2,
  MD_STATUS_EMPTY_WINDOW = 3,
  MD_STATUS_PARSE = 4,
  MD_STATUS_NUMERICAL = 5,
  MD_STATUS_IO = 6,
  MD_STATUS_NULL_POINTER = 7,
  MD_STATUS_BUFFER_TOO_SMALL = 8,
  MD_STATUS_PANIC = 9,
} MdStatus;

typedef enum MdSpectrogramKind {
  MD_SPECTROGRAM_KIND_SPARCS = 0,
  MD_SPECTROGRAM_KIND_STFT = 1,
  MD_SPECTROGRAM_KIND_TRUTH = 2,
} MdSpectrogramKind;

/**
 * Run configuration.
 */
typedef struct MdConfig MdConfig;

/**
 * Result of a pipeline run.
 */
typedef struct MdResult MdResult;

typedef struct MdDopplerAxis {
  /**
   * [m/s]
   */
  double velocity_resolution;
  /**
   * [m/s]
   */
  double max_velocity;
  /**
   * [Hz]
   */
  double frequency_resolution;
  /**
   * [Hz]
   */
  double max_frequency;
} MdDopplerAxis;

typedef struct MdInjectionSummary {
  uint64_t injected;
  uint64_t packets;
  size_t windows;
  /**
   * Smallest unit count over completed windows (0 if there are none).
   */
  size_t min_units_per_window;
  double mean_units_per_window;
} MdInjectionSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL, or
 * 0 if there is none.
 */
size_t md_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *md_version(void);

/**
 * New configuration with the reference defaults. Never NULL.
 */
struct MdConfig *md_config_new(void);

void md_config_free(struct MdConfig *cfg);

/**
 * Parse a TOML configuration. Unset keys take their defaults.
 */
enum MdStatus md_config_from_toml(const char *text, struct MdConfig **cfg_out);

/**
 * Set one key from a TOML value literal, e.g. `("seed", "7")` or
 * `("radio.carrier_hz", "28e9")`.
 */
enum MdStatus md_config_set(struct MdConfig *cfg, const char *key, const char *value);

/**
 * Run the full synthetic pipeline.
 */
enum MdStatus md_pipeline_run(const struct MdConfig *cfg, struct MdResult **result_out);

void md_result_free(struct MdResult *res);

/**
 * Shape of a result: spectrogram columns, window length and gap count.
 */
enum MdStatus md_result_shape(const struct MdResult *res,
                              size_t *columns,
                              size_t *window,
                              size_t *gaps);

/**
 * Copy a spectrogram column by column, natural DFT order inside a column.
 * `len` must be at least columns × window.
 */
enum MdStatus md_result_spectrogram(const struct MdResult *res,
                                    enum MdSpectrogramKind kind,
                                    double *buf,
                                    size_t len);

/**
 * RMSE of the SPARCS or STFT spectrogram against the ground truth.
 */
enum MdStatus md_result_rmse(const struct MdResult *res,
                             enum MdSpectrogramKind kind,
                             double *value);

/**
 * IHT on one window. `values` holds `window` complex samples (only the
 * `available` indices are read); `spectrum` receives `window` complex
 * coefficients.
 */
enum MdStatus md_iht_recover(const double *values,
                             size_t window,
                             const size_t *available,
                             size_t n_available,
                             size_t sparsity,
                             double step,
                             double tolerance,
                             size_t max_iter,
                             double *spectrum,
                             size_t *iterations);

/**
 * Zero-filled periodogram of one window into `power` (`window` values).
 */
enum MdStatus md_stft_baseline(const double *values,
                               size_t window,
                               const size_t *available,
                               size_t n_available,
                               double *power);

/**
 * Doppler axis of a `window`-slot DFT at carrier `carrier_hz` [Hz] and grid
 * step `grid_step_s` [s].
 */
enum MdStatus md_doppler_axis(double carrier_hz,
                              double grid_step_s,
                              size_t window,
                              struct MdDopplerAxis *axis);

/**
 * Complementary Golay pair of length `n` (power of two) as ±1 values.
 */
enum MdStatus md_golay_pair(size_t n, int8_t *a, int8_t *b);

/**
 * Run the injection scheduler over a slot timeline (`occupied[k] != 0` when a
 * packet is present). If `actions` is not NULL it receives one code per slot:
 * 0 none, 1 reuse, 2 inject.
 */
enum MdStatus md_simulate_injection(const uint8_t *occupied,
                                    size_t slots,
                                    size_t min_units,
                                    size_t window,
                                    uint8_t *actions,
                                    struct MdInjectionSummary *summary);

/**
 * Sensing overhead `n_TRN (n_c + n_inj) TRN_len / Σ c̃_i`.
 */
enum MdStatus md_overhead(uint64_t packets,
                          uint64_t injected,
                          uint64_t trace_bits,
                          uint32_t trn_fields,
                          uint64_t trn_len_bits,
                          uint64_t ppdu_target_bytes,
                          uint64_t ppdu_trace_bytes,
                          double *overhead);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MDRECON_H */
