#ifndef FMM_ECG_H
#define FMM_ECG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FmmStatus {
  FMM_STATUS_OK = 0,
  FMM_STATUS_NULL_POINTER = 1,
  FMM_STATUS_INVALID_ARGUMENT = 2,
  FMM_STATUS_UNFITTABLE = 3,
  FMM_STATUS_ABSENT_WAVE = 4,
  FMM_STATUS_IO = 5,
  FMM_STATUS_PARSE = 6,
  FMM_STATUS_PANIC = 7,
} FmmStatus;

/**
 * One beat on the phase axis.
 */
typedef struct FmmBeat FmmBeat;

/**
 * Identification thresholds.
 */
typedef struct FmmConfig FmmConfig;

/**
 * Result of fitting one beat.
 */
typedef struct FmmFitReport FmmFitReport;

typedef struct FmmWave {
  double amplitude;
  double alpha;
  double beta;
  double omega;
} FmmWave;

/**
 * Percentages rounded to two decimals. A ratio whose denominator is zero
 * is reported as NaN with its `*_defined` flag cleared.
 */
typedef struct FmmSummary {
  double se;
  double ppv;
  double der;
  double f1;
  bool se_defined;
  bool ppv_defined;
  bool der_defined;
  bool f1_defined;
} FmmSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *fmm_last_error(void);

/**
 * Value of one wave at phase `t`.
 */
enum FmmStatus fmm_eval_wave(const struct FmmWave *wave, double t, double *out);

/**
 * Phase in [0, 2π) of the wave's maximum.
 */
enum FmmStatus fmm_crest_time(const struct FmmWave *wave, double *out);

/**
 * Phase in [0, 2π) of the wave's minimum.
 */
enum FmmStatus fmm_trough_time(const struct FmmWave *wave, double *out);

/**
 * Default thresholds. Never null.
 */
struct FmmConfig *fmm_config_new(void);

/**
 * Defaults overridden by the `key = value` lines of a file.
 *
 * # Safety
 * `path` must be a NUL-terminated string.
 */
enum FmmStatus fmm_config_from_file(const char *path, struct FmmConfig **out);

/**
 * # Safety
 * `cfg` must come from this library and not have been freed.
 */
void fmm_config_free(struct FmmConfig *cfg);

/**
 * Copies `n` phases and voltages into a new beat.
 *
 * # Safety
 * `times` and `values` must point to `n` readable doubles.
 */
enum FmmStatus fmm_beat_new(const double *times,
                            const double *values,
                            uintptr_t n,
                            double fs,
                            double qrs_phase,
                            struct FmmBeat **out);

/**
 * # Safety
 * `beat` must come from this library and not have been freed.
 */
void fmm_beat_free(struct FmmBeat *beat);

/**
 * Fits the five-wave model. A null `cfg` means the defaults.
 *
 * # Safety
 * Pointers must come from this library and be live.
 */
enum FmmStatus fmm_fit_beat(const struct FmmBeat *beat,
                            const struct FmmConfig *cfg,
                            struct FmmFitReport **out);

/**
 * # Safety
 * `report` must come from this library and not have been freed.
 */
void fmm_report_free(struct FmmFitReport *report);

/**
 * R² of the fit, NaN for a null report.
 *
 * # Safety
 * `report` must be live or null.
 */
double fmm_report_r2(const struct FmmFitReport *report);

/**
 * Intercept M, NaN for a null report.
 *
 * # Safety
 * `report` must be live or null.
 */
double fmm_report_intercept(const struct FmmFitReport *report);

/**
 * Whether all five waves were identified.
 *
 * # Safety
 * `report` must be live or null.
 */
bool fmm_report_converged(const struct FmmFitReport *report);

/**
 * Parameters of wave `label` (0..=4 for P, Q, R, S, T).
 *
 * # Safety
 * `report` must be live.
 */
enum FmmStatus fmm_report_wave(const struct FmmFitReport *report,
                               uint32_t label,
                               struct FmmWave *out);

/**
 * The whole report as JSON. Release with [`fmm_string_free`].
 *
 * # Safety
 * `report` must be live.
 */
enum FmmStatus fmm_report_to_json(const struct FmmFitReport *report, char **out);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void fmm_string_free(char *s);

/**
 * Se, PPV, DER and F1 of the given counts.
 */
enum FmmStatus fmm_summarize(uint64_t tp, uint64_t fp, uint64_t fn_, struct FmmSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FMM_ECG_H */
