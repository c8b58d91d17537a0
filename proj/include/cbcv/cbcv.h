/* C interface to the cbcv library. All functions return a cbcv_status; on
 * failure cbcv_last_error() describes the problem for the calling thread.
 * Strings returned through char** are owned by the caller and released with
 * cbcv_string_free. */
#ifndef CBCV_H
#define CBCV_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CBCV_API __declspec(dllexport)
#else
#define CBCV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cbcv_status {
  CBCV_OK = 0,
  CBCV_INVALID_ARGUMENT = 1,
  CBCV_IO_ERROR = 2,
  CBCV_PARSE_ERROR = 3,
  CBCV_DATA_ERROR = 4,
  CBCV_INTERNAL_ERROR = 5,
  /* run/tune finished but some grid cells failed */
  CBCV_PARTIAL_FAILURE = 6,
} cbcv_status;

typedef struct cbcv_dataset cbcv_dataset;
typedef struct cbcv_folds cbcv_folds;
typedef struct cbcv_config cbcv_config;

CBCV_API const char* cbcv_version(void);
/* Message of the last failed call on this thread; "" when none. */
CBCV_API const char* cbcv_last_error(void);
CBCV_API const char* cbcv_status_name(cbcv_status status);
CBCV_API void cbcv_string_free(char* s);

/* ---- datasets ---- */

/* label_column may be NULL ("target"); delimiter 0 means tab. */
CBCV_API cbcv_status cbcv_dataset_load(const char* path, const char* label_column, char delimiter,
                                       cbcv_dataset** out);
/* Row-major features (n_rows x n_cols) and labels in [0, n_classes). */
CBCV_API cbcv_status cbcv_dataset_from_arrays(const char* name, const double* features, size_t n_rows,
                                              size_t n_cols, const int* labels, int n_classes, cbcv_dataset** out);
CBCV_API cbcv_status cbcv_dataset_generate(const char* spec_json, cbcv_dataset** out);
CBCV_API cbcv_status cbcv_dataset_save(const cbcv_dataset* ds, const char* path);
CBCV_API cbcv_status cbcv_dataset_standardize(const cbcv_dataset* ds, cbcv_dataset** out);
CBCV_API void cbcv_dataset_free(cbcv_dataset* ds);

CBCV_API size_t cbcv_dataset_n_instances(const cbcv_dataset* ds);
CBCV_API size_t cbcv_dataset_n_features(const cbcv_dataset* ds);
CBCV_API int cbcv_dataset_n_classes(const cbcv_dataset* ds);
CBCV_API size_t cbcv_dataset_rejected_rows(const cbcv_dataset* ds);
CBCV_API const char* cbcv_dataset_name(const cbcv_dataset* ds);
/* counts must hold n_classes entries. */
CBCV_API cbcv_status cbcv_dataset_class_counts(const cbcv_dataset* ds, size_t* counts);
CBCV_API double cbcv_dataset_imbalance(const cbcv_dataset* ds);
/* 1 when the imbalance index exceeds 0.20. */
CBCV_API int cbcv_dataset_is_imbalanced(const cbcv_dataset* ds);

CBCV_API cbcv_status cbcv_estimate_cluster_count(const cbcv_dataset* ds, uint64_t seed, int* out);
CBCV_API cbcv_status cbcv_estimate_dbscan(const cbcv_dataset* ds, double* epsilon, int* min_samples);

/* Full inspection report as a JSON object. */
CBCV_API cbcv_status cbcv_dataset_report_json(const cbcv_dataset* ds, uint64_t seed, char** out);

/* ---- folds ---- */

/* splitter_json: a splitter object as in the config file, e.g.
 * {"kind":"scbcv","k_clusters":3}. Unset cluster parameters are estimated. */
CBCV_API cbcv_status cbcv_split(const cbcv_dataset* ds, const char* splitter_json, int k_splits, uint64_t seed,
                                cbcv_folds** out);
CBCV_API void cbcv_folds_free(cbcv_folds* folds);
CBCV_API int cbcv_folds_k(const cbcv_folds* folds);
CBCV_API size_t cbcv_folds_size(const cbcv_folds* folds);
/* Fold id per instance; valid until cbcv_folds_free. */
CBCV_API const int* cbcv_folds_assignment(const cbcv_folds* folds);

/* ---- experiments ---- */

CBCV_API cbcv_status cbcv_config_load(const char* path, cbcv_config** out);
CBCV_API cbcv_status cbcv_config_parse(const char* json, cbcv_config** out);
CBCV_API void cbcv_config_free(cbcv_config* cfg);
CBCV_API cbcv_status cbcv_config_set_seed(cbcv_config* cfg, uint64_t seed);
CBCV_API cbcv_status cbcv_config_set_workers(cbcv_config* cfg, int workers);
/* metric: "accuracy", "f1", "balanced_accuracy", or NULL to clear. */
CBCV_API cbcv_status cbcv_config_set_metric(cbcv_config* cfg, const char* metric);
CBCV_API cbcv_status cbcv_config_set_label_column(cbcv_config* cfg, const char* label_column);
/* Merges a tuned-learner file into the config. */
CBCV_API cbcv_status cbcv_config_apply_tuned(cbcv_config* cfg, const char* tuned_path);
CBCV_API cbcv_status cbcv_config_to_json(const cbcv_config* cfg, char** out);

/* Writes the tuned-learner file; summary (may be NULL) receives a JSON
 * object {entries, errors}. */
CBCV_API cbcv_status cbcv_tune(const cbcv_config* cfg, const char* out_path, char** summary);

/* Runs the grid into results_dir. progress (may be NULL) is called once per
 * finished cell with (key, status, error-or-empty, user). */
typedef void (*cbcv_progress_fn)(const char* key, const char* status, const char* error, void* user);
CBCV_API cbcv_status cbcv_run(const cbcv_config* cfg, const char* results_dir, int resume, cbcv_progress_fn progress,
                              void* user, char** summary);

/* Writes the analysis CSVs into out_dir (results_dir when NULL). */
CBCV_API cbcv_status cbcv_analyze(const char* results_dir, const char* out_dir, char** summary);

#ifdef __cplusplus
}
#endif

#endif /* CBCV_H */
