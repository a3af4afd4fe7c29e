/* C interface to the gada domain-adaptation library.
 *
 * Every function that can fail returns a gada_status; on failure the
 * message is available from gada_last_error() on the same thread until the
 * next call. Strings returned through char** are owned by the caller and
 * released with gada_string_free. Handles are released with their _free
 * function; passing NULL to a _free function is a no-op. */
#ifndef GADA_GADA_H
#define GADA_GADA_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GADA_API __declspec(dllexport)
#else
#define GADA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gada_status {
  GADA_OK = 0,
  GADA_ERR_INVALID_ARGUMENT = 1, /* bad key, value or null pointer */
  GADA_ERR_DIMENSION = 2,
  GADA_ERR_CONTRACT = 3,         /* precondition of an operation not met */
  GADA_ERR_PARSE = 4,            /* malformed CSV or text input */
  GADA_ERR_FORMAT = 5,           /* malformed checkpoint */
  GADA_ERR_IO = 6,
  GADA_ERR_NUMERIC = 7,          /* non-finite loss or parameter */
  GADA_ERR_INTERNAL = 8
} gada_status;

typedef struct gada_config gada_config;
typedef struct gada_dataset gada_dataset;
typedef struct gada_state gada_state;

GADA_API const char* gada_version(void);
GADA_API const char* gada_status_name(gada_status status);
GADA_API const char* gada_last_error(void);
GADA_API void gada_string_free(char* s);

/* ---- configuration (`key = value` text, dotted keys) ---- */
GADA_API gada_status gada_config_new(gada_config** out);
GADA_API gada_status gada_config_parse(const char* text, gada_config** out);
GADA_API gada_status gada_config_load(const char* path, gada_config** out);
GADA_API gada_status gada_config_set(gada_config* cfg, const char* key, const char* value);
GADA_API gada_status gada_config_get(const gada_config* cfg, const char* key, char** out_value);
GADA_API gada_status gada_config_echo(const gada_config* cfg, char** out_text);
GADA_API void gada_config_free(gada_config* cfg);

/* ---- datasets ---- */
GADA_API gada_status gada_dataset_from_config(const gada_config* cfg, gada_dataset** out);
/* Writes source_x.csv, source_y.csv, target_x.csv, test_x.csv, test_y.csv. */
GADA_API gada_status gada_dataset_export(const gada_dataset* ds, const char* dir);
GADA_API gada_status gada_dataset_info(const gada_dataset* ds, size_t* n_source, size_t* n_target,
                                       size_t* n_test, size_t* dim, size_t* num_classes);
GADA_API void gada_dataset_free(gada_dataset* ds);

/* ---- training state ---- */
/* Trains the configured variant for the first configured seed. */
GADA_API gada_status gada_train(const gada_config* cfg, const gada_dataset* ds, gada_state** out);
/* Continues training up to `steps` S1-S3 iterations. */
GADA_API gada_status gada_resume(gada_state* state, const gada_dataset* ds, uint64_t steps);
/* Target-side refinement. The dirt_* keys and the settings the refinement
 * objective uses (VAT, lambda_t, lr_cls, Adam, batch, eval_interval) are
 * taken from cfg; everything else keeps the state's values. */
GADA_API gada_status gada_refine(gada_state* state, const gada_config* cfg, const gada_dataset* ds);
GADA_API gada_status gada_evaluate(const gada_state* state, const gada_dataset* ds, double* target_accuracy,
                                   double* source_accuracy);
GADA_API gada_status gada_state_steps(const gada_state* state, uint64_t* steps, uint64_t* refine_steps);
/* The configuration recorded in the state; NULL-free round trip of the echo. */
GADA_API gada_status gada_state_config(const gada_state* state, gada_config** out);
GADA_API gada_status gada_state_metrics_json(const gada_state* state, char** out_json);
GADA_API gada_status gada_state_save(const gada_state* state, const char* path);
GADA_API gada_status gada_state_load(const char* path, gada_state** out);
GADA_API void gada_state_free(gada_state* state);

/* ---- features and plots ---- */
GADA_API gada_status gada_export_features(const gada_state* state, const gada_dataset* ds, size_t n_per_split,
                                          const char* csv_path);
GADA_API gada_status gada_plot_features(const char* csv_path, const char* svg_path, const char* title);
GADA_API gada_status gada_cluster_separation(const char* csv_path, double* out_value);

/* ---- orchestration ---- */
/* Runs cfg's variant for every configured seed, writing per-seed outputs
 * under experiment.out; *out_summary lists the per-seed accuracies. */
GADA_API gada_status gada_run_experiment(const gada_config* cfg, char** out_summary);
/* Runs every configured variant over every seed (at least 5); writes
 * ablation.json and ablation.txt; *out_table is the text table. */
GADA_API gada_status gada_run_ablation(const gada_config* cfg, char** out_table);
/* Gradient oracle suite. *passed is 1 when every check is within tolerance. */
GADA_API gada_status gada_grad_check(size_t trials, uint64_t seed, int* passed, char** out_report);

#ifdef __cplusplus
}
#endif

#endif /* GADA_GADA_H */
