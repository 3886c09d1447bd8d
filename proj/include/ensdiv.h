/* C interface to the ensdiv ensemble training and diagnostics library.
 *
 * Conventions: functions return ENSDIV_OK on success. Handle constructors
 * return NULL on failure. After any failure, ensdiv_last_error() describes
 * what went wrong (thread-local storage). Strings returned through char**
 * out-parameters are heap-allocated; release them with ensdiv_string_free.
 */
#ifndef ENSDIV_H
#define ENSDIV_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

enum {
  ENSDIV_OK = 0,
  ENSDIV_FAIL = 1,       /* a verification or diagnostic check failed */
  ENSDIV_BAD_CONFIG = 2, /* usage, configuration or input-file error */
  ENSDIV_ERROR = 3       /* unexpected internal error */
};

const char* ensdiv_version(void);
const char* ensdiv_last_error(void);
void ensdiv_string_free(char* s);

/* ---- whole commands (JSON configs, report files under out_dir) ---- */

/* suites_csv: comma-separated suite names, or "all". seed 0 keeps the
 * built-in fixed seed; pathology_beta <= 0 keeps the default (1.5). */
int ensdiv_verify(const char* suites_csv, const char* out_dir, uint64_t seed,
                  double pathology_beta, char** log_out);

int ensdiv_sweep(const char* config_json, const char* out_dir, int workers, char** log_out);

/* kind: "debias", "dropout" or "gap" */
int ensdiv_diagnose(const char* kind, const char* config_json, const char* out_dir,
                    char** log_out);

/* kind: "regression" or "classification" */
int ensdiv_gen_data(const char* kind, const char* params_json, const char* out_path,
                    char** log_out);

/* ---- handle-based building blocks ---- */

typedef struct ensdiv_dataset ensdiv_dataset;
typedef struct ensdiv_model ensdiv_model;

/* dataset_json: the same object accepted by the "dataset" config section. */
ensdiv_dataset* ensdiv_dataset_create(const char* dataset_json);
void ensdiv_dataset_free(ensdiv_dataset* dataset);
int ensdiv_dataset_shape(const ensdiv_dataset* dataset, size_t* n, size_t* features,
                         size_t* outputs);

/* config_json keys: ensemble, objective ({"beta": x} or {"gat_alpha": a,
 * "gat_variant": "full"|"leave-one-out"}), train, seed. */
ensdiv_model* ensdiv_train(const ensdiv_dataset* dataset, const char* config_json);
ensdiv_model* ensdiv_model_load(const char* path);
int ensdiv_model_save(const ensdiv_model* model, const char* path);
void ensdiv_model_free(ensdiv_model* model);

/* split: "train", "val" or "test". metrics[0..3] receive err, err_bar, div
 * and accuracy (-1 for regression). */
int ensdiv_evaluate(const ensdiv_model* model, const ensdiv_dataset* dataset, const char* split,
                    double metrics[4]);

/* Post-hoc debiasing report for mean-output regression models. */
int ensdiv_debias(const ensdiv_model* model, const ensdiv_dataset* dataset, const char* split,
                  double* div_before, double* div_after, double* max_aggregate_change);

#ifdef __cplusplus
}
#endif

#endif /* ENSDIV_H */
