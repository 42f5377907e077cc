/* C interface to the CaMIB laboratory: configuration, dataset generation,
 * training, evaluation, ablation/sweep harnesses, gradient verification and
 * run-directory reporting.
 *
 * Conventions:
 *   - Every function returns a camib_status; CAMIB_OK means success.
 *   - On failure, camib_last_error() returns a thread-local message that
 *     stays valid until the next camib_* call on the same thread.
 *   - Objects are opaque handles created and destroyed by this library;
 *     destroy functions accept NULL.
 *   - Strings returned through char** are heap-allocated; release them with
 *     camib_string_free. They are NUL-terminated UTF-8.
 */
#ifndef CAMIB_H
#define CAMIB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum camib_status {
  CAMIB_OK = 0,
  CAMIB_INVALID_ARGUMENT = 1, /* bad input: config, flag value, shape, name */
  CAMIB_IO_ERROR = 2,         /* missing or unwritable file */
  CAMIB_RUNTIME_ERROR = 3     /* anything else: divergence, internal failure */
} camib_status;

/* Message for the most recent failing call on this thread ("" if none). */
const char* camib_last_error(void);

/* Semantic version of the library. */
const char* camib_version(void);

void camib_string_free(char* text);

/* ----- run configuration ------------------------------------------------
 * A run configuration document bundles the synthetic-data settings, the
 * training settings and the output paths. The JSON schema is documented in
 * the README; unknown keys are rejected. */
typedef struct camib_run_config camib_run_config;

camib_status camib_run_config_default(camib_run_config** out);
camib_status camib_run_config_parse(const char* json_text, camib_run_config** out);
camib_status camib_run_config_load(const char* path, camib_run_config** out);
camib_status camib_run_config_to_json(const camib_run_config* config, char** out_json);
camib_status camib_run_config_save(const camib_run_config* config, const char* path);
void camib_run_config_free(camib_run_config* config);

/* ----- datasets ----------------------------------------------------------
 * Synthetic multimodal dataset with a causal and a shortcut factor. */
typedef struct camib_dataset camib_dataset;

camib_status camib_dataset_generate(const camib_run_config* config, camib_dataset** out);
camib_status camib_dataset_load(const char* path, camib_dataset** out);
camib_status camib_dataset_save(const camib_dataset* dataset, const char* path);
void camib_dataset_free(camib_dataset* dataset);

/* Linear-probe accuracy of one feature block (block: 0 = causal,
 * 1 = shortcut) on the ID and OOD test splits. Classification data only. */
camib_status camib_dataset_probe(const camib_dataset* dataset, int block, double* out_id_acc,
                                 double* out_ood_acc);

/* ----- models ------------------------------------------------------------ */
typedef struct camib_model camib_model;

/* Train on a dataset with the config's train section. */
camib_status camib_train(const camib_run_config* config, const camib_dataset* dataset,
                         camib_model** out);
camib_status camib_model_save(const camib_model* model, const char* path);
camib_status camib_model_load(const char* path, camib_model** out);
void camib_model_free(camib_model* model);

/* Metrics of a model on one split ("train", "val", "test_id", "test_ood")
 * as a JSON object; absent metrics are omitted. */
camib_status camib_evaluate(const camib_model* model, const camib_dataset* dataset,
                            const char* split, char** out_metrics_json);

/* ----- whole-run jobs (what the CLI subcommands call) ---------------------
 * Each job validates the config, creates the run directory, writes its
 * artifacts and returns the human-readable summary it printed to them. */
camib_status camib_run_generate(const camib_run_config* config, char** out_summary);
camib_status camib_run_train(const camib_run_config* config, char** out_summary);
camib_status camib_run_evaluate(const camib_run_config* config, const char* model_path,
                                const char* split, char** out_summary);

/* variants_csv: comma-separated subset of
 * {no_iv, no_unif, kl_to_mse, no_intv, no_ib}; may be "" for the full model
 * only. seeds_csv: comma-separated unsigned integers, at least one. */
camib_status camib_run_ablate(const camib_run_config* config, const char* variants_csv,
                              const char* seeds_csv, char** out_summary);

/* grid_spec: semicolon-separated axes "name=v1,v2,..." with names lambda1,
 * lambda2, beta; omitted axes stay at the config value. "" = single point. */
camib_status camib_run_sweep(const camib_run_config* config, const char* grid_spec,
                             char** out_summary);

camib_status camib_run_report(const char* run_dir, char** out_summary);

/* ----- gradient verification ----------------------------------------------
 * Runs the closed-form / reverse-mode / finite-difference agreement suite.
 * instances: random cases per check (0 = default 100). tolerance: relative
 * tolerance for derivative checks (0 = default 1e-4). mutate != 0 plants a
 * deliberate formula corruption to prove the suite can fail. out_all_pass
 * receives 1 when every check passed. The text report goes to out_report. */
camib_status camib_verify_gradients(size_t instances, double tolerance, int mutate,
                                    int* out_all_pass, char** out_report);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CAMIB_H */
