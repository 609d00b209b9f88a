/* mtqs — multi-time open-quantum-system simulator, C API.
 *
 * Numerical engine for finite open systems coupled to Gaussian bosonic
 * environments in two interchangeable configurations: a damped-mode
 * (GKLS) environment and a unitarily evolving discretized continuum.
 * All handles are opaque; every function returns a status code and the
 * failure message is retrievable with mtqs_last_error().
 */
#ifndef MTQS_H
#define MTQS_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mtqs_status {
  MTQS_OK = 0,
  MTQS_ERROR = 1,             /* configuration or execution failure */
  MTQS_VALIDATION_FAILED = 2  /* a verification bound was exceeded */
} mtqs_status;

const char* mtqs_version(void);

/* Message of the most recent failure on this thread. */
const char* mtqs_last_error(void);

/* Runs the workflow described by a JSON config file (commands: fit-bath,
 * simulate, multitime, verify-lemma1, verify-lemma2, verify-theorem,
 * spectrum, wick-check). Outputs are written under output_dir (NULL for the
 * current directory). threads <= 0 means single-threaded; seed is reserved
 * and must be >= 0. */
int mtqs_run(const char* config_path, const char* output_dir, int threads,
             long seed);

typedef struct mtqs_model mtqs_model;

/* Builds a damped-environment model from its JSON description. */
int mtqs_model_create_from_json(const char* json_text, mtqs_model** out);
int mtqs_model_create_from_file(const char* path, mtqs_model** out);
void mtqs_model_destroy(mtqs_model* model);
int mtqs_model_total_dim(const mtqs_model* model, int* out);

/* Time-ordered multi-time expectation value. state_json is a JSON state
 * (name such as "plus_x" or an inline density matrix); request_json carries
 * times / left_ops / right_ops. */
int mtqs_multitime(const mtqs_model* model, const char* state_json,
                   const char* request_json, double* re, double* im);

/* Free-environment two-time correlation C_{j,jp}(t+s, s). */
int mtqs_free_bath_correlation(const mtqs_model* model, int j, int jp,
                               double t, double s, double* re, double* im);

/* Continuum correlation C(t) of a JSON spectral density. */
int mtqs_correlation(const char* spectral_density_json, double t, double* re,
                     double* im);

/* Matrix-pencil exponential fit of n uniform samples; on success *json_out
 * holds a JSON document (terms and residual report) to be released with
 * mtqs_string_free. */
int mtqs_fit_exponentials(const double* times, const double* re,
                          const double* im, int n, int order, char** json_out);

void mtqs_string_free(char* text);

#ifdef __cplusplus
}
#endif

#endif /* MTQS_H */
