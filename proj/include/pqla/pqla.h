/*
 * C interface of the penalized quasi-likelihood library.
 *
 * Every function returning int returns a pqla_status; on failure the message
 * is available from pqla_last_error() on the same thread. Objects are opaque
 * and released with the matching *_free function (NULL is accepted).
 */
#ifndef PQLA_H
#define PQLA_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(PQLA_BUILDING)
#    define PQLA_API __declspec(dllexport)
#  else
#    define PQLA_API __declspec(dllimport)
#  endif
#else
#  define PQLA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as process exit codes of the command-line tool. */
typedef enum pqla_status {
    PQLA_OK = 0,
    PQLA_ERR_CONFIG = 2,     /* configuration, usage, invalid argument */
    PQLA_ERR_DATA = 3,       /* simulation failure, unreadable or malformed data */
    PQLA_ERR_ESTIMATION = 4, /* optimizer failure or non-convergence */
    PQLA_ERR_INTERNAL = 5
} pqla_status;

typedef struct pqla_config pqla_config;
typedef struct pqla_dataset pqla_dataset;
typedef struct pqla_result pqla_result;
typedef struct pqla_study pqla_study;

PQLA_API const char* pqla_version(void);
PQLA_API int pqla_schema_version(void);
PQLA_API const char* pqla_last_error(void);

/* Configuration */
PQLA_API int pqla_config_default(pqla_config** out);
PQLA_API int pqla_config_load(const char* path, pqla_config** out);
PQLA_API int pqla_config_parse(const char* text, pqla_config** out);
PQLA_API int pqla_config_set(pqla_config* cfg, const char* section, const char* key, const char* value);
PQLA_API int pqla_config_dim(const pqla_config* cfg, int* p);
PQLA_API int pqla_config_master_seed(const pqla_config* cfg, uint64_t* seed);
PQLA_API void pqla_config_free(pqla_config* cfg);

/* Datasets. n = 0 uses the configured simulation size. */
PQLA_API int pqla_simulate(const pqla_config* cfg, uint64_t seed, int n, pqla_dataset** out);
PQLA_API int pqla_dataset_load(const char* path, pqla_dataset** out);
PQLA_API int pqla_dataset_save(const pqla_dataset* ds, const char* path);
PQLA_API int pqla_dataset_shape(const pqla_dataset* ds, int* n, int* d, int* m);
PQLA_API void pqla_dataset_free(pqla_dataset* ds);

/* Quasi log-likelihood; score and hessian (p*p, row-major) may be NULL. */
PQLA_API int pqla_quasi_loglik(const pqla_config* cfg, const pqla_dataset* ds, const double* theta, size_t p,
                               double* value, double* score, double* hessian);

/*
 * Estimation with method "qmle", "pql" (or "penalized") or "qbe".
 * Returns PQLA_ERR_ESTIMATION when the estimator did not converge; *out is
 * still set in that case.
 */
PQLA_API int pqla_estimate(const pqla_config* cfg, const pqla_dataset* ds, const char* method, pqla_result** out);
PQLA_API int pqla_result_theta(const pqla_result* res, double* theta, size_t capacity, size_t* p);
PQLA_API int pqla_result_converged(const pqla_result* res, int* converged);
/* Owned by the result; valid until pqla_result_free. */
PQLA_API const char* pqla_result_json(const pqla_result* res);
PQLA_API int pqla_result_save(const pqla_result* res, const char* path);
PQLA_API void pqla_result_free(pqla_result* res);

/* Monte Carlo study over the configured n grid. */
PQLA_API int pqla_study_run(const pqla_config* cfg, pqla_study** out);
PQLA_API const char* pqla_study_csv(const pqla_study* study);
PQLA_API const char* pqla_study_json(const pqla_study* study);
PQLA_API double pqla_study_seconds(const pqla_study* study);
/* Writes study.csv / study.json / study.svg per the configured formats into
 * dir (NULL: the configured output directory). */
PQLA_API int pqla_study_write(const pqla_study* study, const char* dir);
PQLA_API void pqla_study_free(pqla_study* study);

/* Diagnostics: check is one of pldi, laq, moments, chi0, conditions. Files
 * go to dir (NULL: the configured output directory). */
PQLA_API int pqla_diagnose(const pqla_config* cfg, const char* check, const char* dir);

#ifdef __cplusplus
}
#endif

#endif
