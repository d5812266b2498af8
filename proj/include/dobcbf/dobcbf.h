/* C interface to the disturbance-observer CBF library.
 *
 * Every function returns a dobcbf_status. On failure a message describing
 * the error is available from dobcbf_last_error() on the calling thread
 * until the next call into the library. Handles are opaque and must be
 * released with the matching *_free function. */
#ifndef DOBCBF_DOBCBF_H
#define DOBCBF_DOBCBF_H

#include <stddef.h>

#if defined(_WIN32)
#define DOBCBF_API __declspec(dllexport)
#else
#define DOBCBF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  DOBCBF_OK = 0,
  DOBCBF_ERR_ARGUMENT = 1,  /* null pointer, bad buffer, unknown metric name */
  DOBCBF_ERR_CONFIG = 2,    /* malformed or unknown configuration input */
  DOBCBF_ERR_NUMERICAL = 3, /* non-finite values during evaluation */
  DOBCBF_ERR_IO = 4,        /* file could not be read or written */
  DOBCBF_ERR_MODEL = 5,     /* plant model violates a structural property */
  DOBCBF_ERR_INTERNAL = 6
} dobcbf_status;

/* Outcome classes of the single-constraint QP. */
typedef enum {
  DOBCBF_QP_INACTIVE = 0,
  DOBCBF_QP_ACTIVE = 1,
  DOBCBF_QP_INFEASIBLE = 2
} dobcbf_qp_status;

typedef struct dobcbf_config dobcbf_config;
typedef struct dobcbf_run dobcbf_run;

DOBCBF_API const char* dobcbf_version(void);
DOBCBF_API const char* dobcbf_last_error(void);

DOBCBF_API size_t dobcbf_scenario_count(void);
/* NULL when index is out of range. */
DOBCBF_API const char* dobcbf_scenario_id(size_t index);

DOBCBF_API dobcbf_status dobcbf_config_defaults(const char* scenario, dobcbf_config** out);
DOBCBF_API dobcbf_status dobcbf_config_parse(const char* json_text, dobcbf_config** out);
DOBCBF_API dobcbf_status dobcbf_config_load(const char* path, dobcbf_config** out);
/* Dotted-path override, e.g. ("filter.beta", "12"). The value is read as
 * JSON when possible, otherwise as a string. */
DOBCBF_API dobcbf_status dobcbf_config_set(dobcbf_config* cfg, const char* key, const char* value);
/* Copies the JSON document into buf (NUL-terminated) when capacity allows;
 * *needed always receives the required size including the terminator. */
DOBCBF_API dobcbf_status dobcbf_config_serialize(const dobcbf_config* cfg, char* buf,
                                                 size_t capacity, size_t* needed);
DOBCBF_API void dobcbf_config_free(dobcbf_config* cfg);

/* Parameter validation without simulating. Either output may be NULL;
 * report_path, when not NULL, receives the validation JSON. */
DOBCBF_API dobcbf_status dobcbf_validate(const dobcbf_config* cfg, const char* report_path,
                                         int* pass, int* certified);

/* Runs the closed-loop simulation. A run that blows up still yields a
 * handle; its exit code reports the failure. */
DOBCBF_API dobcbf_status dobcbf_run_create(const dobcbf_config* cfg, dobcbf_run** out);
/* 0 pass, 1 invariant failure, 3 numerical failure. */
DOBCBF_API int dobcbf_run_exit_code(const dobcbf_run* run);
/* Names from the "metrics" and "derived" objects of metrics.json, e.g.
 * "min_h", "rmse", "derived.mu1". */
DOBCBF_API dobcbf_status dobcbf_run_metric(const dobcbf_run* run, const char* name,
                                           double* value);
DOBCBF_API dobcbf_status dobcbf_run_summary(const dobcbf_run* run, char* buf, size_t capacity,
                                            size_t* needed);
/* trajectory.csv, metrics.json, validation.json, config.json, plots/. */
DOBCBF_API dobcbf_status dobcbf_run_write(const dobcbf_run* run, const char* dir);
DOBCBF_API void dobcbf_run_free(dobcbf_run* run);

/* Compares two output directories; out_path (optional) receives the JSON
 * report, buf/needed follow the dobcbf_config_serialize convention. */
DOBCBF_API dobcbf_status dobcbf_compare(const char* dir_a, const char* dir_b,
                                        const char* out_path, char* buf, size_t capacity,
                                        size_t* needed);

/* min |u - u_nom|^2 s.t. psi0 + psi1 u >= 0 for an m-dimensional input. */
DOBCBF_API dobcbf_status dobcbf_qp_solve(size_t m, const double* u_nom, double psi0,
                                         const double* psi1, double* u_out,
                                         dobcbf_qp_status* status);

#ifdef __cplusplus
}
#endif

#endif /* DOBCBF_DOBCBF_H */
