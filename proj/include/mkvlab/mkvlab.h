#ifndef MKVLAB_H
#define MKVLAB_H

#include <stddef.h>

#if defined(_WIN32)
#define MKV_API __declspec(dllexport)
#else
#define MKV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mkv_status {
  MKV_OK = 0,
  MKV_ERR_ARGUMENT = 1,  /* null pointer, bad value, precondition */
  MKV_ERR_CONFIG = 2,    /* malformed configuration */
  MKV_ERR_NUMERICAL = 3, /* non-finite values during a run */
  MKV_ERR_IO = 4,
  MKV_ERR_BUFFER = 5,    /* output buffer too small, see needed */
  MKV_ERR_INTERNAL = 6
} mkv_status;

typedef struct mkv_config mkv_config;
typedef struct mkv_result mkv_result;
typedef struct mkv_measure mkv_measure;

MKV_API const char* mkv_version(void);
/* Message of the last failed call on this thread; "" if none. */
MKV_API const char* mkv_last_error(void);

MKV_API mkv_status mkv_config_new(mkv_config** out);
MKV_API mkv_status mkv_config_parse(const char* text, mkv_config** out);
MKV_API mkv_status mkv_config_load(const char* path, mkv_config** out);
MKV_API mkv_status mkv_config_set(mkv_config* cfg, const char* key, const char* value);
/* Writes a NUL-terminated serialization when cap is large enough; needed
   receives the size including the terminator. */
MKV_API mkv_status mkv_config_serialize(const mkv_config* cfg, char* buf, size_t cap, size_t* needed);
MKV_API void mkv_config_free(mkv_config* cfg);

/* Runs the configured experiment. Returns MKV_OK whenever a result was
   produced; the process-style exit code (0 ok, 2 config, 3 blow-up,
   4 finding) lives in the result. */
MKV_API mkv_status mkv_run(const mkv_config* cfg, mkv_result** out);
MKV_API mkv_status mkv_wasserstein_files(const char* file_a, const char* file_b, double p, const char* out_dir,
                                         mkv_result** out);
MKV_API int mkv_result_exit_code(const mkv_result* r);
MKV_API const char* mkv_result_message(const mkv_result* r);
MKV_API const char* mkv_result_summary(const mkv_result* r);
MKV_API const char* mkv_result_report(const mkv_result* r);
MKV_API void mkv_result_free(mkv_result* r);

/* n points of dimension dim, row-major; the data is copied. */
MKV_API mkv_status mkv_measure_new(const double* samples, size_t n, int dim, mkv_measure** out);
MKV_API void mkv_measure_free(mkv_measure* m);
MKV_API mkv_status mkv_measure_size(const mkv_measure* m, size_t* n, int* dim);
MKV_API mkv_status mkv_measure_moment(const mkv_measure* m, double p, int axis, double* out);
MKV_API mkv_status mkv_measure_quantile(const mkv_measure* m, double level, int axis, double* out);
MKV_API mkv_status mkv_measure_expected_shortfall(const mkv_measure* m, double alpha, int axis, double* out);
/* Cost min over couplings of mean |x - y|^p (no root); upper_bound is set
   when the coupling is not proven optimal. */
MKV_API mkv_status mkv_wasserstein(const mkv_measure* a, const mkv_measure* b, double p, double* cost,
                                   int* upper_bound);

MKV_API mkv_status mkv_moment_ode_oracle(double m0, double t, double* out);

#ifdef __cplusplus
}
#endif

#endif
