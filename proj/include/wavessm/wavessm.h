/* C interface to the wavessm shared library.
 *
 * Every call returns a wavessm_status; on failure a message for the calling
 * thread is available from wavessm_last_error(). Objects are opaque handles
 * released with their matching _free function. Images cross the boundary as
 * interleaved RGB float32 in [0,1], row-major, height * width * 3 values.
 */
#ifndef WAVESSM_H
#define WAVESSM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define WAVESSM_API __declspec(dllexport)
#else
#define WAVESSM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum wavessm_status {
  WAVESSM_OK = 0,
  WAVESSM_ERR_INVALID_ARGUMENT = 1,
  WAVESSM_ERR_IO = 2,
  WAVESSM_ERR_FORMAT = 3,
  WAVESSM_ERR_NUMERIC = 4,
  WAVESSM_ERR_INTERNAL = 5
} wavessm_status;

#define WAVESSM_LEVELS 3

typedef struct wavessm_config {
  uint32_t channels;
  uint32_t lfss_counts[WAVESSM_LEVELS];
  uint32_t hfe_counts[WAVESSM_LEVELS];
  uint32_t heads;
  uint32_t lambda;
  uint32_t state_size;
  uint64_t seed;
} wavessm_config;

typedef struct wavessm_model wavessm_model;
typedef struct wavessm_gradcheck_report wavessm_gradcheck_report;

WAVESSM_API const char* wavessm_version(void);
WAVESSM_API const char* wavessm_last_error(void);

/* Caps worker threads for this process (initially WAVE_SSM_THREADS);
 * 0 means one per hardware thread. */
WAVESSM_API void wavessm_set_threads(uint32_t n);

WAVESSM_API void wavessm_default_config(wavessm_config* cfg);
WAVESSM_API void wavessm_toy_config(wavessm_config* cfg);

WAVESSM_API wavessm_status wavessm_model_build(const wavessm_config* cfg, wavessm_model** out);
WAVESSM_API wavessm_status wavessm_model_load(const char* path, wavessm_model** out);
WAVESSM_API wavessm_status wavessm_model_save(const wavessm_model* m, const char* path);
WAVESSM_API void wavessm_model_free(wavessm_model* m);
WAVESSM_API wavessm_status wavessm_model_config(const wavessm_model* m, wavessm_config* out);
WAVESSM_API wavessm_status wavessm_model_param_count(const wavessm_model* m, uint64_t* out);
WAVESSM_API wavessm_status wavessm_model_checksum(const wavessm_model* m, uint64_t* out);

/* out must hold height * width * 3 floats. */
WAVESSM_API wavessm_status wavessm_enhance(const wavessm_model* m, const float* rgb, size_t height, size_t width,
                                           float* out);
/* PPM (P6) in, PPM out. */
WAVESSM_API wavessm_status wavessm_enhance_file(const wavessm_model* m, const char* input_path,
                                                const char* output_path);

/* JSON wavelet report for one image (b_path NULL) or a low/normal pair.
 * Release *report with wavessm_string_free. */
WAVESSM_API wavessm_status wavessm_analyze_files(const char* a_path, const char* b_path, char** report);
WAVESSM_API void wavessm_string_free(char* s);

/* psnr is +inf for identical images. */
WAVESSM_API wavessm_status wavessm_metrics_files(const char* a_path, const char* b_path, double* psnr,
                                                 double* ssim);

/* which: "all" or one op name from wavessm_gradcheck_op_name. */
WAVESSM_API size_t wavessm_gradcheck_op_count(void);
WAVESSM_API const char* wavessm_gradcheck_op_name(size_t i);
WAVESSM_API wavessm_status wavessm_gradcheck_run(const char* which, uint64_t seed, wavessm_gradcheck_report** out);
WAVESSM_API size_t wavessm_gradcheck_rows(const wavessm_gradcheck_report* r);

typedef struct wavessm_gradcheck_row {
  const char* op;
  const char* tensor;
  const char* note; /* empty unless the check could not be carried out */
  double error;
  double tolerance;
  size_t worst_index;
  size_t checked;
  int passed;
} wavessm_gradcheck_row;

/* Pointers in *row stay valid until the report is freed. */
WAVESSM_API wavessm_status wavessm_gradcheck_row_at(const wavessm_gradcheck_report* r, size_t i,
                                                    wavessm_gradcheck_row* row);
WAVESSM_API void wavessm_gradcheck_free(wavessm_gradcheck_report* r);

typedef struct wavessm_train_options {
  uint32_t steps;
  uint32_t crop;
  double lr_max;
  double lr_min;
  uint64_t seed;
} wavessm_train_options;

typedef void (*wavessm_progress_fn)(uint32_t step, double loss, void* user);

WAVESSM_API void wavessm_default_train_options(wavessm_train_options* opt);

/* Overfits the toy configuration on one PPM pair. *out receives the trained
 * model (free with wavessm_model_free). progress may be NULL. */
WAVESSM_API wavessm_status wavessm_train_toy(const char* low_path, const char* normal_path,
                                             const wavessm_train_options* opt, wavessm_progress_fn progress,
                                             void* user, wavessm_model** out, double* initial_l1,
                                             double* final_l1);

#ifdef __cplusplus
}
#endif

#endif /* WAVESSM_H */
