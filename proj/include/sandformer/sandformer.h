#ifndef SANDFORMER_SANDFORMER_H
#define SANDFORMER_SANDFORMER_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define SF_API __declspec(dllexport)
#else
#define SF_API __attribute__((visibility("default")))
#endif

typedef enum sf_status {
  SF_OK = 0,
  SF_ERR_INVALID_ARGUMENT = 1,
  SF_ERR_CONFIG = 2,
  SF_ERR_STATE = 3,
  SF_ERR_IO = 4,
  SF_ERR_FORMAT = 5,
  SF_ERR_UNSUPPORTED_VERSION = 6,
  SF_ERR_CORRUPTION = 7,
  SF_ERR_CONFIG_MISMATCH = 8,
  SF_ERR_NUMERIC = 9,
  SF_ERR_PARTIAL_FAILURE = 10,
  SF_ERR_USAGE = 11,
  SF_ERR_INTERNAL = 12
} sf_status;

typedef struct sf_options sf_options;
typedef struct sf_image sf_image;
typedef struct sf_model sf_model;

/* Progress lines from long-running calls; may be NULL. */
typedef void (*sf_log_fn)(const char* line, void* user);

SF_API const char* sf_version(void);
/* Message of the last failed call on this thread; empty after success. */
SF_API const char* sf_last_error(void);
SF_API const char* sf_status_name(sf_status status);
/* Process exit code for a status: 0 ok, 1 usage, 2 data, 3 numeric. */
SF_API int sf_exit_code(sf_status status);

/* ---- options: flat key=value bag, keys as in config files ---- */
SF_API sf_status sf_options_create(sf_options** out);
SF_API void sf_options_free(sf_options* opts);
SF_API sf_status sf_options_set(sf_options* opts, const char* key, const char* value);
SF_API sf_status sf_options_load_file(sf_options* opts, const char* path);

/* ---- subcommands ---- */
SF_API size_t sf_command_count(void);
/* Name and one-line summary of command i; NULL for out of range. */
SF_API const char* sf_command_name(size_t index);
SF_API const char* sf_command_summary(size_t index);

typedef struct sf_option_info {
  const char* key;           /* config key, e.g. "per_image" */
  const char* flag;          /* CLI flag without dashes, e.g. "per-image" */
  const char* default_value; /* "" when there is no default */
  const char* help;
  int is_switch;
  int required;
} sf_option_info;

SF_API sf_status sf_option_count(const char* command, size_t* count);
SF_API sf_status sf_option_info_at(const char* command, size_t index, sf_option_info* info);

/* Resolves defaults, the file named by the "config" key, then `opts`, and
   runs the command. */
SF_API sf_status sf_run(const char* command, const sf_options* opts, sf_log_fn log, void* user);
SF_API sf_status sf_run_synth(const sf_options* opts, sf_log_fn log, void* user);
SF_API sf_status sf_run_train(const sf_options* opts, sf_log_fn log, void* user);
SF_API sf_status sf_run_eval(const sf_options* opts, sf_log_fn log, void* user);
SF_API sf_status sf_run_restore(const sf_options* opts, sf_log_fn log, void* user);
SF_API sf_status sf_run_gradcheck(const sf_options* opts, sf_log_fn log, void* user);
SF_API sf_status sf_run_ablate(const sf_options* opts, sf_log_fn log, void* user);

/* ---- images: RGB float in [0,1], interleaved, row-major ---- */
SF_API sf_status sf_image_load(const char* path, sf_image** out);
SF_API sf_status sf_image_create(int width, int height, const float* rgb, sf_image** out);
SF_API void sf_image_free(sf_image* image);
SF_API int sf_image_width(const sf_image* image);
SF_API int sf_image_height(const sf_image* image);
SF_API const float* sf_image_data(const sf_image* image);
SF_API sf_status sf_image_save_png(const sf_image* image, const char* path);

SF_API sf_status sf_psnr(const sf_image* restored, const sf_image* reference, double* out_db);
SF_API sf_status sf_ssim(const sf_image* restored, const sf_image* reference, double* out);

/* ---- models ---- */
/* Fresh model from model keys in `opts` (base_channels, stages, ...). */
SF_API sf_status sf_model_build(const sf_options* opts, uint64_t seed, sf_model** out);
SF_API sf_status sf_model_load(const char* checkpoint_path, sf_model** out);
SF_API void sf_model_free(sf_model* model);
SF_API size_t sf_model_param_count(const sf_model* model);
/* Both sides of `input` must be multiples of this. */
SF_API int sf_model_size_multiple(const sf_model* model);
SF_API sf_status sf_model_restore(const sf_model* model, const sf_image* input, sf_image** out);

#ifdef __cplusplus
}
#endif

#endif
