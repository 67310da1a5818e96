/* C interface to the gackan shared library. All functions return a gk_status;
 * on failure gk_last_error() describes the most recent error in the calling
 * thread. Strings returned through char** outputs are heap-allocated and must
 * be released with gk_string_free(). */
#ifndef GACKAN_C_H
#define GACKAN_C_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gk_status {
  GK_OK = 0,
  GK_ERR_INVALID_ARGUMENT = 1,
  GK_ERR_IO = 2,
  GK_ERR_FORMAT = 3,
  GK_ERR_VALIDATION = 4,
  GK_ERR_TRAINING = 5,
  GK_ERR_INTERNAL = 6,
} gk_status;

/* Message for the last failing call in this thread; never NULL. */
const char* gk_last_error(void);

void gk_string_free(char* s);

/* --------------------------------------------------------------------------
 * Dataset generation.
 *
 * config_json: flat JSON overriding simulator/STFT defaults (NULL keeps all
 * defaults). Recognized keys: sample_rate_hz, duration_s, jnr_grid_db,
 * trials_per_cell, noise_variance, window_len, hop, nfft, eps, gamma,
 * out_height, out_width. desk_scale != 0 starts from the desk profile
 * instead of the full-size one before overrides are applied.
 *
 * Writes one .spt tensor per sample plus manifest.json under out_dir.
 * Deterministic for a given (config, seed) regardless of parallel. */
gk_status gk_generate_dataset(const char* out_dir, const char* config_json,
                              uint64_t seed, int desk_scale, int parallel,
                              int export_ppm);

/* --------------------------------------------------------------------------
 * Training.
 *
 * config_json: flat JSON overriding training defaults (NULL keeps all
 * defaults). Recognized keys: epochs, batch_size, mixup_alpha,
 * label_smoothing, kan_l1_lambda, base_lr, warmup_epochs, min_lr,
 * weight_decay, seed, arch ("desk" or "reference").
 *
 * Validates the dataset, trains, writes the best checkpoint to ckpt_out and,
 * when history_out is non-NULL, a JSON history report. */
gk_status gk_train(const char* data_dir, const char* ckpt_out,
                   const char* config_json, const char* history_out);

/* Evaluates the checkpoint on the dataset's test split. Writes report_path
 * (JSON: overall accuracy, confusion matrix, per-JNR table) plus
 * <report>.jnr.svg and <report>.confusion.svg next to it. */
gk_status gk_eval(const char* ckpt_path, const char* data_dir,
                  const char* report_path);

/* Fuses every three-branch convolution into a single kernel and writes the
 * fused checkpoint. If the input is already fused the output is a copy and
 * *already_fused (when non-NULL) is set to 1. */
gk_status gk_fuse(const char* ckpt_in, const char* ckpt_out,
                  int* already_fused);

/* Complexity report for a checkpoint: parameter count, FLOPs and a per-layer
 * breakdown, as a JSON string. */
gk_status gk_report(const char* ckpt_path, char** json_out);

/* --------------------------------------------------------------------------
 * Inference on a loaded model. */
typedef struct gk_model gk_model;

gk_status gk_model_load(const char* ckpt_path, gk_model** out);
void gk_model_free(gk_model* model);

/* input format: "spt" for a stored tensor, "iq" for raw interleaved 32-bit
 * little-endian float I/Q pairs (sample_rate_hz required, > 0). Result JSON:
 * {"class": name, "class_code": int, "probabilities": [7 floats]}. */
gk_status gk_model_infer_file(gk_model* model, const char* input_path,
                              const char* format, double sample_rate_hz,
                              char** json_out);

#ifdef __cplusplus
}
#endif

#endif /* GACKAN_C_H */
