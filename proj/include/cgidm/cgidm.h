/* Copyright 2026 The cgidm Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface of libcgidm. All handles are opaque and owned by the caller;
 * release them with the matching *_free function. Every fallible call
 * returns a cgidm_status; on failure cgidm_last_error() describes it until
 * the next call on the same thread.
 */
#ifndef CGIDM_H_
#define CGIDM_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define CGIDM_API __declspec(dllexport)
#else
#define CGIDM_API __attribute__((visibility("default")))
#endif

typedef enum cgidm_status {
    CGIDM_OK = 0,
    CGIDM_INVALID_ARGUMENT = 1,
    CGIDM_SHAPE_MISMATCH = 2,
    CGIDM_NUMERICAL = 3,
    CGIDM_IO = 4,
    CGIDM_FORMAT = 5,
    CGIDM_CONFIG = 6,
    CGIDM_MISSING_ARTIFACT = 7,
    CGIDM_HASH_MISMATCH = 8,
    CGIDM_INTERNAL = 99
} cgidm_status;

typedef enum cgidm_metric { CGIDM_METRIC_COSINE = 0, CGIDM_METRIC_SSIM = 1 } cgidm_metric;

typedef struct cgidm_config cgidm_config;
typedef struct cgidm_model cgidm_model;
typedef struct cgidm_image cgidm_image;

typedef void (*cgidm_log_fn)(const char* message, void* user);

typedef struct cgidm_run_options {
    int jobs;  /* worker threads, >= 1 */
    int force; /* accept artifacts from other configurations */
    cgidm_log_fn log;
    void* log_user;
} cgidm_run_options;

CGIDM_API const char* cgidm_version(void);
CGIDM_API const char* cgidm_last_error(void);
CGIDM_API const char* cgidm_status_string(cgidm_status status);

/* Configuration */
CGIDM_API cgidm_status cgidm_config_default(cgidm_config** out);
CGIDM_API cgidm_status cgidm_config_load(const char* path, cgidm_config** out);
CGIDM_API cgidm_status cgidm_config_parse(const char* text, cgidm_config** out);
/* Override one "section.key"; the result is re-validated. */
CGIDM_API cgidm_status cgidm_config_set(cgidm_config* cfg, const char* key, const char* value);
/* Override n keys at once and validate the result once; on failure cfg is
 * left unchanged. Needed when keys only make sense together. */
CGIDM_API cgidm_status cgidm_config_set_many(cgidm_config* cfg, const char* const* keys, const char* const* values,
                                             size_t n);
/* Writes the canonical `key = value` text; *len receives the required size
 * including the terminating NUL. */
CGIDM_API cgidm_status cgidm_config_text(const cgidm_config* cfg, char* buf, size_t* len);
/* 16 hex digits plus NUL; buf must hold 17 bytes. */
CGIDM_API cgidm_status cgidm_config_hash(const cgidm_config* cfg, char* buf, size_t buf_len);
CGIDM_API void cgidm_config_free(cgidm_config* cfg);

/* Stage commands: gen-data, pretrain, finetune, invert, baseline, evaluate,
 * mia, sweep, pipeline. */
CGIDM_API size_t cgidm_command_count(void);
CGIDM_API const char* cgidm_command_name(size_t index);
CGIDM_API cgidm_status cgidm_run(const cgidm_config* cfg, const char* command, const cgidm_run_options* opts);

/* Checkpoints */
CGIDM_API cgidm_status cgidm_model_load(const char* path, cgidm_model** out);
CGIDM_API cgidm_status cgidm_model_save(const cgidm_model* model, const char* path);
CGIDM_API cgidm_status cgidm_model_param_count(const cgidm_model* model, size_t* out);
/* *out = 1 when every parameter and setting is bit-identical. */
CGIDM_API cgidm_status cgidm_model_equal(const cgidm_model* a, const cgidm_model* b, int* out);
CGIDM_API void cgidm_model_free(cgidm_model* model);

/* Images (binary PGM) */
CGIDM_API cgidm_status cgidm_image_read_pgm(const char* path, cgidm_image** out);
CGIDM_API cgidm_status cgidm_image_write_pgm(const cgidm_image* image, const char* path);
CGIDM_API cgidm_status cgidm_image_size(const cgidm_image* image, size_t* rows, size_t* cols);
CGIDM_API cgidm_status cgidm_image_similarity(const cgidm_image* a, const cgidm_image* b, cgidm_metric metric,
                                              double* out);
CGIDM_API void cgidm_image_free(cgidm_image* image);

#ifdef __cplusplus
}
#endif

#endif /* CGIDM_H_ */
