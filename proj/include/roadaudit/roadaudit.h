/* Copyright 2026 The RoadAudit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

/* C interface to the road-audit toolkit. All strings are UTF-8. Strings
 * returned through char** out-parameters are owned by the caller and must be
 * released with ra_string_free. */
#ifndef ROADAUDIT_ROADAUDIT_H_
#define ROADAUDIT_ROADAUDIT_H_

#include <stdint.h>

#if defined(_WIN32)
#define RA_API __declspec(dllexport)
#else
#define RA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ra_status {
  RA_OK = 0,
  RA_ERR_INTERNAL = 1,
  RA_ERR_CONFIG = 2,    /* bad flags, config values or shapes */
  RA_ERR_DATA = 3,      /* missing or malformed dataset, checkpoint or labels */
  RA_ERR_NUMERICAL = 4, /* training diverged */
  RA_ERR_IO = 5,        /* filesystem failures */
  RA_ERR_ARGUMENT = 6   /* NULL or invalid handle passed to the API */
} ra_status;

typedef struct ra_model ra_model;

/* Receives one serialized JSON object per call. */
typedef void (*ra_log_fn)(const char* json_line, void* user);

RA_API const char* ra_version(void);
/* Message of the last failure on the calling thread; never NULL. */
RA_API const char* ra_last_error(void);
RA_API void ra_set_log_callback(ra_log_fn fn, void* user);
RA_API void ra_string_free(char* s);

RA_API ra_status ra_labels_json(char** out_json);
/* Effective pipeline config after defaults are applied. */
RA_API ra_status ra_config_resolve(const char* config_json, char** out_json);

RA_API ra_status ra_synth(const char* config_json, const char* out_dir);
RA_API ra_status ra_train(const char* config_json, const char* data_root, const char* out_dir);
/* model_spec is a checkpoint path or "oracle"; split is train, val, test or all. */
RA_API ra_status ra_eval(const char* config_json, const char* model_spec, const char* data_root,
                         const char* split, const char* out_dir);
RA_API ra_status ra_fit_thresholds(const char* config_json, const char* model_spec,
                                   const char* data_root, const char* split, const char* out_dir);
RA_API ra_status ra_audit(const char* config_json, const char* model_spec,
                          const char* thresholds_path, const char* sequence_dir,
                          const char* out_dir);

RA_API ra_status ra_model_open(const char* model_spec, ra_model** out_model);
RA_API void ra_model_free(ra_model* model);
/* rgb: height*width*3 interleaved bytes; out_mask: height*width class ids. */
RA_API ra_status ra_model_infer(ra_model* model, const uint8_t* rgb, int height, int width,
                                uint8_t* out_mask);

#ifdef __cplusplus
}
#endif

#endif /* ROADAUDIT_ROADAUDIT_H_ */
