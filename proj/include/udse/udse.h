// Copyright 2026 The UDSE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef UDSE_UDSE_H_
#define UDSE_UDSE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(UDSE_BUILDING_LIBRARY)
#define UDSE_API __attribute__((visibility("default")))
#else
#define UDSE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum udse_status {
  UDSE_OK = 0,
  UDSE_ERR_PARSE = 1,
  UDSE_ERR_UNSUPPORTED_FORMAT = 2,
  UDSE_ERR_IO = 3,
  UDSE_ERR_CONFIG = 4,
  UDSE_ERR_RANGE = 5,
  UDSE_ERR_DEGENERATE_INPUT = 6,
  UDSE_ERR_RUNTIME = 7,
  UDSE_ERR_INVALID_ARGUMENT = 8,
} udse_status;

UDSE_API const char* udse_version(void);
UDSE_API const char* udse_status_name(udse_status status);

/* Message of the last failed call on this thread. Valid until the next
   failing call on the same thread; empty after success is not guaranteed. */
UDSE_API const char* udse_last_error(void);

/* ---- waveforms ---- */

typedef struct udse_waveform udse_waveform;

UDSE_API udse_status udse_waveform_create(const double* samples, size_t length,
                                          int sample_rate_hz, udse_waveform** out);
UDSE_API udse_status udse_waveform_read(const char* path, udse_waveform** out);
/* float32 != 0 writes IEEE float, otherwise PCM-16. `saturated` may be NULL. */
UDSE_API udse_status udse_waveform_write(const udse_waveform* w, const char* path, int float32,
                                         size_t* saturated);
UDSE_API udse_status udse_waveform_resample(const udse_waveform* w, int target_hz,
                                            udse_waveform** out);
UDSE_API size_t udse_waveform_length(const udse_waveform* w);
UDSE_API int udse_waveform_sample_rate(const udse_waveform* w);
UDSE_API const double* udse_waveform_samples(const udse_waveform* w);
UDSE_API void udse_waveform_free(udse_waveform* w);

/* ---- codec ---- */

typedef struct udse_codec udse_codec;

typedef struct udse_codec_info {
  int stages;
  int codebook_size;
  int feature_dim;
  int frame_length;
  int sample_rate_hz;
  uint64_t content_hash;
} udse_codec_info;

UDSE_API udse_status udse_codec_load(const char* path, udse_codec** out);
UDSE_API udse_status udse_codec_get_info(const udse_codec* codec, udse_codec_info* info);
UDSE_API size_t udse_codec_frame_count(const udse_codec* codec, size_t length);
/* Tokens are 1-based and stored stage-major: tokens[n * frames + l].
   `capacity` is the number of int32 slots in `tokens`; *frames is set even
   when the buffer is too small (UDSE_ERR_RANGE). */
UDSE_API udse_status udse_codec_tokenize(const udse_codec* codec, const udse_waveform* w,
                                         int32_t* tokens, size_t capacity, size_t* frames);
UDSE_API udse_status udse_codec_decode(const udse_codec* codec, const int32_t* tokens,
                                       size_t frames, size_t length, int stages_used,
                                       udse_waveform** out);
/* stages_used < 0 means all stages. */
UDSE_API udse_status udse_codec_round_trip(const udse_codec* codec, const udse_waveform* w,
                                           int stages_used, udse_waveform** out);
UDSE_API void udse_codec_free(udse_codec* codec);

/* ---- model ---- */

typedef struct udse_model udse_model;

/* The model keeps no reference to the codec; each call checks that the
   codec passed in is the one the model was trained with. */
UDSE_API udse_status udse_model_load(const char* path, const udse_codec* codec,
                                     udse_model** out);
UDSE_API udse_status udse_model_enhance(const udse_model* model, const udse_codec* codec,
                                        const udse_waveform* degraded, uint64_t seed,
                                        udse_waveform** out);
UDSE_API void udse_model_free(udse_model* model);

/* ---- distortions and metrics ---- */

/* Applies a serialized distortion chain such as "noise(source=white,snr=5)". */
UDSE_API udse_status udse_apply_distortion(const char* spec, const udse_waveform* clean,
                                           uint64_t seed, udse_waveform** out);
UDSE_API udse_status udse_si_snr(const udse_waveform* estimate, const udse_waveform* reference,
                                 double* db);
UDSE_API udse_status udse_log_spectral_distance(const udse_waveform* estimate,
                                                const udse_waveform* reference,
                                                int frame_length, int hop, double* db);

/* ---- pipeline commands ---- */

typedef void (*udse_log_fn)(const char* line, void* user);

typedef struct udse_run_options {
  const char* config_path; /* NULL: profile defaults */
  const char* profile;     /* NULL, "desk" or "paper" */
  int has_seed;
  uint64_t seed;
  int threads; /* 0 keeps the config value */
  const char* input;
  const char* output;
  const char* variant;
  udse_log_fn log;
  void* log_user;
} udse_run_options;

/* Command names, NULL-terminated. */
UDSE_API const char* const* udse_commands(void);
UDSE_API udse_status udse_run_command(const char* command, const udse_run_options* options);
/* Resolved configuration text; free with udse_string_free. */
UDSE_API udse_status udse_resolve_config(const udse_run_options* options, char** text);
UDSE_API void udse_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif  // UDSE_UDSE_H_
