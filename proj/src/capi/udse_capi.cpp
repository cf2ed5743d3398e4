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

#include "udse/udse.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "audio_io.hpp"
#include "config.hpp"
#include "distortion.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"
#include "rvq_codec.hpp"
#include "udse_model.hpp"

struct udse_waveform {
  udse::Waveform w;
};

struct udse_codec {
  explicit udse_codec(udse::rvq::Codec c) : codec(std::move(c)) {}
  udse::rvq::Codec codec;
};

struct udse_model {
  explicit udse_model(udse::model::UdseModel m) : model(std::move(m)) {}
  udse::model::UdseModel model;
};

namespace {

thread_local std::string g_last_error;

udse_status StatusOf(udse::ErrorKind kind) {
  switch (kind) {
    case udse::ErrorKind::kParse: return UDSE_ERR_PARSE;
    case udse::ErrorKind::kUnsupportedFormat: return UDSE_ERR_UNSUPPORTED_FORMAT;
    case udse::ErrorKind::kIo: return UDSE_ERR_IO;
    case udse::ErrorKind::kConfig: return UDSE_ERR_CONFIG;
    case udse::ErrorKind::kRange: return UDSE_ERR_RANGE;
    case udse::ErrorKind::kDegenerateInput: return UDSE_ERR_DEGENERATE_INPUT;
    case udse::ErrorKind::kRuntime: return UDSE_ERR_RUNTIME;
  }
  return UDSE_ERR_RUNTIME;
}

udse_status Fail(udse_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <typename F>
udse_status Guard(F&& f) {
  try {
    f();
    return UDSE_OK;
  } catch (const udse::Error& e) {
    return Fail(StatusOf(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return Fail(UDSE_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return Fail(UDSE_ERR_RUNTIME, e.what());
  } catch (...) {
    return Fail(UDSE_ERR_RUNTIME, "unknown error");
  }
}

#define UDSE_REQUIRE(cond)                                                       \
  do {                                                                           \
    if (!(cond)) return Fail(UDSE_ERR_INVALID_ARGUMENT, "invalid argument: " #cond); \
  } while (0)

udse::pipeline::CommandOptions ToOptions(const udse_run_options* o) {
  udse::pipeline::CommandOptions c;
  if (!o) return c;
  if (o->config_path) c.config_path = o->config_path;
  if (o->profile) c.profile = udse::config::ParseProfile(o->profile);
  if (o->has_seed) c.seed = o->seed;
  c.threads = o->threads;
  if (o->input) c.input = o->input;
  if (o->output) c.output = o->output;
  if (o->variant) c.variant = o->variant;
  if (o->log) {
    udse_log_fn fn = o->log;
    void* user = o->log_user;
    c.log = [fn, user](const std::string& line) { fn(line.c_str(), user); };
  }
  return c;
}

}  // namespace

extern "C" {

const char* udse_version(void) { return "0.1.0"; }

const char* udse_status_name(udse_status status) {
  switch (status) {
    case UDSE_OK: return "ok";
    case UDSE_ERR_PARSE: return "parse error";
    case UDSE_ERR_UNSUPPORTED_FORMAT: return "unsupported format";
    case UDSE_ERR_IO: return "io error";
    case UDSE_ERR_CONFIG: return "config error";
    case UDSE_ERR_RANGE: return "range error";
    case UDSE_ERR_DEGENERATE_INPUT: return "degenerate input";
    case UDSE_ERR_RUNTIME: return "runtime error";
    case UDSE_ERR_INVALID_ARGUMENT: return "invalid argument";
  }
  return "unknown status";
}

const char* udse_last_error(void) { return g_last_error.c_str(); }

udse_status udse_waveform_create(const double* samples, size_t length, int sample_rate_hz,
                                 udse_waveform** out) {
  UDSE_REQUIRE(out);
  UDSE_REQUIRE(samples || length == 0);
  return Guard([&] {
    udse::Waveform w{std::vector<double>(samples, samples + length), sample_rate_hz};
    udse::ValidateWaveform(w);
    *out = new udse_waveform{std::move(w)};
  });
}

udse_status udse_waveform_read(const char* path, udse_waveform** out) {
  UDSE_REQUIRE(path && out);
  return Guard([&] { *out = new udse_waveform{udse::ReadWav(path)}; });
}

udse_status udse_waveform_write(const udse_waveform* w, const char* path, int float32,
                                size_t* saturated) {
  UDSE_REQUIRE(w && path);
  return Guard([&] {
    const auto stats = udse::WriteWav(
        w->w, path, float32 ? udse::SampleFormat::kFloat32 : udse::SampleFormat::kPcm16);
    if (saturated) *saturated = stats.saturated;
  });
}

udse_status udse_waveform_resample(const udse_waveform* w, int target_hz, udse_waveform** out) {
  UDSE_REQUIRE(w && out);
  return Guard([&] { *out = new udse_waveform{udse::Resample(w->w, target_hz)}; });
}

size_t udse_waveform_length(const udse_waveform* w) { return w ? w->w.size() : 0; }
int udse_waveform_sample_rate(const udse_waveform* w) { return w ? w->w.sample_rate_hz : 0; }
const double* udse_waveform_samples(const udse_waveform* w) {
  return w ? w->w.samples.data() : nullptr;
}
void udse_waveform_free(udse_waveform* w) { delete w; }

udse_status udse_codec_load(const char* path, udse_codec** out) {
  UDSE_REQUIRE(path && out);
  return Guard([&] { *out = new udse_codec(udse::rvq::Codec::Load(path)); });
}

udse_status udse_codec_get_info(const udse_codec* codec, udse_codec_info* info) {
  UDSE_REQUIRE(codec && info);
  return Guard([&] {
    const auto& c = codec->codec;
    info->stages = c.stages();
    info->codebook_size = c.codebook_size();
    info->feature_dim = c.feature_dim();
    info->frame_length = c.metadata().frame_length;
    info->sample_rate_hz = c.metadata().sample_rate_hz;
    info->content_hash = c.ContentHash();
  });
}

size_t udse_codec_frame_count(const udse_codec* codec, size_t length) {
  return codec ? codec->codec.FrameCount(length) : 0;
}

udse_status udse_codec_tokenize(const udse_codec* codec, const udse_waveform* w,
                                int32_t* tokens, size_t capacity, size_t* frames) {
  UDSE_REQUIRE(codec && w && frames);
  UDSE_REQUIRE(tokens || capacity == 0);
  return Guard([&] {
    const auto& c = codec->codec;
    const auto grid = c.Quantize(c.Encode(w->w)).grid;
    *frames = static_cast<size_t>(grid.cols());
    const size_t need = static_cast<size_t>(grid.size());
    if (capacity < need) {
      throw udse::RangeError("token buffer holds " + std::to_string(capacity) + " values but " +
                             std::to_string(need) + " are needed");
    }
    for (Eigen::Index n = 0; n < grid.rows(); ++n) {
      for (Eigen::Index l = 0; l < grid.cols(); ++l) {
        tokens[n * grid.cols() + l] = grid(n, l);
      }
    }
  });
}

udse_status udse_codec_decode(const udse_codec* codec, const int32_t* tokens, size_t frames,
                              size_t length, int stages_used, udse_waveform** out) {
  UDSE_REQUIRE(codec && out);
  UDSE_REQUIRE(tokens || frames == 0);
  return Guard([&] {
    const auto& c = codec->codec;
    udse::rvq::TokenGrid grid(c.stages(), static_cast<Eigen::Index>(frames));
    for (Eigen::Index n = 0; n < grid.rows(); ++n) {
      for (Eigen::Index l = 0; l < grid.cols(); ++l) grid(n, l) = tokens[n * grid.cols() + l];
    }
    *out = new udse_waveform{c.Decode(grid, length, stages_used)};
  });
}

udse_status udse_codec_round_trip(const udse_codec* codec, const udse_waveform* w,
                                  int stages_used, udse_waveform** out) {
  UDSE_REQUIRE(codec && w && out);
  return Guard([&] { *out = new udse_waveform{codec->codec.RoundTrip(w->w, stages_used)}; });
}

void udse_codec_free(udse_codec* codec) { delete codec; }

udse_status udse_model_load(const char* path, const udse_codec* codec, udse_model** out) {
  UDSE_REQUIRE(path && codec && out);
  return Guard(
      [&] { *out = new udse_model(udse::model::UdseModel::Load(path, codec->codec)); });
}

udse_status udse_model_enhance(const udse_model* model, const udse_codec* codec,
                               const udse_waveform* degraded, uint64_t seed,
                               udse_waveform** out) {
  UDSE_REQUIRE(model && codec && degraded && out);
  return Guard([&] {
    auto e = udse::model::Enhance(model->model, codec->codec, degraded->w, seed);
    *out = new udse_waveform{std::move(e.audio)};
  });
}

void udse_model_free(udse_model* model) { delete model; }

udse_status udse_apply_distortion(const char* spec, const udse_waveform* clean, uint64_t seed,
                                  udse_waveform** out) {
  UDSE_REQUIRE(spec && clean && out);
  return Guard([&] {
    udse::distort::CodecCache codecs;
    *out = new udse_waveform{
        udse::distort::ApplySpec(clean->w, udse::distort::ParseSpec(spec), seed, &codecs)};
  });
}

udse_status udse_si_snr(const udse_waveform* estimate, const udse_waveform* reference,
                        double* db) {
  UDSE_REQUIRE(estimate && reference && db);
  return Guard([&] { *db = udse::eval::SiSnr(estimate->w, reference->w); });
}

udse_status udse_log_spectral_distance(const udse_waveform* estimate,
                                       const udse_waveform* reference, int frame_length, int hop,
                                       double* db) {
  UDSE_REQUIRE(estimate && reference && db);
  return Guard([&] {
    udse::eval::SpectralConfig cfg{frame_length, hop, false};
    *db = udse::eval::LogSpectralDistance(estimate->w, reference->w, cfg);
  });
}

const char* const* udse_commands(void) {
  static const std::vector<const char*> names = [] {
    std::vector<const char*> v;
    for (const auto& c : udse::pipeline::Commands()) v.push_back(c.c_str());
    v.push_back(nullptr);
    return v;
  }();
  return names.data();
}

udse_status udse_run_command(const char* command, const udse_run_options* options) {
  UDSE_REQUIRE(command);
  return Guard([&] { udse::pipeline::Run(command, ToOptions(options)); });
}

udse_status udse_resolve_config(const udse_run_options* options, char** text) {
  UDSE_REQUIRE(text);
  return Guard([&] {
    const std::string s = udse::config::Format(udse::pipeline::ResolveConfig(ToOptions(options)));
    char* buf = static_cast<char*>(std::malloc(s.size() + 1));
    if (!buf) throw std::bad_alloc();
    std::memcpy(buf, s.c_str(), s.size() + 1);
    *text = buf;
  });
}

void udse_string_free(char* s) { std::free(s); }

}  // extern "C"
