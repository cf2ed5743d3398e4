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

#include "distortion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>

#include "dsp.hpp"
#include "error.hpp"
#include "rng.hpp"
#include "synth.hpp"

namespace udse::distort {
namespace {

double Power(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

double Peak(std::span<const double> x) {
  double p = 0.0;
  for (double v : x) p = std::max(p, std::abs(v));
  return p;
}

bool IsBuiltinNoise(const std::string& source) {
  try {
    synth::ParseNoiseFamily(source);
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

// Escapes the characters the spec grammar uses as delimiters.
std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '%' || c == ',' || c == '(' || c == ')' || c == ';' || c == '=' || c == '\t' ||
        c == '\n' || c == '\r') {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02X", static_cast<unsigned char>(c));
      out += buf;
    } else {
      out += c;
    }
  }
  return out;
}

std::string Unescape(const std::string& s, std::size_t offset) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '%') {
      out += s[i];
      continue;
    }
    if (i + 2 >= s.size()) throw ParseError(offset + i, "truncated escape");
    unsigned v = 0;
    const auto r = std::from_chars(s.data() + i + 1, s.data() + i + 3, v, 16);
    if (r.ec != std::errc() || r.ptr != s.data() + i + 3) throw ParseError(offset + i, "bad escape");
    out += static_cast<char>(v);
    i += 2;
  }
  return out;
}

std::string Num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Fields {
  std::string name;
  std::map<std::string, std::string> values;
  std::size_t offset = 0;

  const std::string& Get(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw ParseError(offset, name + ": missing field '" + key + "'");
    return it->second;
  }
  double Real(const std::string& key) const {
    const std::string& s = Get(key);
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
      throw ParseError(offset, name + ": field '" + key + "' is not a number");
    }
    return v;
  }
  long long Integer(const std::string& key) const {
    const std::string& s = Get(key);
    long long v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
      throw ParseError(offset, name + ": field '" + key + "' is not an integer");
    }
    return v;
  }
  std::uint64_t Unsigned(const std::string& key) const {
    const std::string& s = Get(key);
    std::uint64_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
      throw ParseError(offset, name + ": field '" + key + "' is not an unsigned integer");
    }
    return v;
  }
  void Expect(std::initializer_list<const char*> keys) const {
    for (const auto& [k, v] : values) {
      if (std::find_if(keys.begin(), keys.end(), [&](const char* s) { return k == s; }) ==
          keys.end()) {
        throw ParseError(offset, name + ": unknown field '" + k + "'");
      }
    }
  }
};

Fields ParseItem(const std::string& item, std::size_t offset) {
  Fields f;
  f.offset = offset;
  const auto open = item.find('(');
  if (open == std::string::npos || item.empty() || item.back() != ')') {
    throw ParseError(offset, "expected name(key=value,...) but got '" + item + "'");
  }
  f.name = item.substr(0, open);
  const std::string body = item.substr(open + 1, item.size() - open - 2);
  std::size_t pos = 0;
  while (pos < body.size()) {
    auto comma = body.find(',', pos);
    if (comma == std::string::npos) comma = body.size();
    const std::string kv = body.substr(pos, comma - pos);
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ParseError(offset + open + 1 + pos, "expected key=value but got '" + kv + "'");
    }
    const std::string key = kv.substr(0, eq);
    if (f.values.count(key)) throw ParseError(offset + open + 1 + pos, "duplicate field '" + key + "'");
    f.values[key] = Unescape(kv.substr(eq + 1), offset + open + 1 + pos + eq + 1);
    pos = comma + 1;
  }
  return f;
}

struct Serializer {
  std::string operator()(const NoiseSpec& s) const {
    return "noise(source=" + Escape(s.source) + ",snr=" + Num(s.snr_db) + ")";
  }
  std::string operator()(const ReverbSpec& s) const {
    return "reverb(source=" + Escape(s.source) + ",t60=" + Num(s.t60_seconds) + ")";
  }
  std::string operator()(const BandLimitSpec& s) const {
    return "bandlimit(hz=" + std::to_string(s.target_hz) + ")";
  }
  std::string operator()(const ClipSpec& s) const {
    return "clip(fraction=" + Num(s.threshold_fraction) + ")";
  }
  std::string operator()(const PhaseSpec& s) const {
    return "phase(frame=" + std::to_string(s.frame_length) + ",hop=" + std::to_string(s.hop) +
           ",window=" + (s.window == PhaseWindow::kHann ? "hann" : "rect") +
           ",seed=" + std::to_string(s.seed) + ")";
  }
  std::string operator()(const CompressSpec& s) const {
    return "compress(codec=" + Escape(s.codec_path) + ",stages=" + std::to_string(s.num_stages) +
           ")";
  }
};

Waveform LoadNoise(const std::string& source, std::size_t length, int rate, std::uint64_t seed) {
  if (IsBuiltinNoise(source)) {
    // Twice the needed length so the seeded crop offset has room to move.
    return synth::Noise(synth::ParseNoiseFamily(source), 2 * length, rate, seed);
  }
  Waveform n = ReadWav(source);
  if (n.sample_rate_hz != rate) n = Resample(n, rate);
  return n;
}

}  // namespace

std::string SerializeSpec(const DistortionSpec& spec) {
  if (spec.empty()) return "identity";
  std::string out;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (i) out += ';';
    out += std::visit(Serializer{}, spec[i]);
  }
  return out;
}

DistortionSpec ParseSpec(const std::string& text) {
  DistortionSpec spec;
  if (text == "identity") return spec;
  if (text.empty()) throw ParseError(0, "empty distortion spec");
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto semi = text.find(';', pos);
    if (semi == std::string::npos) semi = text.size();
    const Fields f = ParseItem(text.substr(pos, semi - pos), pos);
    if (f.name == "noise") {
      f.Expect({"source", "snr"});
      spec.push_back(NoiseSpec{f.Get("source"), f.Real("snr")});
    } else if (f.name == "reverb") {
      f.Expect({"source", "t60"});
      spec.push_back(ReverbSpec{f.Get("source"), f.Real("t60")});
    } else if (f.name == "bandlimit") {
      f.Expect({"hz"});
      spec.push_back(BandLimitSpec{static_cast<int>(f.Integer("hz"))});
    } else if (f.name == "clip") {
      f.Expect({"fraction"});
      spec.push_back(ClipSpec{f.Real("fraction")});
    } else if (f.name == "phase") {
      f.Expect({"frame", "hop", "window", "seed"});
      PhaseSpec p{static_cast<int>(f.Integer("frame")), static_cast<int>(f.Integer("hop")),
                  f.Unsigned("seed")};
      const std::string& window = f.Get("window");
      if (window == "hann") {
        p.window = PhaseWindow::kHann;
      } else if (window != "rect") {
        throw ParseError(pos, "phase: window must be rect or hann");
      }
      spec.push_back(p);
    } else if (f.name == "compress") {
      f.Expect({"codec", "stages"});
      spec.push_back(CompressSpec{f.Get("codec"), static_cast<int>(f.Integer("stages"))});
    } else {
      throw ParseError(pos, "unknown distortion '" + f.name + "'");
    }
    pos = semi + 1;
  }
  return spec;
}

std::shared_ptr<const rvq::Codec> CodecCache::Get(const std::string& path) {
  std::lock_guard lock(mu_);
  auto it = codecs_.find(path);
  if (it != codecs_.end()) return it->second;
  std::shared_ptr<const rvq::Codec> codec;
  try {
    codec = std::make_shared<const rvq::Codec>(rvq::Codec::Load(path));
  } catch (const IoError& e) {
    throw ConfigError("codec checkpoint unavailable: " + std::string(e.what()));
  }
  codecs_.emplace(path, codec);
  return codec;
}

Waveform AddNoise(const Waveform& x, const Waveform& noise, double snr_db, std::uint64_t seed) {
  return AddNoise(x, noise, snr_db, seed, nullptr, nullptr);
}

Waveform AddNoise(const Waveform& x, const Waveform& noise, double snr_db, std::uint64_t seed,
                  double* gain, std::size_t* offset) {
  ValidateWaveform(x);
  if (!std::isfinite(snr_db)) throw ConfigError("SNR must be finite; use an empty spec for clean");
  if (noise.sample_rate_hz != x.sample_rate_hz) throw ConfigError("noise sample rate differs");
  if (noise.size() < x.size()) throw ConfigError("noise is shorter than the signal");
  const double px = Power(x.samples);
  if (px <= 0.0) throw DegenerateInput("signal has zero power");
  Rng rng(seed);
  const std::size_t slack = noise.size() - x.size();
  for (int attempt = 0; attempt < 8; ++attempt) {
    const std::size_t start = static_cast<std::size_t>(rng.Below(slack + 1));
    const std::span<const double> crop(noise.samples.data() + start, x.size());
    const double pn = Power(crop);
    if (pn <= 0.0) continue;
    const double g = std::sqrt(px / (pn * std::pow(10.0, snr_db / 10.0)));
    Waveform y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y.samples[i] += g * crop[i];
    if (gain) *gain = g;
    if (offset) *offset = start;
    return y;
  }
  throw DegenerateInput("noise crop has zero power after 8 attempts");
}

Waveform Reverberate(const Waveform& x, const Waveform& rir) {
  ValidateWaveform(x);
  ValidateWaveform(rir);
  if (rir.sample_rate_hz != x.sample_rate_hz) throw ConfigError("RIR sample rate differs");
  Waveform y{dsp::FftConvolve(x.samples, rir.samples), x.sample_rate_hz};
  const double in_peak = Peak(x.samples);
  const double out_peak = Peak(y.samples);
  if (out_peak > 0.0) {
    const double g = in_peak / out_peak;
    for (double& v : y.samples) v *= g;
  }
  return y;
}

Waveform BandLimit(const Waveform& x, int target_hz) {
  ValidateWaveform(x);
  if (target_hz <= 0 || target_hz > x.sample_rate_hz) {
    throw ConfigError("band limit must lie in (0, sample rate]");
  }
  if (target_hz == x.sample_rate_hz) return x;
  Waveform y = Resample(Resample(x, target_hz), x.sample_rate_hz);
  // Rounding in the two length computations may differ by a sample.
  y.samples.resize(x.size(), 0.0);
  return y;
}

Waveform Clip(const Waveform& x, double threshold_fraction) {
  ValidateWaveform(x);
  if (!(threshold_fraction > 0.0 && threshold_fraction <= 1.0)) {
    throw ConfigError("clip threshold fraction must lie in (0, 1]");
  }
  return ClipAtLevel(x, threshold_fraction * Peak(x.samples));
}

Waveform ClipAtLevel(const Waveform& x, double level) {
  ValidateWaveform(x);
  if (!(level >= 0.0) || !std::isfinite(level)) throw ConfigError("clip level must be >= 0");
  Waveform y = x;
  for (double& v : y.samples) v = std::clamp(v, -level, level);
  return y;
}

Waveform PhaseDistort(const Waveform& x, const PhaseSpec& spec) {
  ValidateWaveform(x);
  if (spec.frame_length < 4 || spec.frame_length % 2 != 0) {
    throw ConfigError("phase distortion frame length must be even and >= 4");
  }
  if (spec.hop < 1 || spec.hop > spec.frame_length) throw ConfigError("invalid STFT hop");
  const auto window = spec.window == PhaseWindow::kHann ? dsp::HannWindow(spec.frame_length)
                                                        : dsp::RectangularWindow(spec.frame_length);
  dsp::CheckOverlapAdd(window, spec.hop);
  Rng rng(spec.seed);
  // Non-overlapping frames: the trailing partial frame is time reversed with a
  // random sign, which keeps its zero-padded magnitude spectrum exactly.
  std::size_t body = x.size();
  if (spec.window == PhaseWindow::kRectangular && spec.hop == spec.frame_length) {
    body -= x.size() % static_cast<std::size_t>(spec.frame_length);
  }
  std::vector<double> tail(x.samples.begin() + static_cast<std::ptrdiff_t>(body), x.samples.end());
  std::reverse(tail.begin(), tail.end());
  if (rng.Uniform() < 0.5) {
    for (double& v : tail) v = -v;
  }
  if (body == 0) return Waveform{tail, x.sample_rate_hz};
  auto frames = dsp::Stft(std::span<const double>(x.samples.data(), body), spec.frame_length,
                          spec.hop, window);
  const Eigen::Index last = frames.bins.rows() - 1;
  for (Eigen::Index j = 0; j < frames.bins.cols(); ++j) {
    for (Eigen::Index i = 1; i < last; ++i) {
      const double phase = std::numbers::pi - 2.0 * std::numbers::pi * rng.Uniform();
      frames.bins(i, j) = std::polar(std::abs(frames.bins(i, j)), phase);
    }
  }
  auto y = dsp::Istft(frames);
  y.insert(y.end(), tail.begin(), tail.end());
  return Waveform{std::move(y), x.sample_rate_hz};
}

Waveform CompressDistort(const Waveform& x, const rvq::Codec& codec, int num_stages) {
  ValidateWaveform(x);
  if (num_stages < 1 || num_stages > codec.stages()) {
    throw ConfigError("compression stage count out of range for this codec");
  }
  return codec.RoundTrip(x, num_stages);
}

Waveform ApplyOne(const Waveform& x, const Distortion& d, std::uint64_t seed, CodecCache* codecs) {
  struct Visitor {
    const Waveform& x;
    std::uint64_t seed;
    CodecCache* codecs;

    Waveform operator()(const NoiseSpec& s) const {
      const Waveform n = LoadNoise(s.source, x.size(), x.sample_rate_hz, DeriveSeed(seed, 1));
      return AddNoise(x, n, s.snr_db, DeriveSeed(seed, 2));
    }
    Waveform operator()(const ReverbSpec& s) const {
      if (s.source == "synthetic") {
        if (!(s.t60_seconds > 0.0)) throw ConfigError("T60 must be positive");
        return Reverberate(x, synth::ExponentialRir(s.t60_seconds, x.sample_rate_hz, seed));
      }
      Waveform rir = ReadWav(s.source);
      if (rir.sample_rate_hz != x.sample_rate_hz) rir = Resample(rir, x.sample_rate_hz);
      return Reverberate(x, rir);
    }
    Waveform operator()(const BandLimitSpec& s) const { return BandLimit(x, s.target_hz); }
    Waveform operator()(const ClipSpec& s) const { return Clip(x, s.threshold_fraction); }
    Waveform operator()(const PhaseSpec& s) const {
      PhaseSpec seeded = s;
      seeded.seed = DeriveSeed(seed, s.seed);
      return PhaseDistort(x, seeded);
    }
    Waveform operator()(const CompressSpec& s) const {
      if (s.codec_path.empty()) throw ConfigError("compression needs a codec checkpoint");
      CodecCache local;
      CodecCache& cache = codecs ? *codecs : local;
      return CompressDistort(x, *cache.Get(s.codec_path), s.num_stages);
    }
  };
  return std::visit(Visitor{x, seed, codecs}, d);
}

Waveform ApplySpec(const Waveform& x, const DistortionSpec& spec, std::uint64_t seed,
                   CodecCache* codecs) {
  ValidateWaveform(x);
  Waveform y = x;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    y = ApplyOne(y, spec[i], DeriveSeed(seed, i), codecs);
  }
  return y;
}

}  // namespace udse::distort
