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

#include "audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "binary_io.hpp"
#include "error.hpp"

namespace udse {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;

struct FmtChunk {
  std::uint16_t tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
};

double Clamp1(double v, std::size_t* saturated) {
  if (v > 1.0 || v < -1.0) {
    ++*saturated;
    return v > 0 ? 1.0 : -1.0;
  }
  return v;
}

double BesselI0(double x) {
  double sum = 1.0;
  double term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

}  // namespace

void ValidateWaveform(const Waveform& w) {
  if (w.sample_rate_hz <= 0) throw ConfigError("sample rate must be positive");
  if (w.samples.empty()) throw ConfigError("waveform is empty");
  for (double s : w.samples) {
    if (!std::isfinite(s)) throw RangeError("waveform contains a non-finite sample");
  }
}

Waveform ParseWav(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 12) throw ParseError(0, "file too short for RIFF header");
  if (r.Bytes(4) != "RIFF") throw ParseError(0, "missing RIFF magic");
  r.U32();  // riff size; not trusted
  if (r.Bytes(4) != "WAVE") throw ParseError(8, "missing WAVE form type");

  FmtChunk fmt;
  bool have_fmt = false;
  while (r.remaining() >= 8) {
    const std::size_t chunk_offset = r.pos();
    const std::string id = r.Bytes(4);
    const std::uint32_t size = r.U32();
    if (size > r.remaining()) {
      throw ParseError(chunk_offset, "chunk '" + id + "' extends past end of file");
    }
    if (id == "fmt ") {
      if (size < 16) throw ParseError(chunk_offset, "fmt chunk too small");
      fmt.tag = r.U16();
      fmt.channels = r.U16();
      fmt.rate = r.U32();
      r.U32();  // byte rate
      r.U16();  // block align
      fmt.bits = r.U16();
      r.Skip(size - 16);
      have_fmt = true;
      if (fmt.tag != kFormatPcm && fmt.tag != kFormatFloat) {
        throw UnsupportedFormat("unsupported WAVE format tag " + std::to_string(fmt.tag));
      }
      if ((fmt.tag == kFormatPcm && fmt.bits != 16) ||
          (fmt.tag == kFormatFloat && fmt.bits != 32)) {
        throw UnsupportedFormat("unsupported bit depth " + std::to_string(fmt.bits));
      }
      if (fmt.channels != 1 && fmt.channels != 2) {
        throw UnsupportedFormat("unsupported channel count " +
                                std::to_string(fmt.channels));
      }
      if (fmt.rate == 0) throw ParseError(chunk_offset + 12, "zero sample rate");
    } else if (id == "data") {
      if (!have_fmt) throw ParseError(chunk_offset, "data chunk before fmt chunk");
      const std::size_t frame_bytes = fmt.channels * (fmt.bits / 8);
      const std::size_t frames = size / frame_bytes;
      if (frames == 0) throw ParseError(chunk_offset, "empty data chunk");
      Waveform w;
      w.sample_rate_hz = static_cast<int>(fmt.rate);
      w.samples.resize(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (int c = 0; c < fmt.channels; ++c) {
          double v;
          if (fmt.tag == kFormatPcm) {
            v = static_cast<std::int16_t>(r.U16()) / 32768.0;
          } else {
            v = r.F32();
            if (!std::isfinite(v)) {
              throw ParseError(r.pos() - 4, "non-finite float sample");
            }
          }
          acc += v;
        }
        w.samples[i] = fmt.channels == 2 ? acc * 0.5 : acc;
      }
      return w;
    } else {
      r.Skip(size);
    }
    if ((size & 1u) && r.remaining() > 0) r.Skip(1);
  }
  throw ParseError(bytes.size(), have_fmt ? "missing data chunk" : "missing fmt chunk");
}

Waveform ReadWav(const std::string& path) { return ParseWav(ReadFileBytes(path)); }

std::vector<std::uint8_t> EncodeWav(const Waveform& w, SampleFormat format,
                                    WavWriteStats* stats) {
  if (w.sample_rate_hz <= 0) throw ConfigError("sample rate must be positive");
  for (double s : w.samples) {
    if (!std::isfinite(s)) throw RangeError("cannot write a non-finite sample");
  }
  const bool pcm = format == SampleFormat::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.size() * (bits / 8));

  ByteWriter out;
  out.Bytes("RIFF");
  out.U32(36 + data_bytes);
  out.Bytes("WAVE");
  out.Bytes("fmt ");
  out.U32(16);
  out.U16(pcm ? kFormatPcm : kFormatFloat);
  out.U16(1);
  out.U32(static_cast<std::uint32_t>(w.sample_rate_hz));
  out.U32(static_cast<std::uint32_t>(w.sample_rate_hz) * (bits / 8));
  out.U16(bits / 8);
  out.U16(bits);
  out.Bytes("data");
  out.U32(data_bytes);

  std::size_t saturated = 0;
  for (double s : w.samples) {
    const double v = Clamp1(s, &saturated);
    if (pcm) {
      const long q = std::clamp(std::lround(v * 32768.0), -32768L, 32767L);
      out.U16(static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    } else {
      out.F32(static_cast<float>(v));
    }
  }
  if (stats) stats->saturated = saturated;
  return std::move(out.data());
}

WavWriteStats WriteWav(const Waveform& w, const std::string& path, SampleFormat format) {
  WavWriteStats stats;
  const auto bytes = EncodeWav(w, format, &stats);
  WriteFileAtomic(path, bytes);
  return stats;
}

Waveform Resample(const Waveform& w, int target_hz) {
  if (target_hz <= 0) throw ConfigError("resample target rate must be positive");
  ValidateWaveform(w);
  const int source_hz = w.sample_rate_hz;
  if (target_hz == source_hz) return w;

  const long g = std::gcd(source_hz, target_hz);
  const long up = target_hz / g;
  const long down = source_hz / g;
  const double ratio = static_cast<double>(target_hz) / source_hz;
  const long out_len = std::max(1L, std::lround(static_cast<double>(w.size()) * ratio));

  // Everything below is measured in input samples.
  constexpr double kRolloff = 0.94;
  constexpr double kBeta = 8.6;
  constexpr double kZeroCrossings = 32.0;  // per side, at the lower rate
  const double cutoff = 0.5 * std::min(1.0, ratio) * kRolloff;
  const double half_width = kZeroCrossings * std::max(1.0, 1.0 / ratio);
  const long reach = static_cast<long>(std::ceil(half_width));
  const double i0_beta = BesselI0(kBeta);

  auto kernel = [&](double tau) {
    const double a = std::abs(tau) / half_width;
    if (a >= 1.0) return 0.0;
    const double x = 2.0 * cutoff * tau;
    const double sinc =
        x == 0.0 ? 1.0 : std::sin(3.14159265358979323846 * x) / (3.14159265358979323846 * x);
    return 2.0 * cutoff * sinc * BesselI0(kBeta * std::sqrt(1.0 - a * a)) / i0_beta;
  };

  // Polyphase table: one row of 2*reach+1 taps per fractional phase.
  const long taps = 2 * reach + 1;
  const bool tabulate = up <= 4096;
  std::vector<double> table;
  if (tabulate) {
    table.resize(static_cast<std::size_t>(up * taps));
    for (long p = 0; p < up; ++p) {
      const double frac = static_cast<double>(p) / up;
      for (long k = -reach; k <= reach; ++k) {
        table[static_cast<std::size_t>(p * taps + (k + reach))] = kernel(frac - k);
      }
    }
  }

  Waveform out;
  out.sample_rate_hz = target_hz;
  out.samples.resize(static_cast<std::size_t>(out_len));
  const long in_len = static_cast<long>(w.size());
  for (long n = 0; n < out_len; ++n) {
    const long num = n * down;
    const long base = num / up;
    const long phase = num % up;
    double acc = 0.0;
    const long k_lo = std::max(-reach, -base);
    const long k_hi = std::min(reach, in_len - 1 - base);
    for (long k = k_lo; k <= k_hi; ++k) {
      const double h = tabulate ? table[static_cast<std::size_t>(phase * taps + (k + reach))]
                                : kernel(static_cast<double>(phase) / up - k);
      acc += h * w.samples[static_cast<std::size_t>(base + k)];
    }
    out.samples[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

}  // namespace udse
