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

#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "dsp.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace udse::synth {
namespace {

constexpr double kPi = 3.14159265358979323846;

struct Formants {
  double f[3];
};

// Rough adult vowel formants: /a/ /i/ /u/ /e/ /o/, then a few extra shapes.
constexpr Formants kVowels[] = {
    {{730, 1090, 2440}}, {{270, 2290, 3010}}, {{300, 870, 2240}},
    {{530, 1840, 2480}}, {{570, 840, 2410}},  {{660, 1720, 2410}},
    {{440, 1020, 2240}}, {{390, 1990, 2550}},
};
constexpr double kBandwidth[3] = {90.0, 110.0, 150.0};
constexpr double kGain[3] = {1.0, 0.6, 0.3};

double Envelope(const Formants& v, double freq) {
  double e = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double d = (freq - v.f[i]) / kBandwidth[i];
    e += kGain[i] / (1.0 + d * d);
  }
  return e;
}

void Normalize(std::vector<double>& x) {
  double p = 0.0;
  for (double v : x) p += v * v;
  p = std::sqrt(p / std::max<std::size_t>(1, x.size()));
  if (p > 0) {
    for (double& v : x) v /= p;
  }
}

// White Gaussian noise spectrally shaped by gain(freq_hz).
template <typename Gain>
std::vector<double> Shaped(std::size_t length, int rate, Rng& rng, Gain gain) {
  std::size_t n = 1;
  while (n < length) n <<= 1;
  std::vector<double> white(n);
  for (double& v : white) v = rng.Normal();
  auto spec = dsp::Rfft(white);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    spec[k] *= gain(static_cast<double>(k) * rate / n);
  }
  auto shaped = dsp::Irfft(spec, n);
  shaped.resize(length);
  Normalize(shaped);
  return shaped;
}

// Smooth random gain in [floor, 1] changing at roughly `rate_hz`.
std::vector<double> SlowModulation(std::size_t length, int sample_rate, double rate_hz,
                                   double floor, Rng& rng) {
  const std::size_t step = std::max<std::size_t>(
      1, static_cast<std::size_t>(sample_rate / rate_hz));
  const std::size_t knots = length / step + 2;
  std::vector<double> k(knots);
  for (double& v : k) v = rng.Uniform(floor, 1.0);
  std::vector<double> out(length);
  for (std::size_t t = 0; t < length; ++t) {
    const std::size_t i = t / step;
    const double frac = static_cast<double>(t % step) / step;
    const double s = 0.5 - 0.5 * std::cos(kPi * frac);
    out[t] = k[i] * (1 - s) + k[i + 1] * s;
  }
  return out;
}

}  // namespace

Waveform SpeechLike(const SpeechConfig& cfg, std::uint64_t seed) {
  if (cfg.sample_rate_hz <= 0 || cfg.hop <= 0 || cfg.seconds <= 0) {
    throw ConfigError("speech synthesizer needs positive rate, hop and duration");
  }
  if (cfg.pitch_multiples.empty() || cfg.levels.empty() || cfg.vowel_count < 1 ||
      cfg.vowel_count > static_cast<int>(std::size(kVowels))) {
    throw ConfigError("speech synthesizer vocabulary is empty or too large");
  }
  Rng rng(seed);
  const std::size_t total = static_cast<std::size_t>(std::lround(cfg.seconds * cfg.sample_rate_hz));
  const double base_hz = static_cast<double>(cfg.sample_rate_hz) / cfg.hop;
  Waveform w;
  w.sample_rate_hz = cfg.sample_rate_hz;
  w.samples.assign(total, 0.0);

  auto span_hops = [&](int lo, int hi) {
    return lo + static_cast<int>(rng.Below(static_cast<std::uint64_t>(hi - lo + 1)));
  };

  std::size_t t = static_cast<std::size_t>(span_hops(cfg.min_gap_hops, cfg.max_gap_hops)) * cfg.hop;
  while (t < total) {
    const std::size_t len =
        static_cast<std::size_t>(span_hops(cfg.min_syllable_hops, cfg.max_syllable_hops)) * cfg.hop;
    const int mult = cfg.pitch_multiples[rng.Below(cfg.pitch_multiples.size())];
    const Formants& vowel = kVowels[rng.Below(static_cast<std::uint64_t>(cfg.vowel_count))];
    const double level = cfg.levels[rng.Below(cfg.levels.size())];
    const double f0 = mult * base_hz;

    std::vector<double> amps, freqs, phases;
    for (int h = 1; h * f0 < 0.45 * cfg.sample_rate_hz; ++h) {
      freqs.push_back(h * f0);
      amps.push_back(Envelope(vowel, h * f0) / std::sqrt(static_cast<double>(h)));
      phases.push_back(std::fmod(0.7 * h * h, 2.0 * kPi));
    }
    double power = 0.0;
    for (double a : amps) power += 0.5 * a * a;
    const double scale = level / std::sqrt(power);

    const std::size_t end = std::min(total, t + len);
    for (std::size_t i = t; i < end; ++i) {
      // Phase follows absolute time so repeated syllables sample identically.
      const double time = static_cast<double>(i) / cfg.sample_rate_hz;
      double s = 0.0;
      for (std::size_t h = 0; h < freqs.size(); ++h) {
        s += amps[h] * std::sin(2.0 * kPi * freqs[h] * time + phases[h]);
      }
      w.samples[i] = scale * s;
    }
    t = end + static_cast<std::size_t>(span_hops(cfg.min_gap_hops, cfg.max_gap_hops)) * cfg.hop;
  }
  return w;
}

NoiseFamily ParseNoiseFamily(const std::string& name) {
  if (name == "white") return NoiseFamily::kWhite;
  if (name == "pink") return NoiseFamily::kPink;
  if (name == "brown") return NoiseFamily::kBrown;
  if (name == "babble") return NoiseFamily::kBabble;
  if (name == "modulated") return NoiseFamily::kModulated;
  throw ConfigError("unknown noise family '" + name + "'");
}

const char* NoiseFamilyName(NoiseFamily family) {
  switch (family) {
    case NoiseFamily::kWhite: return "white";
    case NoiseFamily::kPink: return "pink";
    case NoiseFamily::kBrown: return "brown";
    case NoiseFamily::kBabble: return "babble";
    case NoiseFamily::kModulated: return "modulated";
  }
  return "white";
}

Waveform Noise(NoiseFamily family, std::size_t length, int sample_rate_hz,
               std::uint64_t seed) {
  if (length == 0 || sample_rate_hz <= 0) throw ConfigError("noise needs length and rate");
  Rng rng(seed);
  std::vector<double> x;
  auto tilt = [](double alpha) {
    return [alpha](double f) { return f < 20.0 ? std::pow(20.0, -alpha / 2) : std::pow(f, -alpha / 2); };
  };
  switch (family) {
    case NoiseFamily::kWhite:
      x = Shaped(length, sample_rate_hz, rng, [](double) { return 1.0; });
      break;
    case NoiseFamily::kPink:
      x = Shaped(length, sample_rate_hz, rng, tilt(1.0));
      break;
    case NoiseFamily::kBrown:
      x = Shaped(length, sample_rate_hz, rng, tilt(2.0));
      break;
    case NoiseFamily::kBabble: {
      // Speech-shaped spectrum with syllable-rate level fluctuation.
      x = Shaped(length, sample_rate_hz, rng, [](double f) {
        const double d = (f - 500.0) / 700.0;
        return 1.0 / (1.0 + d * d) + 0.05;
      });
      const auto mod = SlowModulation(length, sample_rate_hz, 6.0, 0.3, rng);
      for (std::size_t i = 0; i < length; ++i) x[i] *= mod[i];
      Normalize(x);
      break;
    }
    case NoiseFamily::kModulated: {
      x = Shaped(length, sample_rate_hz, rng, tilt(0.5));
      const auto mod = SlowModulation(length, sample_rate_hz, 2.0, 0.05, rng);
      for (std::size_t i = 0; i < length; ++i) x[i] *= mod[i];
      Normalize(x);
      break;
    }
  }
  Waveform w;
  w.sample_rate_hz = sample_rate_hz;
  w.samples = std::move(x);
  return w;
}

Waveform ExponentialRir(double t60_seconds, int sample_rate_hz, std::uint64_t seed) {
  if (!(t60_seconds > 0) || sample_rate_hz <= 0) {
    throw ConfigError("RIR needs positive T60 and rate");
  }
  Rng rng(seed);
  const std::size_t length =
      std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(t60_seconds * sample_rate_hz)));
  const double decay = 3.0 * std::log(10.0) / (t60_seconds * sample_rate_hz);
  Waveform h;
  h.sample_rate_hz = sample_rate_hz;
  h.samples.resize(length);
  h.samples[0] = 1.0;
  // Tail energy matches the direct path (0 dB direct-to-reverberant ratio).
  const double tail_gain = std::sqrt(2.0 * decay);
  for (std::size_t t = 1; t < length; ++t) {
    h.samples[t] = tail_gain * rng.Normal() * std::exp(-decay * static_cast<double>(t));
  }
  return h;
}

}  // namespace udse::synth
