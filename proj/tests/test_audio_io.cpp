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

#include <algorithm>
#include <cstring>

#include "audio_io.hpp"
#include "binary_io.hpp"
#include "doctest.h"
#include "error.hpp"
#include "test_util.hpp"

using namespace udse;

namespace {

// Hand-assembled canonical 44-byte header followed by PCM-16 samples.
std::vector<std::uint8_t> Pcm16File(const std::vector<std::int16_t>& samples, int rate,
                                    int channels = 1) {
  ByteWriter w;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  w.Bytes("RIFF");
  w.U32(36 + data_bytes);
  w.Bytes("WAVE");
  w.Bytes("fmt ");
  w.U32(16);
  w.U16(1);
  w.U16(static_cast<std::uint16_t>(channels));
  w.U32(static_cast<std::uint32_t>(rate));
  w.U32(static_cast<std::uint32_t>(rate * channels * 2));
  w.U16(static_cast<std::uint16_t>(channels * 2));
  w.U16(16);
  w.Bytes("data");
  w.U32(data_bytes);
  for (auto s : samples) w.U16(static_cast<std::uint16_t>(s));
  return w.data();
}

}  // namespace

TEST_CASE("pcm16 samples scale by 1/32768") {
  const auto w = ParseWav(Pcm16File({0, 32767, -32768, 0}, 16000));
  CHECK(w.sample_rate_hz == 16000);
  REQUIRE(w.size() == 4);
  CHECK(w.samples[0] == 0.0);
  CHECK(w.samples[1] == 32767.0 / 32768.0);
  CHECK(w.samples[2] == -1.0);
  CHECK(w.samples[3] == 0.0);
}

TEST_CASE("stereo is averaged to mono") {
  const auto w = ParseWav(Pcm16File({16384, 0, -16384, -16384}, 8000, 2));
  REQUIRE(w.size() == 2);
  CHECK(w.samples[0] == doctest::Approx(0.25));
  CHECK(w.samples[1] == doctest::Approx(-0.5));
}

TEST_CASE("RIFX magic is a parse error at offset 0") {
  auto bytes = Pcm16File({1, 2}, 16000);
  bytes[3] = 'X';
  try {
    ParseWav(bytes);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 0);
  }
}

TEST_CASE("truncated and unsupported files are rejected") {
  auto bytes = Pcm16File({1, 2, 3}, 16000);
  CHECK_THROWS_AS(ParseWav({bytes.begin(), bytes.begin() + 20}), ParseError);
  auto eight_bit = bytes;
  eight_bit[34] = 8;  // bits per sample
  CHECK_THROWS_AS(ParseWav(eight_bit), UnsupportedFormat);
  CHECK_THROWS_AS(ReadWav("/nonexistent/file.wav"), IoError);
}

TEST_CASE("pcm16 round trip of a 440 Hz sine is within one quantization step") {
  test::TempDir dir;
  const auto x = test::Sine(440.0, 1.0, 16000, 0.8);
  WriteWav(x, dir / "sine.wav", SampleFormat::kPcm16);
  const auto y = ReadWav(dir / "sine.wav");
  REQUIRE(y.size() == x.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x.samples[i] - y.samples[i]));
  CHECK(worst <= 1.0 / 32768.0);
}

TEST_CASE("float32 round trip of noise is bit exact after float rounding") {
  test::TempDir dir;
  auto x = test::WhiteNoise(4000, 22050, 7);
  for (auto& s : x.samples) s = static_cast<float>(std::clamp(s, -0.99, 0.99));
  WriteWav(x, dir / "noise.wav");
  CHECK(ReadWav(dir / "noise.wav") == x);
}

TEST_CASE("zero signal survives a round trip") {
  test::TempDir dir;
  Waveform x{std::vector<double>(100, 0.0), 16000};
  WriteWav(x, dir / "z.wav", SampleFormat::kPcm16);
  CHECK(ReadWav(dir / "z.wav") == x);
}

TEST_CASE("pcm16 saturates out-of-range samples and counts them") {
  Waveform x{{0.1, 1.5, -0.2}, 16000};
  WavWriteStats stats;
  const auto bytes = EncodeWav(x, SampleFormat::kPcm16, &stats);
  CHECK(stats.saturated == 1);
  std::int16_t second;
  std::memcpy(&second, bytes.data() + 44 + 2, 2);
  CHECK(second == 32767);
}

TEST_CASE("invalid waveforms are refused") {
  CHECK_THROWS_AS(ValidateWaveform({{}, 16000}), ConfigError);
  CHECK_THROWS_AS(ValidateWaveform({{0.1}, 0}), ConfigError);
  CHECK_THROWS_AS(ValidateWaveform({{std::nan("")}, 16000}), RangeError);
}

TEST_CASE("resample to the same rate is the identity") {
  const auto x = test::WhiteNoise(1000, 16000, 3);
  CHECK(Resample(x, 16000) == x);
}

TEST_CASE("100 Hz tone keeps its energy through 16 to 8 kHz") {
  const auto x = test::Sine(100.0, 1.0, 16000);
  const auto y = Resample(x, 8000);
  CHECK(y.sample_rate_hz == 8000);
  CHECK(y.size() == 8000);
  const double before = test::TonePower(x.samples, 100.0, 16000, 1600, 14400);
  const double after = test::TonePower(y.samples, 100.0, 8000, 800, 7200);
  CHECK(std::abs(10.0 * std::log10(after / before)) < 0.1);
}

TEST_CASE("3 kHz tone is rejected by a 4 kHz target") {
  const auto x = test::Sine(3000.0, 1.0, 16000);
  const auto y = Resample(x, 4000);
  const double before = test::Power(x.samples, 1600, 14400);
  const double after = test::Power(y.samples, 400, 3600);
  CHECK(10.0 * std::log10(after / before) <= -40.0);
}
