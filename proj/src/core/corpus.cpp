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

#include "corpus.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <filesystem>
#include <sstream>
#include <thread>

#include "binary_io.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace udse::corpus {
namespace fs = std::filesystem;
namespace {

constexpr const char* kManifestHeader = "UDSE-MANIFEST v1";

std::string PickSource(const std::string& source, Rng& rng) {
  std::error_code ec;
  if (fs::is_directory(source, ec)) {
    const auto files = ListWavFiles(source);
    if (files.empty()) throw ConfigError("no WAV files in " + source);
    return files[rng.Below(files.size())];
  }
  return source;
}

std::vector<std::string> SplitTabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto tab = line.find('\t', pos);
    out.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
    if (tab == std::string::npos) break;
    pos = tab + 1;
  }
  return out;
}

std::uint64_t ParseU64(const std::string& s, std::size_t offset) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ParseError(offset, "expected an unsigned integer but got '" + s + "'");
  }
  return v;
}

std::string DegradedPath(const std::string& out_dir, const std::string& recipe,
                         const std::string& clean_path) {
  std::string folder = recipe;
  std::replace(folder.begin(), folder.end(), '+', '_');
  return (fs::path(out_dir) / folder / fs::path(clean_path).filename()).string();
}

}  // namespace

Split ParseSplit(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  throw ConfigError("split must be train or test, got '" + name + "'");
}

const char* SplitName(Split split) { return split == Split::kTrain ? "train" : "test"; }

const std::vector<double>& SnrGrid(Split split) {
  static const std::vector<double> train = {0.0, 5.0, 10.0, 15.0};
  static const std::vector<double> test = {2.5, 7.5, 12.5, 17.5};
  return split == Split::kTrain ? train : test;
}

const std::vector<std::string>& KnownRecipes() {
  static const std::vector<std::string> recipes = {
      "DN", "DR", "BWE", "DC", "PDR", "CDR", "DN+BWE", "DN+DR+BWE", "DN+DR+DC", "DN+PDR+CDR"};
  return recipes;
}

distort::DistortionSpec InstantiateRecipe(const std::string& recipe, Split split,
                                          const RecipeOptions& options, std::uint64_t seed) {
  const auto& known = KnownRecipes();
  if (std::find(known.begin(), known.end(), recipe) == known.end()) {
    throw ConfigError("unknown recipe '" + recipe + "'");
  }
  Rng rng(seed);
  auto noise = [&] {
    if (options.noise_sources.empty()) throw ConfigError("no noise sources configured");
    const auto& source = options.noise_sources[rng.Below(options.noise_sources.size())];
    const auto& grid = SnrGrid(split);
    distort::NoiseSpec s{PickSource(source, rng), grid[rng.Below(grid.size())]};
    return s;
  };
  auto reverb = [&] {
    if (options.rir_source == "synthetic") {
      return distort::ReverbSpec{"synthetic", rng.Uniform(options.t60_min, options.t60_max)};
    }
    return distort::ReverbSpec{PickSource(options.rir_source, rng), 0.0};
  };
  auto clip = [&] {
    return distort::ClipSpec{rng.Uniform(options.clip_min, options.clip_max)};
  };
  auto phase = [&] {
    distort::PhaseSpec p = options.phase;
    p.seed = rng.NextU64();
    return p;
  };
  auto compress = [&] {
    if (options.codec_path.empty()) throw ConfigError("CDR recipes need a codec checkpoint");
    return distort::CompressSpec{options.codec_path, 1};
  };

  distort::DistortionSpec spec;
  if (recipe == "DN") {
    spec = {noise()};
  } else if (recipe == "DR") {
    spec = {reverb()};
  } else if (recipe == "BWE") {
    spec = {distort::BandLimitSpec{options.bwe_hz}};
  } else if (recipe == "DC") {
    spec = {clip()};
  } else if (recipe == "PDR") {
    spec = {phase()};
  } else if (recipe == "CDR") {
    spec = {compress()};
  } else if (recipe == "DN+BWE") {
    spec = {noise(), distort::BandLimitSpec{options.bwe_hz}};
  } else if (recipe == "DN+DR+BWE") {
    // Reverb first, then additive noise, then the 8 kHz band limit.
    auto r = reverb();
    auto n = noise();
    spec = {r, n, distort::BandLimitSpec{options.mixed_bwe_hz}};
  } else if (recipe == "DN+DR+DC") {
    auto r = reverb();
    auto n = noise();
    spec = {r, n, clip()};
  } else {  // DN+PDR+CDR
    auto n = noise();
    auto p = phase();
    spec = {n, p, compress()};
  }
  return spec;
}

std::string FormatManifest(const Manifest& manifest) {
  std::ostringstream out;
  out << kManifestHeader << '\n';
  out << "# global_seed=" << manifest.global_seed << '\n';
  out << "# split=" << SplitName(manifest.split) << '\n';
  for (const auto& e : manifest.entries) {
    out << e.clean_path << '\t' << e.degraded_path << '\t' << e.recipe << '\t' << e.spec << '\t'
        << e.seed << '\t' << e.status << '\n';
  }
  return out.str();
}

Manifest ParseManifest(const std::string& text) {
  Manifest m;
  std::size_t pos = 0;
  int line_no = 0;
  bool have_seed = false, have_split = false;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string line = text.substr(pos, nl - pos);
    const std::size_t offset = pos;
    pos = nl + 1;
    ++line_no;
    if (line_no == 1) {
      if (line != kManifestHeader) throw ParseError(0, "missing manifest header");
      continue;
    }
    if (line.empty()) continue;
    if (line.rfind("# global_seed=", 0) == 0) {
      m.global_seed = ParseU64(line.substr(14), offset + 14);
      have_seed = true;
      continue;
    }
    if (line.rfind("# split=", 0) == 0) {
      try {
        m.split = ParseSplit(line.substr(8));
      } catch (const ConfigError& e) {
        throw ParseError(offset + 8, e.what());
      }
      have_split = true;
      continue;
    }
    if (line[0] == '#') continue;
    const auto f = SplitTabs(line);
    if (f.size() != 6) {
      throw ParseError(offset, "line " + std::to_string(line_no) + ": expected 6 fields");
    }
    ManifestEntry e{f[0], f[1], f[2], f[3], 0, f[5]};
    e.seed = ParseU64(f[4], offset);
    m.entries.push_back(std::move(e));
  }
  if (line_no == 0) throw ParseError(0, "empty manifest");
  if (!have_seed || !have_split) throw ParseError(0, "manifest lacks seed or split metadata");
  return m;
}

void WriteManifest(const Manifest& manifest, const std::string& path) {
  const std::string text = FormatManifest(manifest);
  WriteFileAtomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

Manifest ReadManifest(const std::string& path) {
  const auto bytes = ReadFileBytes(path);
  return ParseManifest(std::string(bytes.begin(), bytes.end()));
}

std::vector<std::string> ListWavFiles(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& item : fs::directory_iterator(dir)) {
    if (!item.is_regular_file()) continue;
    auto ext = item.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") files.push_back(item.path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<std::string> WriteSyntheticClean(const std::string& dir, int count,
                                             const synth::SpeechConfig& cfg, std::uint64_t seed) {
  fs::create_directories(dir);
  std::vector<std::string> paths;
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "clean_%04d.wav", i);
    const std::string path = (fs::path(dir) / name).string();
    const auto bytes = EncodeWav(synth::SpeechLike(cfg, DeriveSeed(seed, i)), SampleFormat::kFloat32);
    WriteFileAtomic(path, bytes);
    paths.push_back(path);
  }
  return paths;
}

Waveform Regenerate(const ManifestEntry& entry, distort::CodecCache* codecs) {
  const Waveform clean = ReadWav(entry.clean_path);
  return distort::ApplySpec(clean, distort::ParseSpec(entry.spec), entry.seed, codecs);
}

Manifest BuildCorpus(const std::vector<std::string>& clean_paths, const std::string& out_dir,
                     const BuildOptions& options) {
  if (clean_paths.empty()) throw ConfigError("no clean files given");
  if (options.recipes.empty()) throw ConfigError("no recipes given");
  for (const auto& r : options.recipes) {
    const auto& known = KnownRecipes();
    if (std::find(known.begin(), known.end(), r) == known.end()) {
      throw ConfigError("unknown recipe '" + r + "'");
    }
    std::string folder = r;
    std::replace(folder.begin(), folder.end(), '+', '_');
    fs::create_directories(fs::path(out_dir) / folder);
  }

  Manifest m;
  m.global_seed = options.seed;
  m.split = options.split;
  for (const auto& clean : clean_paths) {
    for (const auto& recipe : options.recipes) {
      ManifestEntry e;
      e.clean_path = clean;
      e.recipe = recipe;
      e.degraded_path = DegradedPath(out_dir, recipe, clean);
      e.seed = DeriveSeed(options.seed, m.entries.size());
      m.entries.push_back(std::move(e));
    }
  }

  distort::CodecCache codecs;
  auto work = [&](ManifestEntry& e) {
    try {
      const auto spec = InstantiateRecipe(e.recipe, options.split, options.recipe,
                                          DeriveSeed(e.seed, 0x5eed));
      e.spec = distort::SerializeSpec(spec);
      const Waveform clean = ReadWav(e.clean_path);
      const Waveform degraded = distort::ApplySpec(clean, spec, e.seed, &codecs);
      WriteFileAtomic(e.degraded_path, EncodeWav(degraded, SampleFormat::kFloat32));
      e.status = "ok";
    } catch (const std::exception& ex) {
      if (e.spec.empty()) e.spec = "identity";
      std::string reason = ex.what();
      std::replace(reason.begin(), reason.end(), '\t', ' ');
      std::replace(reason.begin(), reason.end(), '\n', ' ');
      e.status = "failed: " + reason;
    }
  };

  const int threads = std::max(1, options.threads);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < m.entries.size(); i = next++) work(m.entries[i]);
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return m;
}

Manifest BuildCorpus(const std::string& clean_dir, const std::string& out_dir,
                     const BuildOptions& options) {
  return BuildCorpus(ListWavFiles(clean_dir), out_dir, options);
}

std::vector<std::string> VerifyCorpus(const Manifest& manifest) {
  std::vector<std::string> mismatched;
  distort::CodecCache codecs;
  for (const auto& e : manifest.entries) {
    if (!e.ok()) continue;
    try {
      const auto expected = EncodeWav(Regenerate(e, &codecs), SampleFormat::kFloat32);
      if (ReadFileBytes(e.degraded_path) != expected) mismatched.push_back(e.degraded_path);
    } catch (const std::exception&) {
      mismatched.push_back(e.degraded_path);
    }
  }
  return mismatched;
}

}  // namespace udse::corpus
