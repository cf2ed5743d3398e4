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

#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>

#include "binary_io.hpp"
#include "error.hpp"

namespace udse::config {
namespace fs = std::filesystem;
namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T ParseNumber(const std::string& s) {
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ConfigError("'" + s + "' is not a valid number");
  }
  return v;
}

std::string FormatDouble(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

bool ParseBool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("'" + s + "' is not a boolean");
}

std::vector<std::string> ParseList(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    const std::string item = Trim(s.substr(pos, comma - pos));
    if (!item.empty()) out.push_back(item);
    pos = comma + 1;
  }
  return out;
}

std::string JoinList(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += items[i];
  }
  return out;
}

struct Key {
  const char* section;
  const char* name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define UDSE_INT(sec, key, field)                                                   \
  Key{sec, key, [](const RunConfig& c) { return std::to_string(c.field); },         \
      [](RunConfig& c, const std::string& v) {                                      \
        c.field = ParseNumber<std::remove_reference_t<decltype(c.field)>>(v);       \
      }}
#define UDSE_REAL(sec, key, field)                                                  \
  Key{sec, key, [](const RunConfig& c) { return FormatDouble(c.field); },           \
      [](RunConfig& c, const std::string& v) { c.field = ParseNumber<double>(v); }}
#define UDSE_BOOL(sec, key, field)                                                  \
  Key{sec, key, [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }, \
      [](RunConfig& c, const std::string& v) { c.field = ParseBool(v); }}
#define UDSE_STR(sec, key, field)                                                   \
  Key{sec, key, [](const RunConfig& c) { return c.field; },                          \
      [](RunConfig& c, const std::string& v) { c.field = v; }}
#define UDSE_LIST(sec, key, field)                                                  \
  Key{sec, key, [](const RunConfig& c) { return JoinList(c.field); },                \
      [](RunConfig& c, const std::string& v) { c.field = ParseList(v); }}

const std::vector<Key>& Keys() {
  static const std::vector<Key> keys = {
      UDSE_INT("codec", "stages", codec.stages),
      UDSE_INT("codec", "codebook_size", codec.codebook_size),
      UDSE_INT("codec", "feature_dim", codec.feature_dim),
      UDSE_INT("codec", "frame_length", codec.frame_length),
      UDSE_INT("codec", "sample_rate", codec.sample_rate),
      UDSE_INT("codec", "seed", codec.seed),
      UDSE_INT("codec", "kmeans_iterations", codec.kmeans_iterations),
      UDSE_STR("codec", "checkpoint", codec.checkpoint),

      UDSE_INT("model", "channels", model.channels),
      UDSE_INT("model", "heads", model.heads),
      UDSE_INT("model", "global_blocks", model.global_blocks),
      UDSE_INT("model", "predictor_blocks", model.predictor_blocks),
      UDSE_INT("model", "conv_kernel", model.conv_kernel),
      UDSE_INT("model", "ffn_expansion", model.ffn_expansion),
      UDSE_BOOL("model", "use_conv", model.use_conv),
      UDSE_BOOL("model", "parallel_mode", model.parallel_mode),
      UDSE_BOOL("model", "global_condition_first_only", model.global_condition_first_only),
      Key{"model", "conditioning",
          [](const RunConfig& c) {
            return std::string(c.model.conditioning == model::Conditioning::kAdd ? "add"
                                                                                 : "concat");
          },
          [](RunConfig& c, const std::string& v) {
            if (v == "concat") {
              c.model.conditioning = model::Conditioning::kConcat;
            } else if (v == "add") {
              c.model.conditioning = model::Conditioning::kAdd;
            } else {
              throw ConfigError("expected concat or add");
            }
          }},
      UDSE_BOOL("model", "fixed_initial_tokens", model.fixed_initial_tokens),
      UDSE_INT("model", "init_seed", model.init_seed),
      UDSE_STR("model", "checkpoint", model_checkpoint),

      UDSE_REAL("optim", "lr", optim.lr),
      UDSE_REAL("optim", "beta1", optim.beta1),
      UDSE_REAL("optim", "beta2", optim.beta2),
      UDSE_REAL("optim", "weight_decay", optim.weight_decay),
      UDSE_INT("optim", "warmup_steps", optim.warmup_steps),
      UDSE_INT("optim", "total_steps", optim.total_steps),
      UDSE_INT("optim", "epochs", optim.epochs),
      UDSE_REAL("optim", "clip_norm", optim.clip_norm),
      UDSE_INT("optim", "seed", optim.seed),

      UDSE_STR("data", "work_dir", data.work_dir),
      UDSE_STR("data", "clean_train_dir", data.clean_train_dir),
      UDSE_STR("data", "clean_test_dir", data.clean_test_dir),
      UDSE_INT("data", "synthetic_train_clips", data.synthetic_train_clips),
      UDSE_INT("data", "synthetic_test_clips", data.synthetic_test_clips),
      UDSE_REAL("data", "synthetic_seconds", data.synthetic_seconds),
      UDSE_LIST("data", "recipes", data.recipes),
      UDSE_LIST("data", "noise_sources", data.noise_sources),
      UDSE_LIST("data", "test_noise_sources", data.test_noise_sources),
      UDSE_STR("data", "rir_source", data.rir_source),
      UDSE_INT("data", "bwe_hz", data.bwe_hz),
      UDSE_INT("data", "seed", data.seed),
      UDSE_INT("data", "threads", data.threads),

      UDSE_INT("eval", "seed", eval.seed),
      UDSE_INT("eval", "lsd_frame_length", eval.lsd_frame_length),
      UDSE_INT("eval", "lsd_hop", eval.lsd_hop),
      UDSE_BOOL("eval", "oracle_tokens", eval.oracle_tokens),
      UDSE_STR("eval", "report", eval.report),
      UDSE_STR("eval", "spectrogram_dir", eval.spectrogram_dir),
  };
  return keys;
}

#undef UDSE_INT
#undef UDSE_REAL
#undef UDSE_BOOL
#undef UDSE_STR
#undef UDSE_LIST

const Key* FindKey(const std::string& section, const std::string& name) {
  for (const auto& k : Keys()) {
    if (section == k.section && name == k.name) return &k;
  }
  return nullptr;
}

// Throws a ConfigError tagged with the key path.
struct Checker {
  const std::map<std::string, int>* lines;
  std::string origin;

  void Require(bool ok, const std::string& path, const std::string& message) const {
    if (ok) return;
    std::string where = origin;
    if (lines) {
      auto it = lines->find(path);
      if (it != lines->end()) where += ":" + std::to_string(it->second);
    }
    throw ConfigError(where + ": " + path + ": " + message);
  }
};

void ValidateWith(const RunConfig& c, const Checker& check) {
  const auto& k = c.codec;
  check.Require(k.stages >= 1, "codec.stages", "must be >= 1");
  check.Require(k.codebook_size >= 2, "codec.codebook_size", "must be >= 2");
  check.Require(k.frame_length >= 4 && k.frame_length % 2 == 0, "codec.frame_length",
                "must be even and >= 4");
  check.Require(k.feature_dim == k.frame_length / 2, "codec.feature_dim",
                "must equal codec.frame_length / 2 (" + std::to_string(k.frame_length / 2) + ")");
  check.Require(k.sample_rate > 0, "codec.sample_rate", "must be positive");
  check.Require(k.kmeans_iterations >= 1, "codec.kmeans_iterations", "must be >= 1");

  const auto& m = c.model;
  check.Require(m.channels >= 1, "model.channels", "must be >= 1");
  check.Require(m.heads >= 1 && m.channels % m.heads == 0, "model.heads",
                "must be positive and divide model.channels");
  check.Require(m.global_blocks >= 0, "model.global_blocks", "must be >= 0");
  check.Require(m.predictor_blocks >= 0, "model.predictor_blocks", "must be >= 0");
  check.Require(m.conv_kernel >= 1 && m.conv_kernel % 2 == 1, "model.conv_kernel",
                "must be odd and >= 1");
  check.Require(m.ffn_expansion >= 1, "model.ffn_expansion", "must be >= 1");

  const auto& o = c.optim;
  check.Require(o.lr > 0.0, "optim.lr", "must be positive");
  check.Require(o.beta1 >= 0.0 && o.beta1 < 1.0, "optim.beta1", "must lie in [0, 1)");
  check.Require(o.beta2 >= 0.0 && o.beta2 < 1.0, "optim.beta2", "must lie in [0, 1)");
  check.Require(o.weight_decay >= 0.0, "optim.weight_decay", "must be >= 0");
  check.Require(o.warmup_steps >= 0, "optim.warmup_steps", "must be >= 0");
  check.Require(o.total_steps >= 1, "optim.total_steps", "must be >= 1");
  check.Require(o.epochs >= 0, "optim.epochs", "must be >= 0");
  check.Require(o.epochs > 0 || o.warmup_steps <= o.total_steps, "optim.warmup_steps",
                "must not exceed optim.total_steps");
  check.Require(o.clip_norm >= 0.0, "optim.clip_norm", "must be >= 0");

  const auto& d = c.data;
  check.Require(!d.work_dir.empty(), "data.work_dir", "must not be empty");
  check.Require(!d.clean_train_dir.empty() || d.synthetic_train_clips >= 1,
                "data.synthetic_train_clips", "must be >= 1 without data.clean_train_dir");
  check.Require(!d.clean_test_dir.empty() || d.synthetic_test_clips >= 0,
                "data.synthetic_test_clips", "must be >= 0");
  check.Require(d.synthetic_seconds > 0.0, "data.synthetic_seconds", "must be positive");
  check.Require(!d.recipes.empty(), "data.recipes", "must list at least one recipe");
  for (const auto& r : d.recipes) {
    const auto& known = corpus::KnownRecipes();
    check.Require(std::find(known.begin(), known.end(), r) != known.end(), "data.recipes",
                  "unknown recipe '" + r + "'");
  }
  check.Require(!d.noise_sources.empty(), "data.noise_sources", "must not be empty");
  check.Require(d.bwe_hz > 0 && d.bwe_hz < k.sample_rate, "data.bwe_hz",
                "must lie in (0, codec.sample_rate)");
  check.Require(d.threads >= 1, "data.threads", "must be >= 1");
  auto exists = [](const std::string& path) {
    std::error_code ec;
    return fs::exists(path, ec);
  };
  for (const char* which : {"clean_train_dir", "clean_test_dir"}) {
    const std::string& dir = std::string(which) == "clean_train_dir" ? d.clean_train_dir
                                                                      : d.clean_test_dir;
    check.Require(dir.empty() || exists(dir), std::string("data.") + which,
                  "directory '" + dir + "' does not exist");
  }
  for (const auto* list : {&d.noise_sources, &d.test_noise_sources}) {
    for (const auto& src : *list) {
      static const char* kFamilies[] = {"white", "pink", "brown", "babble", "modulated"};
      const bool builtin =
          std::find(std::begin(kFamilies), std::end(kFamilies), src) != std::end(kFamilies);
      check.Require(builtin || exists(src),
                    list == &d.noise_sources ? "data.noise_sources" : "data.test_noise_sources",
                    "'" + src + "' is neither a noise family nor an existing path");
    }
  }
  check.Require(d.rir_source == "synthetic" || exists(d.rir_source), "data.rir_source",
                "'" + d.rir_source + "' is neither 'synthetic' nor an existing path");

  const auto& e = c.eval;
  check.Require(e.lsd_frame_length >= 4 && e.lsd_frame_length % 2 == 0, "eval.lsd_frame_length",
                "must be even and >= 4");
  check.Require(e.lsd_hop >= 1 && e.lsd_hop <= e.lsd_frame_length, "eval.lsd_hop",
                "must lie in [1, eval.lsd_frame_length]");
}

std::string Under(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

}  // namespace

Profile ParseProfile(const std::string& name) {
  if (name == "desk") return Profile::kDesk;
  if (name == "paper") return Profile::kPaper;
  throw ConfigError("profile must be desk or paper, got '" + name + "'");
}

const char* ProfileName(Profile profile) { return profile == Profile::kDesk ? "desk" : "paper"; }

RunConfig Defaults(Profile profile) {
  RunConfig c;
  c.profile = profile;
  if (profile == Profile::kPaper) {
    c.codec.stages = 9;
    c.codec.codebook_size = 1024;
    c.codec.feature_dim = 1024;
    c.codec.frame_length = 2048;
    c.codec.sample_rate = 44100;
    c.model.channels = 512;
    c.model.heads = 8;
    c.model.global_blocks = 8;
    c.model.predictor_blocks = 4;
    c.optim.lr = 5e-4;
    c.optim.warmup_steps = 4000;
    c.optim.weight_decay = 0.01;
    c.optim.epochs = 100;
    c.data.work_dir = "runs/paper";
    c.data.bwe_hz = 2000;
  }
  return c;
}

bool RunConfig::operator==(const RunConfig& o) const { return Format(*this) == Format(o); }

std::string RunConfig::CodecPath() const {
  return codec.checkpoint.empty() ? Under(data.work_dir, "codec.udsecdc") : codec.checkpoint;
}
std::string RunConfig::ModelPath() const {
  return model_checkpoint.empty() ? Under(data.work_dir, "model.udsenn") : model_checkpoint;
}
std::string RunConfig::ReportPath() const {
  return eval.report.empty() ? Under(data.work_dir, "eval_report.tsv") : eval.report;
}
std::string RunConfig::CleanDir(corpus::Split split) const {
  const std::string& given = split == corpus::Split::kTrain ? data.clean_train_dir
                                                             : data.clean_test_dir;
  if (!given.empty()) return given;
  return Under(data.work_dir, std::string("clean_") + corpus::SplitName(split));
}
std::string RunConfig::CorpusDir(corpus::Split split) const {
  return Under(data.work_dir, std::string("degraded_") + corpus::SplitName(split));
}
std::string RunConfig::ManifestPath(corpus::Split split) const {
  return Under(CorpusDir(split), "manifest.tsv");
}

rvq::CodecTrainConfig RunConfig::CodecTraining() const {
  rvq::CodecTrainConfig t;
  t.stages = codec.stages;
  t.codebook_size = codec.codebook_size;
  t.frame_length = codec.frame_length;
  t.sample_rate_hz = codec.sample_rate;
  t.seed = codec.seed;
  t.kmeans.max_iterations = codec.kmeans_iterations;
  return t;
}

nn::AdamWConfig RunConfig::Optimizer(long total_steps) const {
  nn::AdamWConfig a;
  a.lr = optim.lr;
  a.beta1 = optim.beta1;
  a.beta2 = optim.beta2;
  a.weight_decay = optim.weight_decay;
  a.warmup_steps = optim.warmup_steps;
  a.total_steps = total_steps;
  a.clip_norm = optim.clip_norm;
  return a;
}

corpus::RecipeOptions RunConfig::Recipes(corpus::Split split) const {
  corpus::RecipeOptions r;
  r.noise_sources = (split == corpus::Split::kTest && !data.test_noise_sources.empty())
                        ? data.test_noise_sources
                        : data.noise_sources;
  r.rir_source = data.rir_source;
  r.bwe_hz = data.bwe_hz;
  r.codec_path = CodecPath();
  return r;
}

synth::SpeechConfig RunConfig::Speech() const {
  synth::SpeechConfig s;
  s.sample_rate_hz = codec.sample_rate;
  s.hop = codec.frame_length / 2;
  s.seconds = data.synthetic_seconds;
  return s;
}

void Validate(const RunConfig& cfg) { ValidateWith(cfg, Checker{nullptr, "config"}); }

RunConfig Parse(const std::string& text, const std::string& origin, const Profile* profile) {
  std::vector<std::string> lines;
  {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string::npos) nl = text.size();
      lines.push_back(text.substr(pos, nl - pos));
      pos = nl + 1;
    }
  }
  auto fail = [&](std::size_t line, const std::string& msg) -> void {
    throw ConfigError(origin + ":" + std::to_string(line + 1) + ": " + msg);
  };
  auto strip = [](const std::string& raw) {
    const auto hash = raw.find('#');
    return Trim(hash == std::string::npos ? raw : raw.substr(0, hash));
  };

  // The profile picks the defaults, so it is resolved before other keys.
  Profile chosen = Profile::kDesk;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line = strip(lines[i]);
    if (line.empty()) continue;
    if (line.front() == '[') break;
    const auto eq = line.find('=');
    if (eq != std::string::npos && Trim(line.substr(0, eq)) == "profile") {
      try {
        chosen = ParseProfile(Trim(line.substr(eq + 1)));
      } catch (const ConfigError& e) {
        fail(i, std::string("profile: ") + e.what());
      }
    }
  }
  if (profile) chosen = *profile;
  RunConfig cfg = Defaults(chosen);

  std::map<std::string, int> key_lines;
  std::string section;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line = strip(lines[i]);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(i, "malformed section header");
      section = Trim(line.substr(1, line.size() - 2));
      static const char* kSections[] = {"codec", "model", "optim", "data", "eval"};
      if (std::find(std::begin(kSections), std::end(kSections), section) == std::end(kSections)) {
        fail(i, "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(i, "expected key = value");
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    if (section.empty()) {
      if (key != "profile") fail(i, "key '" + key + "' must be inside a section");
      continue;
    }
    const std::string path = section + "." + key;
    const Key* k = FindKey(section, key);
    if (!k) fail(i, "unknown key '" + path + "'");
    if (key_lines.count(path)) fail(i, "duplicate key '" + path + "'");
    key_lines[path] = static_cast<int>(i + 1);
    try {
      k->set(cfg, value);
    } catch (const ConfigError& e) {
      fail(i, path + ": " + e.what());
    }
  }
  ValidateWith(cfg, Checker{&key_lines, origin});
  return cfg;
}

RunConfig Load(const std::string& path, const Profile* profile) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = ReadFileBytes(path);
  } catch (const IoError& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  return Parse(std::string(bytes.begin(), bytes.end()), path, profile);
}

std::string Format(const RunConfig& cfg) {
  std::ostringstream out;
  out << "profile = " << ProfileName(cfg.profile) << '\n';
  std::string section;
  for (const auto& k : Keys()) {
    if (section != k.section) {
      section = k.section;
      out << "\n[" << section << "]\n";
    }
    const std::string value = k.get(cfg);
    out << k.name << " =" << (value.empty() ? "" : " " + value) << '\n';
  }
  return out.str();
}

}  // namespace udse::config
