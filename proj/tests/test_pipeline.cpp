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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "config.hpp"
#include "doctest.h"
#include "error.hpp"
#include "pipeline.hpp"
#include "test_util.hpp"

using namespace udse;
namespace fs = std::filesystem;

namespace {

std::string ReadText(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string TinyConfig(const std::string& work_dir, const std::string& recipes = "DN") {
  return "[codec]\nstages = 2\ncodebook_size = 8\nframe_length = 64\nfeature_dim = 32\n"
         "kmeans_iterations = 10\n"
         "[model]\nchannels = 8\nheads = 2\nglobal_blocks = 1\npredictor_blocks = 1\n"
         "conv_kernel = 3\n"
         "[optim]\ntotal_steps = 6\nwarmup_steps = 2\n"
         "[data]\nwork_dir = " + work_dir + "\nsynthetic_train_clips = 4\n"
         "synthetic_test_clips = 2\nsynthetic_seconds = 0.25\nrecipes = " + recipes + "\n";
}

pipeline::CommandOptions Options(const std::string& config_path) {
  pipeline::CommandOptions o;
  o.config_path = config_path;
  return o;
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

}  // namespace

TEST_CASE("config format round trips for both profiles") {
  for (auto p : {config::Profile::kDesk, config::Profile::kPaper}) {
    const auto cfg = config::Defaults(p);
    const auto text = config::Format(cfg);
    CHECK(config::Parse(text) == cfg);
    CHECK(config::Format(config::Parse(text)) == text);
  }
}

TEST_CASE("paper profile carries the full-scale hyperparameters") {
  const auto c = config::Defaults(config::Profile::kPaper);
  CHECK(c.codec.stages == 9);
  CHECK(c.codec.codebook_size == 1024);
  CHECK(c.codec.feature_dim == 1024);
  CHECK(c.model.channels == 512);
  CHECK(c.model.heads == 8);
  CHECK(c.model.global_blocks == 8);
  CHECK(c.model.predictor_blocks == 4);
  CHECK(c.optim.lr == 5e-4);
  CHECK(c.optim.warmup_steps == 4000);
  CHECK(c.optim.weight_decay == 0.01);
  CHECK(c.optim.beta1 == 0.9);
  CHECK(c.optim.beta2 == 0.95);
  const auto d = config::Defaults(config::Profile::kDesk);
  CHECK(d.codec.stages == 4);
  CHECK(d.codec.codebook_size == 64);
  CHECK(d.codec.feature_dim == 320);
  CHECK(d.model.channels == 64);
}

TEST_CASE("config errors name the line and the key path") {
  auto message = [](const std::string& text) -> std::string {
    try {
      config::Parse(text, "run.conf");
    } catch (const ConfigError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message("[codec]\nstages = 2\nbogus = 1\n").find("run.conf:3") != std::string::npos);
  CHECK(message("[codec]\nbogus = 1\n").find("codec.bogus") != std::string::npos);
  CHECK(message("[codec]\nstages = 2\nstages = 3\n").find("duplicate") != std::string::npos);
  CHECK(message("[codec]\nstages = two\n").find("run.conf:2") != std::string::npos);
  const auto dims = message("[codec]\nfeature_dim = 100\n");
  CHECK(dims.find("codec.feature_dim") != std::string::npos);
  CHECK(dims.find("run.conf:2") != std::string::npos);
  CHECK(message("[nope]\n").find("unknown section") != std::string::npos);
  CHECK(message("[data]\nclean_train_dir = /does/not/exist\n").find("data.clean_train_dir") !=
        std::string::npos);
  CHECK(message("[data]\nnoise_sources = white,/no/such/noise\n").find("data.noise_sources") !=
        std::string::npos);
  CHECK(message("# comment only\nprofile = paper\n[model]\nheads = 8 # inline\n").empty());
}

TEST_CASE("overrides replace every seed and the thread count") {
  pipeline::CommandOptions o;
  o.seed = 77;
  o.threads = 3;
  const auto c = pipeline::ResolveConfig(o);
  CHECK(c.codec.seed == 77);
  CHECK(c.model.init_seed == 77);
  CHECK(c.optim.seed == 77);
  CHECK(c.data.seed == 77);
  CHECK(c.eval.seed == 77);
  CHECK(c.data.threads == 3);
}

TEST_CASE("the full command sequence runs, logs and reproduces") {
  test::TempDir dir;
  const std::string work = dir / "work";
  const std::string cfg_path = dir / "tiny.conf";
  WriteText(cfg_path, TinyConfig(work));
  const auto opts = Options(cfg_path);

  CHECK_THROWS_AS(pipeline::Run("train-udse", opts), ConfigError);
  for (const char* cmd : {"train-codec", "build-corpus", "train-udse", "eval"}) {
    pipeline::Run(cmd, opts);
    const std::string log = ReadText(work + "/logs/" + cmd + ".log");
    CHECK(log.size() > 5);
    CHECK(log.substr(log.size() - 5) == "DONE\n");
    CHECK(log.find("[codec]") != std::string::npos);
  }
  // The echoed config re-validates to the same resolved config.
  const std::string log = ReadText(work + "/logs/eval.log");
  const auto begin = log.find("profile = ");
  const auto end = log.find("# inputs");
  const auto echoed = config::Parse(log.substr(begin, end - begin));
  CHECK(echoed == pipeline::ResolveConfig(opts));
  CHECK(log.find(work + "/model.udsenn\t") != std::string::npos);

  const auto report = ReadText(work + "/eval_report.tsv");
  CHECK(report.rfind("UDSE-EVAL v1", 0) == 0);
  CHECK(fs::exists(work + "/train_log.tsv"));

  auto enhance = opts;
  enhance.input = work + "/degraded_test/DN";
  enhance.output = dir / "enhanced";
  pipeline::Run("enhance", enhance);
  CHECK(corpus::ListWavFiles(dir / "enhanced").size() == 2);

  // Same config and seeds in a second directory produce identical checkpoints.
  const std::string work2 = dir / "work2";
  WriteText(dir / "tiny2.conf", TinyConfig(work2));
  for (const char* cmd : {"train-codec", "build-corpus", "train-udse"}) {
    pipeline::Run(cmd, Options(dir / "tiny2.conf"));
  }
  CHECK(HashFile(work + "/codec.udsecdc") == HashFile(work2 + "/codec.udsecdc"));
  CHECK(HashFile(work + "/model.udsenn") == HashFile(work2 + "/model.udsenn"));

  // Retraining the codec with another seed orphans the model.
  auto seeded = opts;
  seeded.seed = 5;
  pipeline::Run("train-codec", seeded);
  try {
    pipeline::Run("enhance", enhance);
    FAIL("expected a codec hash mismatch");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("codec hash mismatch") != std::string::npos);
  }
  CHECK_FALSE(fs::exists(work + "/logs/enhance.log"));
}

TEST_CASE("a failing command leaves no partial outputs") {
  test::TempDir dir;
  const std::string work = dir / "work";
  WriteText(dir / "c.conf", TinyConfig(work));
  pipeline::Run("train-codec", Options(dir / "c.conf"));
  pipeline::Run("build-corpus", Options(dir / "c.conf"));
  // Break one degraded file so training fails after the corpus is read.
  WriteText(work + "/degraded_train/DN/clean_0002.wav", "garbage");
  CHECK_THROWS_AS(pipeline::Run("train-udse", Options(dir / "c.conf")), ParseError);
  CHECK_FALSE(fs::exists(work + "/model.udsenn"));
  CHECK_FALSE(fs::exists(work + "/logs/train-udse.log"));
}

TEST_CASE("unknown commands are config errors") {
  CHECK_THROWS_AS(pipeline::Run("dance", {}), ConfigError);
}

TEST_CASE("ablation table has one row per model and paired deltas") {
  std::vector<pipeline::AblationRow> rows = {{"sequential", {0.9, 0.8}, 0.85, 10.0},
                                             {"parallel", {0.9, 0.5}, 0.7, 8.0}};
  const auto table = pipeline::FormatAblation(rows);
  CHECK(table.find("variant\tacc1\tacc2\tmean_acc\tsi_snr_db") != std::string::npos);
  CHECK(table.find("delta(parallel-sequential)\t0.000000\t-0.300000\t-0.150000\t-2.0000") !=
        std::string::npos);
}

TEST_CASE("ablate trains paired models and writes the comparison") {
  test::TempDir dir;
  const std::string work = dir / "work";
  WriteText(dir / "a.conf", TinyConfig(work, "DN+BWE"));
  auto opts = Options(dir / "a.conf");
  pipeline::Run("train-codec", opts);
  pipeline::Run("build-corpus", opts);
  opts.variant = "parallel";
  pipeline::Run("ablate", opts);
  const auto table = ReadText(work + "/ablation/ablation_parallel.tsv");
  CHECK(table.find("\nsequential\t") != std::string::npos);
  CHECK(table.find("\nparallel\t") != std::string::npos);
  CHECK(table.find("delta(parallel-sequential)") != std::string::npos);
  opts.variant = "sideways";
  CHECK_THROWS_AS(pipeline::Run("ablate", opts), ConfigError);
}
