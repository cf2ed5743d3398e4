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
#include <filesystem>

#include "binary_io.hpp"
#include "corpus.hpp"
#include "doctest.h"
#include "error.hpp"
#include "test_util.hpp"

using namespace udse;
using namespace udse::corpus;
namespace fs = std::filesystem;

namespace {

double SnrOf(const distort::DistortionSpec& spec) {
  for (const auto& d : spec) {
    if (const auto* n = std::get_if<distort::NoiseSpec>(&d)) return n->snr_db;
  }
  return -1.0;
}

}  // namespace

TEST_CASE("DN recipe draws SNRs from the split grid") {
  RecipeOptions opts;
  for (Split split : {Split::kTrain, Split::kTest}) {
    const auto& grid = SnrGrid(split);
    for (std::uint64_t s = 0; s < 40; ++s) {
      const double snr = SnrOf(InstantiateRecipe("DN", split, opts, s));
      CHECK(std::find(grid.begin(), grid.end(), snr) != grid.end());
    }
  }
  CHECK(SnrGrid(Split::kTrain) == std::vector<double>{0, 5, 10, 15});
  CHECK(SnrGrid(Split::kTest) == std::vector<double>{2.5, 7.5, 12.5, 17.5});
}

TEST_CASE("composite recipes keep their stage order") {
  RecipeOptions opts;
  opts.codec_path = "/tmp/codec.udsecdc";
  const auto mixed = InstantiateRecipe("DN+DR+BWE", Split::kTrain, opts, 3);
  REQUIRE(mixed.size() == 3);
  CHECK(std::holds_alternative<distort::ReverbSpec>(mixed[0]));
  CHECK(std::holds_alternative<distort::NoiseSpec>(mixed[1]));
  CHECK(std::get<distort::BandLimitSpec>(mixed[2]).target_hz == 8000);
  const auto bwe = InstantiateRecipe("DN+BWE", Split::kTrain, opts, 3);
  REQUIRE(bwe.size() == 2);
  CHECK(std::get<distort::BandLimitSpec>(bwe[1]).target_hz == 2000);
  const auto dc = InstantiateRecipe("DC", Split::kTrain, opts, 4);
  const double f = std::get<distort::ClipSpec>(dc[0]).threshold_fraction;
  CHECK(f >= 0.1);
  CHECK(f <= 0.9);
  const auto cdr = InstantiateRecipe("DN+PDR+CDR", Split::kTrain, opts, 5);
  REQUIRE(cdr.size() == 3);
  CHECK(std::get<distort::CompressSpec>(cdr[2]).num_stages == 1);
  CHECK_THROWS_AS(InstantiateRecipe("XYZ", Split::kTrain, opts, 1), ConfigError);
  CHECK_THROWS_AS(InstantiateRecipe("CDR", Split::kTrain, RecipeOptions{}, 1), ConfigError);
}

TEST_CASE("manifest text round trips") {
  Manifest m;
  m.global_seed = 99;
  m.split = Split::kTest;
  m.entries.push_back({"/a/c.wav", "/b/d.wav", "DN", "noise(source=white,snr=5)", 12, "ok"});
  m.entries.push_back({"/a/e.wav", "", "DN", "identity", 13, "failed: io error"});
  const auto text = FormatManifest(m);
  const auto back = ParseManifest(text);
  CHECK(back.global_seed == 99);
  CHECK(back.split == Split::kTest);
  CHECK(back.entries == m.entries);
  CHECK_THROWS_AS(ParseManifest("not a manifest\n"), ParseError);
}

TEST_CASE("building a corpus is deterministic, isolates failures and regenerates") {
  test::TempDir dir;
  const auto files = WriteSyntheticClean(dir / "clean", 2, {}, 5);
  REQUIRE(files.size() == 2);
  BuildOptions opts;
  opts.recipes = {"DN"};
  opts.seed = 3;
  const auto a = BuildCorpus(files, dir / "out1", opts);
  opts.threads = 2;
  const auto b = BuildCorpus(files, dir / "out2", opts);
  REQUIRE(a.entries.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(a.entries[i].ok());
    CHECK(ReadFileBytes(a.entries[i].degraded_path) == ReadFileBytes(b.entries[i].degraded_path));
    CHECK(a.entries[i].spec == b.entries[i].spec);
  }
  const auto again = BuildCorpus(files, dir / "out1", BuildOptions{{"DN"}, Split::kTrain, 3, {}, 1});
  CHECK(FormatManifest(again) == FormatManifest(a));
  CHECK(VerifyCorpus(a).empty());
  const auto regen = Regenerate(a.entries[0]);
  CHECK(regen.size() == ReadWav(a.entries[0].degraded_path).size());

  auto with_missing = files;
  with_missing.insert(with_missing.begin() + 1, dir / "clean/nope.wav");
  const auto c = BuildCorpus(with_missing, dir / "out3", opts);
  REQUIRE(c.entries.size() == 3);
  CHECK(c.entries[0].ok());
  CHECK_FALSE(c.entries[1].ok());
  CHECK(c.entries[2].ok());
}

TEST_CASE("listing WAV files is sorted and filtered") {
  test::TempDir dir;
  for (const char* name : {"b.wav", "a.wav", "notes.txt"}) {
    std::FILE* f = std::fopen((dir / name).c_str(), "w");
    std::fclose(f);
  }
  const auto files = ListWavFiles(dir.str());
  REQUIRE(files.size() == 2);
  CHECK(fs::path(files[0]).filename() == "a.wav");
  CHECK(fs::path(files[1]).filename() == "b.wav");
}
