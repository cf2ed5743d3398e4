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

// Batch command-line front end. Links only the C API.
#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "udse/udse.h"

namespace {

int ExitCode(udse_status s) {
  switch (s) {
    case UDSE_OK:
      return 0;
    case UDSE_ERR_CONFIG:
    case UDSE_ERR_INVALID_ARGUMENT:
      return 2;
    case UDSE_ERR_PARSE:
    case UDSE_ERR_UNSUPPORTED_FORMAT:
    case UDSE_ERR_IO:
    case UDSE_ERR_RANGE:
    case UDSE_ERR_DEGENERATE_INPUT:
      return 3;
    case UDSE_ERR_RUNTIME:
      break;
  }
  return 4;
}

void PrintLine(const char* line, void* user) {
  if (*static_cast<bool*>(user)) return;
  std::fprintf(stderr, "%s\n", line);
  std::fflush(stderr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UDSE discrete-domain speech enhancement"};
  app.require_subcommand(1);

  std::string config_path, profile, input, output, variant = "all";
  std::uint64_t seed = 0;
  int threads = 0;
  bool quiet = false;

  app.add_option("--config", config_path, "Run configuration file")->check(CLI::ExistingFile);
  app.add_option("--profile", profile, "Built-in defaults")->check(CLI::IsMember({"desk", "paper"}));
  auto* seed_opt = app.add_option("--seed", seed, "Overrides every seed in the config");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::NonNegativeNumber);
  app.add_flag("-q,--quiet", quiet, "Suppress progress output");

  app.add_subcommand("train-codec", "Train the RVQ codec on the clean training clips");
  app.add_subcommand("build-corpus", "Generate degraded train/test corpora and manifests");
  app.add_subcommand("train-udse", "Train the token predictor on the training manifest");
  auto* enhance = app.add_subcommand("enhance", "Enhance a WAV file or a directory of them");
  enhance->add_option("--in", input, "Input WAV or directory")->required();
  enhance->add_option("--out", output, "Output WAV or directory")->required();
  app.add_subcommand("eval", "Score enhanced test clips and write the report");
  auto* ablate = app.add_subcommand("ablate", "Paired sequential vs variant comparison");
  ablate->add_option("--variant", variant, "Variant to compare")
      ->check(CLI::IsMember({"parallel", "first-only", "all"}));
  app.add_subcommand("show-config", "Print the resolved configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  udse_run_options opts{};
  opts.config_path = config_path.empty() ? nullptr : config_path.c_str();
  opts.profile = profile.empty() ? nullptr : profile.c_str();
  opts.has_seed = seed_opt->count() > 0;
  opts.seed = seed;
  opts.threads = threads;
  opts.input = input.c_str();
  opts.output = output.c_str();
  opts.variant = variant.c_str();
  opts.log = PrintLine;
  opts.log_user = &quiet;

  const std::string command = app.get_subcommands().front()->get_name();
  udse_status status;
  if (command == "show-config") {
    char* text = nullptr;
    status = udse_resolve_config(&opts, &text);
    if (status == UDSE_OK) {
      std::fputs(text, stdout);
      udse_string_free(text);
    }
  } else {
    status = udse_run_command(command.c_str(), &opts);
  }
  if (status != UDSE_OK) {
    std::fprintf(stderr, "udse %s: %s: %s\n", command.c_str(), udse_status_name(status),
                 udse_last_error());
  }
  return ExitCode(status);
}
