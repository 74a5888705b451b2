// Copyright 2026 The Slotbridge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// slotbridge <command> [--config FILE] [--seed N] [--out DIR] [--overwrite]
//
// Exit codes: 0 ok, 1 usage or configuration error, 2 missing artifact,
// 3 numeric failure during training.

#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "slotbridge/errors.h"
#include "slotbridge/pipeline.h"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kMissing = 2, kNumeric = 3 };

using Command = std::function<nlohmann::json(const slotbridge::PipelineConfig&,
                                             const slotbridge::CommandOptions&)>;

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_logger_mt("slotbridge"));
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Cross-lingual sentence-vector bridge: data, training, evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(slotbridge::kVersion));

  std::string config_path;
  std::optional<uint64_t> seed;
  std::string out = "run";
  bool overwrite = false;

  const std::map<std::string, std::pair<std::string, Command>> commands = {
      {"gen-data", {"Write toy models and the corpus splits", slotbridge::CmdGenData}},
      {"train-a", {"Train the sentence-vector projector", slotbridge::CmdTrainA}},
      {"train-b", {"Train slot expansion, adapter and LoRA", slotbridge::CmdTrainB}},
      {"eval", {"Retrieval, usage and token reports", slotbridge::CmdEval}},
      {"analyze-tokens",
       {"Tokenization inflation analysis (real tokenizer via $SLOTBRIDGE_ASSET_DIR)",
        slotbridge::CmdAnalyzeTokens}},
  };
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", config_path, "JSON config; omitted keys take defaults")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Root seed; overrides the config file");
    sub->add_option("--out", out, "Run directory")->capture_default_str();
    sub->add_flag("--overwrite", overwrite, "Replace existing outputs");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const slotbridge::PipelineConfig config =
        slotbridge::LoadPipelineConfig(config_path, seed);
    const nlohmann::json manifest =
        commands.at(name).second(config, {.out = out, .overwrite = overwrite});
    std::cout << manifest.at("config_hash").get<std::string>() << "\n";
    return kOk;
  } catch (const slotbridge::MissingArtifactError& e) {
    spdlog::error("{}", e.what());
    return kMissing;
  } catch (const slotbridge::NumericError& e) {
    spdlog::error("{}", e.what());
    return kNumeric;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  }
}
