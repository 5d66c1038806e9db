/*
 * Copyright 2026 The TRSR Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line front end: trsr <command> [--config FILE] [--set a.b=v ...]

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "trsr/config.hpp"
#include "trsr/pipeline.hpp"

namespace {

constexpr int kConfigExit = 2;

std::vector<nlohmann::json> parse_values(const std::string& csv) {
  std::vector<nlohmann::json> values;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const auto comma = csv.find(',', start);
    const auto raw = csv.substr(start, comma == std::string::npos
                                           ? std::string::npos
                                           : comma - start);
    if (!raw.empty()) {
      auto v = nlohmann::json::parse(raw, nullptr, false);
      values.push_back(v.is_discarded() ? nlohmann::json(raw) : v);
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return values;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Summarize user histories with an LLM and rank candidates"};
  app.require_subcommand(1);

  std::optional<std::string> config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> paradigm;
  std::string log_level = "info";
  app.add_option("-c,--config", config_file, "JSON config file");
  app.add_option("--set", sets, "Override one key, e.g. --set recommend.N=5")
      ->take_all();
  app.add_option("--seed", seed, "Sets eval.seed");
  app.add_option("--out", out_dir, "Sets output_dir");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error");
  app.fallthrough();

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"ingest", "Load, filter and split the dataset"},
      {"summarize", "Summarize every user history"},
      {"export-sft", "Write the fine-tuning JSONL"},
      {"score", "Score evaluation groups"},
      {"evaluate", "Score evaluation groups and write the metric report"},
      {"sweep", "Evaluate once per value of one config axis"}};
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    if (name == "summarize") {
      sub->add_option("--paradigm", paradigm, "hierarchical or recurrent");
    }
    subs.push_back(sub);
  }
  std::string axis;
  std::string values_csv;
  auto* sweep = subs.back();
  sweep->add_option("--axis", axis, "recent_item_count, fan_in, paradigm, "
                                    "model or a dotted config path")
      ->required();
  sweep->add_option("--values", values_csv, "Comma-separated values")
      ->required();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_default_logger(spdlog::stderr_color_mt("trsr"));
  spdlog::set_level(spdlog::level::from_str(log_level));

  const std::string command = app.get_subcommands().front()->get_name();

  std::optional<trsr::PipelineConfig> config;
  try {
    if (seed) sets.push_back("eval.seed=" + std::to_string(*seed));
    if (out_dir) sets.push_back("output_dir=" + nlohmann::json(*out_dir).dump());
    if (paradigm) sets.push_back("summarize.paradigm=" + nlohmann::json(*paradigm).dump());
    std::optional<std::filesystem::path> file;
    if (config_file) file = *config_file;
    config = trsr::load_config(file, sets);
  } catch (const trsr::ConfigError& e) {
    std::cerr << "config error:\n";
    for (const auto& p : e.problems()) std::cerr << "  " << p << '\n';
    return kConfigExit;
  }

  try {
    if (command == "sweep") {
      const auto entries = trsr::run_sweep(*config, axis, parse_values(values_csv));
      std::cout << "wrote " << entries.size() << " reports and "
                << (config->output_dir / ("sweep-" + axis + ".md")).string() << '\n';
      return 0;
    }
    trsr::Pipeline pipeline(*config);
    const auto stats = pipeline.run(command);
    std::cout << stats.to_json().dump(2) << '\n';
  } catch (const trsr::ConfigError& e) {
    std::cerr << "config error:\n";
    for (const auto& p : e.problems()) std::cerr << "  " << p << '\n';
    return kConfigExit;
  } catch (const std::exception& e) {
    spdlog::error("{} failed: {}", command, e.what());
    return 1;
  }
  return 0;
}
