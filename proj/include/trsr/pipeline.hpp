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

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trsr/cache.hpp"
#include "trsr/config.hpp"
#include "trsr/domain.hpp"
#include "trsr/eval.hpp"
#include "trsr/gateway.hpp"
#include "trsr/recommend.hpp"
#include "trsr/summarize.hpp"

namespace trsr {

// An artifact on disk was produced under different settings than the ones
// in effect, so it cannot be combined with the current run.
class DigestMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Forwards to another backend and counts the calls that reach it.
class CountingBackend : public Backend {
 public:
  explicit CountingBackend(std::shared_ptr<Backend> inner);

  std::string model_id() const override { return inner_->model_id(); }
  std::size_t context_limit() const override { return inner_->context_limit(); }
  std::optional<std::size_t> count_tokens(std::string_view text) override {
    return inner_->count_tokens(text);
  }

  std::size_t calls() const { return calls_; }

 protected:
  Completion do_complete(const CompletionRequest& request) override;
  TokenScores do_next_token_scores(const TokenScoreRequest& request) override;

 private:
  std::shared_ptr<Backend> inner_;
  std::atomic<std::size_t> calls_{0};
};

// Builds the configured backend (mock or http) without caching.
std::shared_ptr<Backend> make_backend(const BackendConfig& config,
                                      double chars_per_token);

struct CommandStats {
  std::string command;
  std::string config_digest;
  std::size_t backend_calls = 0;  // calls that reached a model
  std::size_t cache_hits = 0;
  std::size_t corrupt_cache_entries = 0;
  double seconds = 0.0;
  nlohmann::json details = nlohmann::json::object();

  nlohmann::json to_json() const;
};

// Wires the modules together over one output directory. Artifacts:
//   corpus.jsonl, items.jsonl, corpus.meta.json   ingest
//   summaries.jsonl                                summarize
//   sft.jsonl                                      export-sft
//   scores.jsonl                                   score, evaluate
//   report.json                                    evaluate
//   <command>.stats.json                           every command
// Every artifact carries the digest of the settings it depends on. Commands
// load earlier artifacts when their digest matches and rebuild them when the
// file is absent; a present file with another digest is refused.
class Pipeline {
 public:
  // Backends default to the configured ones. Injected backends still sit
  // behind the cache and the call counters.
  explicit Pipeline(PipelineConfig config,
                    std::shared_ptr<Backend> summarizer = nullptr,
                    std::shared_ptr<Backend> recommender = nullptr);

  const PipelineConfig& config() const { return config_; }

  CommandStats ingest();
  CommandStats summarize();
  CommandStats export_sft();
  CommandStats score();
  CommandStats evaluate();
  CommandStats run(const std::string& command);

  struct Counters {
    std::size_t calls = 0;
    std::size_t hits = 0;
    std::size_t corrupt = 0;
  };

  // Available after evaluate().
  const std::optional<MetricReport>& last_report() const { return report_; }

  // Resolved prompt material.
  RenderSchema render_schema();
  SummaryTemplateSet summary_templates() const;
  RecPromptConfig rec_prompt_config();
  // Block budget after reserving room for the summarizer template and output.
  std::size_t effective_block_budget() const;

 private:
  const Corpus& corpus();
  const SummaryStore& summaries();
  EvalResult score_groups();
  CommandStats finish(CommandStats stats, double seconds);
  std::filesystem::path out(const std::string& name) const;

  PipelineConfig config_;
  std::shared_ptr<CountingBackend> summarizer_counter_;
  std::shared_ptr<CountingBackend> recommender_counter_;
  std::shared_ptr<CachedBackend> summarizer_cache_;
  std::shared_ptr<CachedBackend> recommender_cache_;
  std::shared_ptr<Backend> summarizer_;
  std::shared_ptr<Backend> recommender_;
  std::optional<Corpus> corpus_;
  std::optional<SummaryStore> summaries_;
  std::optional<MetricReport> report_;
  Counters reported_;
};

// Maps sweep axis names to config paths: recent_item_count -> recommend.N,
// fan_in -> summarize.fan_in, paradigm -> summarize.paradigm, model ->
// backend.model. Any dotted config path is accepted as is.
std::string resolve_axis(const std::string& axis);

struct SweepEntry {
  nlohmann::json value;
  std::filesystem::path output_dir;
  MetricReport report;
};

// Runs summarize and evaluate once per value, each in <out>/<axis>-<value>
// with a shared cache, then writes sweep-<axis>.json and sweep-<axis>.md.
// Reports whose corpus digests differ refuse to combine.
std::vector<SweepEntry> run_sweep(const PipelineConfig& base,
                                  const std::string& axis,
                                  const std::vector<nlohmann::json>& values,
                                  std::shared_ptr<Backend> backend = nullptr);

}  // namespace trsr
