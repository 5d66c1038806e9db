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

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trsr/domain.hpp"
#include "trsr/recommend.hpp"
#include "trsr/summarize.hpp"

namespace trsr {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvalGroup {
  std::string group_id;
  std::string user_id;
  ScoredCandidate positive;
  std::vector<ScoredCandidate> negatives;

  // Positive first, then negatives in sampling order.
  std::vector<ScoredCandidate> candidates() const;
};

// Uniform sampling without replacement from the pool minus the user's history
// and the positive. The draw is seeded by (seed, group_id), so a group's
// negatives do not depend on which other groups are sampled.
class NegativeSampler {
 public:
  explicit NegativeSampler(const std::map<std::string, Item>& pool);

  std::vector<Item> sample(const LabeledExample& positive, std::size_t k,
                           std::uint64_t seed) const;

 private:
  std::vector<const Item*> pool_;
};

// Group skeleton: candidates carry no scores yet.
EvalGroup sample_negatives(const LabeledExample& positive,
                           const std::map<std::string, Item>& item_pool,
                           std::size_t k, std::uint64_t seed);

struct GroupMetrics {
  int recall = 0;
  double rr = 0.0;
};

// 1-based rank of the positive under rank_order().
std::size_t positive_rank(const EvalGroup& group);

// recall = 1 iff rank <= K; rr = 1/rank if rank <= K else 0.
GroupMetrics metrics_for_group(const EvalGroup& group, std::size_t k);

struct MetricValues {
  double recall = 0.0;
  double mrr = 0.0;
};

struct MetricReport {
  std::map<std::size_t, MetricValues> at_k;
  std::size_t group_count = 0;
  std::string config_digest;
  std::vector<std::string> failed_groups;
  nlohmann::json metadata = nlohmann::json::object();

  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
  // Recall and MRR non-decreasing in K, MRR <= recall, all within [0, 1].
  void check_invariants() const;
};

// Averages over the groups in ascending group_id order.
MetricReport aggregate_metrics(std::span<const EvalGroup> groups,
                               std::span<const std::size_t> ks);

struct EvalOptions {
  std::vector<std::size_t> ks{3, 5, 10};
  std::size_t negatives_per_positive = 20;
  std::uint64_t seed = 42;
  // Drop groups whose scoring fails instead of aborting.
  bool allow_partial = false;
  std::size_t parallelism = 1;
  std::string config_digest;
  std::optional<PromptLimit> prompt_limit;
};

struct EvalResult {
  MetricReport report;
  std::vector<EvalGroup> groups;  // scored, ascending group_id
};

EvalResult evaluate(const Corpus& corpus, Split split,
                    const SummaryStore& summaries,
                    const RecPromptConfig& config, Backend& backend,
                    const EvalOptions& options);

// One JSON line per group with every candidate's scores.
void write_group_dump(std::span<const EvalGroup> groups, std::ostream& out,
                      const std::string& config_digest = {});

}  // namespace trsr
