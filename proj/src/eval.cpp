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

#include "trsr/eval.hpp"

#include <algorithm>
#include <optional>
#include <ostream>
#include <set>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "trsr/parallel.hpp"
#include "trsr/random.hpp"

namespace trsr {

std::vector<ScoredCandidate> EvalGroup::candidates() const {
  std::vector<ScoredCandidate> out;
  out.reserve(1 + negatives.size());
  out.push_back(positive);
  out.insert(out.end(), negatives.begin(), negatives.end());
  return out;
}

NegativeSampler::NegativeSampler(const std::map<std::string, Item>& pool) {
  pool_.reserve(pool.size());
  for (const auto& [id, item] : pool) pool_.push_back(&item);
}

std::vector<Item> NegativeSampler::sample(const LabeledExample& positive,
                                          std::size_t k,
                                          std::uint64_t seed) const {
  std::unordered_set<std::string_view> excluded;
  excluded.insert(positive.candidate.item_id);
  for (const auto& item : positive.sequence.items) excluded.insert(item.item_id);
  std::size_t excluded_in_pool = 0;
  for (const auto& id : excluded) {
    const auto it = std::lower_bound(
        pool_.begin(), pool_.end(), id,
        [](const Item* a, std::string_view b) { return a->item_id < b; });
    if (it != pool_.end() && (*it)->item_id == id) ++excluded_in_pool;
  }
  const auto eligible = pool_.size() - excluded_in_pool;
  if (eligible < k) {
    throw EvalError("insufficient eligible pool for group " +
                    positive.group_id + ": need " + std::to_string(k) +
                    " negatives, " + std::to_string(eligible) + " eligible");
  }

  Rng rng(derive_seed(seed, positive.group_id));
  std::vector<Item> out;
  out.reserve(k);
  if (k * 2 > eligible) {
    // Dense draw: partial Fisher-Yates over the eligible list.
    std::vector<const Item*> candidates;
    candidates.reserve(eligible);
    for (const auto* item : pool_) {
      if (!excluded.count(item->item_id)) candidates.push_back(item);
    }
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = i + static_cast<std::size_t>(
                             uniform_below(rng, candidates.size() - i));
      std::swap(candidates[i], candidates[j]);
      out.push_back(*candidates[i]);
    }
    return out;
  }
  std::unordered_set<std::size_t> taken;
  while (out.size() < k) {
    const auto j = static_cast<std::size_t>(uniform_below(rng, pool_.size()));
    if (excluded.count(pool_[j]->item_id) || !taken.insert(j).second) continue;
    out.push_back(*pool_[j]);
  }
  return out;
}

EvalGroup sample_negatives(const LabeledExample& positive,
                           const std::map<std::string, Item>& item_pool,
                           std::size_t k, std::uint64_t seed) {
  EvalGroup g;
  g.group_id = positive.group_id;
  g.user_id = positive.sequence.user_id;
  g.positive.candidate = positive.candidate;
  for (auto& item : NegativeSampler(item_pool).sample(positive, k, seed)) {
    ScoredCandidate sc;
    sc.candidate = std::move(item);
    g.negatives.push_back(std::move(sc));
  }
  return g;
}

std::size_t positive_rank(const EvalGroup& group) {
  const auto all = group.candidates();
  for (const auto& c : all) {
    if (!c.scored()) {
      throw EvalError("group " + group.group_id + " has unscored candidate " +
                      c.candidate.item_id);
    }
  }
  const auto order = rank_order(all);
  const auto it = std::find(order.begin(), order.end(), std::size_t{0});
  return static_cast<std::size_t>(it - order.begin()) + 1;
}

GroupMetrics metrics_for_group(const EvalGroup& group, std::size_t k) {
  const auto r = positive_rank(group);
  GroupMetrics m;
  if (r <= k) {
    m.recall = 1;
    m.rr = 1.0 / static_cast<double>(r);
  }
  return m;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& [k, v] : at_k) {
    metrics[std::to_string(k)] = {{"recall", v.recall}, {"mrr", v.mrr}};
  }
  return {{"metrics", metrics},
          {"group_count", group_count},
          {"config_digest", config_digest},
          {"failed_groups", failed_groups},
          {"metadata", metadata}};
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
  MetricReport r;
  for (const auto& [k, v] : j.at("metrics").items()) {
    r.at_k[std::stoul(k)] = {v.at("recall").get<double>(),
                             v.at("mrr").get<double>()};
  }
  r.group_count = j.at("group_count").get<std::size_t>();
  r.config_digest = j.at("config_digest").get<std::string>();
  r.failed_groups = j.value("failed_groups", std::vector<std::string>{});
  r.metadata = j.value("metadata", nlohmann::json::object());
  return r;
}

void MetricReport::check_invariants() const {
  const MetricValues* prev = nullptr;
  for (const auto& [k, v] : at_k) {
    if (v.recall < 0 || v.recall > 1 || v.mrr < 0 || v.mrr > 1) {
      throw std::logic_error("metric at K=" + std::to_string(k) +
                             " outside [0, 1]");
    }
    if (v.mrr > v.recall) {
      throw std::logic_error("MRR exceeds recall at K=" + std::to_string(k));
    }
    if (prev && (v.recall < prev->recall || v.mrr < prev->mrr)) {
      throw std::logic_error("metrics decrease at K=" + std::to_string(k));
    }
    prev = &v;
  }
}

MetricReport aggregate_metrics(std::span<const EvalGroup> groups,
                               std::span<const std::size_t> ks) {
  if (groups.empty()) throw EvalError("no groups");
  std::vector<const EvalGroup*> sorted;
  for (const auto& g : groups) sorted.push_back(&g);
  std::sort(sorted.begin(), sorted.end(),
            [](const EvalGroup* a, const EvalGroup* b) {
              return a->group_id < b->group_id;
            });
  MetricReport report;
  std::vector<std::size_t> ranks;
  for (const auto* g : sorted) ranks.push_back(positive_rank(*g));
  for (auto k : ks) {
    double recall = 0.0, mrr = 0.0;
    for (auto r : ranks) {
      if (r <= k) {
        recall += 1.0;
        mrr += 1.0 / static_cast<double>(r);
      }
    }
    const auto n = static_cast<double>(ranks.size());
    report.at_k[k] = {recall / n, mrr / n};
  }
  report.group_count = ranks.size();
  return report;
}

EvalResult evaluate(const Corpus& corpus, Split split,
                    const SummaryStore& summaries,
                    const RecPromptConfig& config, Backend& backend,
                    const EvalOptions& options) {
  config.validate();
  std::vector<const LabeledExample*> positives;
  std::set<std::string> missing;
  for (const auto& ex : corpus.examples) {
    if (ex.label != 1 || ex.split != split) continue;
    positives.push_back(&ex);
    if (!summaries.find(ex.sequence.user_id, sequence_digest(ex.sequence))) {
      missing.insert(ex.sequence.user_id);
    }
  }
  if (positives.empty()) {
    throw EvalError("no groups in split " + std::string(to_string(split)));
  }
  if (!missing.empty()) throw MissingSummaries({missing.begin(), missing.end()});

  NegativeSampler sampler(corpus.item_pool);
  std::vector<std::optional<EvalGroup>> scored(positives.size());
  std::vector<std::string> errors(positives.size());
  parallel_for(positives.size(), options.parallelism, [&](std::size_t i) {
    const auto& ex = *positives[i];
    const auto& summary =
        summaries.find(ex.sequence.user_id, sequence_digest(ex.sequence))
            ->summary.text;
    EvalGroup g;
    g.group_id = ex.group_id;
    g.user_id = ex.sequence.user_id;
    auto score_one = [&](const Item& item) {
      const auto prompt = build_prompt(summary, ex.sequence, item, config,
                                       std::nullopt, options.prompt_limit);
      return score(prompt, item, backend, config.answers,
                   ex.group_id + "/" + item.item_id);
    };
    try {
      g.positive = score_one(ex.candidate);
      for (const auto& neg :
           sampler.sample(ex, options.negatives_per_positive, options.seed)) {
        g.negatives.push_back(score_one(neg));
      }
    } catch (const std::exception& e) {
      if (!options.allow_partial) throw;
      errors[i] = e.what();
      return;
    }
    scored[i] = std::move(g);
  });

  EvalResult result;
  std::vector<std::string> failed;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (scored[i]) {
      result.groups.push_back(std::move(*scored[i]));
    } else {
      spdlog::warn("group {} excluded: {}", positives[i]->group_id, errors[i]);
      failed.push_back(positives[i]->group_id);
    }
  }
  std::sort(result.groups.begin(), result.groups.end(),
            [](const EvalGroup& a, const EvalGroup& b) {
              return a.group_id < b.group_id;
            });
  std::sort(failed.begin(), failed.end());
  result.report = aggregate_metrics(result.groups, options.ks);
  result.report.failed_groups = std::move(failed);
  result.report.config_digest = options.config_digest;
  return result;
}

void write_group_dump(std::span<const EvalGroup> groups, std::ostream& out,
                      const std::string& config_digest) {
  for (const auto& g : groups) {
    nlohmann::json cands = nlohmann::json::array();
    const auto all = g.candidates();
    for (std::size_t i = 0; i < all.size(); ++i) {
      cands.push_back({{"item_id", all[i].candidate.item_id},
                       {"label", i == 0 ? 1 : 0},
                       {"p_yes", all[i].p_yes},
                       {"p_no", all[i].p_no},
                       {"p", all[i].p}});
    }
    out << nlohmann::json{{"group_id", g.group_id},
                          {"user_id", g.user_id},
                          {"positive_rank", positive_rank(g)},
                          {"config_digest", config_digest},
                          {"candidates", cands}}
               .dump()
        << '\n';
  }
}

}  // namespace trsr
