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

#include "trsr/recommend.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "trsr/digest.hpp"
#include "trsr/eval.hpp"
#include "trsr/template.hpp"

namespace trsr {

void RecPromptConfig::validate() const {
  if (instruction.empty()) throw TemplateError("instruction is empty");
  validate_template(instruction, {}, "instruction");
  validate_template(summary_section, {"SUMMARY"}, "summary_section");
  validate_template(recent_section, {"RECENT_ITEMS"}, "recent_section");
  validate_template(candidate_section, {"CANDIDATE"}, "candidate_section");
  if (answer_key(answers.positive).empty() ||
      answer_key(answers.negative).empty() ||
      answer_key(answers.positive) == answer_key(answers.negative)) {
    throw TemplateError("answer surface forms must be distinct words");
  }
  schema.validate();
}

RecPromptConfig RecPromptConfig::from_json(const nlohmann::json& j) {
  RecPromptConfig c;
  try {
    c.instruction = j.at("instruction").get<std::string>();
    c.summary_section = j.at("summary_section").get<std::string>();
    c.recent_section = j.at("recent_section").get<std::string>();
    c.candidate_section = j.at("candidate_section").get<std::string>();
    c.none_marker = j.value("none_marker", c.none_marker);
  } catch (const nlohmann::json::exception& e) {
    throw TemplateError(std::string("invalid recommendation templates: ") +
                        e.what());
  }
  return c;
}

RecPrompt build_prompt(std::string_view summary, const BehaviorSequence& seq,
                       const Item& candidate, const RecPromptConfig& config,
                       std::optional<int> answer,
                       const std::optional<PromptLimit>& limit) {
  const auto n_recent = std::min(config.recent_item_count, seq.items.size());
  if (summary.empty() && n_recent == 0) {
    throw std::invalid_argument(
        "prompt for user " + seq.user_id +
        " would carry neither a summary nor recent behavior");
  }
  RecPrompt p;
  p.parts.instruction = config.instruction;
  p.parts.preference_summary = fill_template(
      config.summary_section,
      {{"SUMMARY", summary.empty() ? config.none_marker : std::string(summary)}});
  const auto recent = std::span<const Item>(seq.items).last(n_recent);
  p.parts.recent_behavior = fill_template(
      config.recent_section,
      {{"RECENT_ITEMS",
        n_recent == 0 ? config.none_marker
                      : render_items(recent, config.schema,
                                     seq.items.size() - n_recent + 1)}});
  p.parts.candidate_description = fill_template(
      config.candidate_section,
      {{"CANDIDATE", render_item(candidate, config.schema)}});
  if (answer) {
    p.parts.final_answer =
        *answer == 1 ? config.answers.positive : config.answers.negative;
  }
  p.full_text = p.parts.instruction + p.parts.preference_summary +
                p.parts.recent_behavior + p.parts.candidate_description +
                p.parts.final_answer.value_or("");

  if (limit && limit->counter) {
    const auto& counter = *limit->counter;
    const auto total = counter.count(p.full_text);
    if (total + limit->reserved > limit->context_limit) {
      PromptTooLong::Accounting acc;
      acc.instruction = counter.count(p.parts.instruction);
      acc.preference_summary = counter.count(p.parts.preference_summary);
      acc.recent_behavior = counter.count(p.parts.recent_behavior);
      acc.candidate_description = counter.count(p.parts.candidate_description);
      acc.final_answer = counter.count(p.parts.final_answer.value_or(""));
      acc.limit = limit->context_limit;
      std::ostringstream msg;
      msg << "recommendation prompt for user " << seq.user_id << " and item "
          << candidate.item_id << " needs " << total << " tokens (+"
          << limit->reserved << " reserved), over " << acc.limit
          << ": instruction " << acc.instruction << ", summary "
          << acc.preference_summary << ", recent behavior "
          << acc.recent_behavior << ", candidate "
          << acc.candidate_description << ", answer " << acc.final_answer;
      throw PromptTooLong(msg.str(), acc);
    }
  }
  return p;
}

double interaction_probability(double p_yes, double p_no) {
  return 1.0 / (1.0 + std::exp(p_no - p_yes));
}

ScoredCandidate score(const RecPrompt& prompt, const Item& candidate,
                      Backend& backend, const AnswerVocab& answers,
                      const std::string& request_tag) {
  if (prompt.parts.final_answer) {
    throw std::invalid_argument("cannot score a prompt that has an answer");
  }
  TokenScoreRequest req;
  req.prompt = prompt.full_text;
  req.candidates = {answers.positive, answers.negative};
  req.request_tag = request_tag;
  const auto scores = backend.next_token_scores(req);
  ScoredCandidate sc;
  sc.candidate = candidate;
  sc.p_yes = scores.at(answers.positive);
  sc.p_no = scores.at(answers.negative);
  sc.p = interaction_probability(sc.p_yes, sc.p_no);
  return sc;
}

std::vector<std::size_t> rank_order(std::span<const ScoredCandidate> group) {
  std::vector<std::size_t> order(group.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (group[a].p != group[b].p) return group[a].p > group[b].p;
                     return group[a].candidate.item_id <
                            group[b].candidate.item_id;
                   });
  return order;
}

std::vector<ScoredCandidate> rank(std::vector<ScoredCandidate> group) {
  std::vector<ScoredCandidate> out;
  out.reserve(group.size());
  for (auto i : rank_order(group)) out.push_back(std::move(group[i]));
  return out;
}

nlohmann::json SftExample::to_json() const {
  return {{"prompt", prompt_text},
          {"label", label},
          {"meta",
           {{"user_id", user_id},
            {"group_id", group_id},
            {"candidate_id", candidate_id},
            {"paradigm", paradigm},
            {"config_digest", config_digest}}}};
}

SftExample SftExample::from_json(const nlohmann::json& j) {
  SftExample e;
  e.prompt_text = j.at("prompt").get<std::string>();
  e.label = j.at("label").get<int>();
  const auto& m = j.at("meta");
  e.user_id = m.at("user_id").get<std::string>();
  e.group_id = m.at("group_id").get<std::string>();
  e.candidate_id = m.value("candidate_id", "");
  e.paradigm = m.value("paradigm", "");
  e.config_digest = m.value("config_digest", "");
  return e;
}

std::string strip_answer(const SftExample& example, const AnswerVocab& answers) {
  const auto& answer = example.label == 1 ? answers.positive : answers.negative;
  const auto& text = example.prompt_text;
  if (text.size() < answer.size() ||
      text.compare(text.size() - answer.size(), answer.size(), answer) != 0) {
    throw std::invalid_argument("record for group " + example.group_id +
                                " does not end with \"" + answer + "\"");
  }
  return text.substr(0, text.size() - answer.size());
}

MissingSummaries::MissingSummaries(std::vector<std::string> user_ids)
    : std::runtime_error([&] {
        std::string msg = "missing summary for users:";
        for (const auto& u : user_ids) msg += " " + u;
        return msg;
      }()),
      user_ids_(std::move(user_ids)) {}

SftExportStats export_sft(const Corpus& corpus, const SummaryStore& summaries,
                          const RecPromptConfig& config,
                          const SftExportOptions& options, std::ostream& out) {
  config.validate();
  std::vector<const LabeledExample*> positives;
  std::set<std::string> missing;
  for (const auto& ex : corpus.examples) {
    if (ex.label != 1 || ex.split != Split::kTrain) continue;
    if (!summaries.find(ex.sequence.user_id, sequence_digest(ex.sequence))) {
      missing.insert(ex.sequence.user_id);
    }
    positives.push_back(&ex);
  }
  if (!missing.empty()) {
    throw MissingSummaries({missing.begin(), missing.end()});
  }

  NegativeSampler sampler(corpus.item_pool);
  std::string buffer;
  SftExportStats stats;
  auto emit = [&](const LabeledExample& ex, const Item& candidate, int label,
                  const std::string& summary) {
    SftExample rec;
    rec.prompt_text =
        build_prompt(summary, ex.sequence, candidate, config, label).full_text;
    rec.label = label;
    rec.user_id = ex.sequence.user_id;
    rec.group_id = ex.group_id;
    rec.candidate_id = candidate.item_id;
    rec.paradigm = options.paradigm;
    rec.config_digest = options.config_digest;
    auto line = rec.to_json().dump();
    line.push_back('\n');
    out << line;
    buffer += line;
    ++stats.records;
  };
  for (const auto* ex : positives) {
    const auto& summary =
        summaries.find(ex->sequence.user_id, sequence_digest(ex->sequence))
            ->summary.text;
    emit(*ex, ex->candidate, 1, summary);
    for (const auto& neg :
         sampler.sample(*ex, options.negatives_per_positive, options.seed)) {
      emit(*ex, neg, 0, summary);
    }
    ++stats.positives;
  }
  stats.digest = sha256_hex(buffer);
  return stats;
}

}  // namespace trsr
