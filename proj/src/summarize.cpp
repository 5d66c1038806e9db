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

#include "trsr/summarize.hpp"

#include <fstream>
#include <set>

#include "trsr/digest.hpp"
#include "trsr/parallel.hpp"
#include "trsr/template.hpp"

namespace trsr {

namespace {

std::string block_ref(std::size_t i) { return "block:" + std::to_string(i); }

std::string with_prefix(const std::string& prefix, const std::string& node) {
  return prefix.empty() ? node : prefix + "/" + node;
}

struct CallResult {
  std::string text;
  bool truncated = false;
};

// One backend call; gateway failures are rethrown with `where` attached.
CallResult call(Backend& backend, const std::string& prompt,
                const SummarizeOptions& options, const std::string& tag,
                const std::string& where) {
  CompletionRequest req;
  req.prompt = prompt;
  req.max_new_tokens = options.summary_max_tokens;
  req.temperature = options.temperature;
  req.request_tag = tag;
  Completion c;
  try {
    c = backend.complete(req);
  } catch (const GatewayError& e) {
    throw SummarizeError(where + ": " + e.what(), e.kind());
  }
  if (c.text.empty()) {
    throw SummarizeError(where + ": backend returned an empty summary",
                         std::nullopt);
  }
  return {std::move(c.text), c.finish_reason == FinishReason::kLength};
}

void note_truncation(SummaryTrace& trace, const TraceCall& call,
                     std::size_t limit) {
  if (call.truncated) {
    trace.warnings.push_back(call.node_id + " hit the " +
                             std::to_string(limit) + "-token summary limit");
  }
}

std::string block_prompt(const Block& block, const SummaryTemplateSet& t) {
  return fill_template(t.block_template, {{"BLOCK_TEXT", block.text}});
}

}  // namespace

std::string_view to_string(Paradigm paradigm) {
  return paradigm == Paradigm::kHierarchical ? "hierarchical" : "recurrent";
}

Paradigm parse_paradigm(std::string_view s) {
  if (s == "hierarchical") return Paradigm::kHierarchical;
  if (s == "recurrent") return Paradigm::kRecurrent;
  throw std::invalid_argument("unknown paradigm \"" + std::string(s) + "\"");
}

void SummaryTemplateSet::validate() const {
  validate_template(block_template, {"BLOCK_TEXT"}, "block_template");
  validate_template(merge_template, {"SUMMARIES"}, "merge_template");
  validate_template(update_template, {"PREV_SUMMARY", "BLOCK_TEXT"},
                    "update_template");
}

SummaryTemplateSet SummaryTemplateSet::from_json(const nlohmann::json& j) {
  SummaryTemplateSet t;
  try {
    t.flavor = j.value("flavor", "custom");
    t.block_template = j.at("block_template").get<std::string>();
    t.merge_template = j.at("merge_template").get<std::string>();
    t.update_template = j.at("update_template").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TemplateError(std::string("invalid summary templates: ") + e.what());
  }
  t.validate();
  return t;
}

nlohmann::json SummaryTemplateSet::to_json() const {
  return {{"flavor", flavor},
          {"block_template", block_template},
          {"merge_template", merge_template},
          {"update_template", update_template}};
}

std::size_t SummaryTrace::layer_count() const {
  std::set<std::size_t> layers;
  for (const auto& c : calls) layers.insert(c.layer);
  return layers.size();
}

nlohmann::json SummaryTrace::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : calls) {
    out.push_back({{"layer", c.layer},
                   {"group", c.group},
                   {"node", c.node_id},
                   {"inputs", c.inputs},
                   {"request_tag", c.request_tag},
                   {"truncated", c.truncated}});
  }
  return out;
}

SummaryTrace SummaryTrace::from_json(const nlohmann::json& j) {
  SummaryTrace t;
  for (const auto& c : j) {
    TraceCall call;
    call.layer = c.at("layer").get<std::size_t>();
    call.group = c.at("group").get<std::size_t>();
    call.node_id = c.at("node").get<std::string>();
    call.inputs = c.at("inputs").get<std::vector<std::string>>();
    call.request_tag = c.at("request_tag").get<std::string>();
    call.truncated = c.value("truncated", false);
    t.calls.push_back(std::move(call));
  }
  return t;
}

std::string format_summaries(std::span<const std::string> summaries) {
  std::string out;
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    if (i > 0) out.push_back('\n');
    out += "Summary " + std::to_string(i + 1) + ": " + summaries[i];
  }
  return out;
}

Summary summarize_block(const Block& block, const SummaryTemplateSet& templates,
                        Backend& backend, const SummarizeOptions& options) {
  TraceCall tc;
  tc.layer = 0;
  tc.group = block.index;
  tc.node_id = "L0." + std::to_string(block.index);
  tc.inputs = {block_ref(block.index)};
  tc.request_tag = with_prefix(options.tag_prefix, tc.node_id);
  auto r = call(backend, block_prompt(block, templates), options,
                tc.request_tag, "block " + std::to_string(block.index));
  tc.truncated = r.truncated;
  Summary s;
  s.text = std::move(r.text);
  s.trace.paradigm = Paradigm::kHierarchical;
  note_truncation(s.trace, tc, options.summary_max_tokens);
  s.trace.calls.push_back(std::move(tc));
  return s;
}

Summary summarize_hierarchical(std::span<const Block> blocks,
                               const SummaryTemplateSet& templates,
                               Backend& backend,
                               const SummarizeOptions& options) {
  if (blocks.empty()) throw std::invalid_argument("no blocks to summarize");
  if (options.fan_in == 1) throw std::invalid_argument("fan_in must be >= 2");

  struct Node {
    std::string id;
    std::string text;
  };
  Summary out;
  out.trace.paradigm = Paradigm::kHierarchical;

  std::vector<Summary> leaves(blocks.size());
  parallel_for(blocks.size(), options.parallelism, [&](std::size_t i) {
    Block b = blocks[i];
    b.index = i;
    leaves[i] = summarize_block(b, templates, backend, options);
  });
  std::vector<Node> layer;
  for (auto& leaf : leaves) {
    out.trace.warnings.insert(out.trace.warnings.end(),
                              leaf.trace.warnings.begin(),
                              leaf.trace.warnings.end());
    layer.push_back({leaf.trace.calls[0].node_id, std::move(leaf.text)});
    out.trace.calls.push_back(std::move(leaf.trace.calls[0]));
  }

  for (std::size_t depth = 1; layer.size() > 1; ++depth) {
    std::size_t width = options.fan_in;
    if (width == 0) {
      std::vector<std::string> all;
      for (const auto& n : layer) all.push_back(n.text);
      const auto prompt = fill_template(
          templates.merge_template, {{"SUMMARIES", format_summaries(all)}});
      width = backend.fits(prompt, options.summary_max_tokens) ? layer.size()
                                                               : kFallbackFanIn;
    }
    if (depth == 1) out.trace.fan_in = width;

    const std::size_t groups = (layer.size() + width - 1) / width;
    std::vector<Node> next(groups);
    std::vector<std::optional<TraceCall>> calls(groups);
    parallel_for(groups, options.parallelism, [&](std::size_t g) {
      const auto begin = g * width;
      const auto end = std::min(layer.size(), begin + width);
      if (end - begin == 1) {
        next[g] = layer[begin];
        return;
      }
      TraceCall tc;
      tc.layer = depth;
      tc.group = g;
      tc.node_id = "L" + std::to_string(depth) + "." + std::to_string(g);
      tc.request_tag = with_prefix(options.tag_prefix, tc.node_id);
      std::vector<std::string> texts;
      for (auto k = begin; k < end; ++k) {
        tc.inputs.push_back(layer[k].id);
        texts.push_back(layer[k].text);
      }
      const auto prompt = fill_template(
          templates.merge_template, {{"SUMMARIES", format_summaries(texts)}});
      auto r = call(backend, prompt, options, tc.request_tag,
                    "merge layer " + std::to_string(depth) + " group " +
                        std::to_string(g));
      tc.truncated = r.truncated;
      next[g] = {tc.node_id, std::move(r.text)};
      calls[g] = std::move(tc);
    });
    for (auto& c : calls) {
      if (!c) continue;
      note_truncation(out.trace, *c, options.summary_max_tokens);
      out.trace.calls.push_back(std::move(*c));
    }
    layer = std::move(next);
  }
  out.text = std::move(layer.front().text);
  return out;
}

Summary summarize_recurrent(std::span<const Block> blocks,
                            const SummaryTemplateSet& templates,
                            Backend& backend, const SummarizeOptions& options) {
  if (blocks.empty()) throw std::invalid_argument("no blocks to summarize");
  Summary out;
  out.trace.paradigm = Paradigm::kRecurrent;
  std::string running;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    TraceCall tc;
    tc.layer = i;
    tc.node_id = "S" + std::to_string(i);
    tc.request_tag = with_prefix(options.tag_prefix, tc.node_id);
    std::string prompt;
    if (i == 0) {
      tc.inputs = {block_ref(0)};
      prompt = block_prompt(blocks[0], templates);
    } else {
      tc.inputs = {"S" + std::to_string(i - 1), block_ref(i)};
      prompt = fill_template(templates.update_template,
                             {{"PREV_SUMMARY", running},
                              {"BLOCK_TEXT", blocks[i].text}});
    }
    auto r = call(backend, prompt, options, tc.request_tag,
                  "recurrent step " + std::to_string(i));
    tc.truncated = r.truncated;
    running = std::move(r.text);
    note_truncation(out.trace, tc, options.summary_max_tokens);
    out.trace.calls.push_back(std::move(tc));
  }
  out.text = std::move(running);
  return out;
}

Summary summarize(Paradigm paradigm, std::span<const Block> blocks,
                  const SummaryTemplateSet& templates, Backend& backend,
                  const SummarizeOptions& options) {
  return paradigm == Paradigm::kHierarchical
             ? summarize_hierarchical(blocks, templates, backend, options)
             : summarize_recurrent(blocks, templates, backend, options);
}

void validate_hierarchical_trace(const SummaryTrace& trace,
                                 std::size_t block_count) {
  auto fail = [](const std::string& why) {
    throw std::logic_error("hierarchical trace: " + why);
  };
  if (trace.paradigm != Paradigm::kHierarchical) fail("wrong paradigm");
  if (trace.calls.empty()) fail("no calls");
  std::map<std::string, std::size_t> layer_of;
  std::set<std::string> consumed;
  std::vector<int> block_seen(block_count, 0);
  for (const auto& c : trace.calls) {
    if (layer_of.count(c.node_id)) fail("duplicate node " + c.node_id);
    if (c.layer == 0) {
      if (c.inputs.size() != 1 || c.inputs[0].rfind("block:", 0) != 0) {
        fail("leaf " + c.node_id + " must read exactly one block");
      }
      const auto b = std::stoul(c.inputs[0].substr(6));
      if (b >= block_count) fail("leaf reads unknown " + c.inputs[0]);
      ++block_seen[b];
    } else {
      if (c.inputs.size() < 2) fail("merge " + c.node_id + " has < 2 inputs");
      for (const auto& in : c.inputs) {
        auto it = layer_of.find(in);
        if (it == layer_of.end() || it->second >= c.layer) {
          fail("merge " + c.node_id + " reads " + in +
               " which is not an earlier node");
        }
        if (!consumed.insert(in).second) fail(in + " has two parents");
      }
    }
    layer_of[c.node_id] = c.layer;
  }
  for (std::size_t b = 0; b < block_count; ++b) {
    if (block_seen[b] != 1) {
      fail("block " + std::to_string(b) + " is a leaf " +
           std::to_string(block_seen[b]) + " times");
    }
  }
  const auto roots = trace.calls.size() - consumed.size();
  if (roots != 1) fail(std::to_string(roots) + " roots");
  if (consumed.count(trace.calls.back().node_id)) fail("last call is not root");
}

void validate_recurrent_trace(const SummaryTrace& trace,
                              std::size_t block_count) {
  auto fail = [](const std::string& why) {
    throw std::logic_error("recurrent trace: " + why);
  };
  if (trace.paradigm != Paradigm::kRecurrent) fail("wrong paradigm");
  if (trace.calls.size() != block_count) {
    fail(std::to_string(trace.calls.size()) + " calls for " +
         std::to_string(block_count) + " blocks");
  }
  for (std::size_t i = 0; i < trace.calls.size(); ++i) {
    const auto& c = trace.calls[i];
    std::vector<std::string> want;
    if (i > 0) want.push_back(trace.calls[i - 1].node_id);
    want.push_back(block_ref(i));
    if (c.layer != i || c.inputs != want) {
      fail("step " + std::to_string(i) + " does not continue the chain");
    }
  }
}

std::string sequence_digest(const BehaviorSequence& seq) {
  std::string joined = seq.user_id;
  for (const auto& item : seq.items) {
    joined.push_back('\x1f');
    joined += item.item_id;
  }
  return sha256_hex(joined).substr(0, 16);
}

nlohmann::json StoredSummary::to_json() const {
  return {{"user_id", user_id},
          {"sequence_digest", sequence_digest},
          {"paradigm", std::string(to_string(summary.trace.paradigm))},
          {"config_digest", config_digest},
          {"summary", summary.text},
          {"fan_in", summary.trace.fan_in},
          {"warnings", summary.trace.warnings},
          {"trace", summary.trace.to_json()}};
}

StoredSummary StoredSummary::from_json(const nlohmann::json& j) {
  StoredSummary s;
  s.user_id = j.at("user_id").get<std::string>();
  s.sequence_digest = j.at("sequence_digest").get<std::string>();
  s.config_digest = j.at("config_digest").get<std::string>();
  s.summary.text = j.at("summary").get<std::string>();
  s.summary.trace = SummaryTrace::from_json(j.at("trace"));
  s.summary.trace.paradigm = parse_paradigm(j.at("paradigm").get<std::string>());
  s.summary.trace.fan_in = j.value("fan_in", std::size_t{0});
  s.summary.trace.warnings =
      j.value("warnings", std::vector<std::string>{});
  return s;
}

SummaryStore SummaryStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read summary store " + path.string());
  SummaryStore store;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      store.put(StoredSummary::from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + " line " + std::to_string(n) +
                               ": " + e.what());
    }
  }
  return store;
}

void SummaryStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : records_) out << r.to_json().dump() << '\n';
}

void SummaryStore::put(StoredSummary record) {
  auto key = std::make_pair(record.user_id, record.sequence_digest);
  if (auto it = index_.find(key); it != index_.end()) {
    records_[it->second] = std::move(record);
    return;
  }
  index_.emplace(std::move(key), records_.size());
  records_.push_back(std::move(record));
}

const StoredSummary* SummaryStore::find(const std::string& user_id,
                                        const std::string& seq_digest) const {
  auto it = index_.find({user_id, seq_digest});
  return it == index_.end() ? nullptr : &records_[it->second];
}

void SummaryStore::require_digest(const std::string& config_digest) const {
  for (const auto& r : records_) {
    if (r.config_digest != config_digest) {
      throw std::runtime_error(
          "summary for user " + r.user_id + " was produced under config " +
          r.config_digest + ", expected " + config_digest +
          "; rerun summarize");
    }
  }
}

}  // namespace trsr
