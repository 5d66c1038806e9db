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

#include "trsr/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "trsr/http_backend.hpp"
#include "trsr/mock_backend.hpp"
#include "trsr/parallel.hpp"
#include "trsr/presets.hpp"
#include "trsr/template.hpp"
#include "trsr/token_counter.hpp"

namespace trsr {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

// Writes through a temp file so readers never see a partial artifact.
template <typename Fn>
void write_atomically(const fs::path& path, Fn&& fill) {
  fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    fill(out);
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const json& j) {
  write_atomically(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

std::string flavor_for(SourceFormat format) {
  return format == SourceFormat::kMind ? "news" : "shopping";
}

std::string value_label(const json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

}  // namespace

CountingBackend::CountingBackend(std::shared_ptr<Backend> inner)
    : Backend(inner->length_counter().chars_per_token()), inner_(std::move(inner)) {}

Completion CountingBackend::do_complete(const CompletionRequest& request) {
  ++calls_;
  return inner_->complete(request);
}

TokenScores CountingBackend::do_next_token_scores(const TokenScoreRequest& request) {
  ++calls_;
  return inner_->next_token_scores(request);
}

std::shared_ptr<Backend> make_backend(const BackendConfig& config,
                                      double chars_per_token) {
  if (config.kind == "mock") {
    MockOptions o;
    o.model = config.model;
    o.context_limit = config.context_limit;
    o.chars_per_token = chars_per_token;
    return std::make_shared<MockBackend>(o);
  }
  HttpOptions o;
  o.base_url = config.base_url;
  o.model = config.model;
  if (!config.api_key_env.empty()) {
    if (const char* key = std::getenv(config.api_key_env.c_str())) o.api_key = key;
  }
  o.context_limit = config.context_limit;
  o.chars_per_token = chars_per_token;
  o.max_in_flight = config.max_in_flight;
  o.timeout = std::chrono::milliseconds(config.timeout_ms);
  o.retry = config.retry;
  o.top_logprobs = config.top_logprobs;
  return std::make_shared<HttpBackend>(o);
}

json CommandStats::to_json() const {
  return {{"command", command},
          {"config_digest", config_digest},
          {"backend_calls", backend_calls},
          {"cache_hits", cache_hits},
          {"corrupt_cache_entries", corrupt_cache_entries},
          {"seconds", seconds},
          {"details", details}};
}

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<Backend> summarizer,
                   std::shared_ptr<Backend> recommender)
    : config_(std::move(config)) {
  const double cpt = config_.textize.chars_per_token;
  const bool shared_backend =
      config_.tree.at("recommend").at("backend").is_null() &&
      summarizer == recommender;
  if (!summarizer) summarizer = make_backend(config_.backend, cpt);
  if (!recommender && !shared_backend) {
    recommender = make_backend(config_.recommend.backend, cpt);
  }

  const bool caching = config_.cache_dir != "none";
  auto wrap = [&](std::shared_ptr<Backend> inner,
                  std::shared_ptr<CountingBackend>& counter,
                  std::shared_ptr<CachedBackend>& cache) -> std::shared_ptr<Backend> {
    counter = std::make_shared<CountingBackend>(std::move(inner));
    if (!caching) return counter;
    cache = with_cache(counter, config_.effective_cache_dir());
    return cache;
  };
  summarizer_ = wrap(summarizer, summarizer_counter_, summarizer_cache_);
  if (shared_backend) {
    recommender_ = summarizer_;
  } else {
    recommender_ = wrap(recommender, recommender_counter_, recommender_cache_);
  }
}

fs::path Pipeline::out(const std::string& name) const {
  return config_.output_dir / name;
}

CommandStats Pipeline::run(const std::string& command) {
  if (command == "ingest") return ingest();
  if (command == "summarize") return summarize();
  if (command == "export-sft") return export_sft();
  if (command == "score") return score();
  if (command == "evaluate") return evaluate();
  throw std::invalid_argument("unknown command " + command);
}

namespace {

Pipeline::Counters snapshot(const std::shared_ptr<CountingBackend>& a,
                  const std::shared_ptr<CachedBackend>& ca,
                  const std::shared_ptr<CountingBackend>& b,
                  const std::shared_ptr<CachedBackend>& cb) {
  Pipeline::Counters c;
  if (a) c.calls += a->calls();
  if (b) c.calls += b->calls();
  if (ca) {
    c.hits += ca->hits();
    c.corrupt += ca->corrupt_entries();
  }
  if (cb) {
    c.hits += cb->hits();
    c.corrupt += cb->corrupt_entries();
  }
  return c;
}

}  // namespace

const Corpus& Pipeline::corpus() {
  if (corpus_) return *corpus_;
  const auto meta_path = out("corpus.meta.json");
  if (!fs::exists(meta_path)) {
    ingest();
    return *corpus_;
  }
  const json meta = read_json(meta_path);
  if (meta.value("config_digest", "") != config_.corpus_digest()) {
    throw DigestMismatch(meta_path.string() + " was built with digest " +
                         meta.value("config_digest", "?") + ", current is " +
                         config_.corpus_digest() + "; run ingest again");
  }
  std::ifstream records(out("corpus.jsonl"));
  std::ifstream items(out("items.jsonl"));
  if (!records || !items) {
    throw std::runtime_error("corpus artifacts missing next to " +
                             meta_path.string());
  }
  Corpus c = parse_corpus_jsonl(records, LengthFilter{0, static_cast<std::size_t>(-1)});
  c.item_pool = read_item_pool(items);
  c.attribute_schema = meta.at("attribute_schema").get<std::vector<std::string>>();
  corpus_ = std::move(c);
  return *corpus_;
}

CommandStats Pipeline::ingest() {
  const auto start = std::chrono::steady_clock::now();
  const auto& d = config_.dataset;
  Corpus c = load_corpus({d.path, d.format}, d.length_filter);
  const bool resplit = d.resplit || d.format != SourceFormat::kJsonl;
  if (resplit) c = split_corpus(c, d.split_counts, config_.eval.seed);

  json positives = json::object();
  for (auto s : {Split::kTrain, Split::kVal, Split::kTest}) {
    std::size_t n = 0;
    for (const auto& ex : c.examples) n += ex.split == s && ex.label == 1;
    positives[std::string(to_string(s))] = n;
  }
  std::set<std::string> users;
  for (const auto& ex : c.examples) users.insert(ex.sequence.user_id);

  write_atomically(out("corpus.jsonl"),
                   [&](std::ostream& o) { write_corpus_jsonl(c, o); });
  write_atomically(out("items.jsonl"),
                   [&](std::ostream& o) { write_item_pool(c, o); });
  json meta = {{"config_digest", config_.corpus_digest()},
               {"source", d.path.string()},
               {"format", std::string(to_string(d.format))},
               {"resplit", resplit},
               {"examples", c.examples.size()},
               {"users", users.size()},
               {"items", c.item_pool.size()},
               {"positives", positives},
               {"attribute_schema", c.attribute_schema}};
  write_json(out("corpus.meta.json"), meta);
  spdlog::info("ingested {} examples from {} users, {} items", c.examples.size(),
               users.size(), c.item_pool.size());
  corpus_ = std::move(c);

  CommandStats stats;
  stats.command = "ingest";
  stats.config_digest = config_.corpus_digest();
  stats.details = meta;
  return finish(std::move(stats),
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                    .count());
}

RenderSchema Pipeline::render_schema() {
  const auto& t = config_.textize;
  const auto& c = corpus();
  RenderSchema schema;
  if (!t.schema_file.empty()) {
    schema = RenderSchema::from_json(read_json(t.schema_file));
  } else if (t.schema_preset == "generic" ||
             (t.schema_preset == "auto" &&
              config_.dataset.format == SourceFormat::kJsonl)) {
    schema = RenderSchema::generic(c.attribute_schema);
  } else if (t.schema_preset == "auto") {
    schema = schema_preset(to_string(config_.dataset.format));
  } else {
    schema = schema_preset(t.schema_preset);
  }
  schema.validate_against(c.attribute_schema);
  return schema;
}

SummaryTemplateSet Pipeline::summary_templates() const {
  const auto& s = config_.summarize;
  if (!s.template_file.empty()) {
    return SummaryTemplateSet::from_json(read_json(s.template_file));
  }
  return summary_preset(s.template_preset == "auto"
                            ? flavor_for(config_.dataset.format)
                            : s.template_preset);
}

RecPromptConfig Pipeline::rec_prompt_config() {
  const auto& r = config_.recommend;
  RecPromptConfig rc =
      !r.template_file.empty()
          ? RecPromptConfig::from_json(read_json(r.template_file))
          : recommend_preset(r.template_preset == "auto"
                                 ? flavor_for(config_.dataset.format)
                                 : r.template_preset);
  rc.recent_item_count = r.recent_item_count;
  rc.answers = r.answers;
  rc.schema = render_schema();
  rc.validate();
  return rc;
}

std::size_t Pipeline::effective_block_budget() const {
  const auto counter = TokenCounter::heuristic(config_.textize.chars_per_token);
  const auto templates = summary_templates();
  const std::size_t ctx = config_.backend.context_limit;
  const std::size_t out_tokens = config_.summarize.summary_max_tokens;
  // One token of slack per joined piece for heuristic rounding.
  auto room = [&](std::size_t overhead, std::size_t reserved) -> std::size_t {
    const std::size_t used = overhead + reserved + 2;
    return used >= ctx ? 0 : ctx - used;
  };
  std::size_t budget = std::min(
      config_.textize.token_budget,
      room(counter.count(fill_template(templates.block_template, {{"BLOCK_TEXT", ""}})),
           out_tokens));
  if (config_.summarize.paradigm == Paradigm::kRecurrent) {
    const auto overhead = counter.count(fill_template(
        templates.update_template, {{"PREV_SUMMARY", ""}, {"BLOCK_TEXT", ""}}));
    budget = std::min(budget, room(overhead, 2 * out_tokens));
  }
  if (budget == 0) {
    throw ConfigError({"textize.token_budget: no room for block text within "
                       "backend.context_limit " +
                       std::to_string(ctx) + " after the template and " +
                       std::to_string(out_tokens) + " summary tokens"});
  }
  return budget;
}

CommandStats Pipeline::summarize() {
  const auto start = std::chrono::steady_clock::now();
  const auto& c = corpus();
  const auto digest = config_.summary_digest();
  const auto store_path = out("summaries.jsonl");

  SummaryStore store;
  if (fs::exists(store_path)) {
    store = SummaryStore::load(store_path);
    try {
      store.require_digest(digest);
    } catch (const std::exception&) {
      spdlog::warn("{} was built under other settings; rebuilding it",
                   store_path.string());
      store = SummaryStore{};
    }
  }

  std::vector<const BehaviorSequence*> todo;
  std::set<std::pair<std::string, std::string>> seen;
  std::size_t reused = 0;
  for (const auto& ex : c.examples) {
    const auto key = std::make_pair(ex.sequence.user_id, sequence_digest(ex.sequence));
    if (!seen.insert(key).second) continue;
    if (store.find(key.first, key.second)) {
      ++reused;
      continue;
    }
    todo.push_back(&ex.sequence);
  }

  const auto schema = render_schema();
  const auto templates = summary_templates();
  const auto budget = effective_block_budget();
  const auto counter =
      config_.textize.token_mode == TokenCountMode::kBackendExact
          ? TokenCounter::backend_exact(summarizer_, config_.textize.chars_per_token)
          : TokenCounter::heuristic(config_.textize.chars_per_token);
  const auto& s = config_.summarize;

  std::vector<StoredSummary> made(todo.size());
  parallel_for(todo.size(), s.parallelism, [&](std::size_t i) {
    const auto& seq = *todo[i];
    const auto blocks = segment(seq, config_.textize.block_item_limit, budget,
                                schema, counter);
    SummarizeOptions o;
    o.summary_max_tokens = s.summary_max_tokens;
    o.temperature = s.temperature;
    o.fan_in = s.fan_in;
    o.tag_prefix = seq.user_id + "/";
    auto summary = trsr::summarize(s.paradigm, blocks, templates, *summarizer_, o);
    if (s.paradigm == Paradigm::kHierarchical) {
      validate_hierarchical_trace(summary.trace, blocks.size());
    } else {
      validate_recurrent_trace(summary.trace, blocks.size());
    }
    made[i] = {seq.user_id, sequence_digest(seq), digest, std::move(summary)};
  });
  std::size_t calls = 0;
  std::size_t warnings = 0;
  for (auto& r : made) {
    calls += r.summary.trace.calls.size();
    warnings += r.summary.trace.warnings.size();
    store.put(std::move(r));
  }
  fs::create_directories(store_path.parent_path());
  auto tmp = store_path;
  tmp += ".tmp";
  store.save(tmp);
  fs::rename(tmp, store_path);
  summaries_ = std::move(store);

  CommandStats stats;
  stats.command = "summarize";
  stats.config_digest = digest;
  stats.details = {{"paradigm", std::string(to_string(s.paradigm))},
                   {"sequences", seen.size()},
                   {"summarized", todo.size()},
                   {"reused", reused},
                   {"summarizer_calls", calls},
                   {"warnings", warnings},
                   {"block_token_budget", budget}};
  return finish(std::move(stats),
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                    .count());
}

const SummaryStore& Pipeline::summaries() {
  if (summaries_) return *summaries_;
  const auto path = out("summaries.jsonl");
  if (!fs::exists(path)) {
    spdlog::info("no summary store at {}; summarizing first", path.string());
    summarize();
    return *summaries_;
  }
  auto store = SummaryStore::load(path);
  try {
    store.require_digest(config_.summary_digest());
  } catch (const std::exception& e) {
    throw DigestMismatch(path.string() + ": " + e.what() +
                         "; run summarize again");
  }
  summaries_ = std::move(store);
  return *summaries_;
}

CommandStats Pipeline::export_sft() {
  const auto start = std::chrono::steady_clock::now();
  const auto& c = corpus();
  const auto& store = summaries();
  const auto rc = rec_prompt_config();
  SftExportOptions o;
  o.negatives_per_positive = config_.eval.neg_ratio_train;
  o.seed = config_.eval.seed;
  o.paradigm = std::string(to_string(config_.summarize.paradigm));
  o.config_digest = config_.run_digest();
  SftExportStats result;
  write_atomically(out("sft.jsonl"), [&](std::ostream& os) {
    result = trsr::export_sft(c, store, rc, o, os);
  });

  CommandStats stats;
  stats.command = "export-sft";
  stats.config_digest = o.config_digest;
  stats.details = {{"positives", result.positives},
                   {"records", result.records},
                   {"digest", result.digest}};
  return finish(std::move(stats),
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                    .count());
}

EvalResult Pipeline::score_groups() {
  const auto& c = corpus();
  const auto& store = summaries();
  const auto rc = rec_prompt_config();
  const auto counter =
      config_.textize.token_mode == TokenCountMode::kBackendExact
          ? TokenCounter::backend_exact(recommender_, config_.textize.chars_per_token)
          : TokenCounter::heuristic(config_.textize.chars_per_token);
  EvalOptions o;
  o.ks = config_.eval.ks;
  o.negatives_per_positive = config_.eval.neg_ratio_eval;
  o.seed = config_.eval.seed;
  o.allow_partial = config_.eval.allow_partial;
  o.parallelism = config_.eval.parallelism;
  o.config_digest = config_.run_digest();
  o.prompt_limit = PromptLimit{&counter, recommender_->context_limit(), 1};
  return trsr::evaluate(c, config_.eval.split, store, rc, *recommender_, o);
}

CommandStats Pipeline::score() {
  const auto start = std::chrono::steady_clock::now();
  const auto result = score_groups();
  write_atomically(out("scores.jsonl"), [&](std::ostream& os) {
    write_group_dump(result.groups, os, config_.run_digest());
  });
  CommandStats stats;
  stats.command = "score";
  stats.config_digest = config_.run_digest();
  stats.details = {{"groups", result.groups.size()},
                   {"failed_groups", result.report.failed_groups}};
  return finish(std::move(stats),
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                    .count());
}

CommandStats Pipeline::evaluate() {
  const auto start = std::chrono::steady_clock::now();
  auto result = score_groups();
  auto& report = result.report;
  report.metadata = {
      {"paradigm", std::string(to_string(config_.summarize.paradigm))},
      {"recent_item_count", config_.recommend.recent_item_count},
      {"split", std::string(to_string(config_.eval.split))},
      {"negatives_per_positive", config_.eval.neg_ratio_eval},
      {"seed", config_.eval.seed},
      {"summarizer_model", config_.backend.model},
      {"recommender_model", config_.recommend.backend.model},
      {"corpus_digest", config_.corpus_digest()},
      {"summary_digest", config_.summary_digest()}};
  report.check_invariants();
  write_atomically(out("scores.jsonl"), [&](std::ostream& os) {
    write_group_dump(result.groups, os, report.config_digest);
  });
  write_json(out("report.json"), report.to_json());
  report_ = report;

  CommandStats stats;
  stats.command = "evaluate";
  stats.config_digest = report.config_digest;
  stats.details = report.to_json();
  return finish(std::move(stats),
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                    .count());
}

CommandStats Pipeline::finish(CommandStats stats, double seconds) {
  // Counters are cumulative over the pipeline's lifetime; report this
  // command's share.
  const auto now = snapshot(summarizer_counter_, summarizer_cache_,
                            recommender_counter_, recommender_cache_);
  stats.backend_calls = now.calls - reported_.calls;
  stats.cache_hits = now.hits - reported_.hits;
  stats.corrupt_cache_entries = now.corrupt - reported_.corrupt;
  reported_ = {now.calls, now.hits, now.corrupt};
  stats.seconds = seconds;
  write_json(out(stats.command + ".stats.json"), stats.to_json());
  spdlog::info("{}: {} backend calls, {} cache hits, {:.2f}s", stats.command,
               stats.backend_calls, stats.cache_hits, seconds);
  return stats;
}

std::string resolve_axis(const std::string& axis) {
  static const std::map<std::string, std::string> aliases = {
      {"recent_item_count", "recommend.N"},
      {"N", "recommend.N"},
      {"fan_in", "summarize.fan_in"},
      {"paradigm", "summarize.paradigm"},
      {"model", "backend.model"},
      {"block_item_limit", "textize.block_item_limit"},
      {"summary_max_tokens", "summarize.summary_max_tokens"}};
  if (auto it = aliases.find(axis); it != aliases.end()) return it->second;
  if (axis.find('.') == std::string::npos) {
    throw ConfigError({"--axis: unknown axis \"" + axis + "\""});
  }
  return axis;
}

std::vector<SweepEntry> run_sweep(const PipelineConfig& base,
                                  const std::string& axis,
                                  const std::vector<json>& values,
                                  std::shared_ptr<Backend> backend) {
  if (values.empty()) throw ConfigError({"--values: at least one value required"});
  const auto path = resolve_axis(axis);
  const auto start = std::chrono::steady_clock::now();
  std::vector<SweepEntry> entries;
  std::vector<std::string> corpus_digests;
  json combined = json::array();
  std::size_t calls = 0;
  std::size_t hits = 0;
  for (const auto& v : values) {
    auto cfg = base.with(path, v);
    const auto dir = base.output_dir / (axis + "-" + value_label(v));
    cfg = cfg.with("output_dir", dir.string());
    if (base.cache_dir != "none") {
      cfg = cfg.with("cache_dir", base.effective_cache_dir().string());
    }
    spdlog::info("sweep {}={} -> {}", path, value_label(v), dir.string());
    Pipeline p(cfg, backend, backend);
    const auto s = p.summarize();
    const auto e = p.evaluate();
    calls += s.backend_calls + e.backend_calls;
    hits += s.cache_hits + e.cache_hits;
    corpus_digests.push_back(cfg.corpus_digest());
    entries.push_back({v, dir, *p.last_report()});
    combined.push_back({{"value", v},
                        {"output_dir", dir.string()},
                        {"report", p.last_report()->to_json()}});
  }
  if (path.rfind("dataset.", 0) != 0) {
    for (std::size_t i = 1; i < corpus_digests.size(); ++i) {
      if (corpus_digests[i] != corpus_digests[0]) {
        throw DigestMismatch("sweep reports were built on different corpora (" +
                             corpus_digests[0] + " vs " + corpus_digests[i] + ")");
      }
    }
  }

  write_json(base.output_dir / ("sweep-" + axis + ".json"),
             {{"axis", axis}, {"path", path}, {"entries", combined}});

  std::ostringstream md;
  const auto& ks = entries.front().report.at_k;
  md << "| " << axis;
  for (const auto& [k, _] : ks) md << " | Recall@" << k << " | MRR@" << k;
  md << " |\n|---";
  for (std::size_t i = 0; i < ks.size(); ++i) md << "|---:|---:";
  md << "|\n";
  for (const auto& e : entries) {
    md << "| " << value_label(e.value);
    for (const auto& [k, m] : e.report.at_k) {
      md << fmt::format(" | {:.4f} | {:.4f}", m.recall, m.mrr);
    }
    md << " |\n";
  }
  write_atomically(base.output_dir / ("sweep-" + axis + ".md"),
                   [&](std::ostream& os) { os << md.str(); });

  CommandStats stats;
  stats.command = "sweep";
  stats.backend_calls = calls;
  stats.cache_hits = hits;
  stats.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  stats.details = {{"axis", axis}, {"path", path}, {"values", values.size()}};
  write_json(base.output_dir / "sweep.stats.json", stats.to_json());
  return entries;
}

}  // namespace trsr
