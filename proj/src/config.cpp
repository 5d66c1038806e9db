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

#include "trsr/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "trsr/digest.hpp"
#include "trsr/presets.hpp"

namespace trsr {

namespace {

using json = nlohmann::json;

bool is_count(const json& j) {
  return j.is_number_unsigned() || (j.is_number_integer() && j.get<long long>() >= 0);
}

std::string digest_of(const json& j) { return sha256_hex(j.dump()).substr(0, 16); }

json backend_defaults() {
  return {{"kind", "mock"},
          {"base_url", ""},
          {"model", "mock"},
          {"context_limit", 2048},
          {"max_in_flight", 4},
          {"timeout_ms", 60000},
          {"api_key_env", "OPENAI_API_KEY"},
          {"top_logprobs", 20},
          {"retry",
           {{"max_attempts", 4},
            {"initial_backoff_ms", 500},
            {"multiplier", 2.0},
            {"max_backoff_ms", 8000}}}};
}

// Reports keys in `user` that `reference` does not define.
void unknown_keys(const json& user, const json& reference,
                  const std::string& prefix, std::vector<std::string>& errors) {
  if (!user.is_object() || !reference.is_object()) return;
  for (const auto& [key, value] : user.items()) {
    const auto path = prefix.empty() ? key : prefix + "." + key;
    if (!reference.contains(key)) {
      errors.push_back(path + ": unknown key");
      continue;
    }
    const auto& ref = reference[key];
    if (path == "recommend.backend") {
      if (!value.is_null()) unknown_keys(value, backend_defaults(), path, errors);
      continue;
    }
    unknown_keys(value, ref, path, errors);
  }
}

// Typed access to the merged tree that records problems instead of throwing.
class Reader {
 public:
  Reader(const json& tree, std::vector<std::string>& errors)
      : tree_(tree), errors_(errors) {}

  const json* find(const std::string& path) const {
    const json* node = &tree_;
    std::stringstream ss(path);
    std::string part;
    while (std::getline(ss, part, '.')) {
      if (!node->is_object() || !node->contains(part)) return nullptr;
      node = &(*node)[part];
    }
    return node;
  }

  template <typename T>
  T get(const std::string& path, T fallback) {
    const json* node = find(path);
    if (!node) {
      errors_.push_back(path + ": missing");
      return fallback;
    }
    try {
      if constexpr (std::is_same_v<T, std::size_t> ||
                    std::is_same_v<T, std::uint64_t>) {
        if (!is_count(*node)) {
          throw std::invalid_argument("expected a non-negative integer");
        }
      } else if constexpr (std::is_same_v<T, int>) {
        if (!node->is_number_integer()) {
          throw std::invalid_argument("expected an integer");
        }
      } else if constexpr (std::is_same_v<T, double>) {
        if (!node->is_number()) throw std::invalid_argument("expected a number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!node->is_boolean()) throw std::invalid_argument("expected true/false");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!node->is_string()) throw std::invalid_argument("expected a string");
      }
      return node->get<T>();
    } catch (const std::exception& e) {
      errors_.push_back(path + ": " + e.what() + " (got " + node->dump() + ")");
      return fallback;
    }
  }

  void check(bool ok, const std::string& problem) {
    if (!ok) errors_.push_back(problem);
  }

 private:
  const json& tree_;
  std::vector<std::string>& errors_;
};

BackendConfig read_backend(Reader& r, const std::string& prefix) {
  BackendConfig b;
  b.kind = r.get<std::string>(prefix + ".kind", b.kind);
  b.base_url = r.get<std::string>(prefix + ".base_url", b.base_url);
  b.model = r.get<std::string>(prefix + ".model", b.model);
  b.context_limit = r.get<std::size_t>(prefix + ".context_limit", b.context_limit);
  b.max_in_flight = r.get<std::size_t>(prefix + ".max_in_flight", b.max_in_flight);
  b.timeout_ms = r.get<std::size_t>(prefix + ".timeout_ms", b.timeout_ms);
  b.api_key_env = r.get<std::string>(prefix + ".api_key_env", b.api_key_env);
  b.top_logprobs = r.get<int>(prefix + ".top_logprobs", b.top_logprobs);
  b.retry.max_attempts =
      r.get<std::size_t>(prefix + ".retry.max_attempts", b.retry.max_attempts);
  b.retry.initial_backoff = std::chrono::milliseconds(r.get<std::size_t>(
      prefix + ".retry.initial_backoff_ms", b.retry.initial_backoff.count()));
  b.retry.multiplier =
      r.get<double>(prefix + ".retry.multiplier", b.retry.multiplier);
  b.retry.max_backoff = std::chrono::milliseconds(r.get<std::size_t>(
      prefix + ".retry.max_backoff_ms", b.retry.max_backoff.count()));

  r.check(b.kind == "mock" || b.kind == "http",
          prefix + ".kind: must be mock or http (got \"" + b.kind + "\")");
  r.check(b.kind != "http" || b.base_url.rfind("http://", 0) == 0,
          prefix + ".base_url: http backends need an http:// URL");
  r.check(!b.model.empty(), prefix + ".model: must not be empty");
  r.check(b.context_limit >= 1, prefix + ".context_limit: must be >= 1");
  r.check(b.max_in_flight >= 1, prefix + ".max_in_flight: must be >= 1");
  r.check(b.retry.max_attempts >= 1, prefix + ".retry.max_attempts: must be >= 1");
  r.check(b.retry.multiplier >= 1.0, prefix + ".retry.multiplier: must be >= 1");
  r.check(b.top_logprobs >= 1, prefix + ".top_logprobs: must be >= 1");
  return b;
}

json digest_backend(const json& b) {
  return {{"kind", b.at("kind")},
          {"model", b.at("model")},
          {"context_limit", b.at("context_limit")}};
}

bool readable_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  return static_cast<bool>(in);
}

json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return json::parse(in);
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error([&] {
        std::string msg = "invalid config:";
        for (const auto& p : problems) msg += "\n  " + p;
        return msg;
      }()),
      problems_(std::move(problems)) {}

json PipelineConfig::defaults() {
  return {
      {"dataset",
       {{"path", ""},
        {"format", "jsonl"},
        {"length_filter", {10, 25}},
        {"resplit", false},
        {"split_counts", {{"train", 10000}, {"val", 1000}, {"test", 1000}}}}},
      {"textize",
       {{"chars_per_token", 4.0},
        {"block_item_limit", 5},
        {"token_budget", 2048},
        {"token_mode", "heuristic"},
        {"schema_preset", "auto"},
        {"schema_file", ""}}},
      {"summarize",
       {{"paradigm", "hierarchical"},
        {"fan_in", 0},
        {"summary_max_tokens", 256},
        {"template_preset", "auto"},
        {"template_file", ""},
        {"temperature", 0.0},
        {"parallelism", 1}}},
      {"backend", backend_defaults()},
      {"recommend",
       {{"N", 3},
        {"answer_vocab", {{"positive", "Yes."}, {"negative", "No."}}},
        {"template_preset", "auto"},
        {"template_file", ""},
        {"backend", nullptr}}},
      {"eval",
       {{"neg_ratio_train", 1},
        {"neg_ratio_eval", 20},
        {"Ks", {3, 5, 10}},
        {"seed", 42},
        {"split", "test"},
        {"allow_partial", false},
        {"parallelism", 1}}},
      {"output_dir", "runs/default"},
      {"cache_dir", ""}};
}

PipelineConfig PipelineConfig::from_json(const json& user) {
  std::vector<std::string> errors;
  if (!user.is_object()) throw ConfigError({"config root must be an object"});
  unknown_keys(user, defaults(), "", errors);

  json tree = defaults();
  tree.merge_patch(user);
  // merge_patch treats null as "delete"; keep the optional override slot.
  if (!tree["recommend"].contains("backend")) tree["recommend"]["backend"] = nullptr;

  Reader r(tree, errors);
  PipelineConfig c;

  c.dataset.path = r.get<std::string>("dataset.path", "");
  try {
    c.dataset.format = parse_source_format(r.get<std::string>("dataset.format", "jsonl"));
  } catch (const std::exception& e) {
    errors.push_back(std::string("dataset.format: ") + e.what());
  }
  {
    const json* lf = r.find("dataset.length_filter");
    if (!lf || !lf->is_array() || lf->size() != 2 || !is_count((*lf)[0]) ||
        !is_count((*lf)[1])) {
      errors.push_back("dataset.length_filter: expected [min, max]");
    } else {
      c.dataset.length_filter = {(*lf)[0].get<std::size_t>(),
                                 (*lf)[1].get<std::size_t>()};
      r.check(c.dataset.length_filter.min <= c.dataset.length_filter.max,
              "dataset.length_filter: min exceeds max");
      r.check(c.dataset.length_filter.min >= 1,
              "dataset.length_filter: min must be >= 1");
    }
  }
  c.dataset.resplit = r.get<bool>("dataset.resplit", false);
  c.dataset.split_counts.train = r.get<std::size_t>("dataset.split_counts.train", 10000);
  c.dataset.split_counts.val = r.get<std::size_t>("dataset.split_counts.val", 1000);
  c.dataset.split_counts.test = r.get<std::size_t>("dataset.split_counts.test", 1000);
  if (c.dataset.path.empty()) {
    errors.push_back("dataset.path: required");
  } else if (c.dataset.format == SourceFormat::kJsonl &&
             !readable_file(c.dataset.path)) {
    errors.push_back("dataset.path: cannot read " + c.dataset.path.string());
  } else if (c.dataset.format != SourceFormat::kJsonl &&
             !std::filesystem::is_directory(c.dataset.path)) {
    errors.push_back("dataset.path: " + c.dataset.path.string() +
                     " is not a directory");
  }

  c.textize.chars_per_token = r.get<double>("textize.chars_per_token", 4.0);
  c.textize.block_item_limit = r.get<std::size_t>("textize.block_item_limit", 5);
  c.textize.token_budget = r.get<std::size_t>("textize.token_budget", 2048);
  {
    const auto mode = r.get<std::string>("textize.token_mode", "heuristic");
    if (mode == "heuristic") {
      c.textize.token_mode = TokenCountMode::kHeuristic;
    } else if (mode == "backend-exact") {
      c.textize.token_mode = TokenCountMode::kBackendExact;
    } else {
      errors.push_back("textize.token_mode: must be heuristic or backend-exact");
    }
  }
  c.textize.schema_preset = r.get<std::string>("textize.schema_preset", "auto");
  c.textize.schema_file = r.get<std::string>("textize.schema_file", "");
  r.check(c.textize.chars_per_token > 0, "textize.chars_per_token: must be > 0");
  r.check(c.textize.block_item_limit >= 1, "textize.block_item_limit: must be >= 1");
  r.check(c.textize.token_budget >= 1, "textize.token_budget: must be >= 1");
  if (!c.textize.schema_file.empty()) {
    try {
      RenderSchema::from_json(read_json_file(c.textize.schema_file));
    } catch (const std::exception& e) {
      errors.push_back("textize.schema_file: " + std::string(e.what()));
    }
  } else {
    const auto& p = c.textize.schema_preset;
    const auto names = schema_preset_names();
    r.check(p == "auto" || p == "generic" ||
                std::find(names.begin(), names.end(), p) != names.end(),
            "textize.schema_preset: unknown preset \"" + p + "\"");
  }

  try {
    c.summarize.paradigm =
        parse_paradigm(r.get<std::string>("summarize.paradigm", "hierarchical"));
  } catch (const std::exception& e) {
    errors.push_back(std::string("summarize.paradigm: ") + e.what());
  }
  c.summarize.fan_in = r.get<std::size_t>("summarize.fan_in", 0);
  c.summarize.summary_max_tokens =
      r.get<std::size_t>("summarize.summary_max_tokens", 256);
  c.summarize.template_preset =
      r.get<std::string>("summarize.template_preset", "auto");
  c.summarize.template_file = r.get<std::string>("summarize.template_file", "");
  c.summarize.temperature = r.get<double>("summarize.temperature", 0.0);
  c.summarize.parallelism = r.get<std::size_t>("summarize.parallelism", 1);
  r.check(c.summarize.fan_in != 1, "summarize.fan_in: must be 0 (auto) or >= 2");
  r.check(c.summarize.summary_max_tokens >= 1,
          "summarize.summary_max_tokens: must be >= 1");
  r.check(c.summarize.temperature >= 0, "summarize.temperature: must be >= 0");
  r.check(c.summarize.parallelism >= 1, "summarize.parallelism: must be >= 1");
  if (!c.summarize.template_file.empty()) {
    try {
      SummaryTemplateSet::from_json(read_json_file(c.summarize.template_file));
    } catch (const std::exception& e) {
      errors.push_back("summarize.template_file: " + std::string(e.what()));
    }
  } else {
    const auto& p = c.summarize.template_preset;
    const auto names = summary_preset_names();
    r.check(p == "auto" || std::find(names.begin(), names.end(), p) != names.end(),
            "summarize.template_preset: unknown preset \"" + p + "\"");
  }

  c.backend = read_backend(r, "backend");

  c.recommend.recent_item_count = r.get<std::size_t>("recommend.N", 3);
  c.recommend.answers.positive =
      r.get<std::string>("recommend.answer_vocab.positive", "Yes.");
  c.recommend.answers.negative =
      r.get<std::string>("recommend.answer_vocab.negative", "No.");
  c.recommend.template_preset =
      r.get<std::string>("recommend.template_preset", "auto");
  c.recommend.template_file = r.get<std::string>("recommend.template_file", "");
  {
    const auto pk = answer_key(c.recommend.answers.positive);
    const auto nk = answer_key(c.recommend.answers.negative);
    r.check(!pk.empty() && !nk.empty() && pk != nk,
            "recommend.answer_vocab: answers must start with distinct words");
  }
  if (!c.recommend.template_file.empty()) {
    try {
      auto rc = RecPromptConfig::from_json(read_json_file(c.recommend.template_file));
      rc.schema = RenderSchema::generic({"x"});
      rc.validate();
    } catch (const std::exception& e) {
      errors.push_back("recommend.template_file: " + std::string(e.what()));
    }
  } else {
    const auto& p = c.recommend.template_preset;
    const auto names = summary_preset_names();
    r.check(p == "auto" || std::find(names.begin(), names.end(), p) != names.end(),
            "recommend.template_preset: unknown preset \"" + p + "\"");
  }
  {
    json rec_backend = tree["backend"];
    const auto& override_ = tree["recommend"]["backend"];
    if (!override_.is_null() && !override_.is_object()) {
      errors.push_back("recommend.backend: expected an object or null");
    } else if (override_.is_object()) {
      rec_backend.merge_patch(override_);
    }
    json shadow = {{"rb", rec_backend}};
    Reader rr(shadow, errors);
    c.recommend.backend = read_backend(rr, "rb");
  }

  c.eval.neg_ratio_train = r.get<std::size_t>("eval.neg_ratio_train", 1);
  c.eval.neg_ratio_eval = r.get<std::size_t>("eval.neg_ratio_eval", 20);
  c.eval.seed = r.get<std::uint64_t>("eval.seed", 42);
  try {
    c.eval.split = parse_split(r.get<std::string>("eval.split", "test"));
  } catch (const std::exception& e) {
    errors.push_back(std::string("eval.split: ") + e.what());
  }
  c.eval.allow_partial = r.get<bool>("eval.allow_partial", false);
  c.eval.parallelism = r.get<std::size_t>("eval.parallelism", 1);
  {
    const json* ks = r.find("eval.Ks");
    std::vector<std::size_t> parsed;
    bool ok = ks && ks->is_array() && !ks->empty();
    if (ok) {
      for (const auto& k : *ks) {
        if (!is_count(k) || k.get<std::size_t>() == 0) {
          ok = false;
          break;
        }
        parsed.push_back(k.get<std::size_t>());
      }
    }
    if (ok) {
      std::sort(parsed.begin(), parsed.end());
      parsed.erase(std::unique(parsed.begin(), parsed.end()), parsed.end());
      c.eval.ks = parsed;
    } else {
      errors.push_back("eval.Ks: expected a non-empty list of positive integers");
    }
  }
  r.check(c.eval.neg_ratio_train >= 1, "eval.neg_ratio_train: must be >= 1");
  r.check(c.eval.neg_ratio_eval >= 1, "eval.neg_ratio_eval: must be >= 1");
  r.check(c.eval.parallelism >= 1, "eval.parallelism: must be >= 1");

  c.output_dir = r.get<std::string>("output_dir", "runs/default");
  c.cache_dir = r.get<std::string>("cache_dir", "");
  r.check(!c.output_dir.empty(), "output_dir: must not be empty");

  if (!errors.empty()) throw ConfigError(std::move(errors));
  c.tree = std::move(tree);
  return c;
}

PipelineConfig PipelineConfig::with(const std::string& path,
                                    const json& value) const {
  json user = tree;
  json* node = &user;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError({"empty override path"});
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigError({path + ": not a section"});
    if (!node->contains(parts[i]) || (*node)[parts[i]].is_null()) {
      (*node)[parts[i]] = json::object();
    }
    node = &(*node)[parts[i]];
  }
  if (!node->is_object()) throw ConfigError({path + ": not a section"});
  (*node)[parts.back()] = value;
  return from_json(user);
}

std::filesystem::path PipelineConfig::effective_cache_dir() const {
  if (cache_dir.empty()) return output_dir / "cache";
  return cache_dir;
}

std::string PipelineConfig::corpus_digest() const {
  json d = tree.at("dataset");
  if (dataset.resplit) d["seed"] = tree.at("eval").at("seed");
  return digest_of(d);
}

std::string PipelineConfig::summary_digest() const {
  json s = tree.at("summarize");
  s.erase("parallelism");
  return digest_of({{"corpus", corpus_digest()},
                    {"textize", tree.at("textize")},
                    {"summarize", s},
                    {"backend", digest_backend(tree.at("backend"))}});
}

std::string PipelineConfig::run_digest() const {
  json rec = tree.at("recommend");
  rec.erase("backend");
  json ev = tree.at("eval");
  ev.erase("parallelism");
  json rb = {{"kind", recommend.backend.kind},
             {"model", recommend.backend.model},
             {"context_limit", recommend.backend.context_limit},
             {"top_logprobs", recommend.backend.top_logprobs}};
  return digest_of({{"summaries", summary_digest()},
                    {"recommend", rec},
                    {"recommender", rb},
                    {"eval", ev}});
}

std::pair<std::string, json> parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError({"override \"" + text + "\" is not section.key=value"});
  }
  const auto key = text.substr(0, eq);
  const auto raw = text.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  return {key, value};
}

PipelineConfig load_config(const std::optional<std::filesystem::path>& file,
                           const std::vector<std::string>& overrides) {
  json user = json::object();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError({"cannot read config file " + file->string()});
    try {
      user = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError({file->string() + ": " + e.what()});
    }
  }
  std::vector<std::string> errors;
  for (const auto& o : overrides) {
    try {
      auto [path, value] = parse_override(o);
      json* node = &user;
      std::stringstream ss(path);
      std::string part;
      std::vector<std::string> parts;
      while (std::getline(ss, part, '.')) parts.push_back(part);
      for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->contains(parts[i]) || !(*node)[parts[i]].is_object()) {
          (*node)[parts[i]] = json::object();
        }
        node = &(*node)[parts[i]];
      }
      (*node)[parts.back()] = value;
    } catch (const ConfigError& e) {
      errors.insert(errors.end(), e.problems().begin(), e.problems().end());
    }
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return PipelineConfig::from_json(user);
}

}  // namespace trsr
