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

#include "trsr/domain.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "trsr/adapters.hpp"
#include "trsr/random.hpp"

namespace trsr {

namespace {

using ojson = nlohmann::ordered_json;

std::string attr_value_text(const ojson& v, std::size_t line) {
  if (v.is_null()) return {};
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number() || v.is_boolean()) return v.dump();
  throw CorpusError("attribute values must be strings", line);
}

// An item object either defines the item (has "attrs") or references one.
struct ParsedItem {
  Item item;
  bool is_reference = false;
};

ParsedItem parse_item(const ojson& j, std::size_t line) {
  if (!j.is_object()) throw CorpusError("item must be an object", line);
  auto id = j.find("item_id");
  if (id == j.end() || !id->is_string() || id->get<std::string>().empty()) {
    throw CorpusError("item without a string item_id", line);
  }
  ParsedItem out;
  out.item.item_id = id->get<std::string>();
  auto attrs = j.find("attrs");
  if (attrs == j.end()) {
    out.is_reference = true;
    return out;
  }
  if (!attrs->is_object()) {
    throw CorpusError("attrs of item " + out.item.item_id + " must be an object",
                      line);
  }
  for (const auto& [name, value] : attrs->items()) {
    out.item.attributes.push_back({name, attr_value_text(value, line)});
  }
  try {
    validate_item(out.item);
  } catch (const CorpusError& e) {
    throw CorpusError(e.what(), line);
  }
  return out;
}

const std::string& required_string(const ojson& j, const char* key,
                                   std::size_t line) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw CorpusError(std::string("missing or non-string field \"") + key + "\"",
                      line);
  }
  return it->get_ref<const std::string&>();
}

struct RawRecord {
  std::size_t line;
  std::string user_id;
  std::vector<ParsedItem> items;
  ParsedItem candidate;
  int label;
  Split split;
  std::string group_id;
};

ojson item_to_json(const Item& item) {
  ojson attrs = ojson::object();
  for (const auto& a : item.attributes) attrs[a.name] = a.value;
  return ojson{{"item_id", item.item_id}, {"attrs", std::move(attrs)}};
}

}  // namespace

std::string_view Item::value_of(std::string_view name) const {
  for (const auto& a : attributes) {
    if (a.name == name) return a.value;
  }
  return {};
}

bool Item::has(std::string_view name) const {
  return std::any_of(attributes.begin(), attributes.end(),
                     [&](const Attribute& a) { return a.name == name; });
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw CorpusError("unknown split \"" + std::string(s) + "\"");
}

std::string_view to_string(SourceFormat format) {
  switch (format) {
    case SourceFormat::kJsonl:
      return "jsonl";
    case SourceFormat::kAmazonM2:
      return "amazon-m2";
    case SourceFormat::kMind:
      return "mind";
  }
  return "jsonl";
}

SourceFormat parse_source_format(std::string_view s) {
  if (s == "jsonl") return SourceFormat::kJsonl;
  if (s == "amazon-m2") return SourceFormat::kAmazonM2;
  if (s == "mind") return SourceFormat::kMind;
  throw CorpusError("unknown source format \"" + std::string(s) + "\"");
}

const Item& Corpus::item(const std::string& item_id) const {
  auto it = item_pool.find(item_id);
  if (it == item_pool.end()) throw CorpusError("unknown item id " + item_id);
  return it->second;
}

std::size_t Corpus::positive_count() const {
  return static_cast<std::size_t>(
      std::count_if(examples.begin(), examples.end(),
                    [](const LabeledExample& e) { return e.label == 1; }));
}

void validate_item(const Item& item) {
  if (item.item_id.empty()) throw CorpusError("empty item_id");
  if (item.attributes.empty()) {
    throw CorpusError("item " + item.item_id + " has no attributes");
  }
  std::set<std::string_view> seen;
  for (const auto& a : item.attributes) {
    if (a.name.empty()) {
      throw CorpusError("item " + item.item_id + " has an unnamed attribute");
    }
    if (!seen.insert(a.name).second) {
      throw CorpusError("item " + item.item_id + " repeats attribute " +
                        a.name);
    }
    for (unsigned char c : a.value) {
      if ((c < 0x20 && c != '\n') || c == 0x7f) {
        throw CorpusError("item " + item.item_id + " attribute " + a.name +
                          " contains a control character");
      }
    }
  }
}

Corpus parse_corpus_jsonl(std::istream& in, const LengthFilter& filter) {
  std::vector<RawRecord> records;
  std::map<std::string, Item> pool;
  std::vector<std::string> schema;
  std::set<std::string> schema_seen;

  auto define = [&](const ParsedItem& p, std::size_t line) {
    if (p.is_reference) return;
    auto [it, inserted] = pool.emplace(p.item.item_id, p.item);
    if (!inserted && it->second != p.item) {
      throw CorpusError("conflicting definitions for item " + p.item.item_id,
                        line);
    }
    for (const auto& a : p.item.attributes) {
      if (schema_seen.insert(a.name).second) schema.push_back(a.name);
    }
  };

  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    ojson j;
    try {
      j = ojson::parse(text);
    } catch (const ojson::parse_error& e) {
      throw CorpusError(std::string("malformed JSON: ") + e.what(), line);
    }
    if (!j.is_object()) throw CorpusError("record must be an object", line);

    RawRecord r;
    r.line = line;
    r.user_id = required_string(j, "user_id", line);
    r.group_id = required_string(j, "group_id", line);
    try {
      r.split = parse_split(required_string(j, "split", line));
    } catch (const CorpusError& e) {
      throw CorpusError(e.what(), line);
    }
    auto label = j.find("label");
    if (label == j.end() || !label->is_number_integer() ||
        (label->get<int>() != 0 && label->get<int>() != 1)) {
      throw CorpusError("label must be 0 or 1", line);
    }
    r.label = label->get<int>();
    auto items = j.find("items");
    if (items == j.end() || !items->is_array() || items->empty()) {
      throw CorpusError("items must be a non-empty array", line);
    }
    for (const auto& it : *items) r.items.push_back(parse_item(it, line));
    auto cand = j.find("candidate");
    if (cand == j.end()) throw CorpusError("missing candidate", line);
    r.candidate = parse_item(*cand, line);

    for (const auto& p : r.items) define(p, line);
    define(r.candidate, line);
    records.push_back(std::move(r));
  }
  if (in.bad()) throw CorpusError("read error");

  auto resolve = [&](const ParsedItem& p, std::size_t line) -> const Item& {
    auto it = pool.find(p.item.item_id);
    if (it == pool.end()) {
      throw CorpusError("reference to unknown item id " + p.item.item_id, line);
    }
    return it->second;
  };

  Corpus corpus;
  for (const auto& r : records) {
    LabeledExample ex;
    ex.sequence.user_id = r.user_id;
    for (const auto& p : r.items) ex.sequence.items.push_back(resolve(p, r.line));
    ex.candidate = resolve(r.candidate, r.line);
    ex.label = r.label;
    ex.split = r.split;
    ex.group_id = r.group_id;
    const auto n = ex.sequence.items.size();
    if (n < filter.min || n > filter.max) continue;
    corpus.examples.push_back(std::move(ex));
  }
  corpus.item_pool = std::move(pool);
  corpus.attribute_schema = std::move(schema);
  return corpus;
}

Corpus load_corpus(const SourceDescriptor& source, const LengthFilter& filter) {
  if (filter.min > filter.max) {
    throw CorpusError("length filter min exceeds max");
  }
  switch (source.format) {
    case SourceFormat::kJsonl: {
      std::ifstream in(source.path);
      if (!in) throw CorpusError("cannot read " + source.path.string());
      return parse_corpus_jsonl(in, filter);
    }
    case SourceFormat::kAmazonM2: {
      std::stringstream jsonl;
      convert_amazon_m2(source.path, jsonl);
      return parse_corpus_jsonl(jsonl, filter);
    }
    case SourceFormat::kMind: {
      std::stringstream jsonl;
      convert_mind(source.path, jsonl);
      return parse_corpus_jsonl(jsonl, filter);
    }
  }
  throw CorpusError("unsupported source format");
}

void write_corpus_jsonl(const Corpus& corpus, std::ostream& out) {
  for (const auto& ex : corpus.examples) {
    ojson items = ojson::array();
    for (const auto& item : ex.sequence.items) items.push_back(item_to_json(item));
    ojson rec;
    rec["user_id"] = ex.sequence.user_id;
    rec["items"] = std::move(items);
    rec["candidate"] = item_to_json(ex.candidate);
    rec["label"] = ex.label;
    rec["split"] = std::string(to_string(ex.split));
    rec["group_id"] = ex.group_id;
    out << rec.dump() << '\n';
  }
}

void write_item_pool(const Corpus& corpus, std::ostream& out) {
  for (const auto& [id, item] : corpus.item_pool) {
    out << item_to_json(item).dump() << '\n';
  }
}

std::map<std::string, Item> read_item_pool(std::istream& in) {
  std::map<std::string, Item> pool;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    ojson j;
    try {
      j = ojson::parse(text);
    } catch (const ojson::parse_error& e) {
      throw CorpusError(std::string("malformed JSON: ") + e.what(), line);
    }
    auto p = parse_item(j, line);
    if (p.is_reference) throw CorpusError("pool entry without attrs", line);
    const auto id = p.item.item_id;
    if (!pool.emplace(id, std::move(p.item)).second) {
      throw CorpusError("duplicate pool item " + id, line);
    }
  }
  return pool;
}

Corpus split_corpus(const Corpus& corpus, const SplitCounts& counts,
                    std::uint64_t seed) {
  if (counts.total() > corpus.positive_count()) {
    throw CorpusError("insufficient positives: requested " +
                      std::to_string(counts.total()) + ", corpus has " +
                      std::to_string(corpus.positive_count()));
  }

  std::vector<std::string> users;
  std::unordered_map<std::string, std::vector<std::size_t>> positives_by_user;
  for (std::size_t i = 0; i < corpus.examples.size(); ++i) {
    const auto& ex = corpus.examples[i];
    if (ex.label != 1) continue;
    auto& list = positives_by_user[ex.sequence.user_id];
    if (list.empty()) users.push_back(ex.sequence.user_id);
    list.push_back(i);
  }
  Rng rng(seed);
  shuffle(users, rng);

  const Split order[] = {Split::kTrain, Split::kVal, Split::kTest};
  std::size_t remaining[] = {counts.train, counts.val, counts.test};
  std::size_t slot = 0;
  std::unordered_map<std::size_t, Split> assigned;
  std::unordered_map<std::string, Split> group_split;
  for (const auto& user : users) {
    while (slot < 3 && remaining[slot] == 0) ++slot;
    if (slot == 3) break;
    const auto& list = positives_by_user[user];
    const std::size_t take = std::min(remaining[slot], list.size());
    for (std::size_t k = 0; k < take; ++k) {
      assigned[list[k]] = order[slot];
      group_split[corpus.examples[list[k]].group_id] = order[slot];
    }
    remaining[slot] -= take;
  }
  if (remaining[0] + remaining[1] + remaining[2] > 0) {
    throw CorpusError(
        "insufficient positives: not enough distinct users to fill the "
        "requested splits disjointly");
  }

  Corpus out;
  out.item_pool = corpus.item_pool;
  out.attribute_schema = corpus.attribute_schema;
  for (std::size_t i = 0; i < corpus.examples.size(); ++i) {
    const auto& ex = corpus.examples[i];
    std::optional<Split> split;
    if (ex.label == 1) {
      if (auto it = assigned.find(i); it != assigned.end()) split = it->second;
    } else if (auto it = group_split.find(ex.group_id); it != group_split.end()) {
      split = it->second;
    }
    if (!split) continue;
    LabeledExample copy = ex;
    copy.split = *split;
    out.examples.push_back(std::move(copy));
  }
  return out;
}

}  // namespace trsr
