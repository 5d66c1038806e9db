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
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace trsr {

// Thrown for unreadable sources and malformed records. `line` is 1-based and
// 0 when the error is not tied to a specific line.
class CorpusError : public std::runtime_error {
 public:
  CorpusError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what
                                : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Attribute {
  std::string name;
  std::string value;

  bool operator==(const Attribute&) const = default;
};

struct Item {
  std::string item_id;
  std::vector<Attribute> attributes;

  // Empty view when the attribute is absent.
  std::string_view value_of(std::string_view name) const;
  bool has(std::string_view name) const;

  bool operator==(const Item&) const = default;
};

struct BehaviorSequence {
  std::string user_id;
  std::vector<Item> items;  // oldest first

  bool operator==(const BehaviorSequence&) const = default;
};

enum class Split { kTrain, kVal, kTest };

std::string_view to_string(Split split);
Split parse_split(std::string_view s);

struct LabeledExample {
  BehaviorSequence sequence;
  Item candidate;
  int label = 0;  // 1 = interacted
  Split split = Split::kTrain;
  std::string group_id;

  bool operator==(const LabeledExample&) const = default;
};

struct Corpus {
  std::vector<LabeledExample> examples;
  std::map<std::string, Item> item_pool;
  std::vector<std::string> attribute_schema;

  const Item& item(const std::string& item_id) const;
  std::size_t positive_count() const;

  bool operator==(const Corpus&) const = default;
};

// Inclusive bounds on the behavior sequence length.
struct LengthFilter {
  std::size_t min = 10;
  std::size_t max = 25;
};

enum class SourceFormat { kJsonl, kAmazonM2, kMind };

std::string_view to_string(SourceFormat format);
SourceFormat parse_source_format(std::string_view s);

struct SourceDescriptor {
  std::filesystem::path path;
  SourceFormat format = SourceFormat::kJsonl;
};

// Validates attribute invariants (non-empty unique names, no control
// characters other than newline). Throws CorpusError.
void validate_item(const Item& item);

// Parses a JSONL corpus. Items may be given in full ({"item_id", "attrs"}) or
// by reference ({"item_id"} only) when defined elsewhere in the stream.
// Records outside `filter` are dropped. Input order is preserved.
Corpus parse_corpus_jsonl(std::istream& in, const LengthFilter& filter);

Corpus load_corpus(const SourceDescriptor& source, const LengthFilter& filter);

// One record per example, every item written in full.
void write_corpus_jsonl(const Corpus& corpus, std::ostream& out);

// The item pool as one {"item_id", "attrs"} object per line, so negatives can
// still be drawn from items whose records were filtered or left unassigned.
void write_item_pool(const Corpus& corpus, std::ostream& out);
std::map<std::string, Item> read_item_pool(std::istream& in);

struct SplitCounts {
  std::size_t train = 10000;
  std::size_t val = 1000;
  std::size_t test = 1000;

  std::size_t total() const { return train + val + test; }
};

// Assigns exactly `counts` positives to train/val/test with user-disjoint
// splits. Users are visited in seeded random order and fill train, then val,
// then test; a user whose positives overflow the split being filled
// contributes only what is needed and the rest is dropped. Negative records
// follow their group's positive. Examples left unassigned are not returned.
Corpus split_corpus(const Corpus& corpus, const SplitCounts& counts,
                    std::uint64_t seed);

}  // namespace trsr
