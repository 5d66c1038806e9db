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

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "trsr/domain.hpp"
#include "trsr/token_counter.hpp"

namespace trsr {

class RenderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// How items become prompt text. Each attribute renders as "Label: value" on
// its own line in schema order; a listed item is preceded by `item_header`
// with {INDEX} replaced by its 1-based position.
struct RenderSchema {
  struct Field {
    std::string name;
    std::string label;
  };
  std::vector<Field> fields;
  std::string item_header = "Item {INDEX}:";
  std::string item_separator = "\n\n";

  // Labels default to the attribute names.
  static RenderSchema generic(const std::vector<std::string>& attribute_schema);
  static RenderSchema from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  // Field names non-empty and unique.
  void validate() const;
  // Every corpus attribute appears exactly once. Throws RenderError.
  void validate_against(const std::vector<std::string>& corpus_schema) const;
};

std::string render_item(const Item& item, const RenderSchema& schema);
std::string render_listed_item(const Item& item, const RenderSchema& schema,
                               std::size_t ordinal);
// Listed items joined by the schema separator, numbered from `first_ordinal`.
std::string render_items(std::span<const Item> items,
                         const RenderSchema& schema, std::size_t first_ordinal);

struct Block {
  std::size_t index = 0;
  std::vector<Item> items;
  std::string text;
  std::size_t token_count = 0;
};

class SegmentError : public std::runtime_error {
 public:
  SegmentError(const std::string& what, std::string item_id)
      : std::runtime_error(what), item_id_(std::move(item_id)) {}
  const std::string& item_id() const { return item_id_; }

 private:
  std::string item_id_;
};

// Greedy left-to-right packing. A block closes when the next item would push
// it past `block_item_limit` items or past `token_budget` tokens. Items keep
// their position in the whole sequence as ordinal. An item that alone exceeds
// the budget is an error; nothing is truncated.
std::vector<Block> segment(const BehaviorSequence& seq,
                           std::size_t block_item_limit,
                           std::size_t token_budget,
                           const RenderSchema& schema,
                           const TokenCounter& counter);

}  // namespace trsr
