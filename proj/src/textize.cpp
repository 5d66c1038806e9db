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

#include "trsr/textize.hpp"

#include <set>

#include "trsr/template.hpp"

namespace trsr {

RenderSchema RenderSchema::generic(
    const std::vector<std::string>& attribute_schema) {
  RenderSchema schema;
  for (const auto& name : attribute_schema) schema.fields.push_back({name, name});
  return schema;
}

RenderSchema RenderSchema::from_json(const nlohmann::json& j) {
  RenderSchema schema;
  try {
    for (const auto& f : j.at("attributes")) {
      const auto name = f.at("name").get<std::string>();
      schema.fields.push_back({name, f.value("label", name)});
    }
    schema.item_header = j.value("item_header", schema.item_header);
    schema.item_separator = j.value("item_separator", schema.item_separator);
  } catch (const nlohmann::json::exception& e) {
    throw RenderError(std::string("invalid render schema: ") + e.what());
  }
  schema.validate();
  return schema;
}

nlohmann::json RenderSchema::to_json() const {
  nlohmann::json attrs = nlohmann::json::array();
  for (const auto& f : fields) attrs.push_back({{"name", f.name}, {"label", f.label}});
  return {{"attributes", attrs},
          {"item_header", item_header},
          {"item_separator", item_separator}};
}

void RenderSchema::validate() const {
  if (fields.empty()) throw RenderError("render schema has no attributes");
  std::set<std::string_view> seen;
  for (const auto& f : fields) {
    if (f.name.empty()) throw RenderError("render schema has an unnamed field");
    if (!seen.insert(f.name).second) {
      throw RenderError("render schema lists " + f.name + " twice");
    }
  }
  const auto holes = placeholders_in(item_header);
  for (const auto& h : holes) {
    if (h != "INDEX") {
      throw RenderError("item header has unknown placeholder {" + h + "}");
    }
  }
}

void RenderSchema::validate_against(
    const std::vector<std::string>& corpus_schema) const {
  validate();
  for (const auto& name : corpus_schema) {
    bool found = false;
    for (const auto& f : fields) found = found || f.name == name;
    if (!found) {
      throw RenderError("render schema is missing corpus attribute " + name);
    }
  }
}

std::string render_item(const Item& item, const RenderSchema& schema) {
  for (const auto& a : item.attributes) {
    bool known = false;
    for (const auto& f : schema.fields) known = known || f.name == a.name;
    if (!known) {
      throw RenderError("item " + item.item_id + " has attribute " + a.name +
                        " that the render schema does not list");
    }
  }
  std::string out;
  for (const auto& f : schema.fields) {
    if (!out.empty()) out.push_back('\n');
    out += f.label;
    out.push_back(':');
    const auto value = item.value_of(f.name);
    if (!value.empty()) {
      out.push_back(' ');
      out += value;
    }
  }
  return out;
}

std::string render_listed_item(const Item& item, const RenderSchema& schema,
                               std::size_t ordinal) {
  auto header =
      fill_template(schema.item_header, {{"INDEX", std::to_string(ordinal)}});
  return header + "\n" + render_item(item, schema);
}

std::string render_items(std::span<const Item> items,
                         const RenderSchema& schema,
                         std::size_t first_ordinal) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += schema.item_separator;
    out += render_listed_item(items[i], schema, first_ordinal + i);
  }
  return out;
}

std::vector<Block> segment(const BehaviorSequence& seq,
                           std::size_t block_item_limit,
                           std::size_t token_budget,
                           const RenderSchema& schema,
                           const TokenCounter& counter) {
  if (block_item_limit == 0) {
    throw std::invalid_argument("block_item_limit must be at least 1");
  }
  std::vector<Block> blocks;
  Block current;
  auto close = [&] {
    current.index = blocks.size();
    blocks.push_back(std::move(current));
    current = Block{};
  };
  for (std::size_t i = 0; i < seq.items.size(); ++i) {
    const auto& item = seq.items[i];
    const auto rendered = render_listed_item(item, schema, i + 1);
    const auto alone = counter.count(rendered);
    if (alone > token_budget) {
      throw SegmentError("item " + item.item_id + " (position " +
                             std::to_string(i + 1) + ") renders to " +
                             std::to_string(alone) +
                             " tokens, over the block budget of " +
                             std::to_string(token_budget),
                         item.item_id);
    }
    if (!current.items.empty()) {
      auto joined = current.text + schema.item_separator + rendered;
      const auto tokens = counter.count(joined);
      if (current.items.size() + 1 <= block_item_limit &&
          tokens <= token_budget) {
        current.items.push_back(item);
        current.text = std::move(joined);
        current.token_count = tokens;
        continue;
      }
      close();
    }
    current.items.push_back(item);
    current.text = rendered;
    current.token_count = alone;
  }
  if (!current.items.empty()) close();
  return blocks;
}

}  // namespace trsr
