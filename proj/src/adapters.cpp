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

#include "trsr/adapters.hpp"

#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "trsr/domain.hpp"

namespace trsr {

namespace {

using ojson = nlohmann::ordered_json;

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot read " + path.string());
  return in;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

// Raw dumps contain tabs and carriage returns that the corpus forbids.
std::string clean(std::string s) {
  for (auto& c : s) {
    const auto u = static_cast<unsigned char>(c);
    if ((u < 0x20 && c != '\n') || u == 0x7f) c = ' ';
  }
  return s;
}

ojson ref(const std::string& id) { return ojson{{"item_id", id}}; }

}  // namespace

bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  char c;
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return true;
}

void convert_mind(const std::filesystem::path& dir, std::ostream& jsonl) {
  std::unordered_map<std::string, ojson> news;
  {
    auto in = open_or_throw(dir / "news.tsv");
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      auto cols = split_on(line, '\t');
      if (cols.size() < 5) {
        throw CorpusError("news.tsv: expected at least 5 columns", n);
      }
      ojson attrs;
      attrs["title"] = clean(cols[3]);
      attrs["category"] = clean(cols[1]);
      attrs["subcategory"] = clean(cols[2]);
      attrs["abstract"] = clean(cols[4]);
      news[cols[0]] = ojson{{"item_id", cols[0]}, {"attrs", std::move(attrs)}};
    }
  }
  auto item = [&](const std::string& id) {
    auto it = news.find(id);
    return it == news.end() ? ref(id) : it->second;
  };

  auto in = open_or_throw(dir / "behaviors.tsv");
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = split_on(line, '\t');
    if (cols.size() < 5) {
      throw CorpusError("behaviors.tsv: expected 5 columns", n);
    }
    std::vector<std::string> history;
    for (auto& id : split_on(cols[3], ' ')) {
      if (!id.empty()) history.push_back(id);
    }
    if (history.empty()) continue;
    ojson items = ojson::array();
    for (const auto& id : history) items.push_back(item(id));
    std::size_t k = 0;
    for (const auto& imp : split_on(cols[4], ' ')) {
      const auto dash = imp.rfind('-');
      if (dash == std::string::npos || imp.substr(dash + 1) != "1") continue;
      ojson rec;
      rec["user_id"] = cols[1];
      rec["items"] = items;
      rec["candidate"] = item(imp.substr(0, dash));
      rec["label"] = 1;
      rec["split"] = "train";
      rec["group_id"] = cols[0] + "-" + std::to_string(k++);
      jsonl << rec.dump() << '\n';
    }
  }
}

void convert_amazon_m2(const std::filesystem::path& dir, std::ostream& jsonl) {
  std::unordered_map<std::string, ojson> products;
  {
    auto in = open_or_throw(dir / "products_train.csv");
    std::vector<std::string> header;
    if (!read_csv_record(in, header)) {
      throw CorpusError("products_train.csv is empty");
    }
    std::size_t id_col = header.size(), locale_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == "id") id_col = i;
      if (header[i] == "locale") locale_col = i;
    }
    if (id_col == header.size() || locale_col == header.size()) {
      throw CorpusError("products_train.csv needs id and locale columns");
    }
    std::vector<std::string> row;
    std::size_t n = 1;
    while (read_csv_record(in, row)) {
      ++n;
      if (row.size() == 1 && row[0].empty()) continue;
      if (row.size() != header.size()) {
        throw CorpusError("products_train.csv: column count mismatch", n);
      }
      ojson attrs;
      for (std::size_t i = 0; i < header.size(); ++i) {
        if (i != id_col) attrs[header[i]] = clean(row[i]);
      }
      const auto key = row[locale_col] + ":" + row[id_col];
      products[key] = ojson{{"item_id", key}, {"attrs", std::move(attrs)}};
    }
  }
  auto item = [&](const std::string& key) {
    auto it = products.find(key);
    return it == products.end() ? ref(key) : it->second;
  };

  auto in = open_or_throw(dir / "sessions_train.csv");
  std::vector<std::string> header;
  if (!read_csv_record(in, header)) {
    throw CorpusError("sessions_train.csv is empty");
  }
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"prev_items", "next_item", "locale"}) {
    if (!col.count(need)) {
      throw CorpusError(std::string("sessions_train.csv needs column ") + need);
    }
  }
  static const std::regex kQuotedId("'([^']+)'");
  std::vector<std::string> row;
  std::size_t n = 0;
  while (read_csv_record(in, row)) {
    ++n;
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != header.size()) {
      throw CorpusError("sessions_train.csv: column count mismatch", n + 1);
    }
    const auto& locale = row[col["locale"]];
    const auto& prev = row[col["prev_items"]];
    ojson items = ojson::array();
    for (std::sregex_iterator it(prev.begin(), prev.end(), kQuotedId), end;
         it != end; ++it) {
      items.push_back(item(locale + ":" + (*it)[1].str()));
    }
    if (items.empty()) continue;
    ojson rec;
    rec["user_id"] = "session-" + std::to_string(n);
    rec["items"] = std::move(items);
    rec["candidate"] = item(locale + ":" + row[col["next_item"]]);
    rec["label"] = 1;
    rec["split"] = "train";
    rec["group_id"] = "amazon-m2-" + std::to_string(n);
    jsonl << rec.dump() << '\n';
  }
}

}  // namespace trsr
