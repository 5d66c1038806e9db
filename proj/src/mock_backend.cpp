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

#include "trsr/mock_backend.hpp"

#include <algorithm>
#include <regex>

namespace trsr {

namespace mock_rules {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

// Rendered items are blank-line separated; an item opens with a header line
// ("Product 3:") and continues with "Label: value" lines.
std::vector<std::vector<std::string>> item_value_lists(std::string_view region) {
  std::vector<std::vector<std::string>> items;
  bool open = false;
  for (auto raw : lines_of(region)) {
    const auto line = trim(raw);
    if (line.empty()) {
      open = false;
      continue;
    }
    if (!open) {
      items.emplace_back();
      open = true;
    }
    const auto colon = line.find(": ");
    if (colon == std::string_view::npos) {
      // Header, or an attribute rendered with an empty value.
      continue;
    }
    items.back().emplace_back(trim(line.substr(colon + 2)));
  }
  return items;
}

}  // namespace

std::vector<std::string_view> regions(std::string_view prompt,
                                      std::string_view tag) {
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while ((pos = prompt.find(open, pos)) != std::string_view::npos) {
    const auto begin = pos + open.size();
    const auto end = prompt.find(close, begin);
    if (end == std::string_view::npos) break;
    out.push_back(prompt.substr(begin, end - begin));
    pos = end + close.size();
  }
  return out;
}

std::string first_sentence(std::string_view text) {
  text = trim(text);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') &&
        (i + 1 == text.size() || text[i + 1] == ' ' || text[i + 1] == '\n')) {
      return std::string(text.substr(0, i + 1));
    }
    if (c == '\n') return std::string(trim(text.substr(0, i)));
  }
  return std::string(text);
}

std::vector<std::string> item_leads(std::string_view region) {
  std::vector<std::string> leads;
  for (const auto& values : item_value_lists(region)) {
    for (const auto& v : values) {
      if (v.empty()) continue;
      auto lead = first_sentence(v);
      while (!lead.empty() && (lead.back() == '.' || lead.back() == '!' ||
                               lead.back() == '?')) {
        lead.pop_back();
      }
      if (!lead.empty()) leads.push_back(std::move(lead));
      break;
    }
  }
  return leads;
}

std::vector<std::string> item_values(std::string_view region) {
  std::vector<std::string> out;
  for (auto& values : item_value_lists(region)) {
    for (auto& v : values) out.push_back(std::move(v));
  }
  return out;
}

std::set<std::string> words(std::string_view text) {
  std::set<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.insert(std::move(cur));
    cur.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (c >= 'A' && c <= 'Z') {
      cur.push_back(static_cast<char>(c - 'A' + 'a'));
    } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || u >= 0x80) {
      cur.push_back(c);
    } else {
      flush();
    }
  }
  flush();
  return out;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::size_t inter = 0;
  for (const auto& w : a) inter += b.count(w);
  const auto uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace mock_rules

namespace {

std::string summary_region_text(std::string_view region) {
  static const std::regex kEnumerator(R"(^\s*Summary \d+:\s*)");
  std::string out;
  std::size_t start = 0;
  while (start <= region.size()) {
    auto end = region.find('\n', start);
    if (end == std::string_view::npos) end = region.size();
    std::string line(region.substr(start, end - start));
    line = std::regex_replace(line, kEnumerator, "");
    const auto b = line.find_first_not_of(" \t\r");
    if (b != std::string::npos) {
      const auto e = line.find_last_not_of(" \t\r");
      if (!out.empty()) out.push_back(' ');
      out += line.substr(b, e - b + 1);
    }
    start = end + 1;
  }
  return out;
}

// Cuts to at most `max_chars` code points.
std::string utf8_prefix(const std::string& s, std::size_t max_chars) {
  std::size_t chars = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xc0) != 0x80) {
      if (chars == max_chars) return s.substr(0, i);
      ++chars;
    }
  }
  return s;
}

}  // namespace

MockBackend::MockBackend(MockOptions options)
    : Backend(options.chars_per_token), options_(std::move(options)) {}

std::optional<std::size_t> MockBackend::count_tokens(std::string_view text) {
  if (!options_.tokenizer) return std::nullopt;
  return length_counter().count(text);
}

Completion MockBackend::do_complete(const CompletionRequest& request) {
  ++completion_calls_;
  std::vector<std::string> leads;
  for (auto region : mock_rules::regions(request.prompt, "items")) {
    for (auto& lead : mock_rules::item_leads(region)) {
      leads.push_back(std::move(lead));
    }
  }
  std::string text;
  if (!leads.empty()) {
    text = "Interests: ";
    for (std::size_t i = 0; i < leads.size(); ++i) {
      if (i > 0) text += "; ";
      text += leads[i];
    }
    text += ".";
  }
  for (auto region : mock_rules::regions(request.prompt, "summary")) {
    auto s = summary_region_text(region);
    if (s.empty()) continue;
    if (!text.empty()) text.push_back(' ');
    text += s;
  }
  if (text.empty()) text = "No preference information.";

  Completion c;
  c.usage.prompt_tokens = estimate_tokens(request.prompt);
  const auto max_chars = static_cast<std::size_t>(
      static_cast<double>(request.max_new_tokens) * options_.chars_per_token);
  if (utf8_length(text) > max_chars) {
    c.text = utf8_prefix(text, max_chars);
    c.finish_reason = FinishReason::kLength;
    c.usage.completion_tokens = request.max_new_tokens;
  } else {
    c.text = std::move(text);
    c.finish_reason = FinishReason::kStop;
    c.usage.completion_tokens =
        std::min(estimate_tokens(c.text), request.max_new_tokens);
  }
  return c;
}

TokenScores MockBackend::do_next_token_scores(const TokenScoreRequest& request) {
  ++score_calls_;
  std::set<std::string> profile;
  for (auto region : mock_rules::regions(request.prompt, "summary")) {
    profile.merge(mock_rules::words(summary_region_text(region)));
  }
  if (profile.empty()) {
    for (auto region : mock_rules::regions(request.prompt, "items")) {
      for (const auto& v : mock_rules::item_values(region)) {
        profile.merge(mock_rules::words(v));
      }
    }
  }
  std::set<std::string> candidate;
  for (auto region : mock_rules::regions(request.prompt, "candidate")) {
    for (const auto& v : mock_rules::item_values(region)) {
      candidate.merge(mock_rules::words(v));
    }
  }
  const double j = mock_rules::jaccard(candidate, profile);
  const double p_yes = 0.1 + 0.8 * j;
  TokenScores scores;
  for (const auto& c : request.candidates) {
    const auto key = answer_key(c);
    scores[c] = key == "yes" ? p_yes : key == "no" ? 1.0 - p_yes : 0.0;
  }
  return scores;
}

}  // namespace trsr
