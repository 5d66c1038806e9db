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
#include <set>
#include <string>
#include <vector>

#include "trsr/domain.hpp"
#include "trsr/random.hpp"

namespace trsr::testing {

// A made-up word of lowercase letters, unique within one generator run.
class WordMaker {
 public:
  explicit WordMaker(std::uint64_t seed) : rng_(seed) {}

  std::string next() {
    for (;;) {
      std::string w;
      const auto len = 5 + uniform_below(rng_, 4);
      for (std::size_t i = 0; i < len; ++i) {
        w.push_back(static_cast<char>('a' + uniform_below(rng_, 26)));
      }
      if (used_.insert(w).second) return w;
    }
  }

  Rng& rng() { return rng_; }

 private:
  Rng rng_;
  std::set<std::string> used_;
};

struct PlantedOptions {
  std::size_t users = 50;
  std::size_t history_length = 15;
  // History items borrowed from other users' topics.
  std::size_t off_topic_items = 3;
  std::size_t topic_words = 30;
  std::size_t words_per_title = 5;
  std::size_t positives_per_user = 1;
  Split split = Split::kTest;
  std::uint64_t seed = 7;
};

// Every user has a private topic vocabulary. Their history is mostly items
// from that topic plus a few items from other topics; each positive is an
// unseen item from their own topic. Every other-topic item a user has not
// seen is a potential negative, so sampled negatives never share the topic.
inline Corpus planted_corpus(const PlantedOptions& o) {
  WordMaker words(o.seed);
  auto& rng = words.rng();
  std::vector<std::vector<std::string>> vocab(o.users);
  std::vector<std::string> topic_name(o.users);
  for (std::size_t u = 0; u < o.users; ++u) {
    topic_name[u] = words.next();
    for (std::size_t w = 0; w < o.topic_words; ++w) vocab[u].push_back(words.next());
  }

  const std::size_t on_topic = o.history_length - o.off_topic_items;
  const std::size_t per_topic = on_topic + o.positives_per_user;
  std::vector<std::vector<Item>> topic_items(o.users);
  for (std::size_t u = 0; u < o.users; ++u) {
    for (std::size_t k = 0; k < per_topic; ++k) {
      std::string title;
      for (std::size_t w = 0; w < o.words_per_title; ++w) {
        if (w) title += ' ';
        title += vocab[u][uniform_below(rng, vocab[u].size())];
      }
      Item item;
      item.item_id = "t" + std::to_string(u) + "-" + std::to_string(k);
      item.attributes = {{"title", title + "."}, {"category", topic_name[u]}};
      topic_items[u].push_back(std::move(item));
    }
  }

  Corpus c;
  for (std::size_t u = 0; u < o.users; ++u) {
    for (const auto& item : topic_items[u]) c.item_pool.emplace(item.item_id, item);
  }
  c.attribute_schema = {"title", "category"};

  for (std::size_t u = 0; u < o.users; ++u) {
    BehaviorSequence seq;
    seq.user_id = "user" + std::to_string(u);
    for (std::size_t k = 0; k < on_topic; ++k) seq.items.push_back(topic_items[u][k]);
    for (std::size_t k = 0; k < o.off_topic_items; ++k) {
      std::size_t other = uniform_below(rng, o.users - 1);
      if (other >= u) ++other;
      seq.items.push_back(topic_items[other][uniform_below(rng, on_topic)]);
    }
    shuffle(seq.items, rng);
    for (std::size_t p = 0; p < o.positives_per_user; ++p) {
      LabeledExample ex;
      ex.sequence = seq;
      ex.candidate = topic_items[u][on_topic + p];
      ex.label = 1;
      ex.split = o.split;
      ex.group_id = seq.user_id + "-g" + std::to_string(p);
      c.examples.push_back(std::move(ex));
    }
  }
  return c;
}

}  // namespace trsr::testing
