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

#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "support/temp_dir.hpp"
#include "trsr/adapters.hpp"

namespace trsr {
namespace {

std::string record(const std::string& user, const std::string& items,
                   const std::string& cand, int label = 1,
                   const std::string& split = "train", const std::string& group = "g") {
  return R"({"user_id":")" + user + R"(","items":[)" + items + R"(],"candidate":)" +
         cand + R"(,"label":)" + std::to_string(label) + R"(,"split":")" + split +
         R"(","group_id":")" + group + "\"}\n";
}

std::string full(const std::string& id, const std::string& title) {
  return R"({"item_id":")" + id + R"(","attrs":{"title":")" + title +
         R"(","brand":"b"}})";
}

std::string ref(const std::string& id) { return R"({"item_id":")" + id + "\"}"; }

Corpus parse(const std::string& text, LengthFilter f = {1, 100}) {
  std::istringstream in(text);
  return parse_corpus_jsonl(in, f);
}

TEST(Corpus, ParsesFullAndReferencedItems) {
  const auto c = parse(record("u1", full("a", "A") + "," + full("b", "B"), ref("a")) +
                       record("u2", ref("b"), full("c", "C"), 0, "test", "g2"));
  ASSERT_EQ(c.examples.size(), 2u);
  EXPECT_EQ(c.examples[0].candidate.value_of("title"), "A");
  EXPECT_EQ(c.examples[1].sequence.items[0].value_of("title"), "B");
  EXPECT_EQ(c.examples[1].split, Split::kTest);
  EXPECT_EQ(c.examples[1].label, 0);
  EXPECT_EQ(c.item_pool.size(), 3u);
  EXPECT_EQ(c.attribute_schema, (std::vector<std::string>{"title", "brand"}));
  EXPECT_EQ(c.positive_count(), 1u);
}

TEST(Corpus, UnknownReferenceReportsLine) {
  try {
    parse(record("u1", full("a", "A"), full("b", "B")) +
          record("u2", ref("zzz"), ref("a")));
    FAIL();
  } catch (const CorpusError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("zzz"), std::string::npos);
  }
}

TEST(Corpus, MalformedJsonReportsLine) {
  try {
    parse(record("u1", full("a", "A"), full("b", "B")) + "{not json\n");
    FAIL();
  } catch (const CorpusError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Corpus, ConflictingDefinitionsRejected) {
  EXPECT_THROW(parse(record("u1", full("a", "A"), full("a", "other"))), CorpusError);
}

TEST(Corpus, ItemInvariants) {
  EXPECT_THROW(validate_item({"x", {}}), CorpusError);
  EXPECT_THROW(validate_item({"x", {{"t", "a"}, {"t", "b"}}}), CorpusError);
  EXPECT_THROW(validate_item({"x", {{"t", "tab\there"}}}), CorpusError);
  EXPECT_NO_THROW(validate_item({"x", {{"t", "line\nbreak"}}}));
}

TEST(Corpus, LengthFilterIsInclusive) {
  std::string text;
  for (int n = 1; n <= 5; ++n) {
    std::string items;
    for (int i = 0; i < n; ++i) {
      if (i) items += ",";
      items += full("i" + std::to_string(i), "t");
    }
    text += record("u" + std::to_string(n), items, full("c", "t"), 1, "train",
                   "g" + std::to_string(n));
  }
  const auto c = parse(text, {2, 4});
  ASSERT_EQ(c.examples.size(), 3u);
  EXPECT_EQ(c.examples.front().sequence.items.size(), 2u);
  EXPECT_EQ(c.examples.back().sequence.items.size(), 4u);
}

TEST(Corpus, WriteThenParseRoundTrips) {
  const auto c = parse(record("u1", full("a", "A") + "," + full("b", "B"), full("c", "C")) +
                       record("u2", ref("b"), ref("a"), 0, "val", "g2"));
  std::stringstream out;
  write_corpus_jsonl(c, out);
  std::istringstream in(out.str());
  EXPECT_EQ(parse_corpus_jsonl(in, {1, 100}), c);

  std::stringstream pool;
  write_item_pool(c, pool);
  EXPECT_EQ(read_item_pool(pool), c.item_pool);
}

Corpus many_users(std::size_t users, std::size_t per_user) {
  Corpus c;
  for (std::size_t u = 0; u < users; ++u) {
    for (std::size_t k = 0; k < per_user; ++k) {
      LabeledExample ex;
      ex.sequence.user_id = "u" + std::to_string(u);
      ex.sequence.items = {{"h", {{"title", "x"}}}};
      ex.candidate = {"c" + std::to_string(k), {{"title", "y"}}};
      ex.label = 1;
      ex.group_id = ex.sequence.user_id + "-" + std::to_string(k);
      c.examples.push_back(ex);
      ex.label = 0;
      ex.candidate = {"n" + std::to_string(k), {{"title", "z"}}};
      c.examples.push_back(ex);
    }
  }
  return c;
}

TEST(Split, ExactCountsAndUserDisjoint) {
  const auto c = many_users(40, 3);
  const auto s = split_corpus(c, {50, 20, 10}, 42);
  std::map<Split, std::size_t> positives;
  std::map<std::string, std::set<Split>> user_splits;
  for (const auto& ex : s.examples) {
    if (ex.label == 1) ++positives[ex.split];
    user_splits[ex.sequence.user_id].insert(ex.split);
  }
  EXPECT_EQ(positives[Split::kTrain], 50u);
  EXPECT_EQ(positives[Split::kVal], 20u);
  EXPECT_EQ(positives[Split::kTest], 10u);
  for (const auto& [user, splits] : user_splits) EXPECT_EQ(splits.size(), 1u) << user;
  // Negatives follow their group's positive.
  std::map<std::string, Split> group_split;
  for (const auto& ex : s.examples) {
    if (ex.label == 1) group_split[ex.group_id] = ex.split;
  }
  for (const auto& ex : s.examples) {
    if (ex.label == 0) {
      ASSERT_TRUE(group_split.count(ex.group_id));
      EXPECT_EQ(group_split[ex.group_id], ex.split);
    }
  }
  EXPECT_EQ(split_corpus(c, {50, 20, 10}, 42), s);
  EXPECT_NE(split_corpus(c, {50, 20, 10}, 43), s);
}

TEST(Split, InsufficientPositives) {
  try {
    split_corpus(many_users(5, 2), {8, 1, 2}, 1);
    FAIL();
  } catch (const CorpusError& e) {
    EXPECT_NE(std::string(e.what()).find("insufficient positives"), std::string::npos);
  }
}

TEST(Csv, QuotedFieldsAndEscapes) {
  std::istringstream in("a,\"b,c\",\"say \"\"hi\"\"\"\r\n\"multi\nline\",x,\n");
  std::vector<std::string> f;
  ASSERT_TRUE(read_csv_record(in, f));
  EXPECT_EQ(f, (std::vector<std::string>{"a", "b,c", "say \"hi\""}));
  ASSERT_TRUE(read_csv_record(in, f));
  EXPECT_EQ(f, (std::vector<std::string>{"multi\nline", "x", ""}));
  EXPECT_FALSE(read_csv_record(in, f));
}

TEST(Adapters, MindPositivesOnly) {
  testing::TempDir dir;
  dir.write("news.tsv",
            "N1\tsports\tsoccer\tCup final\tA match.\turl\t[]\t[]\n"
            "N2\tnews\tworld\tElection\tVotes.\turl\t[]\t[]\n"
            "N3\tsports\ttennis\tOpen\tServe.\turl\t[]\t[]\n");
  dir.write("behaviors.tsv", "7\tU1\t11/11/2019\tN1 N2\tN3-1 N2-0 N1-1\n");
  const auto c = load_corpus({dir.path(), SourceFormat::kMind}, {1, 10});
  ASSERT_EQ(c.examples.size(), 2u);
  EXPECT_EQ(c.examples[0].candidate.item_id, "N3");
  EXPECT_EQ(c.examples[0].group_id, "7-0");
  EXPECT_EQ(c.examples[1].candidate.item_id, "N1");
  EXPECT_EQ(c.examples[0].sequence.items[1].value_of("category"), "news");
  EXPECT_EQ(c.attribute_schema,
            (std::vector<std::string>{"title", "category", "subcategory", "abstract"}));
}

TEST(Adapters, AmazonSessions) {
  testing::TempDir dir;
  dir.write("products_train.csv",
            "id,locale,title,price,brand\n"
            "P1,DE,\"Mug, red\",3.5,Acme\n"
            "P2,DE,Plate,2,Acme\n"
            "P1,UK,Mug,4,Other\n");
  dir.write("sessions_train.csv",
            "prev_items,next_item,locale\n"
            "\"['P1' 'P2']\",P1,UK\n"
            "\"['P1' 'P2']\",P1,DE\n");
  EXPECT_THROW(load_corpus({dir.path(), SourceFormat::kAmazonM2}, {1, 10}), CorpusError);
  dir.write("sessions_train.csv",
            "prev_items,next_item,locale\n"
            "\"['P1' 'P2']\",P1,DE\n");
  const auto c = load_corpus({dir.path(), SourceFormat::kAmazonM2}, {1, 10});
  ASSERT_EQ(c.examples.size(), 1u);
  EXPECT_EQ(c.examples[0].sequence.items[0].item_id, "DE:P1");
  EXPECT_EQ(c.examples[0].sequence.items[0].value_of("title"), "Mug, red");
  EXPECT_EQ(c.examples[0].sequence.user_id, "session-1");
}

}  // namespace
}  // namespace trsr
