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

#include <gtest/gtest.h>

#include "support/temp_dir.hpp"

namespace trsr {
namespace {

using nlohmann::json;

class ConfigTest : public ::testing::Test {
 protected:
  void SetUp() override { data_ = dir_.write("corpus.jsonl", "\n"); }

  json base() const { return {{"dataset", {{"path", data_.string()}}}}; }

  std::vector<std::string> problems(const json& user) const {
    try {
      PipelineConfig::from_json(user);
    } catch (const ConfigError& e) {
      return e.problems();
    }
    return {};
  }

  testing::TempDir dir_;
  std::filesystem::path data_;
};

bool mentions(const std::vector<std::string>& problems, const std::string& field) {
  for (const auto& p : problems) {
    if (p.rfind(field, 0) == 0) return true;
  }
  return false;
}

TEST_F(ConfigTest, DefaultsMatchPublishedSetup) {
  const auto c = PipelineConfig::from_json(base());
  EXPECT_EQ(c.textize.block_item_limit, 5u);
  EXPECT_EQ(c.textize.token_budget, 2048u);
  EXPECT_EQ(c.recommend.recent_item_count, 3u);
  EXPECT_EQ(c.eval.neg_ratio_train, 1u);
  EXPECT_EQ(c.eval.neg_ratio_eval, 20u);
  EXPECT_EQ(c.eval.ks, (std::vector<std::size_t>{3, 5, 10}));
  EXPECT_EQ(c.dataset.length_filter.min, 10u);
  EXPECT_EQ(c.dataset.length_filter.max, 25u);
  EXPECT_EQ(c.summarize.paradigm, Paradigm::kHierarchical);
  EXPECT_EQ(c.backend.kind, "mock");
  EXPECT_EQ(c.recommend.backend.model, c.backend.model);
  EXPECT_EQ(c.effective_cache_dir(), c.output_dir / "cache");
}

TEST_F(ConfigTest, ReportsEveryProblemAtOnce) {
  auto user = base();
  user["summarize"]["template_preset"] = "cooking";
  user["recommend"]["N"] = -1;
  user["eval"]["Ks"] = json::array();
  user["backend"]["kind"] = "grpc";
  user["textize"]["colour"] = 1;
  const auto p = problems(user);
  EXPECT_TRUE(mentions(p, "summarize.template_preset"));
  EXPECT_TRUE(mentions(p, "recommend.N"));
  EXPECT_TRUE(mentions(p, "eval.Ks"));
  EXPECT_TRUE(mentions(p, "backend.kind"));
  EXPECT_TRUE(mentions(p, "textize.colour"));
}

TEST_F(ConfigTest, PathsMustResolve) {
  EXPECT_TRUE(mentions(problems(json::object()), "dataset.path"));
  auto user = base();
  user["summarize"]["template_file"] = (dir_ / "missing.json").string();
  user["textize"]["schema_file"] = dir_.write("bad.json", "{\"attributes\": 3}").string();
  const auto p = problems(user);
  EXPECT_TRUE(mentions(p, "summarize.template_file"));
  EXPECT_TRUE(mentions(p, "textize.schema_file"));
}

TEST_F(ConfigTest, AnswerVocabMustDiffer) {
  auto user = base();
  user["recommend"]["answer_vocab"] = {{"positive", "yes"}, {"negative", "Yes!"}};
  EXPECT_TRUE(mentions(problems(user), "recommend.answer_vocab"));
}

TEST_F(ConfigTest, OverridesParseAsJsonOrString) {
  EXPECT_EQ(parse_override("recommend.N=5").second, 5);
  EXPECT_EQ(parse_override("summarize.paradigm=recurrent").second, "recurrent");
  EXPECT_EQ(parse_override("eval.Ks=[1,2]").second, json::array({1, 2}));
  EXPECT_THROW(parse_override("novalue"), ConfigError);

  const auto file = dir_.write("c.json", base().dump());
  const auto c = load_config(file, {"recommend.N=5", "backend.model=big"});
  EXPECT_EQ(c.recommend.recent_item_count, 5u);
  EXPECT_EQ(c.backend.model, "big");
  EXPECT_EQ(c.recommend.backend.model, "big");
}

TEST_F(ConfigTest, RecommenderBackendOverride) {
  auto user = base();
  user["recommend"]["backend"] = {{"model", "small"}};
  const auto c = PipelineConfig::from_json(user);
  EXPECT_EQ(c.backend.model, "mock");
  EXPECT_EQ(c.recommend.backend.model, "small");
  EXPECT_EQ(c.recommend.backend.kind, "mock");
}

TEST_F(ConfigTest, DigestsTrackTheirInputs) {
  const auto c = PipelineConfig::from_json(base());
  const auto n5 = c.with("recommend.N", 5);
  EXPECT_EQ(n5.summary_digest(), c.summary_digest());
  EXPECT_NE(n5.run_digest(), c.run_digest());
  const auto rec = c.with("summarize.paradigm", "recurrent");
  EXPECT_NE(rec.summary_digest(), c.summary_digest());
  EXPECT_EQ(rec.corpus_digest(), c.corpus_digest());
  EXPECT_NE(c.with("dataset.length_filter", json::array({5, 9})).corpus_digest(),
            c.corpus_digest());
  // Parallelism does not change results.
  EXPECT_EQ(c.with("eval.parallelism", 4).run_digest(), c.run_digest());
  EXPECT_THROW(c.with("recommend.N", "many"), ConfigError);
}

}  // namespace
}  // namespace trsr
