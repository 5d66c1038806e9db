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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Runs offline against the mock backend and a local fake server.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "support/fake_server.hpp"
#include "support/metric_oracle.hpp"
#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"
#include "trsr/cache.hpp"
#include "trsr/digest.hpp"
#include "trsr/eval.hpp"
#include "trsr/http_backend.hpp"
#include "trsr/mock_backend.hpp"
#include "trsr/pipeline.hpp"
#include "trsr/presets.hpp"
#include "trsr/recommend.hpp"
#include "trsr/summarize.hpp"
#include "trsr/textize.hpp"

#include <spdlog/spdlog.h>

namespace {

using namespace trsr;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

// Collects failed checks for one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    failed_ = failed_ || !ok;
  }
  bool failed() const { return failed_; }
  std::string summary() const {
    std::string s;
    for (const auto& f : failures_) s += (s.empty() ? "" : "; ") + f;
    return s;
  }

 private:
  bool failed_ = false;
  std::vector<std::string> failures_;
};

int g_failures = 0;

void criterion(const std::string& name, const std::function<std::string(Check&)>& body) {
  Check check;
  std::string note;
  const auto start = Clock::now();
  try {
    note = body(check);
  } catch (const std::exception& e) {
    check.expect(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (check.failed()) ++g_failures;
  std::cout << (check.failed() ? "FAIL " : "PASS ") << name << " ("
            << (check.failed() ? check.summary() : note) << "; "
            << std::to_string(secs).substr(0, 5) << "s)" << std::endl;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(4);
  os << std::fixed << v;
  return os.str();
}

std::string metric_oracle(Check& check) {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> coin(0, 3);
  std::vector<EvalGroup> groups;
  std::vector<std::vector<testing::OracleCandidate>> oracle;
  for (int g = 0; g < 1000; ++g) {
    EvalGroup group;
    // Zero-padded so id order, which the report averages in, is creation order.
    group.group_id = fmt::format("g{:04d}", g);
    std::vector<testing::OracleCandidate> o;
    for (int c = 0; c < 21; ++c) {
      ScoredCandidate sc;
      sc.candidate.item_id = "item" + std::to_string(u(rng)).substr(2, 6);
      sc.p_yes = u(rng);
      sc.p_no = u(rng);
      // A quarter of the scores are coarse so that ties occur.
      sc.p = coin(rng) == 0 ? std::round(u(rng) * 4) / 4 : u(rng);
      o.push_back({sc.candidate.item_id, sc.p, c == 0});
      if (c == 0) {
        group.positive = sc;
      } else {
        group.negatives.push_back(sc);
      }
    }
    groups.push_back(std::move(group));
    oracle.push_back(std::move(o));
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    check.expect(positive_rank(groups[g]) == testing::oracle_rank(oracle[g]),
                 "rank differs in " + groups[g].group_id);
  }
  const std::vector<std::size_t> ks{3, 5, 10};
  const auto report = aggregate_metrics(groups, ks);
  const auto expected = testing::oracle_metrics(oracle, ks);
  for (auto k : ks) {
    check.expect(report.at_k.at(k).recall == expected.at(k).recall,
                 "Recall@" + std::to_string(k) + " differs");
    check.expect(report.at_k.at(k).mrr == expected.at(k).mrr,
                 "MRR@" + std::to_string(k) + " differs");
  }
  check.expect(report.group_count == 1000, "group count");
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  check.expect(secs < 5.0, "took " + std::to_string(secs) + "s");
  return "1000 groups x 21, Recall@10 " + fmt_double(report.at_k.at(10).recall);
}

std::string probability_algebra(Check& check) {
  const auto p = interaction_probability;
  check.expect(std::abs(p(0.9, 0.1) - 1.0 / (1.0 + std::exp(-0.8))) <= 1e-9,
               "p(0.9, 0.1) != sigmoid(0.8)");
  check.expect(std::abs(p(0.9, 0.1) - 0.6900) < 5e-5, "p(0.9, 0.1) != 0.6900");
  check.expect(std::abs(p(1.0, 0.0) - std::exp(1.0) / (std::exp(1.0) + 1.0)) <= 1e-12,
               "p(1, 0)");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    check.expect(p(a, a) == 0.5, "p(a, a) != 0.5");
    check.expect(std::abs(p(a, b) + p(b, a) - 1.0) <= 1e-12, "p(a,b) + p(b,a) != 1");
    // Strictly increasing in a - b.
    if (a - b < c - d) check.expect(p(a, b) < p(c, d), "not monotone in a - b");
  }
  return "p(0.9, 0.1) = " + std::to_string(p(0.9, 0.1));
}

std::string segmentation(Check& check) {
  std::mt19937_64 rng(77);
  RenderSchema schema = RenderSchema::generic({"title", "desc"});
  schema.item_header = "Product {INDEX}:";
  const auto counter = TokenCounter::heuristic(4.0);
  const std::size_t limit = 5, budget = 120;
  std::size_t blocks_seen = 0;
  for (int s = 0; s < 500; ++s) {
    BehaviorSequence seq{"u" + std::to_string(s), {}};
    const auto len = 1 + rng() % 40;
    for (std::size_t i = 0; i < len; ++i) {
      seq.items.push_back({"i" + std::to_string(i),
                           {{"title", std::string(1 + rng() % 60, 'a' + rng() % 26)},
                            {"desc", std::string(rng() % 200, 'b')}}});
    }
    const auto blocks = segment(seq, limit, budget, schema, counter);
    std::vector<std::string> flat;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto& block = blocks[b];
      check.expect(block.index == b, "block index");
      check.expect(!block.items.empty() && block.items.size() <= limit, "item limit");
      check.expect(block.token_count <= budget, "token budget");
      check.expect(block.token_count == counter.count(block.text), "token count");
      for (const auto& item : block.items) flat.push_back(item.item_id);
      // Greedy: the next block's first item would not have fit here.
      if (b + 1 < blocks.size()) {
        const auto& next = blocks[b + 1];
        const auto first = render_listed_item(next.items.front(), schema,
                                              flat.size() + 1);
        const bool fits =
            block.items.size() < limit &&
            counter.count(block.text + schema.item_separator + first) <= budget;
        check.expect(!fits, "block closed early");
      }
    }
    std::vector<std::string> ids;
    for (const auto& item : seq.items) ids.push_back(item.item_id);
    check.expect(flat == ids, "blocks do not partition the sequence in order");
    blocks_seen += blocks.size();
  }
  BehaviorSequence thirteen{"u", {}};
  for (int i = 0; i < 13; ++i) {
    thirteen.items.push_back({"i" + std::to_string(i), {{"title", "x"}, {"desc", ""}}});
  }
  const auto b13 = segment(thirteen, 5, 2048, schema, counter);
  std::vector<std::size_t> sizes;
  for (const auto& b : b13) sizes.push_back(b.items.size());
  check.expect(sizes == std::vector<std::size_t>{5, 5, 3}, "13 items did not give [5, 5, 3]");
  return "500 sequences, " + std::to_string(blocks_seen) + " blocks; 13 items -> [5, 5, 3]";
}

std::vector<Block> blocks_of(std::size_t n) {
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < n; ++i) {
    Block b;
    b.index = i;
    b.text = "Item " + std::to_string(i + 1) + ":\ntitle: thing" + std::to_string(i);
    blocks.push_back(b);
  }
  return blocks;
}

std::string call_counts(Check& check) {
  const auto t = summary_preset("shopping");
  {
    MockBackend mock;
    const auto s = summarize_hierarchical(blocks_of(5), t, mock, {256, 0.0, 5, 1, ""});
    check.expect(mock.completion_calls() == 6, "5 blocks fan_in 5: " +
                                                   std::to_string(mock.completion_calls()) +
                                                   " calls");
    check.expect(s.trace.layer_count() == 2, "5 blocks fan_in 5: layers");
    validate_hierarchical_trace(s.trace, 5);
  }
  {
    MockBackend mock;
    const auto s = summarize_hierarchical(blocks_of(7), t, mock, {256, 0.0, 3, 1, ""});
    check.expect(mock.completion_calls() == 10, "7 blocks fan_in 3: " +
                                                    std::to_string(mock.completion_calls()) +
                                                    " calls");
    validate_hierarchical_trace(s.trace, 7);
  }
  for (std::size_t k = 1; k <= 8; ++k) {
    MockBackend mock;
    const auto s = summarize_recurrent(blocks_of(k), t, mock);
    check.expect(mock.completion_calls() == k, "recurrent k=" + std::to_string(k));
    validate_recurrent_trace(s.trace, k);
  }
  return "6, 10 and k calls; traces valid";
}

std::filesystem::path write_corpus(const testing::TempDir& dir, const Corpus& c) {
  const auto path = dir / "corpus.jsonl";
  std::ofstream out(path);
  write_corpus_jsonl(c, out);
  return path;
}

std::string planted_preference(Check& check) {
  const auto start = Clock::now();
  testing::TempDir dir;
  testing::PlantedOptions o;
  o.users = 50;
  const auto corpus_path = write_corpus(dir, testing::planted_corpus(o));
  std::string note;
  for (const char* paradigm : {"hierarchical", "recurrent"}) {
    for (int n : {0, 3}) {
      const auto cfg = PipelineConfig::from_json(
          {{"dataset", {{"path", corpus_path.string()}}},
           {"summarize", {{"paradigm", paradigm}}},
           {"recommend", {{"N", n}}},
           {"output_dir", (dir / (std::string(paradigm) + std::to_string(n))).string()},
           {"cache_dir", "none"}});
      Pipeline p(cfg);
      p.summarize();
      p.evaluate();
      const auto& r = *p.last_report();
      const double recall = r.at_k.at(3).recall;
      check.expect(r.group_count == 50, "group count");
      check.expect(recall >= 0.8, std::string(paradigm) + " N=" + std::to_string(n) +
                                      " Recall@3 " + fmt_double(recall));
      note += (note.empty() ? "" : ", ") + std::string(paradigm) + " N=" +
              std::to_string(n) + " Recall@3 " + fmt_double(recall);
    }
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  check.expect(secs < 60.0, "took " + std::to_string(secs) + "s");
  return note + "; random baseline 0.143";
}

std::string sft_export(Check& check) {
  testing::TempDir dir;
  testing::PlantedOptions o;
  o.users = 50;
  o.positives_per_user = 2;
  o.split = Split::kTrain;
  const auto corpus_path = write_corpus(dir, testing::planted_corpus(o));
  std::vector<std::string> digests;
  for (const char* run : {"a", "b"}) {
    const auto cfg = PipelineConfig::from_json({{"dataset", {{"path", corpus_path.string()}}},
                                                {"output_dir", (dir / run).string()}});
    Pipeline p(cfg);
    const auto stats = p.export_sft();
    check.expect(stats.details.at("positives") == 100, "positives");
    check.expect(stats.details.at("records") == 200, "records");
    const auto bytes = testing::read_file(dir / run / "sft.jsonl");
    digests.push_back(sha256_hex(bytes));

    const auto rc = p.rec_prompt_config();
    const auto store = SummaryStore::load(dir / run / "summaries.jsonl");
    Corpus corpus;
    {
      std::ifstream in(corpus_path);
      corpus = parse_corpus_jsonl(in, cfg.dataset.length_filter);
    }
    std::map<std::string, const LabeledExample*> by_group;
    for (const auto& ex : corpus.examples) by_group[ex.group_id] = &ex;
    std::istringstream lines(bytes);
    std::string line;
    std::size_t count = 0, positives = 0;
    while (std::getline(lines, line)) {
      const auto rec = SftExample::from_json(json::parse(line));
      const auto& ex = *by_group.at(rec.group_id);
      const auto* summary = store.find(ex.sequence.user_id, sequence_digest(ex.sequence));
      const auto rebuilt = build_prompt(summary->summary.text, ex.sequence,
                                        corpus.item(rec.candidate_id), rc);
      check.expect(strip_answer(rec, rc.answers) == rebuilt.full_text,
                   "strip invariance fails for " + rec.group_id);
      ++count;
      positives += rec.label == 1;
    }
    check.expect(count == 200 && positives == 100, "record mix");
  }
  check.expect(digests[0] == digests[1], "digest differs between runs");
  return "100 positives -> 200 records, digest " + digests[0].substr(0, 12);
}

// Answers completions and logprob requests like a small model server.
void serve_like_a_model(const httplib::Request& req, httplib::Response& res) {
  const auto body = json::parse(req.body);
  if (body.contains("logprobs")) {
    const double yes = body.at("prompt").get<std::string>().size() % 7 / 10.0 + 0.2;
    testing::FakeServer::logprobs({{" Yes", std::log(yes)}, {" No", std::log(1 - yes)}})(req, res);
  } else {
    testing::FakeServer::completion("likes things")(req, res);
  }
}

std::string gateway_robustness(Check& check) {
  auto options = [](const testing::FakeServer& s) {
    HttpOptions o;
    o.base_url = s.url();
    o.model = "fake";
    o.timeout = std::chrono::milliseconds(300);
    o.retry.max_attempts = 3;
    return o;
  };
  auto no_sleep = [](std::chrono::milliseconds) {};
  const CompletionRequest req{"prompt", 8, 0.0, {}, "t"};
  {
    testing::FakeServer s;
    s.push(testing::FakeServer::status(429));
    s.push(testing::FakeServer::status(429));
    s.push(testing::FakeServer::completion("ok"));
    HttpBackend http(options(s));
    http.set_sleeper(no_sleep);
    check.expect(http.complete(req).text == "ok", "429 path did not recover");
    check.expect(http.attempts() == 3 && s.hits() == 3, "429 path attempts");
  }
  auto kind_of = [&](HttpBackend& http) -> std::optional<GatewayError::Kind> {
    try {
      http.complete(req);
    } catch (const GatewayError& e) {
      return e.kind();
    }
    return std::nullopt;
  };
  {
    testing::FakeServer s;
    s.set_fallback(testing::FakeServer::delayed(std::chrono::milliseconds(900),
                                                testing::FakeServer::completion("late")));
    HttpBackend http(options(s));
    http.set_sleeper(no_sleep);
    check.expect(kind_of(http) == GatewayError::Kind::kTimeout, "timeout kind");
    check.expect(http.attempts() == 3, "timeout retry budget");
  }
  {
    testing::FakeServer s;
    s.set_fallback(testing::FakeServer::text("{\"choices\": [}"));
    HttpBackend http(options(s));
    http.set_sleeper(no_sleep);
    check.expect(kind_of(http) == GatewayError::Kind::kMalformedResponse, "malformed kind");
    check.expect(s.hits() == 1, "malformed response was retried");
  }
  {
    testing::FakeServer s;
    s.set_fallback(testing::FakeServer::status(503));
    HttpBackend http(options(s));
    http.set_sleeper(no_sleep);
    check.expect(kind_of(http) == GatewayError::Kind::kHttpStatus, "503 kind");
    check.expect(s.hits() == 3, "retry budget: " + std::to_string(s.hits()) + " hits");
  }

  // Two CLI processes over one cache: the second reaches the server zero times.
  testing::TempDir dir;
  testing::PlantedOptions o;
  o.users = 6;
  const auto corpus_path = write_corpus(dir, testing::planted_corpus(o));
  testing::FakeServer server;
  server.set_fallback(serve_like_a_model);
  const json config = {{"dataset", {{"path", corpus_path.string()}}},
                       {"backend", {{"kind", "http"}, {"base_url", server.url()},
                                    {"model", "fake"}}},
                       {"eval", {{"neg_ratio_eval", 5}}},
                       {"cache_dir", (dir / "cache").string()}};
  std::ofstream(dir / "config.json") << config.dump();
  auto run = [&](const std::string& out) {
    const std::string base = std::string(TRSR_CLI_PATH) + " --log-level warn --config " +
                             (dir / "config.json").string() + " --out " +
                             (dir / out).string();
    const int a = std::system((base + " summarize > /dev/null").c_str());
    const int b = std::system((base + " evaluate > /dev/null").c_str());
    return a == 0 && b == 0;
  };
  check.expect(run("first"), "first CLI run failed");
  const int cold = server.hits();
  check.expect(cold > 0, "first run made no calls");
  check.expect(run("second"), "second CLI run failed");
  const int warm = server.hits() - cold;
  check.expect(warm == 0, std::to_string(warm) + " duplicate calls after restart");
  const auto stats = json::parse(testing::read_file(dir / "second" / "evaluate.stats.json"));
  check.expect(stats.at("backend_calls") == 0, "stats report backend calls");
  const auto r1 = testing::read_file(dir / "first" / "report.json");
  const auto r2 = testing::read_file(dir / "second" / "report.json");
  check.expect(r1 == r2, "reports differ across restart");
  return "429x2 then 200 in 3 attempts; timeout, malformed and 5xx paths; restart: " +
         std::to_string(cold) + " cold calls, " + std::to_string(warm) + " warm";
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  criterion("metric-oracle-equivalence", metric_oracle);
  criterion("probability-algebra", probability_algebra);
  criterion("segmentation-properties", segmentation);
  criterion("orchestrator-call-counts", call_counts);
  criterion("planted-preference-end-to-end", planted_preference);
  criterion("sft-export-contract", sft_export);
  criterion("gateway-robustness", gateway_robustness);
  std::cout << (g_failures == 0 ? "all criteria passed" : std::to_string(g_failures) + " criteria failed")
            << std::endl;
  return g_failures == 0 ? 0 : 1;
}
