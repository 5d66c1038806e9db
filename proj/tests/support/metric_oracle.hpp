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

#include <algorithm>
#include <map>
#include <string>
#include <tuple>
#include <vector>

namespace trsr::testing {

struct OracleCandidate {
  std::string item_id;
  double p = 0.0;
  bool positive = false;
};

struct OracleMetrics {
  double recall = 0.0;
  double mrr = 0.0;
};

// 1-based rank of the positive after sorting by descending p, ties by id.
inline std::size_t oracle_rank(std::vector<OracleCandidate> g) {
  std::sort(g.begin(), g.end(), [](const OracleCandidate& a, const OracleCandidate& b) {
    return std::tie(b.p, a.item_id) < std::tie(a.p, b.item_id);
  });
  std::size_t rank = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i].positive) rank = i + 1;
  }
  return rank;
}

// Straightforward reference: sort every group, walk to the positive, average
// in the order given.
inline std::map<std::size_t, OracleMetrics> oracle_metrics(
    std::vector<std::vector<OracleCandidate>> groups, const std::vector<std::size_t>& ks) {
  std::map<std::size_t, OracleMetrics> out;
  for (auto k : ks) out[k] = {};
  for (const auto& g : groups) {
    const auto rank = oracle_rank(g);
    for (auto k : ks) {
      if (rank >= 1 && rank <= k) {
        out[k].recall += 1.0;
        out[k].mrr += 1.0 / static_cast<double>(rank);
      }
    }
  }
  for (auto& [k, m] : out) {
    m.recall /= static_cast<double>(groups.size());
    m.mrr /= static_cast<double>(groups.size());
  }
  return out;
}

}  // namespace trsr::testing
