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

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace trsr {

// Thin converters from the raw dataset dumps to the JSONL corpus schema. Only
// positive interactions are emitted; negatives come from the sampling
// protocol. Every record lands in the "train" split until split_corpus runs.

// MIND: `dir` holds news.tsv and behaviors.tsv. Items carry the four textual
// attributes title, category, subcategory, abstract.
void convert_mind(const std::filesystem::path& dir, std::ostream& jsonl);

// Amazon-M2: `dir` holds products_train.csv and sessions_train.csv. Items carry
// every product column except the id (ten attributes in the public release)
// and are keyed "<locale>:<id>" because product ids repeat across locales.
void convert_amazon_m2(const std::filesystem::path& dir, std::ostream& jsonl);

// RFC 4180 record reader (quoted fields may contain separators, doubled
// quotes and newlines). Returns false at end of input.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields);

}  // namespace trsr
