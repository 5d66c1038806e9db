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

#include "trsr/template.hpp"

#include <gtest/gtest.h>

namespace trsr {
namespace {

TEST(Template, FindsPlaceholdersInOrder) {
  EXPECT_EQ(placeholders_in("a {X} b {Y_2} {lower} {X}"),
            (std::vector<std::string>{"X", "Y_2", "X"}));
}

TEST(Template, ValidateRequiresEachOnce) {
  EXPECT_NO_THROW(validate_template("{A} and {B}", {"A", "B"}, "t"));
  EXPECT_THROW(validate_template("{A}", {"A", "B"}, "t"), TemplateError);
  EXPECT_THROW(validate_template("{A} {A} {B}", {"A", "B"}, "t"), TemplateError);
  EXPECT_THROW(validate_template("{A} {B} {C}", {"A", "B"}, "t"), TemplateError);
}

TEST(Template, ErrorNamesTheTemplate) {
  try {
    validate_template("nothing", {"BLOCK_TEXT"}, "block_template");
    FAIL();
  } catch (const TemplateError& e) {
    EXPECT_NE(std::string(e.what()).find("block_template"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("BLOCK_TEXT"), std::string::npos);
  }
}

TEST(Template, FillDoesNotRescanValues) {
  EXPECT_EQ(fill_template("<{A}>", {{"A", "{A}"}}), "<{A}>");
  EXPECT_EQ(fill_template("{A}{B}", {{"A", "{B}"}, {"B", "x"}}), "{B}x");
}

TEST(Template, FillKeepsLiteralBraces) {
  EXPECT_EQ(fill_template("{json: 1} {A}", {{"A", "v"}}), "{json: 1} v");
}

TEST(Template, FillThrowsOnMissingValue) {
  EXPECT_THROW(fill_template("{A} {B}", {{"A", "x"}}), TemplateError);
}

}  // namespace
}  // namespace trsr
