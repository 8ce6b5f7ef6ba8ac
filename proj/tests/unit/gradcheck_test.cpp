/* Copyright 2026 The Sf3CNN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#include <gtest/gtest.h>

#include <algorithm>

#include "sf3cnn/error.hpp"
#include "sf3cnn/gradcheck.hpp"

namespace sf3cnn::gradcheck {
namespace {

TEST(Gradcheck, RelativeErrorDefinition) {
  EXPECT_NEAR(relative_error(1.0, 1.01, 1e-6), 0.01 / 1.01, 1e-15);
  EXPECT_DOUBLE_EQ(relative_error(-2.0, -2.0, 1e-6), 0.0);
  // Below the floor the comparison becomes absolute.
  EXPECT_DOUBLE_EQ(relative_error(1e-9, 0.0, 1e-6), 1e-3);
  EXPECT_DOUBLE_EQ(error_floor(Precision::f64, 1e6), 1e-6);
  EXPECT_DOUBLE_EQ(error_floor(Precision::f32, 1.0), 1e-3);
  EXPECT_DOUBLE_EQ(error_floor(Precision::f32, 100.0), 1e-2);
}

TEST(Gradcheck, DefaultTolerances) {
  EXPECT_DOUBLE_EQ(default_tolerance("loss", Precision::f64), 1e-4);
  EXPECT_DOUBLE_EQ(default_tolerance("layer:conv3d", Precision::f64), 1e-5);
  EXPECT_DOUBLE_EQ(default_tolerance("model", Precision::f64), 1e-5);
  EXPECT_DOUBLE_EQ(default_tolerance("layer:all", Precision::f32), 1e-3);
}

TEST(Gradcheck, PrecisionNames) {
  EXPECT_EQ(parse_precision("f32"), Precision::f32);
  EXPECT_EQ(parse_precision("64"), Precision::f64);
  EXPECT_THROW(parse_precision("f16"), ConfigError);
}

class ScopeTest : public ::testing::TestWithParam<std::tuple<std::string, Precision, std::uint64_t>> {};

TEST_P(ScopeTest, Passes) {
  const auto& [scope, precision, seed] = GetParam();
  Options opts;
  opts.precision = precision;
  opts.seed = seed;
  const Report r = run(scope, opts);
  EXPECT_FALSE(r.groups.empty());
  for (const auto& g : r.groups) {
    EXPECT_TRUE(g.passed) << g.name << " max_rel_err=" << g.max_rel_err;
    EXPECT_GT(g.checked, 0u) << g.name;
    EXPECT_LE(g.max_rel_err, r.tolerance) << g.name;
  }
  EXPECT_TRUE(r.passed()) << format_report(r);
}

INSTANTIATE_TEST_SUITE_P(
    Double, ScopeTest,
    ::testing::Combine(::testing::Values("loss", "layer:conv3d", "layer:prelu", "layer:batchnorm",
                                         "layer:pool", "layer:linear", "layer:residual", "model"),
                       ::testing::Values(Precision::f64), ::testing::Values(7u, 21u)));
INSTANTIATE_TEST_SUITE_P(
    Float, ScopeTest,
    ::testing::Combine(::testing::Values("loss", "layer:all"), ::testing::Values(Precision::f32),
                       ::testing::Values(7u, 21u)));

TEST(Gradcheck, LossScopeCoversEveryMarginAndBlend) {
  const auto cases = cases_for("loss", 7);
  auto has = [&](const std::string& name) {
    return std::any_of(cases.begin(), cases.end(), [&](const Case& c) { return c.name == name; });
  };
  for (int m = 1; m <= 4; ++m) {
    const std::string base = "asoftmax.m" + std::to_string(m);
    EXPECT_TRUE(has(base)) << base;
    EXPECT_TRUE(has(base + ".lambda7.5")) << base;
  }
  EXPECT_TRUE(has("cross_entropy"));
}

TEST(Gradcheck, CorruptedBackwardIsCaught) {
  for (Precision p : {Precision::f64, Precision::f32}) {
    Options opts;
    opts.precision = p;
    const Report r = run("fixture:corrupted", opts);
    EXPECT_FALSE(r.passed());
    bool weight_flagged = false;
    for (const auto& g : r.groups) {
      if (g.name.find("weight") != std::string::npos) weight_flagged |= !g.passed;
    }
    EXPECT_TRUE(weight_flagged);
  }
}

TEST(Gradcheck, ScopeErrors) {
  EXPECT_THROW(run("layer:softmax", {}), ConfigError);
  Options f32;
  f32.precision = Precision::f32;
  EXPECT_THROW(run("model", f32), ConfigError);
  const auto s = scopes();
  EXPECT_NE(std::find(s.begin(), s.end(), "layer:all"), s.end());
}

}  // namespace
}  // namespace sf3cnn::gradcheck
