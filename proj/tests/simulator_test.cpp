// Copyright 2026 The htvs-opt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "htvs/error.hpp"
#include "htvs/io.hpp"
#include "htvs/optimizer.hpp"
#include "htvs/rng.hpp"
#include "htvs/simulator.hpp"

namespace htvs {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

PipelineSpec ab_spec() {
  PipelineSpec s;
  s.stages = {{"a", 1.0, 0}, {"b", 10.0, 1}};
  s.final_threshold = 0.5;
  s.population = 6;
  return s;
}

// Two true positives, one false positive, one false negative (dropped at
// stage a) and two true negatives.
ScoreTable six_rows() {
  Eigen::MatrixXd rows(6, 2);
  rows << 1.0, 1.0,   //
      0.5, 0.8,       //
      0.2, 0.9,       //
      -1.0, 2.0,      //
      0.3, 0.1,       //
      -0.5, -1.0;
  return ScoreTable({"a", "b"}, rows, std::vector<int>{1, 1, 0, 1, 0, 0});
}

TEST(SimulatorTest, HandExample) {
  const auto rep = run_policy(six_rows(), ab_spec(), Policy{{0.0}});
  EXPECT_EQ(rep.survivors_per_stage, (std::vector<long long>{6, 4}));
  EXPECT_EQ(rep.detected, 3);
  EXPECT_EQ(rep.total_cost, 46.0);
  ASSERT_TRUE(rep.effective_cost);
  EXPECT_DOUBLE_EQ(*rep.effective_cost, 46.0 / 3.0);
  EXPECT_EQ(rep.reference_detected, 4);
  ASSERT_TRUE(rep.savings_vs_reference);
  EXPECT_DOUBLE_EQ(*rep.savings_vs_reference, 1.0 - (46.0 / 3.0) / 15.0);
}

TEST(SimulatorTest, ConfusionCounts) {
  const ScoreTable t = six_rows();
  const auto rep = run_policy(t, ab_spec(), Policy{{0.0}});
  ASSERT_TRUE(rep.metrics);
  const auto m = classification_metrics(rep, t);
  EXPECT_DOUBLE_EQ(*m.accuracy, 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(*m.sensitivity, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(*m.specificity, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(*m.f1, 4.0 / 6.0);
  EXPECT_EQ(*rep.metrics->accuracy, *m.accuracy);
}

TEST(SimulatorTest, ZeroDenominatorsAreNull) {
  Eigen::MatrixXd rows(3, 2);
  rows << 1.0, 1.0, 0.0, 0.0, 2.0, 2.0;
  const ScoreTable t({"a", "b"}, rows, std::vector<int>{0, 0, 0});
  const auto rep = run_policy(t, ab_spec(), Policy{{kInf}});
  const auto m = classification_metrics(rep, t);
  EXPECT_FALSE(m.sensitivity);
  EXPECT_FALSE(m.f1);
  ASSERT_TRUE(m.specificity);
  EXPECT_EQ(*m.specificity, 1.0);
  EXPECT_EQ(*m.accuracy, 1.0);
}

TEST(SimulatorTest, NoLabels) {
  Eigen::MatrixXd rows(1, 2);
  rows << 1.0, 1.0;
  const ScoreTable t({"a", "b"}, rows);
  const auto rep = run_policy(t, ab_spec(), Policy{{0.0}});
  EXPECT_FALSE(rep.metrics);
  try {
    classification_metrics(rep, t);
    FAIL() << "expected NoLabels";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoLabels);
  }
}

TEST(SimulatorTest, PassAllChargesEveryone) {
  const ScoreTable t = generate_synthetic(0.8, 5000, 3);
  const PipelineSpec spec = paper_synthetic_pipeline();
  const auto rep = run_policy(t, spec, Policy::pass_all(4));
  for (auto s : rep.survivors_per_stage) EXPECT_EQ(s, 5000);
  EXPECT_EQ(rep.total_cost, 5000.0 * 1111.0);
  EXPECT_EQ(rep.detected, rep.reference_detected);
}

TEST(SimulatorTest, BlockAllDetectsNothing) {
  const ScoreTable t = generate_synthetic(0.8, 5000, 3);
  const auto rep = run_policy(t, paper_synthetic_pipeline(), Policy::block_all(4));
  EXPECT_EQ(rep.survivors_per_stage, (std::vector<long long>{5000, 0, 0, 0}));
  EXPECT_EQ(rep.detected, 0);
  EXPECT_EQ(rep.total_cost, 5000.0);
  EXPECT_FALSE(rep.effective_cost);
  EXPECT_FALSE(rep.savings_vs_reference);
}

TEST(SimulatorTest, MissingColumnIsNamed) {
  PipelineSpec spec = ab_spec();
  spec.stages[1].name = "zeta";
  try {
    run_policy(six_rows(), spec, Policy{{0.0}});
    FAIL() << "expected ColumnMissing";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kColumnMissing);
    EXPECT_NE(std::string(e.what()).find("zeta"), std::string::npos);
  }
  EXPECT_THROW(run_baseline(six_rows(), spec, 0.5), Error);
}

TEST(SimulatorTest, EmptyTable) {
  const ScoreTable t({"a", "b"}, Eigen::MatrixXd(0, 2));
  EXPECT_THROW(run_policy(t, ab_spec(), Policy{{0.0}}), Error);
  EXPECT_THROW(run_baseline(t, ab_spec(), 0.5), Error);
  EXPECT_THROW(baseline_thresholds(t, ab_spec(), 0.5), Error);
}

TEST(SimulatorTest, BaselineTiesAllPass) {
  Eigen::MatrixXd rows(4, 2);
  rows << 3.0, 1.0, 2.0, 1.0, 2.0, 1.0, 1.0, 1.0;
  const ScoreTable t({"a", "b"}, rows);
  const auto rep = run_baseline(t, ab_spec(), 0.5);
  EXPECT_EQ(rep.survivors_per_stage, (std::vector<long long>{4, 3}));
  EXPECT_EQ(rep.policy_used.thresholds, (std::vector<double>{2.0}));
  ASSERT_TRUE(rep.baseline_top_fraction);
  EXPECT_EQ(*rep.baseline_top_fraction, 0.5);
  EXPECT_THROW(run_baseline(t, ab_spec(), 0.0), Error);
  EXPECT_THROW(run_baseline(t, ab_spec(), 1.5), Error);
}

TEST(SimulatorTest, BaselineTenPercentOnSyntheticTable) {
  const ScoreTable t = generate_synthetic(0.8, 100000, 0);
  const auto rep = run_baseline(t, paper_synthetic_pipeline(), 0.1);
  EXPECT_EQ(rep.survivors_per_stage, (std::vector<long long>{100000, 10000, 1000, 100}));
  EXPECT_EQ(rep.total_cost, 400000.0);
}

TEST(SimulatorTest, BaselineFullFractionIsPassAll) {
  const ScoreTable t = generate_synthetic(0.8, 2000, 8);
  const PipelineSpec spec = paper_synthetic_pipeline();
  const auto base = run_baseline(t, spec, 1.0);
  const auto all = run_policy(t, spec, Policy::pass_all(4));
  EXPECT_EQ(base.survivors_per_stage, all.survivors_per_stage);
  EXPECT_EQ(base.detected, all.detected);
  EXPECT_EQ(base.total_cost, all.total_cost);
  EXPECT_EQ(base.detected_rows, all.detected_rows);
  EXPECT_EQ(baseline_thresholds(t, spec, 1.0), Policy::pass_all(4));
}

TEST(SimulatorTest, BaselineMedianOfNormalColumn) {
  // Sample median of n standard normals has sd sqrt(pi / 2 / n).
  const std::size_t n = 20001;
  Rng rng(4);
  Eigen::MatrixXd rows(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    rows(static_cast<Eigen::Index>(i), 0) = rng.normal();
    rows(static_cast<Eigen::Index>(i), 1) = 0.0;
  }
  const ScoreTable t({"a", "b"}, rows);
  const Policy p = baseline_thresholds(t, ab_spec(), 0.5);
  EXPECT_NEAR(p.thresholds[0], 0.0, 3.0 * std::sqrt(std::numbers::pi / 2.0 / static_cast<double>(n)));
}

class SimulatorPropertyTest : public ::testing::TestWithParam<int> {};

TEST_P(SimulatorPropertyTest, Invariants) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  Rng rng(seed, 77);
  const ScoreTable t = generate_synthetic(0.4 + 0.5 * rng.uniform(), 3000, seed);
  const PipelineSpec spec = paper_synthetic_pipeline();
  Policy p;
  for (int i = 0; i < 3; ++i) p.thresholds.push_back(rng.uniform() < 0.15 ? -kInf : -1.5 + 3.0 * rng.uniform());
  for (const auto& rep : {run_policy(t, spec, p), run_baseline(t, spec, 0.05 + 0.9 * rng.uniform())}) {
    const auto& s = rep.survivors_per_stage;
    ASSERT_EQ(s.size(), 4u);
    EXPECT_EQ(s[0], 3000);
    for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LE(s[i], s[i - 1]);
    EXPECT_LE(rep.detected, s.back());
    double cost = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) cost += spec.stages[i].cost * static_cast<double>(s[i]);
    EXPECT_EQ(rep.total_cost, cost);
    EXPECT_EQ(rep.effective_cost.has_value(), rep.detected > 0);
  }
}

// The thresholds realized by the baseline reproduce its selection exactly
// when applied as an ordinary policy.
TEST_P(SimulatorPropertyTest, BaselineAndPolicyAgree) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  Rng rng(seed, 78);
  const ScoreTable t = generate_synthetic(0.8, 4000, 100 + seed);
  const PipelineSpec spec = paper_synthetic_pipeline();
  const double frac = 0.05 + 0.9 * rng.uniform();
  const auto base = run_baseline(t, spec, frac);
  const Policy p = baseline_thresholds(t, spec, frac);
  EXPECT_EQ(p, base.policy_used);
  const auto pol = run_policy(t, spec, p);
  EXPECT_EQ(pol.survivors_per_stage, base.survivors_per_stage);
  EXPECT_EQ(pol.detected_rows, base.detected_rows);
  EXPECT_EQ(pol.total_cost, base.total_cost);
}

INSTANTIATE_TEST_SUITE_P(Random, SimulatorPropertyTest, ::testing::Range(0, 20));

}  // namespace
}  // namespace htvs
