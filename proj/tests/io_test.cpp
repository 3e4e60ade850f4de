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

#include <cmath>
#include <filesystem>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "htvs/error.hpp"
#include "htvs/io.hpp"
#include "htvs/rng.hpp"

namespace htvs {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
using nlohmann::json;

class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() /
            ("htvs_io_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::kInvalidArgument;
}

// ---------------------------------------------------------------------------
// Score tables

TEST(ScoreTableIoTest, ParsesHeaderLabelsAndIds) {
  const auto t = parse_score_table("id,s1,s2,label\nm1,0.5,-1,1\nm2,2e-3,3,0\n");
  EXPECT_EQ(t.column_names(), (std::vector<std::string>{"s1", "s2"}));
  ASSERT_EQ(t.num_rows(), 2u);
  EXPECT_EQ(t.rows()(1, 0), 2e-3);
  EXPECT_EQ(*t.labels(), (std::vector<int>{1, 0}));
  EXPECT_EQ(*t.ids(), (std::vector<std::string>{"m1", "m2"}));
}

TEST(ScoreTableIoTest, ToleratesBomCrlfAndQuotes) {
  const auto t = parse_score_table("\xEF\xBB\xBFid,\"a,b\",c\r\n\"x,1\",1.5,2\r\n\r\n");
  EXPECT_EQ(t.column_names(), (std::vector<std::string>{"a,b", "c"}));
  EXPECT_EQ(t.rows()(0, 1), 2.0);
  EXPECT_EQ((*t.ids())[0], "x,1");
  EXPECT_FALSE(t.has_labels());
}

TEST(ScoreTableIoTest, NonFiniteScoreNamesLine) {
  try {
    parse_score_table("id,s1,s2\na,1,2\nb,nan,3\n");
    FAIL() << "expected NonFiniteScore";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteScore);
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
  }
  EXPECT_EQ(code_of([] { parse_score_table("id,s1\na,inf\n"); }), ErrorCode::kNonFiniteScore);
}

TEST(ScoreTableIoTest, MalformedInput) {
  try {
    parse_score_table("id,s1,s2\na,1,2\nb,1\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_EQ(e.line(), 3);
  }
  EXPECT_EQ(code_of([] { parse_score_table("id,s1\na,abc\n"); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { parse_score_table("id,s1\na,1.5x\n"); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { parse_score_table("name,s1\na,1\n"); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { parse_score_table(""); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { parse_score_table("id,s1,label\na,1,2\n"); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { parse_score_table("id,s1,s1\na,1,2\n"); }), ErrorCode::kDuplicateColumn);
}

TEST(ScoreTableIoTest, RoundTripIsExact) {
  TempDir dir;
  Rng rng(3);
  Eigen::MatrixXd rows(50, 3);
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c) rows(r, c) = rng.normal() * std::pow(10.0, rng.uniform() * 30 - 15);
  }
  std::vector<int> labels(50);
  for (auto& l : labels) l = rng.uniform() < 0.3;
  const ScoreTable t({"a", "b", "c"}, rows, labels);
  const auto path = dir.path() / "t.csv";
  write_score_table(t, path);
  const ScoreTable back = load_score_table(path);
  EXPECT_EQ(back.rows(), t.rows());
  EXPECT_EQ(back.labels(), t.labels());
  EXPECT_EQ(format_score_table(back), format_score_table(t));
  // Default ids are 1..n.
  EXPECT_EQ((*back.ids())[0], "1");
  EXPECT_EQ((*back.ids())[49], "50");
}

TEST(ScoreTableIoTest, MissingFileIsIoError) {
  EXPECT_EQ(code_of([] { load_score_table("/nonexistent/dir/x.csv"); }), ErrorCode::kIoError);
}

TEST(ScoreTableIoTest, NegateColumns) {
  const auto t = parse_score_table("id,a,b\n1,1.5,2\n2,-3,4\n");
  const auto n = negate_columns(t, {"b"});
  EXPECT_EQ(n.rows()(0, 0), 1.5);
  EXPECT_EQ(n.rows()(0, 1), -2.0);
  EXPECT_EQ(n.rows()(1, 1), -4.0);
  EXPECT_EQ(code_of([&] { negate_columns(t, {"zz"}); }), ErrorCode::kColumnMissing);
}

TEST(ScoreTableTest, SplitIsDisjointAndReproducible) {
  const ScoreTable t = generate_synthetic(0.8, 1000, 1);
  const auto [a, b] = split_table(t, 0.04, 9);
  EXPECT_EQ(a.num_rows(), 40u);
  EXPECT_EQ(b.num_rows(), 960u);
  std::set<std::string> ids(a.ids()->begin(), a.ids()->end());
  for (const auto& id : *b.ids()) EXPECT_FALSE(ids.count(id));
  const auto [a2, b2] = split_table(t, 0.04, 9);
  EXPECT_TRUE(a == a2);
  EXPECT_TRUE(b == b2);
  EXPECT_FALSE(split_table(t, 0.04, 10).first == a);
}

// ---------------------------------------------------------------------------
// Synthetic benchmark

TEST(SyntheticTest, ToeplitzCovariance) {
  const auto c = synthetic_covariance(0.8);
  EXPECT_EQ(c(0, 0), 1.0);
  EXPECT_EQ(c(0, 1), 0.8);
  EXPECT_NEAR(c(0, 2), 0.7, 1e-15);
  EXPECT_NEAR(c(3, 0), 0.6, 1e-15);
  EXPECT_EQ(c(1, 2), 0.8);
  EXPECT_EQ(code_of([] { synthetic_covariance(1.0); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { synthetic_covariance(-0.95); }), ErrorCode::kNotPositiveDefinite);
}

TEST(SyntheticTest, GenerationIsSeeded) {
  const auto a = generate_synthetic(0.5, 200, 4);
  const auto b = generate_synthetic(0.5, 200, 4);
  EXPECT_EQ(format_score_table(a), format_score_table(b));
  EXPECT_NE(format_score_table(a), format_score_table(generate_synthetic(0.5, 200, 5)));
  EXPECT_EQ(a.column_names(), (std::vector<std::string>{"s1", "s2", "s3", "s4"}));
}

TEST(SyntheticTest, PipelineShape) {
  const auto p = paper_synthetic_pipeline();
  ASSERT_EQ(p.num_stages(), 4u);
  EXPECT_EQ(p.stages[3].cost, 1000.0);
  EXPECT_EQ(p.stages[2].column, 2u);
  EXPECT_EQ(p.final_threshold, 3.0902);
  EXPECT_EQ(p.population, 100000);
}

// ---------------------------------------------------------------------------
// Reals and JSON forms

TEST(JsonFormTest, RealTokens) {
  EXPECT_EQ(parse_real("-inf"), -kInf);
  EXPECT_EQ(parse_real("inf"), kInf);
  EXPECT_EQ(parse_real(" 2.5 "), 2.5);
  EXPECT_EQ(code_of([] { parse_real("x"); }), ErrorCode::kParseError);
  EXPECT_EQ(format_real(-kInf), "-inf");
  EXPECT_EQ(format_real(400000.0), "400000");
  EXPECT_EQ(format_real(1.0 / 3.0), "0.333333333");
  EXPECT_EQ(format_real(15599934.4), "15599934.4");
  EXPECT_EQ(format_real(1.23456789012e-20), "1.23456789e-20");
}

TEST(JsonFormTest, PolicyRoundTrip) {
  const Policy p{{-kInf, 0.25, kInf}};
  const json j = to_json(p);
  EXPECT_EQ(j.dump(), R"(["-inf",0.25,"inf"])");
  EXPECT_EQ(policy_from_json(j), p);
  EXPECT_EQ(code_of([] { policy_from_json(json{{"a", 1}}); }), ErrorCode::kParseError);
}

TEST(JsonFormTest, GmmRoundTripIsExact) {
  TempDir dir;
  std::vector<GaussianComponent> comps(2);
  Eigen::MatrixXd c0(2, 2), c1(2, 2);
  c0 << 1.0 / 3.0, 0.1, 0.1, 2.0;
  c1 << 0.7, -0.2, -0.2, 0.9;
  comps[0] = {0.3, Eigen::Vector2d(0.123456789012345, -1.0), c0};
  comps[1] = {0.7, Eigen::Vector2d(2.0, 1.0 / 7.0), c1};
  const GmmModel m(comps, {"x", "y"});
  write_gmm(m, dir.path() / "m.json");
  const GmmModel back = load_gmm(dir.path() / "m.json");
  ASSERT_EQ(back.num_components(), 2u);
  EXPECT_EQ(back.column_names(), m.column_names());
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(back.components()[k].weight, m.components()[k].weight);
    EXPECT_EQ(back.components()[k].mean, m.components()[k].mean);
    EXPECT_EQ(back.components()[k].cov, m.components()[k].cov);
  }
  json bad = to_json(m);
  bad["dim"] = 3;
  EXPECT_THROW(gmm_from_json(bad), Error);
}

TEST(JsonFormTest, ReportsUseNineDigitsAndStableKeys) {
  OptimizationResult r;
  r.policy = Policy{{-kInf, 0.123456789123, 1.5}};
  r.report.reward = 0.000986849331234;
  r.report.expected_counts = {100000, 72115.745123, 32210.29, 10076.93};
  r.report.expected_total_cost = 14119116.2345;
  r.report.relative_reward = 0.0132580114;
  r.report.normalized_cost = 0.0352977905;
  r.report.joint_value = 0.024277901;
  r.evaluations = 17;
  const std::string once = to_json(r).dump();
  EXPECT_EQ(once.find("0.123456789123"), std::string::npos);
  EXPECT_NE(once.find("0.123456789"), std::string::npos);
  const json parsed = json::parse(once);
  for (const char* key : {"policy", "report", "feasible", "evaluations"}) EXPECT_TRUE(parsed.contains(key));
  for (const char* key :
       {"reward", "expected_counts", "expected_total_cost", "relative_reward", "normalized_cost", "joint_value"}) {
    EXPECT_TRUE(parsed["report"].contains(key)) << key;
  }
  // Rounding is idempotent, so a reparsed report prints identically.
  OptimizationResult again = r;
  again.policy = policy_from_json(parsed["policy"]);
  again.report.reward = parsed["report"]["reward"].get<double>();
  EXPECT_EQ(to_json(again).dump(), once);
}

TEST(JsonFormTest, SimReportNulls) {
  SimReport rep;
  rep.survivors_per_stage = {10, 0};
  rep.total_cost = 10;
  rep.policy_used = Policy{{kInf}};
  const json j = to_json(rep);
  EXPECT_TRUE(j["effective_cost"].is_null());
  EXPECT_TRUE(j["savings_vs_reference"].is_null());
  EXPECT_TRUE(j["metrics"].is_null());
  EXPECT_EQ(j["policy_used"][0], "inf");
  rep.metrics = ClassificationMetrics{0.5, std::nullopt, 1.0, std::nullopt};
  const json k = to_json(rep);
  EXPECT_EQ(k["metrics"]["accuracy"], 0.5);
  EXPECT_TRUE(k["metrics"]["f1"].is_null());
}

TEST(BudgetCurveCsvTest, RoundTripWithInfinities) {
  BudgetCurve c;
  c.points.push_back({5e4, 0.0, Policy{{kInf, kInf}}, false, std::nullopt});
  c.points.push_back({1e7, 97.0123456789, Policy{{-kInf, 1.25}}, true, 96.0});
  const std::string csv = format_budget_curve_csv(c);
  EXPECT_EQ(csv,
            "budget,expected_detected,threshold_1,threshold_2,empirical_detected\n"
            "50000,0,inf,inf,\n"
            "10000000,97.0123457,-inf,1.25,96\n");
  const auto back = parse_budget_curve_csv(csv);
  ASSERT_EQ(back.points.size(), 2u);
  EXPECT_FALSE(back.points[0].feasible);
  EXPECT_TRUE(back.points[1].feasible);
  EXPECT_EQ(back.points[1].policy, c.points[1].policy);
  EXPECT_FALSE(back.points[0].empirical_detected);
  EXPECT_EQ(*back.points[1].empirical_detected, 96.0);
  EXPECT_EQ(format_budget_curve_csv(back), csv);
  EXPECT_EQ(code_of([] { parse_budget_curve_csv("budget,detected\n1,2\n"); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { parse_budget_curve_csv("budget,expected_detected\n1,x\n"); }), ErrorCode::kParseError);
}

TEST(ReportFileTest, FormatsAndFiles) {
  TempDir dir;
  OptimizationResult r;
  r.policy = Policy{{0.5}};
  r.report.expected_counts = {1, 1};
  write_report(r, dir.path() / "r.json", ReportFormat::kJson);
  EXPECT_EQ(json::parse(read_text_file(dir.path() / "r.json"))["policy"][0], 0.5);
  EXPECT_THROW(write_report(r, dir.path() / "r.csv", ReportFormat::kCsv), Error);
  BudgetCurve c;
  c.points.push_back({1e6, 3.0, Policy{{0.5}}, true, std::nullopt});
  write_report(c, dir.path() / "c.csv", ReportFormat::kCsv);
  EXPECT_EQ(load_budget_curve(dir.path() / "c.csv").points.size(), 1u);
  write_report(c, dir.path() / "c.json", ReportFormat::kJson);
  EXPECT_EQ(json::parse(read_text_file(dir.path() / "c.json"))["points"].size(), 1u);
  EXPECT_EQ(code_of([&] { write_text_file(dir.path() / "no" / "such" / "f", "x"); }), ErrorCode::kIoError);
}

// ---------------------------------------------------------------------------
// Campaign configuration

json minimal_config() {
  return json::parse(R"({
    "pipeline": {"stages": [{"name": "s1", "cost": 1, "column": 0}, {"name": "s4", "cost": 1000, "column": 3}],
                 "final_threshold": 3.0902, "population": 100000},
    "mode": {"joint": {"alpha": 0.5}},
    "distribution": {"synthetic": {"rho": 0.8}},
    "seed": 42
  })");
}

TEST(CampaignConfigTest, MinimalConfigAndSeedDefaults) {
  const auto c = campaign_from_json(minimal_config());
  EXPECT_EQ(c.pipeline.num_stages(), 2u);
  EXPECT_EQ(c.pipeline.stages[1].column, 3u);
  EXPECT_EQ(std::get<JointMode>(c.mode).alpha, 0.5);
  EXPECT_EQ(std::get<SyntheticDistribution>(c.distribution).rho, 0.8);
  EXPECT_EQ(c.integration.seed, 42u);
  EXPECT_EQ(c.optimizer.seed, 42u);
  EXPECT_EQ(c.em.seed, 42u);
  EXPECT_EQ(c.optimizer.integration.n_points, 8192);
  EXPECT_EQ(c.optimizer.integration.n_randomizations, 16);
}

TEST(CampaignConfigTest, OverridesAndRoundTrip) {
  json j = minimal_config();
  j["mode"] = {{"budgeted", {{"budget", 1e7}}}};
  j["integration"] = {{"n_points", 1024}, {"n_randomizations", 4}, {"seed", 7}};
  j["optimizer"] = {{"n_polish", 3}, {"threads", 2}, {"polish_points", 256}, {"search_points", 128}};
  j["em"] = {{"max_iters", 50}};
  j["negate"] = {"s1"};
  const auto c = campaign_from_json(j);
  EXPECT_EQ(std::get<BudgetedMode>(c.mode).budget, 1e7);
  EXPECT_EQ(c.optimizer.integration.n_points, 1024);
  EXPECT_EQ(c.optimizer.integration.seed, 7u);
  EXPECT_EQ(c.optimizer.n_polish, 3);
  EXPECT_EQ(c.optimizer.threads, 2);
  EXPECT_EQ(c.optimizer.polish_integration.n_points, 256);
  EXPECT_EQ(c.optimizer.search_integration.n_points, 128);
  EXPECT_EQ(c.em.max_iters, 50);
  EXPECT_EQ(c.negate, (std::vector<std::string>{"s1"}));
  const json out = campaign_to_json(c);
  EXPECT_EQ(campaign_to_json(campaign_from_json(out)), out);
}

TEST(CampaignConfigTest, FitDefaults) {
  json j = minimal_config();
  j["distribution"] = {{"fit", {{"path", "scores.csv"}}}};
  const auto c = campaign_from_json(j);
  const auto& f = std::get<FitDistribution>(c.distribution);
  EXPECT_EQ(f.path, "scores.csv");
  EXPECT_EQ(f.train_fraction, 0.04);
  EXPECT_FALSE(f.k);
  j["distribution"]["fit"]["k"] = 2;
  EXPECT_EQ(*std::get<FitDistribution>(campaign_from_json(j).distribution).k, 2);
}

TEST(CampaignConfigTest, Rejections) {
  auto with = [](const char* ptr, const json& v) {
    json j = minimal_config();
    j[json::json_pointer(ptr)] = v;
    return j;
  };
  EXPECT_EQ(code_of([&] { campaign_from_json(with("/bogus", 1)); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { campaign_from_json(with("/mode/joint/alpha", 1.5)); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { campaign_from_json(with("/pipeline/stages/0/cost", -1)); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { campaign_from_json(with("/pipeline/stages/0/cost", "cheap")); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([&] { campaign_from_json(with("/integration", json{{"n_points", 0}})); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { campaign_from_json(with("/distribution", json{{"unknown", 1}})); }),
            ErrorCode::kInvalidArgument);
  json no_pipeline = minimal_config();
  no_pipeline.erase("pipeline");
  EXPECT_EQ(code_of([&] { campaign_from_json(no_pipeline); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { campaign_from_json(json::array()); }), ErrorCode::kParseError);
}

TEST(CampaignConfigTest, LoadFromFile) {
  TempDir dir;
  write_text_file(dir.path() / "c.json", minimal_config().dump());
  EXPECT_EQ(load_campaign(dir.path() / "c.json").seed, 42u);
  write_text_file(dir.path() / "bad.json", "{not json");
  EXPECT_EQ(code_of([&] { load_campaign(dir.path() / "bad.json"); }), ErrorCode::kParseError);
}

TEST(CampaignConfigTest, PresetMatchesBenchmark) {
  const auto c = paper_synthetic_campaign(0.5);
  EXPECT_EQ(c.pipeline.num_stages(), 4u);
  EXPECT_EQ(std::get<JointMode>(c.mode).alpha, 0.5);
  EXPECT_EQ(std::get<SyntheticDistribution>(c.distribution).rho, 0.5);
  EXPECT_THROW(paper_synthetic_campaign(1.5), Error);
}

TEST(ResolveDistributionTest, FitHoldsOutEvaluationRows) {
  TempDir dir;
  write_score_table(generate_synthetic(0.8, 2000, 11), dir.path() / "scores.csv");
  json j = minimal_config();
  j["distribution"] = {{"fit", {{"path", "scores.csv"}, {"train_fraction", 0.1}, {"k", 1}}}};
  const auto c = campaign_from_json(j);
  const auto r = resolve_distribution(c, dir.path());
  ASSERT_TRUE(r.eval_table);
  EXPECT_EQ(r.eval_table->num_rows(), 1800u);
  EXPECT_EQ(r.model.num_components(), 1u);
  EXPECT_FALSE(r.selection);
  EXPECT_NEAR(r.model.components()[0].cov(0, 1), 0.8, 0.1);

  j["distribution"]["fit"].erase("k");
  j["distribution"]["fit"]["k_max"] = 2;
  const auto auto_k = resolve_distribution(campaign_from_json(j), dir.path());
  ASSERT_TRUE(auto_k.selection);
  EXPECT_EQ(auto_k.selection->bic.size(), 2u);

  j["distribution"] = {{"known", {{"path", "missing.json"}}}};
  EXPECT_EQ(code_of([&] { resolve_distribution(campaign_from_json(j), dir.path()); }), ErrorCode::kIoError);
}

}  // namespace
}  // namespace htvs
