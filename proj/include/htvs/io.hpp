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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "htvs/gmm.hpp"
#include "htvs/objective.hpp"
#include "htvs/optimizer.hpp"
#include "htvs/score_table.hpp"
#include "htvs/simulator.hpp"

namespace htvs {

// ---------------------------------------------------------------------------
// Score tables: UTF-8 CSV, header `id,<stage1>,...,<stageN>[,label]`.
// ---------------------------------------------------------------------------

ScoreTable load_score_table(const std::filesystem::path& path);
ScoreTable parse_score_table(const std::string& text);

/// Scores are written in shortest round-trip form, so loading gives back the
/// same doubles.
void write_score_table(const ScoreTable& table, const std::filesystem::path& path);
std::string format_score_table(const ScoreTable& table);

/// Returns a copy with the named columns multiplied by -1.
ScoreTable negate_columns(const ScoreTable& table, const std::vector<std::string>& names);

// ---------------------------------------------------------------------------
// Synthetic benchmark: four unit-variance stages with Toeplitz correlation
// rho, rho - 0.1, rho - 0.2 at lags 1, 2, 3.
// ---------------------------------------------------------------------------

Eigen::MatrixXd synthetic_covariance(double rho);
GmmModel synthetic_model(double rho);
ScoreTable generate_synthetic(double rho, std::size_t n, std::uint64_t seed);

inline constexpr double kPaperFinalThreshold = 3.0902;
inline constexpr long long kPaperPopulation = 100000;

/// Stages s1..s4 with costs 1, 10, 100, 1000 mapped to columns 0..3.
PipelineSpec paper_synthetic_pipeline();

// ---------------------------------------------------------------------------
// Campaign configuration.
// ---------------------------------------------------------------------------

struct BudgetedMode {
  double budget = 0.0;
};
struct JointMode {
  double alpha = 0.5;
};

struct KnownDistribution {
  std::string path;  // GmmModel JSON
};
struct FitDistribution {
  std::string path;  // score table to fit on
  double train_fraction = 0.04;
  std::optional<int> k;  // nullopt: choose by BIC up to k_max
  int k_max = 5;
};
struct SyntheticDistribution {
  double rho = 0.8;
};

struct CampaignConfig {
  PipelineSpec pipeline;
  std::variant<BudgetedMode, JointMode> mode = JointMode{};
  std::variant<KnownDistribution, FitDistribution, SyntheticDistribution> distribution = SyntheticDistribution{};
  IntegrationConfig integration;
  OptConfig optimizer;
  EmConfig em;
  std::vector<std::string> negate;
  std::uint64_t seed = 0;
};

CampaignConfig campaign_from_json(const nlohmann::json& j);
nlohmann::json campaign_to_json(const CampaignConfig& config);
CampaignConfig load_campaign(const std::filesystem::path& path);

/// The score distribution a campaign optimizes against. For `fit` sources the
/// table is split by the campaign seed; the held-out rows are kept for
/// evaluation and never seen by EM.
struct ResolvedDistribution {
  GmmModel model;
  std::optional<ScoreTable> eval_table;
  std::optional<ComponentSelection> selection;  // set when k was chosen by BIC
};

/// Relative paths are resolved against `base_dir`.
ResolvedDistribution resolve_distribution(const CampaignConfig& config, const std::filesystem::path& base_dir);

/// `paper-synthetic` preset: known Gaussian with Toeplitz covariance, costs
/// 1/10/100/1000, final threshold 3.0902, 1e5 candidates.
CampaignConfig paper_synthetic_campaign(double rho);

// ---------------------------------------------------------------------------
// JSON forms. Non-finite thresholds are written as the strings "-inf"/"inf".
// Reals are rounded to 9 significant digits.
// ---------------------------------------------------------------------------

nlohmann::json to_json(const GmmModel& model);
GmmModel gmm_from_json(const nlohmann::json& j);
GmmModel load_gmm(const std::filesystem::path& path);
void write_gmm(const GmmModel& model, const std::filesystem::path& path);

nlohmann::json to_json(const Policy& policy);
Policy policy_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ObjectiveReport& report);
nlohmann::json to_json(const OptimizationResult& result);
nlohmann::json to_json(const SimReport& report);

/// "-inf", "inf" or a decimal number.
double parse_real(const std::string& token);
std::string format_real(double value);  // 9 significant digits

enum class ReportFormat { kJson, kCsv };

void write_report(const OptimizationResult& result, const std::filesystem::path& path, ReportFormat format);
void write_report(const SimReport& report, const std::filesystem::path& path, ReportFormat format);
void write_report(const BudgetCurve& curve, const std::filesystem::path& path, ReportFormat format);

std::string format_budget_curve_csv(const BudgetCurve& curve);
BudgetCurve parse_budget_curve_csv(const std::string& text);
BudgetCurve load_budget_curve(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace htvs
