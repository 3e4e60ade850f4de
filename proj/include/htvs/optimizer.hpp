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
#include <optional>
#include <vector>

#include "htvs/gmm.hpp"
#include "htvs/objective.hpp"
#include "htvs/orthant.hpp"
#include "htvs/score_table.hpp"

namespace htvs {

struct BudgetSpec {
  double budget = 0.0;
};

struct OptConfig {
  /// Per-stage quantile levels of the seed grid.
  std::vector<double> seed_levels = {0.0, 0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 0.99, 1.0};
  int lhs_seeds = 512;  // used instead of the grid when there are more than 3 thresholds
  int n_polish = 8;     // best seeds refined by Nelder-Mead
  int polish_iters = 200;
  double penalty = 10.0;  // exact-penalty weight for budget violation
  std::uint64_t seed = 0;
  IntegrationConfig integration;                     // candidate ranking, feasibility, reported values
  IntegrationConfig polish_integration{1024, 8, 0};  // Nelder-Mead and projection; seed derived
  IntegrationConfig search_integration{512, 8, 0};   // seed-grid screening; seed derived
  int threads = 1;
  bool keep_trace = false;
};

void validate(const OptConfig& config);

struct TracePoint {
  Policy policy;
  double value = 0.0;
};

struct OptimizationResult {
  Policy policy;
  ObjectiveReport report;
  bool feasible = true;
  long long evaluations = 0;
  std::vector<TracePoint> trace;
  std::vector<double> quantiles;  // policy in quantile coordinates
};

struct BudgetCurvePoint {
  double budget = 0.0;
  double expected_detected = 0.0;
  Policy policy;
  bool feasible = true;
  std::optional<double> empirical_detected;
};

struct BudgetCurve {
  std::vector<BudgetCurvePoint> points;
};

/// Maps quantile coordinates in [0, 1] to score thresholds through each
/// non-final stage's marginal CDF; 0 maps to -inf and 1 to +inf.
class QuantileMap {
 public:
  QuantileMap(const GmmModel& model, const PipelineSpec& spec);

  Policy to_policy(const std::vector<double>& quantiles) const;
  double threshold(std::size_t stage, double q) const;
  double cdf(std::size_t stage, double x) const;

 private:
  struct Marginal {
    std::vector<double> weight, mean, sd;
  };
  std::vector<Marginal> marginals_;
};

/// Maximizes reward subject to expected total cost <= budget. When even the
/// cheapest policy (everything blocked after stage 1) exceeds the budget the
/// result carries feasible = false and that cheapest policy.
OptimizationResult optimize_budgeted(const GmmModel& model, const PipelineSpec& spec, const BudgetSpec& budget,
                                     const OptConfig& opt);

/// Minimizes alpha * relative_reward + (1 - alpha) * normalized_cost.
OptimizationResult optimize_joint(const GmmModel& model, const PipelineSpec& spec, double alpha,
                                  const OptConfig& opt);

/// optimize_budgeted per budget (ascending), warm-started from the previous optimum.
BudgetCurve budget_sweep(const GmmModel& model, const PipelineSpec& spec, const std::vector<double>& budgets,
                         const OptConfig& opt);

/// Thresholds realized by the top-R_s% rule on a concrete table.
Policy baseline_thresholds(const ScoreTable& table, const PipelineSpec& spec, double top_fraction);

}  // namespace htvs
