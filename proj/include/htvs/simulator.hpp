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

#include <cstddef>
#include <optional>
#include <vector>

#include "htvs/objective.hpp"
#include "htvs/score_table.hpp"

namespace htvs {

struct ClassificationMetrics {
  std::optional<double> accuracy;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> f1;
};

struct SimReport {
  std::vector<long long> survivors_per_stage;
  long long detected = 0;
  double total_cost = 0.0;
  std::optional<double> effective_cost;        // null when nothing is detected
  std::optional<double> savings_vs_reference;  // null when either side detects nothing
  std::optional<ClassificationMetrics> metrics;
  Policy policy_used;                          // realized thresholds
  std::optional<double> baseline_top_fraction;  // set for top-R_s runs

  // Not serialized.
  long long reference_detected = 0;  // rows clearing the final threshold on their own
  std::vector<std::size_t> detected_rows;
};

/// Table column index of each stage, looked up by stage name.
std::vector<std::size_t> resolve_stage_columns(const ScoreTable& table, const PipelineSpec& spec);

/// Sequential filtering y >= threshold per stage, charging each stage's cost
/// for every row that reaches it. Savings compare effective cost with
/// screening the whole table by the final stage alone.
SimReport run_policy(const ScoreTable& table, const PipelineSpec& spec, const Policy& policy);

/// Keeps the ceil(top_fraction * survivors) highest-scoring rows at every
/// non-final stage (ties at the cutoff all pass), then applies the final threshold.
SimReport run_baseline(const ScoreTable& table, const PipelineSpec& spec, double top_fraction);

/// Detected rows are the predicted positives; rows dropped anywhere are predicted negatives.
ClassificationMetrics classification_metrics(const SimReport& report, const ScoreTable& table);

}  // namespace htvs
