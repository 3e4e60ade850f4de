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
#include <string>
#include <vector>

#include "htvs/gmm.hpp"
#include "htvs/orthant.hpp"

namespace htvs {

struct Stage {
  std::string name;
  double cost = 1.0;       // per-candidate cost
  std::size_t column = 0;  // index into the score distribution
};

/// Ordered screening stages; the last one is the final stage with the fixed
/// threshold `final_threshold`.
struct PipelineSpec {
  std::vector<Stage> stages;
  double final_threshold = 0.0;
  long long population = 1;

  std::size_t num_stages() const { return stages.size(); }
  const Stage& final_stage() const { return stages.back(); }
  double max_cost() const;
};

void validate(const PipelineSpec& spec);

/// Thresholds for the non-final stages (length N-1). -inf passes everyone.
struct Policy {
  std::vector<double> thresholds;

  static Policy pass_all(std::size_t n_stages);
  static Policy block_all(std::size_t n_stages);
  friend bool operator==(const Policy&, const Policy&) = default;
};

void validate(const Policy& policy, const PipelineSpec& spec);

struct ObjectiveReport {
  double reward = 0.0;
  std::vector<double> expected_counts;
  double expected_total_cost = 0.0;
  double relative_reward = 0.0;
  double normalized_cost = 0.0;
  double joint_value = 0.0;
};

/// Everything one policy evaluation produces, including QMC standard errors.
struct PolicyEvaluation {
  ObjectiveReport report;
  double reward_std_error = 0.0;
  std::vector<double> count_std_errors;  // same units as expected_counts
  double cost_std_error = 0.0;
  double final_tail = 0.0;
};

/// Probability that a candidate clears every non-final threshold and the final
/// threshold. The orthant is integrated with the final stage first and the
/// remaining stages in column order, so the value does not depend on the order
/// of the non-final stages.
OrthantEstimate reward(const GmmModel& model, const PipelineSpec& spec, const Policy& policy,
                       const IntegrationConfig& integ);

/// P[y_N >= lambda_N] under the final-stage marginal (closed form).
double final_tail(const GmmModel& model, const PipelineSpec& spec);

/// |X_i| for i = 1..N: population times the probability of clearing the first
/// i-1 thresholds. All entries come from one prefix pass, so they are
/// non-increasing.
std::vector<double> expected_stage_counts(const GmmModel& model, const PipelineSpec& spec, const Policy& policy,
                                          const IntegrationConfig& integ);

double expected_total_cost(const PipelineSpec& spec, const std::vector<double>& counts);

/// Fraction of final-stage positives lost to upstream screening.
double relative_reward(const GmmModel& model, const PipelineSpec& spec, const Policy& policy,
                       const IntegrationConfig& integ);

/// Total cost scaled by N * |X| * max cost.
double normalized_cost(const PipelineSpec& spec, const std::vector<double>& counts);

/// alpha * relative reward + (1 - alpha) * normalized cost, with every field of
/// the report produced from the same integration seed.
ObjectiveReport joint_objective(const GmmModel& model, const PipelineSpec& spec, const Policy& policy, double alpha,
                                const IntegrationConfig& integ);

/// Full evaluation used by the optimizers.
PolicyEvaluation evaluate_policy(const GmmModel& model, const PipelineSpec& spec, const Policy& policy, double alpha,
                                 const IntegrationConfig& integ);

inline constexpr double kZeroTailGuard = 1e-12;

}  // namespace htvs
