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

#include "htvs/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "htvs/error.hpp"

namespace htvs {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_model_covers(const GmmModel& model, const PipelineSpec& spec) {
  for (const auto& s : spec.stages) {
    if (s.column >= model.dim()) {
      throw Error(ErrorCode::kBadDimension, "stage '" + s.name + "' maps to column " + std::to_string(s.column) +
                                                " but the model has " + std::to_string(model.dim()) + " dimensions");
    }
  }
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must lie in [0, 1]");
}

// Final stage first, then the non-final stages sorted by model column.
OrthantQuery reward_query(const PipelineSpec& spec, const Policy& policy) {
  const std::size_t n_pre = spec.num_stages() - 1;
  std::vector<std::size_t> order(n_pre);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return spec.stages[a].column < spec.stages[b].column; });
  OrthantQuery q;
  q.dims.push_back(spec.final_stage().column);
  q.thresholds.push_back(spec.final_threshold);
  for (auto i : order) {
    q.dims.push_back(spec.stages[i].column);
    q.thresholds.push_back(policy.thresholds[i]);
  }
  return q;
}

struct CountPass {
  std::vector<double> counts;
  std::vector<double> std_errors;
};

CountPass count_pass(const GmmModel& model, const PipelineSpec& spec, const Policy& policy,
                     const IntegrationConfig& integ) {
  const std::size_t n = spec.num_stages();
  const auto pop = static_cast<double>(spec.population);
  CountPass out;
  out.counts.assign(n, pop);
  out.std_errors.assign(n, 0.0);
  OrthantQuery q;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    q.dims.push_back(spec.stages[i].column);
    q.thresholds.push_back(policy.thresholds[i]);
  }
  const auto prefixes = upper_orthant_prefixes(model, q, integ);
  for (std::size_t i = 1; i < n; ++i) {
    out.counts[i] = pop * prefixes[i - 1].estimate;
    out.std_errors[i] = pop * prefixes[i - 1].std_error;
  }
  return out;
}

}  // namespace

double PipelineSpec::max_cost() const {
  double m = 0.0;
  for (const auto& s : stages) m = std::max(m, s.cost);
  return m;
}

void validate(const PipelineSpec& spec) {
  if (spec.stages.empty()) throw Error(ErrorCode::kInvalidArgument, "a pipeline needs at least one stage");
  if (spec.population < 1) throw Error(ErrorCode::kInvalidArgument, "population must be at least 1");
  if (std::isnan(spec.final_threshold)) throw Error(ErrorCode::kNonFiniteThreshold, "final threshold is NaN");
  std::set<std::size_t> cols;
  for (const auto& s : spec.stages) {
    if (!(s.cost > 0.0) || !std::isfinite(s.cost)) {
      throw Error(ErrorCode::kInvalidArgument, "stage '" + s.name + "' cost must be positive");
    }
    if (!cols.insert(s.column).second) {
      throw Error(ErrorCode::kInvalidArgument, "stage column " + std::to_string(s.column) + " used twice");
    }
  }
}

Policy Policy::pass_all(std::size_t n_stages) { return Policy{std::vector<double>(n_stages - 1, -kInf)}; }

Policy Policy::block_all(std::size_t n_stages) { return Policy{std::vector<double>(n_stages - 1, kInf)}; }

void validate(const Policy& policy, const PipelineSpec& spec) {
  if (policy.thresholds.size() + 1 != spec.num_stages()) {
    throw Error(ErrorCode::kLengthMismatch, "policy has " + std::to_string(policy.thresholds.size()) +
                                                " thresholds for " + std::to_string(spec.num_stages()) + " stages");
  }
  for (double t : policy.thresholds) {
    if (std::isnan(t)) throw Error(ErrorCode::kNonFiniteThreshold, "policy threshold is NaN");
  }
}

OrthantEstimate reward(const GmmModel& model, const PipelineSpec& spec, const Policy& policy,
                       const IntegrationConfig& integ) {
  validate(spec);
  validate(policy, spec);
  validate_model_covers(model, spec);
  return upper_orthant_prob(model, reward_query(spec, policy), integ);
}

double final_tail(const GmmModel& model, const PipelineSpec& spec) {
  validate(spec);
  validate_model_covers(model, spec);
  OrthantQuery q{{spec.final_threshold}, {spec.final_stage().column}};
  return upper_orthant_prob(model, q, IntegrationConfig{1, 1, 0}).estimate;
}

std::vector<double> expected_stage_counts(const GmmModel& model, const PipelineSpec& spec, const Policy& policy,
                                          const IntegrationConfig& integ) {
  validate(spec);
  validate(policy, spec);
  validate_model_covers(model, spec);
  return count_pass(model, spec, policy, integ).counts;
}

double expected_total_cost(const PipelineSpec& spec, const std::vector<double>& counts) {
  if (counts.size() != spec.num_stages()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(counts.size()) + " counts for " +
                                                std::to_string(spec.num_stages()) + " stages");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) total += spec.stages[i].cost * counts[i];
  return total;
}

double normalized_cost(const PipelineSpec& spec, const std::vector<double>& counts) {
  const double total = expected_total_cost(spec, counts);
  return total / (static_cast<double>(spec.num_stages()) * static_cast<double>(spec.population) * spec.max_cost());
}

PolicyEvaluation evaluate_policy(const GmmModel& model, const PipelineSpec& spec, const Policy& policy, double alpha,
                                 const IntegrationConfig& integ) {
  check_alpha(alpha);
  validate(spec);
  validate(policy, spec);
  validate_model_covers(model, spec);

  PolicyEvaluation ev;
  ev.final_tail = final_tail(model, spec);
  if (ev.final_tail < kZeroTailGuard) {
    throw Error(ErrorCode::kZeroTail, "final-stage tail probability " + std::to_string(ev.final_tail) +
                                          " is below " + std::to_string(kZeroTailGuard));
  }
  const auto r = upper_orthant_prob(model, reward_query(spec, policy), integ);
  const auto cp = count_pass(model, spec, policy, integ);

  auto& rep = ev.report;
  rep.reward = r.estimate;
  rep.expected_counts = cp.counts;
  rep.expected_total_cost = expected_total_cost(spec, cp.counts);
  rep.relative_reward = std::clamp((ev.final_tail - r.estimate) / ev.final_tail, 0.0, 1.0);
  rep.normalized_cost = normalized_cost(spec, cp.counts);
  rep.joint_value = alpha * rep.relative_reward + (1.0 - alpha) * rep.normalized_cost;

  ev.reward_std_error = r.std_error;
  ev.count_std_errors = cp.std_errors;
  // Prefix estimates are strongly positively correlated; summing errors bounds the cost error.
  for (std::size_t i = 0; i < cp.std_errors.size(); ++i) ev.cost_std_error += spec.stages[i].cost * cp.std_errors[i];
  return ev;
}

double relative_reward(const GmmModel& model, const PipelineSpec& spec, const Policy& policy,
                       const IntegrationConfig& integ) {
  validate(spec);
  validate(policy, spec);
  validate_model_covers(model, spec);
  const double tail = final_tail(model, spec);
  if (tail < kZeroTailGuard) throw Error(ErrorCode::kZeroTail, "final-stage tail probability underflows");
  const double r = upper_orthant_prob(model, reward_query(spec, policy), integ).estimate;
  return std::clamp((tail - r) / tail, 0.0, 1.0);
}

ObjectiveReport joint_objective(const GmmModel& model, const PipelineSpec& spec, const Policy& policy, double alpha,
                                const IntegrationConfig& integ) {
  return evaluate_policy(model, spec, policy, alpha, integ).report;
}

}  // namespace htvs
