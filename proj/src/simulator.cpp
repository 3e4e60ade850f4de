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

#include "htvs/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "htvs/error.hpp"
#include "htvs/optimizer.hpp"

namespace htvs {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::size_t> filter(const Eigen::MatrixXd& rows, std::size_t col, double threshold,
                                const std::vector<std::size_t>& in) {
  std::vector<std::size_t> out;
  out.reserve(in.size());
  const auto c = static_cast<Eigen::Index>(col);
  for (auto r : in) {
    if (rows(static_cast<Eigen::Index>(r), c) >= threshold) out.push_back(r);
  }
  return out;
}

SimReport assemble(const ScoreTable& table, const PipelineSpec& spec, const std::vector<std::size_t>& cols,
                   std::vector<long long> survivors, std::vector<std::size_t> detected_rows, Policy policy) {
  SimReport rep;
  rep.survivors_per_stage = std::move(survivors);
  rep.detected = static_cast<long long>(detected_rows.size());
  rep.detected_rows = std::move(detected_rows);
  rep.policy_used = std::move(policy);
  for (std::size_t i = 0; i < spec.num_stages(); ++i) {
    rep.total_cost += spec.stages[i].cost * static_cast<double>(rep.survivors_per_stage[i]);
  }

  const auto n = static_cast<double>(table.num_rows());
  const auto final_col = static_cast<Eigen::Index>(cols.back());
  rep.reference_detected = (table.rows().col(final_col).array() >= spec.final_threshold).count();
  if (rep.detected > 0) {
    rep.effective_cost = rep.total_cost / static_cast<double>(rep.detected);
    if (rep.reference_detected > 0) {
      const double reference_effective = spec.final_stage().cost * n / static_cast<double>(rep.reference_detected);
      rep.savings_vs_reference = 1.0 - *rep.effective_cost / reference_effective;
    }
  }
  if (table.has_labels()) rep.metrics = classification_metrics(rep, table);
  return rep;
}

void check_table(const ScoreTable& table) {
  if (table.num_rows() == 0) throw Error(ErrorCode::kEmptyTable, "score table has no rows");
}

}  // namespace

std::vector<std::size_t> resolve_stage_columns(const ScoreTable& table, const PipelineSpec& spec) {
  std::vector<std::size_t> cols;
  for (const auto& s : spec.stages) {
    auto c = table.find_column(s.name);
    if (!c) throw Error(ErrorCode::kColumnMissing, "score table has no column '" + s.name + "'");
    cols.push_back(*c);
  }
  return cols;
}

SimReport run_policy(const ScoreTable& table, const PipelineSpec& spec, const Policy& policy) {
  validate(spec);
  validate(policy, spec);
  check_table(table);
  const auto cols = resolve_stage_columns(table, spec);
  const std::size_t n_stages = spec.num_stages();

  std::vector<std::size_t> current(table.num_rows());
  for (std::size_t i = 0; i < current.size(); ++i) current[i] = i;
  std::vector<long long> survivors;
  for (std::size_t i = 0; i < n_stages; ++i) {
    survivors.push_back(static_cast<long long>(current.size()));
    const double t = i + 1 < n_stages ? policy.thresholds[i] : spec.final_threshold;
    current = filter(table.rows(), cols[i], t, current);
  }
  return assemble(table, spec, cols, std::move(survivors), std::move(current), policy);
}

Policy baseline_thresholds(const ScoreTable& table, const PipelineSpec& spec, double top_fraction) {
  validate(spec);
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "top fraction must lie in (0, 1]");
  }
  if (table.num_rows() == 0) throw Error(ErrorCode::kEmptyTable, "score table has no rows");
  const auto cols = resolve_stage_columns(table, spec);

  Policy policy;
  std::vector<std::size_t> current(table.num_rows());
  for (std::size_t i = 0; i < current.size(); ++i) current[i] = i;
  for (std::size_t i = 0; i + 1 < spec.num_stages(); ++i) {
    const std::size_t n = current.size();
    const auto keep = static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(n) - 1e-9));
    double threshold = -kInf;
    if (keep < n) {
      std::vector<double> scores;
      scores.reserve(n);
      const auto c = static_cast<Eigen::Index>(cols[i]);
      for (auto r : current) scores.push_back(table.rows()(static_cast<Eigen::Index>(r), c));
      std::nth_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(keep - 1), scores.end(),
                       std::greater<>());
      threshold = scores[keep - 1];
    }
    policy.thresholds.push_back(threshold);
    current = filter(table.rows(), cols[i], threshold, current);
  }
  return policy;
}

SimReport run_baseline(const ScoreTable& table, const PipelineSpec& spec, double top_fraction) {
  validate(spec);
  check_table(table);
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "top fraction must lie in (0, 1]");
  }
  const auto cols = resolve_stage_columns(table, spec);
  const std::size_t n_stages = spec.num_stages();

  // Rank-based selection, independent of the threshold conversion above.
  std::vector<std::size_t> current(table.num_rows());
  for (std::size_t i = 0; i < current.size(); ++i) current[i] = i;
  std::vector<long long> survivors;
  Policy realized;
  for (std::size_t i = 0; i + 1 < n_stages; ++i) {
    survivors.push_back(static_cast<long long>(current.size()));
    const auto c = static_cast<Eigen::Index>(cols[i]);
    auto score = [&](std::size_t r) { return table.rows()(static_cast<Eigen::Index>(r), c); };
    const std::size_t n = current.size();
    const auto keep = static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(n) - 1e-9));
    if (keep >= n) {
      realized.thresholds.push_back(-kInf);
      continue;
    }
    std::stable_sort(current.begin(), current.end(), [&](std::size_t a, std::size_t b) { return score(a) > score(b); });
    const double cutoff = score(current[keep - 1]);
    std::size_t end = keep;
    while (end < n && score(current[end]) == cutoff) ++end;
    current.resize(end);
    std::sort(current.begin(), current.end());
    realized.thresholds.push_back(cutoff);
  }
  survivors.push_back(static_cast<long long>(current.size()));
  current = filter(table.rows(), cols.back(), spec.final_threshold, current);
  SimReport rep = assemble(table, spec, cols, std::move(survivors), std::move(current), std::move(realized));
  rep.baseline_top_fraction = top_fraction;
  return rep;
}

ClassificationMetrics classification_metrics(const SimReport& report, const ScoreTable& table) {
  if (!table.has_labels()) throw Error(ErrorCode::kNoLabels, "score table has no label column");
  const auto& labels = *table.labels();
  std::vector<char> predicted(labels.size(), 0);
  for (auto r : report.detected_rows) {
    if (r >= predicted.size()) throw Error(ErrorCode::kLengthMismatch, "report rows do not belong to this table");
    predicted[r] = 1;
  }
  double tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predicted[i]) {
      (labels[i] ? tp : fp) += 1;
    } else {
      (labels[i] ? fn : tn) += 1;
    }
  }
  auto ratio = [](double num, double den) -> std::optional<double> {
    if (den == 0.0) return std::nullopt;
    return num / den;
  };
  ClassificationMetrics m;
  m.accuracy = ratio(tp + tn, tp + tn + fp + fn);
  m.sensitivity = ratio(tp, tp + fn);
  m.specificity = ratio(tn, tn + fp);
  m.f1 = ratio(2 * tp, 2 * tp + fp + fn);
  return m;
}

}  // namespace htvs
