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

#include "htvs/score_table.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "htvs/error.hpp"
#include "htvs/rng.hpp"

namespace htvs {

ScoreTable::ScoreTable(std::vector<std::string> column_names, Eigen::MatrixXd rows,
                       std::optional<std::vector<int>> labels,
                       std::optional<std::vector<std::string>> ids)
    : column_names_(std::move(column_names)),
      rows_(std::move(rows)),
      labels_(std::move(labels)),
      ids_(std::move(ids)) {
  if (static_cast<std::size_t>(rows_.cols()) != column_names_.size()) {
    throw Error(ErrorCode::kLengthMismatch, "row width " + std::to_string(rows_.cols()) +
                                                " does not match " + std::to_string(column_names_.size()) +
                                                " column names");
  }
  std::set<std::string> seen;
  for (const auto& name : column_names_) {
    if (!seen.insert(name).second) throw Error(ErrorCode::kDuplicateColumn, "column '" + name + "'");
  }
  if (!rows_.allFinite()) throw Error(ErrorCode::kNonFiniteScore, "score table contains non-finite entries");
  const auto n = num_rows();
  if (labels_) {
    if (labels_->size() != n) throw Error(ErrorCode::kLengthMismatch, "labels length does not match rows");
    for (int l : *labels_) {
      if (l != 0 && l != 1) throw Error(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
    }
  }
  if (ids_ && ids_->size() != n) throw Error(ErrorCode::kLengthMismatch, "ids length does not match rows");
}

std::optional<std::size_t> ScoreTable::find_column(const std::string& name) const {
  auto it = std::find(column_names_.begin(), column_names_.end(), name);
  if (it == column_names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - column_names_.begin());
}

ScoreTable ScoreTable::select_rows(const std::vector<std::size_t>& indices) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), rows_.cols());
  std::optional<std::vector<int>> labels;
  std::optional<std::vector<std::string>> ids;
  if (labels_) labels.emplace();
  if (ids_) ids.emplace();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = static_cast<Eigen::Index>(indices[i]);
    out.row(static_cast<Eigen::Index>(i)) = rows_.row(src);
    if (labels_) labels->push_back((*labels_)[indices[i]]);
    if (ids_) ids->push_back((*ids_)[indices[i]]);
  }
  return ScoreTable(column_names_, std::move(out), std::move(labels), std::move(ids));
}

bool operator==(const ScoreTable& a, const ScoreTable& b) {
  return a.column_names_ == b.column_names_ && a.rows_.rows() == b.rows_.rows() &&
         a.rows_.cols() == b.rows_.cols() && a.rows_ == b.rows_ && a.labels_ == b.labels_ && a.ids_ == b.ids_;
}

std::pair<ScoreTable, ScoreTable> split_table(const ScoreTable& table, double train_fraction,
                                              unsigned long long seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "train_fraction must lie in (0, 1)");
  }
  const std::size_t n = table.num_rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed, 0x5b1175);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> eval(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(eval.begin(), eval.end());
  return {table.select_rows(train), table.select_rows(eval)};
}

}  // namespace htvs
