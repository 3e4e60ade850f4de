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
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace htvs {

/// Per-candidate scores, one column per stage, with optional ground-truth
/// labels (1 = true positive class) and row identifiers.
class ScoreTable {
 public:
  ScoreTable() = default;
  ScoreTable(std::vector<std::string> column_names, Eigen::MatrixXd rows,
             std::optional<std::vector<int>> labels = std::nullopt,
             std::optional<std::vector<std::string>> ids = std::nullopt);

  const std::vector<std::string>& column_names() const { return column_names_; }
  const Eigen::MatrixXd& rows() const { return rows_; }
  const std::optional<std::vector<int>>& labels() const { return labels_; }
  const std::optional<std::vector<std::string>>& ids() const { return ids_; }

  std::size_t num_rows() const { return static_cast<std::size_t>(rows_.rows()); }
  std::size_t num_columns() const { return column_names_.size(); }
  bool has_labels() const { return labels_.has_value(); }

  /// Index of the named column, or nullopt.
  std::optional<std::size_t> find_column(const std::string& name) const;

  /// New table holding the given rows in the given order.
  ScoreTable select_rows(const std::vector<std::size_t>& indices) const;

  friend bool operator==(const ScoreTable& a, const ScoreTable& b);

 private:
  std::vector<std::string> column_names_;
  Eigen::MatrixXd rows_;
  std::optional<std::vector<int>> labels_;
  std::optional<std::vector<std::string>> ids_;
};

/// Disjoint, seed-reproducible split: the first table receives
/// round(train_fraction * rows) randomly chosen rows, the second the rest.
std::pair<ScoreTable, ScoreTable> split_table(const ScoreTable& table, double train_fraction,
                                              unsigned long long seed);

}  // namespace htvs
