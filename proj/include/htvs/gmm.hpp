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
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "htvs/score_table.hpp"

namespace htvs {

struct GaussianComponent {
  double weight = 1.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Lower Cholesky factor of a symmetric matrix, or nullopt when the matrix is
/// not positive definite. Plain column-by-column algorithm, so sub-problems
/// reproduce the leading entries bit for bit.
std::optional<Eigen::MatrixXd> cholesky_lower(const Eigen::MatrixXd& a);

/// Weighted multivariate Gaussian mixture over stage scores. Immutable; the
/// constructor validates weights, symmetry and positive-definiteness and caches
/// each component's Cholesky factor.
class GmmModel {
 public:
  GmmModel(std::vector<GaussianComponent> components, std::vector<std::string> column_names);

  /// Single Gaussian with unit weight.
  static GmmModel gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov, std::vector<std::string> column_names);

  std::size_t dim() const { return column_names_.size(); }
  std::size_t num_components() const { return components_.size(); }
  const std::vector<GaussianComponent>& components() const { return components_; }
  const std::vector<std::string>& column_names() const { return column_names_; }
  const Eigen::MatrixXd& cholesky(std::size_t component) const { return chol_[component]; }

  /// Log mixture density at x (log-sum-exp over components).
  double log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Per-component log(weight * density) at x.
  void component_log_densities(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::VectorXd> out) const;

  /// Number of free parameters (weights, means, full covariances).
  std::size_t num_parameters() const;

 private:
  std::vector<GaussianComponent> components_;
  std::vector<std::string> column_names_;
  std::vector<Eigen::MatrixXd> chol_;
  std::vector<double> log_norm_;  // log(weight) - 0.5 log det(2 pi cov)
};

struct EmConfig {
  int max_iters = 500;
  double tol = 1e-8;        // relative log-likelihood change
  double reg_floor = 1e-6;  // minimum covariance eigenvalue
  std::uint64_t seed = 0;
};

/// Log-likelihood after every EM iteration, first entry is the initial M-step.
struct EmTrace {
  std::vector<double> log_likelihood;
  int iterations = 0;
  bool converged = false;
};

/// Maximum-likelihood mixture fit by EM, initialized by k-means++ on
/// column-standardized data. Deterministic given config.seed.
GmmModel fit_gmm(const ScoreTable& samples, int k, const EmConfig& config, EmTrace* trace = nullptr);

struct ComponentSelection {
  int k = 1;
  GmmModel model;
  std::vector<double> bic;  // bic[j] belongs to k = j + 1
};

/// Fits k = 1..k_max and keeps the lowest BIC, ties toward smaller k.
ComponentSelection select_components(const ScoreTable& samples, int k_max, const EmConfig& config);

double bic(const GmmModel& model, const ScoreTable& samples);

/// Mixture restricted to `dims` (order preserved); weights unchanged.
GmmModel marginalize(const GmmModel& model, const std::vector<std::size_t>& dims);

/// n i.i.d. draws; deterministic given seed.
ScoreTable sample(const GmmModel& model, std::size_t n, std::uint64_t seed);

/// Sum over rows of the log mixture density. Column count must equal dim().
double log_likelihood(const GmmModel& model, const ScoreTable& samples);

/// Component-wise equality within tolerance (weights, means, covariances, names).
bool approx_equal(const GmmModel& a, const GmmModel& b, double tol);

}  // namespace htvs
