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

#include "htvs/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "htvs/error.hpp"
#include "htvs/normal.hpp"
#include "htvs/rng.hpp"

namespace htvs {
namespace {

constexpr double kWeightSumTol = 1e-9;
constexpr int kKmeansIters = 25;

// Neumaier-compensated running sum; keeps EM log-likelihood traces free of
// summation noise at 1e5 rows.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

void require_finite(const ScoreTable& samples) {
  if (!samples.rows().allFinite()) throw Error(ErrorCode::kNonFiniteInput, "samples contain non-finite values");
}

// n x k matrix of log(w_j * N(x_i | mu_j, Sigma_j)).
Eigen::MatrixXd component_log_matrix(const GmmModel& model, const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  const std::size_t k = model.num_components();
  const auto d = static_cast<double>(model.dim());
  Eigen::MatrixXd out(n, static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j) {
    const auto& comp = model.components()[j];
    const auto& chol = model.cholesky(j);
    Eigen::MatrixXd diff = (x.rowwise() - comp.mean.transpose()).transpose();
    chol.triangularView<Eigen::Lower>().solveInPlace(diff);
    const double log_det = 2.0 * chol.diagonal().array().log().sum();
    const double log_norm = std::log(comp.weight) - d * kLogSqrt2Pi - 0.5 * log_det;
    out.col(static_cast<Eigen::Index>(j)) = (log_norm - 0.5 * diff.colwise().squaredNorm().array()).transpose();
  }
  return out;
}

// Row-wise log-sum-exp of `logs`; returns the total and overwrites `logs`
// with normalized responsibilities when `resp` is requested.
double log_sum_exp_rows(const Eigen::MatrixXd& logs, Eigen::MatrixXd* resp) {
  CompensatedSum total;
  if (resp) resp->resize(logs.rows(), logs.cols());
  for (Eigen::Index i = 0; i < logs.rows(); ++i) {
    const double m = logs.row(i).maxCoeff();
    double s = 0.0;
    for (Eigen::Index j = 0; j < logs.cols(); ++j) s += std::exp(logs(i, j) - m);
    const double lse = m + std::log(s);
    total.add(lse);
    if (resp) {
      for (Eigen::Index j = 0; j < logs.cols(); ++j) (*resp)(i, j) = std::exp(logs(i, j) - lse);
    }
  }
  return total.value();
}

// Hard k-means++ assignment on standardized data, returned as one-hot responsibilities.
Eigen::MatrixXd kmeans_pp_responsibilities(const Eigen::MatrixXd& z, int k, std::uint64_t seed) {
  const Eigen::Index n = z.rows();
  Rng rng(seed, 0xC1057E2);
  Eigen::MatrixXd centers(k, z.cols());
  centers.row(0) = z.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  Eigen::VectorXd d2 = (z.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (pick = 0; pick < n - 1; ++pick) {
        target -= d2(pick);
        if (target <= 0.0) break;
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = z.row(pick);
    d2 = d2.cwiseMin((z.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter < kKmeansIters; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      (centers.rowwise() - z.row(i)).rowwise().squaredNorm().minCoeff(&best);
      if (assign[static_cast<std::size_t>(i)] != static_cast<int>(best)) {
        assign[static_cast<std::size_t>(i)] = static_cast<int>(best);
        changed = true;
      }
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, z.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += z.row(i);
      counts(assign[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      if (counts(c) > 0) centers.row(c) = sums.row(c) / counts(c);
    }
    if (!changed && iter > 0) break;
  }

  // An empty cluster takes the point farthest from its own center.
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int a : assign) ++counts[static_cast<std::size_t>(a)];
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) continue;
    Eigen::Index far = -1;
    double far_d = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int a = assign[static_cast<std::size_t>(i)];
      if (counts[static_cast<std::size_t>(a)] <= 1) continue;
      const double dist = (z.row(i) - centers.row(a)).squaredNorm();
      if (dist > far_d) {
        far_d = dist;
        far = i;
      }
    }
    if (far < 0) break;
    --counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(far)])];
    assign[static_cast<std::size_t>(far)] = c;
    ++counts[static_cast<std::size_t>(c)];
  }

  Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) resp(i, assign[static_cast<std::size_t>(i)]) = 1.0;
  return resp;
}

Eigen::MatrixXd floor_eigenvalues(const Eigen::MatrixXd& cov, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::kDegenerateCovariance, "eigen-decomposition of a component covariance failed");
  }
  Eigen::VectorXd values = eig.eigenvalues();
  if (values.minCoeff() >= floor) return cov;
  values = values.cwiseMax(floor);
  Eigen::MatrixXd repaired = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (repaired + repaired.transpose());
}

GmmModel m_step(const Eigen::MatrixXd& x, const Eigen::MatrixXd& resp, const std::vector<std::string>& names,
                double reg_floor) {
  const Eigen::Index n = x.rows();
  const Eigen::Index k = resp.cols();
  std::vector<GaussianComponent> comps;
  comps.reserve(static_cast<std::size_t>(k));
  double weight_total = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double nk = resp.col(j).sum();
    if (!(nk > 1e-8 * static_cast<double>(n))) {
      throw Error(ErrorCode::kDegenerateCovariance,
                  "component " + std::to_string(j) + " lost all responsibility mass");
    }
    GaussianComponent c;
    c.weight = nk / static_cast<double>(n);
    c.mean = (x.transpose() * resp.col(j)) / nk;
    const Eigen::MatrixXd diff = x.rowwise() - c.mean.transpose();
    Eigen::MatrixXd cov = (diff.array().colwise() * resp.col(j).array()).matrix().transpose() * diff / nk;
    cov = 0.5 * (cov + cov.transpose());
    if (!cov.allFinite()) {
      throw Error(ErrorCode::kDegenerateCovariance, "component " + std::to_string(j) + " covariance is not finite");
    }
    c.cov = floor_eigenvalues(cov, reg_floor);
    weight_total += c.weight;
    comps.push_back(std::move(c));
  }
  for (auto& c : comps) c.weight /= weight_total;
  try {
    return GmmModel(std::move(comps), names);
  } catch (const Error& e) {
    throw Error(ErrorCode::kDegenerateCovariance, std::string("EM produced an invalid mixture: ") + e.what());
  }
}

}  // namespace

std::optional<Eigen::MatrixXd> cholesky_lower(const Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n) return std::nullopt;
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double s = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) s -= l(j, k) * l(j, k);
    if (!(s > 0.0) || !std::isfinite(s)) return std::nullopt;
    const double ljj = std::sqrt(s);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double t = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) t -= l(i, k) * l(j, k);
      l(i, j) = t / ljj;
    }
  }
  return l;
}

GmmModel::GmmModel(std::vector<GaussianComponent> components, std::vector<std::string> column_names)
    : components_(std::move(components)), column_names_(std::move(column_names)) {
  const std::size_t d = column_names_.size();
  if (d == 0) throw Error(ErrorCode::kInvalidArgument, "mixture needs at least one dimension");
  if (components_.empty()) throw Error(ErrorCode::kInvalidArgument, "mixture needs at least one component");
  std::set<std::string> seen;
  for (const auto& name : column_names_) {
    if (!seen.insert(name).second) throw Error(ErrorCode::kDuplicateColumn, "column '" + name + "'");
  }
  double wsum = 0.0;
  for (std::size_t j = 0; j < components_.size(); ++j) {
    const auto& c = components_[j];
    const std::string tag = "component " + std::to_string(j);
    if (!(c.weight > 0.0) || !std::isfinite(c.weight)) {
      throw Error(ErrorCode::kInvalidArgument, tag + " weight must be positive");
    }
    if (static_cast<std::size_t>(c.mean.size()) != d || static_cast<std::size_t>(c.cov.rows()) != d ||
        static_cast<std::size_t>(c.cov.cols()) != d) {
      throw Error(ErrorCode::kLengthMismatch, tag + " shape does not match dimension " + std::to_string(d));
    }
    if (!c.mean.allFinite() || !c.cov.allFinite()) throw Error(ErrorCode::kNonFiniteInput, tag + " has non-finite parameters");
    const double scale = std::max(1.0, c.cov.cwiseAbs().maxCoeff());
    if ((c.cov - c.cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
      throw Error(ErrorCode::kDegenerateCovariance, tag + " covariance is not symmetric");
    }
    auto l = cholesky_lower(c.cov);
    if (!l) throw Error(ErrorCode::kDegenerateCovariance, tag + " covariance is not positive definite");
    log_norm_.push_back(std::log(c.weight) - static_cast<double>(d) * kLogSqrt2Pi -
                        l->diagonal().array().log().sum());
    chol_.push_back(std::move(*l));
    wsum += c.weight;
  }
  if (std::fabs(wsum - 1.0) > kWeightSumTol) {
    throw Error(ErrorCode::kInvalidArgument, "mixture weights sum to " + std::to_string(wsum));
  }
}

GmmModel GmmModel::gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov, std::vector<std::string> column_names) {
  std::vector<GaussianComponent> comps(1);
  comps[0].weight = 1.0;
  comps[0].mean = std::move(mean);
  comps[0].cov = std::move(cov);
  return GmmModel(std::move(comps), std::move(column_names));
}

void GmmModel::component_log_densities(const Eigen::Ref<const Eigen::VectorXd>& x,
                                       Eigen::Ref<Eigen::VectorXd> out) const {
  for (std::size_t j = 0; j < components_.size(); ++j) {
    Eigen::VectorXd diff = x - components_[j].mean;
    chol_[j].triangularView<Eigen::Lower>().solveInPlace(diff);
    out(static_cast<Eigen::Index>(j)) = log_norm_[j] - 0.5 * diff.squaredNorm();
  }
}

double GmmModel::log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::VectorXd logs(static_cast<Eigen::Index>(components_.size()));
  component_log_densities(x, logs);
  const double m = logs.maxCoeff();
  return m + std::log((logs.array() - m).exp().sum());
}

std::size_t GmmModel::num_parameters() const {
  const std::size_t d = dim();
  const std::size_t k = components_.size();
  return (k - 1) + k * d + k * d * (d + 1) / 2;
}

double log_likelihood(const GmmModel& model, const ScoreTable& samples) {
  if (samples.num_columns() != model.dim()) {
    throw Error(ErrorCode::kBadDimension, "table has " + std::to_string(samples.num_columns()) +
                                              " columns, model has " + std::to_string(model.dim()));
  }
  require_finite(samples);
  return log_sum_exp_rows(component_log_matrix(model, samples.rows()), nullptr);
}

GmmModel fit_gmm(const ScoreTable& samples, int k, const EmConfig& config, EmTrace* trace) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  if (config.max_iters < 1 || !(config.tol > 0.0) || !(config.reg_floor > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "EM config needs max_iters >= 1 and positive tolerances");
  }
  require_finite(samples);
  const std::size_t d = samples.num_columns();
  const std::size_t n = samples.num_rows();
  const std::size_t needed = static_cast<std::size_t>(k) * (d + 2);
  if (d == 0 || n < needed) {
    throw Error(ErrorCode::kTooFewSamples,
                std::to_string(n) + " rows, need at least " + std::to_string(needed) + " for k=" + std::to_string(k));
  }
  const Eigen::MatrixXd& x = samples.rows();

  Eigen::RowVectorXd mu = x.colwise().mean();
  Eigen::RowVectorXd sd = ((x.rowwise() - mu).array().square().colwise().sum() / static_cast<double>(n)).sqrt();
  for (Eigen::Index j = 0; j < sd.size(); ++j) {
    if (!(sd(j) > 0.0)) sd(j) = 1.0;
  }
  const Eigen::MatrixXd z = (x.rowwise() - mu).array().rowwise() / sd.array();

  Eigen::MatrixXd resp = kmeans_pp_responsibilities(z, k, config.seed);
  EmTrace local;
  GmmModel model = m_step(x, resp, samples.column_names(), config.reg_floor);
  double ll = log_sum_exp_rows(component_log_matrix(model, x), &resp);
  local.log_likelihood.push_back(ll);
  for (int iter = 1; iter <= config.max_iters; ++iter) {
    GmmModel next = m_step(x, resp, samples.column_names(), config.reg_floor);
    Eigen::MatrixXd next_resp;
    const double next_ll = log_sum_exp_rows(component_log_matrix(next, x), &next_resp);
    local.log_likelihood.push_back(next_ll);
    local.iterations = iter;
    const double change = std::fabs(next_ll - ll);
    model = std::move(next);
    resp = std::move(next_resp);
    ll = next_ll;
    if (change < config.tol * std::fabs(ll)) {
      local.converged = true;
      break;
    }
  }
  if (trace) *trace = std::move(local);
  return model;
}

double bic(const GmmModel& model, const ScoreTable& samples) {
  return -2.0 * log_likelihood(model, samples) +
         static_cast<double>(model.num_parameters()) * std::log(static_cast<double>(samples.num_rows()));
}

ComponentSelection select_components(const ScoreTable& samples, int k_max, const EmConfig& config) {
  if (k_max < 1) throw Error(ErrorCode::kInvalidArgument, "k_max must be at least 1");
  std::optional<ComponentSelection> best;
  std::vector<double> table;
  for (int k = 1; k <= k_max; ++k) {
    GmmModel m = fit_gmm(samples, k, config);
    const double score = bic(m, samples);
    table.push_back(score);
    if (!best || score < best->bic.front()) best = ComponentSelection{k, std::move(m), {score}};
  }
  best->bic = std::move(table);
  return std::move(*best);
}

GmmModel marginalize(const GmmModel& model, const std::vector<std::size_t>& dims) {
  if (dims.empty()) throw Error(ErrorCode::kBadDimension, "marginal needs at least one dimension");
  std::set<std::size_t> seen;
  for (auto d : dims) {
    if (d >= model.dim()) throw Error(ErrorCode::kBadDimension, "dimension " + std::to_string(d) + " out of range");
    if (!seen.insert(d).second) throw Error(ErrorCode::kBadDimension, "dimension " + std::to_string(d) + " repeated");
  }
  const auto m = static_cast<Eigen::Index>(dims.size());
  std::vector<GaussianComponent> comps;
  for (const auto& c : model.components()) {
    GaussianComponent out;
    out.weight = c.weight;
    out.mean.resize(m);
    out.cov.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto di = static_cast<Eigen::Index>(dims[static_cast<std::size_t>(i)]);
      out.mean(i) = c.mean(di);
      for (Eigen::Index j = 0; j < m; ++j) out.cov(i, j) = c.cov(di, static_cast<Eigen::Index>(dims[static_cast<std::size_t>(j)]));
    }
    comps.push_back(std::move(out));
  }
  std::vector<std::string> names;
  for (auto d : dims) names.push_back(model.column_names()[d]);
  return GmmModel(std::move(comps), std::move(names));
}

ScoreTable sample(const GmmModel& model, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "sample size must be at least 1");
  const auto d = static_cast<Eigen::Index>(model.dim());
  std::vector<double> cumulative;
  double acc = 0.0;
  for (const auto& c : model.components()) cumulative.push_back(acc += c.weight);

  Eigen::MatrixXd rows(static_cast<Eigen::Index>(n), d);
  Rng rng(seed, 0x5A3D1E);
  Eigen::VectorXd z(d);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform() * acc;
    std::size_t j = 0;
    while (j + 1 < cumulative.size() && u > cumulative[j]) ++j;
    for (Eigen::Index t = 0; t < d; ++t) z(t) = rng.normal();
    rows.row(static_cast<Eigen::Index>(i)) =
        (model.components()[j].mean + model.cholesky(j).triangularView<Eigen::Lower>() * z).transpose();
  }
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i + 1));
  return ScoreTable(model.column_names(), std::move(rows), std::nullopt, std::move(ids));
}

bool approx_equal(const GmmModel& a, const GmmModel& b, double tol) {
  if (a.column_names() != b.column_names() || a.num_components() != b.num_components()) return false;
  for (std::size_t j = 0; j < a.num_components(); ++j) {
    const auto& ca = a.components()[j];
    const auto& cb = b.components()[j];
    if (std::fabs(ca.weight - cb.weight) > tol) return false;
    if ((ca.mean - cb.mean).cwiseAbs().maxCoeff() > tol) return false;
    if ((ca.cov - cb.cov).cwiseAbs().maxCoeff() > tol) return false;
  }
  return true;
}

}  // namespace htvs
