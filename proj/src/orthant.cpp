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

#include "htvs/orthant.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <set>
#include <string>

#include "htvs/error.hpp"
#include "htvs/normal.hpp"
#include "htvs/rng.hpp"

namespace htvs {
namespace {

constexpr double kTiny = std::numeric_limits<double>::min();
constexpr double kOneBelow = 1.0 - 0x1.0p-53;
constexpr std::size_t kMaxLatticeDims = 48;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Rank-1 lattice generating vectors built component by component for a
// weighted Korobov space (weights 1/j), cached per point count. Extending a
// vector by one dimension never changes its earlier components.
class LatticeCache {
 public:
  std::vector<std::uint64_t> get(int n, std::size_t dims) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto& entry = entries_[n];
    if (entry.prod.empty()) entry.prod.assign(static_cast<std::size_t>(n), 1.0);
    while (entry.z.size() < dims) extend(n, entry);
    return {entry.z.begin(), entry.z.begin() + static_cast<std::ptrdiff_t>(dims)};
  }

 private:
  struct Entry {
    std::vector<std::uint64_t> z;
    std::vector<double> prod;  // running product kernel over lattice points
  };

  static double kernel(double gamma, std::uint64_t k, std::uint64_t c, std::uint64_t n) {
    const double x = static_cast<double>((k * c) % n) / static_cast<double>(n);
    return 1.0 + gamma * 2.0 * std::numbers::pi * std::numbers::pi * (x * x - x + 1.0 / 6.0);
  }

  static void extend(int n_int, Entry& e) {
    const auto n = static_cast<std::uint64_t>(n_int);
    const double gamma = 1.0 / static_cast<double>(e.z.size() + 1);
    std::uint64_t best = 1;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::uint64_t c = 1; c <= std::max<std::uint64_t>(1, n / 2); ++c) {
      if (std::gcd(c, n) != 1) continue;
      double err = 0.0;
      for (std::uint64_t k = 0; k < n; ++k) err += e.prod[k] * kernel(gamma, k, c, n);
      if (err < best_err) {
        best_err = err;
        best = c;
      }
    }
    for (std::uint64_t k = 0; k < n; ++k) e.prod[k] *= kernel(gamma, k, best, n);
    e.z.push_back(best);
  }

  std::mutex mutex_;
  std::map<int, Entry> entries_;
};

std::vector<std::uint64_t> lattice_vector(int n, std::size_t dims) {
  if (dims > kMaxLatticeDims) {
    throw Error(ErrorCode::kBadDimension, "orthant integration supports at most " +
                                              std::to_string(kMaxLatticeDims + 1) + " constrained dimensions");
  }
  static LatticeCache cache;
  return cache.get(n, dims);
}

void validate_query(const GmmModel& model, const OrthantQuery& query) {
  if (query.dims.size() != query.thresholds.size()) {
    throw Error(ErrorCode::kBadDimension, "query has " + std::to_string(query.dims.size()) + " dims but " +
                                              std::to_string(query.thresholds.size()) + " thresholds");
  }
  std::set<std::size_t> seen;
  for (std::size_t j = 0; j < query.dims.size(); ++j) {
    const auto d = query.dims[j];
    if (d >= model.dim()) throw Error(ErrorCode::kBadDimension, "dimension " + std::to_string(d) + " out of range");
    if (!seen.insert(d).second) throw Error(ErrorCode::kBadDimension, "dimension " + std::to_string(d) + " repeated");
    if (std::isnan(query.thresholds[j])) {
      throw Error(ErrorCode::kNonFiniteThreshold, "threshold for dimension " + std::to_string(d) + " is NaN");
    }
  }
}

// Accumulates, for one component and one shift, the mean over QMC points of
// the first q conditional factors (q = 1..m) into `out[q-1]`.
void integrate_component(const Eigen::MatrixXd& chol, const std::vector<double>& lower,
                         const std::vector<double>& shift, int n_points, std::vector<double>& out) {
  const std::size_t m = lower.size();
  const double e0 = normal_sf(lower[0] / chol(0, 0));
  std::fill(out.begin(), out.end(), 0.0);
  if (m == 1 || e0 == 0.0) {
    out[0] = e0;
    return;
  }

  const auto gen = lattice_vector(n_points, m - 1);
  const auto n = static_cast<std::uint64_t>(n_points);
  std::vector<double> z(m - 1);
  std::vector<double> sums(m, 0.0), carry(m, 0.0);  // Kahan-compensated
  for (std::uint64_t i = 0; i < n; ++i) {
    double prod = e0;
    double e = e0;
    for (std::size_t q = 1; q < m; ++q) {
      double x = static_cast<double>((i * gen[q - 1]) % n) / static_cast<double>(n) + shift[q - 1];
      x -= std::floor(x);
      // Sidi sin^2 periodization: the Jacobian vanishes at both ends, which
      // tames the conditional factors' singularity where z runs off to +inf.
      const double w = x - std::sin(kTwoPi * x) / kTwoPi;
      prod *= 1.0 - std::cos(kTwoPi * x);
      const double u = std::clamp(w * e, kTiny, kOneBelow);
      z[q - 1] = -normal_quantile(u);

      double s = lower[q];
      for (std::size_t k = 0; k < q; ++k) s -= chol(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(k)) * z[k];
      e = normal_sf(s / chol(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q)));
      prod *= e;
      if (prod == 0.0) break;
      const double y = prod - carry[q];
      const double t = sums[q] + y;
      carry[q] = (t - sums[q]) - y;
      sums[q] = t;
    }
  }
  out[0] = e0;
  for (std::size_t q = 1; q < m; ++q) out[q] = std::min(out[q - 1], sums[q] / static_cast<double>(n_points));
}

}  // namespace

void validate(const IntegrationConfig& config) {
  if (config.n_points < 1 || config.n_randomizations < 1) {
    throw Error(ErrorCode::kInvalidArgument, "integration needs n_points >= 1 and n_randomizations >= 1");
  }
}

std::vector<OrthantEstimate> upper_orthant_prefixes(const GmmModel& model, const OrthantQuery& query,
                                                    const IntegrationConfig& integ) {
  validate(integ);
  validate_query(model, query);
  const std::size_t npos = query.dims.size();
  std::vector<OrthantEstimate> result(npos);
  if (npos == 0) return result;

  // Retained (finite) positions before the first +inf; level[j] counts them up to j.
  std::vector<std::size_t> kept;
  std::vector<std::size_t> level(npos, 0);
  std::size_t empty_from = npos;
  for (std::size_t j = 0; j < npos; ++j) {
    const double t = query.thresholds[j];
    if (t == std::numeric_limits<double>::infinity()) {
      empty_from = j;
      break;
    }
    if (std::isfinite(t)) kept.push_back(j);
    level[j] = kept.size();
  }
  const std::size_t m = kept.size();
  const auto reps = static_cast<std::size_t>(integ.n_randomizations);

  // per_rep[r][q-1]: mixture estimate of the first q retained constraints.
  std::vector<std::vector<double>> per_rep(reps, std::vector<double>(m, 0.0));
  if (m > 0) {
    std::vector<std::vector<double>> shifts(reps, std::vector<double>(m - 1));
    for (std::size_t r = 0; r < reps; ++r) {
      Rng rng(integ.seed, r);
      for (auto& s : shifts[r]) s = rng.uniform();
    }
    std::vector<double> lower(m);
    std::vector<double> comp_out(m);
    for (std::size_t c = 0; c < model.num_components(); ++c) {
      const auto& comp = model.components()[c];
      Eigen::MatrixXd sub(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
      for (std::size_t a = 0; a < m; ++a) {
        const auto da = static_cast<Eigen::Index>(query.dims[kept[a]]);
        lower[a] = query.thresholds[kept[a]] - comp.mean(da);
        for (std::size_t b = 0; b < m; ++b) {
          sub(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
              comp.cov(da, static_cast<Eigen::Index>(query.dims[kept[b]]));
        }
      }
      auto chol = cholesky_lower(sub);
      if (!chol) throw Error(ErrorCode::kDegenerateCovariance, "component " + std::to_string(c) + " sub-covariance");
      for (std::size_t r = 0; r < reps; ++r) {
        integrate_component(*chol, lower, shifts[r], integ.n_points, comp_out);
        for (std::size_t q = 0; q < m; ++q) per_rep[r][q] += comp.weight * comp_out[q];
      }
    }
  }

  for (std::size_t j = 0; j < npos; ++j) {
    if (j >= empty_from) {
      result[j] = {0.0, 0.0};
      continue;
    }
    if (level[j] == 0) {
      result[j] = {1.0, 0.0};
      continue;
    }
    const std::size_t q = level[j] - 1;
    double mean = 0.0;
    bool constant = true;
    for (std::size_t r = 0; r < reps; ++r) {
      mean += per_rep[r][q];
      constant = constant && per_rep[r][q] == per_rep[0][q];
    }
    mean = constant ? per_rep[0][q] : mean / static_cast<double>(reps);
    double var = 0.0;
    for (std::size_t r = 0; r < reps; ++r) var += (per_rep[r][q] - mean) * (per_rep[r][q] - mean);
    const double se = reps > 1 ? std::sqrt(var / static_cast<double>(reps - 1) / static_cast<double>(reps)) : 0.0;
    result[j] = {std::clamp(mean, 0.0, 1.0), se};
    // Nested events: keep rounding from breaking the ordering.
    if (j > 0) result[j].estimate = std::min(result[j].estimate, result[j - 1].estimate);
  }
  return result;
}

OrthantEstimate upper_orthant_prob(const GmmModel& model, const OrthantQuery& query, const IntegrationConfig& integ) {
  if (query.dims.empty() && query.thresholds.empty()) {
    validate(integ);
    return {1.0, 0.0};
  }
  return upper_orthant_prefixes(model, query, integ).back();
}

}  // namespace htvs
