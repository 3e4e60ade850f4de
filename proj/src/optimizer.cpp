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

#include "htvs/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <thread>

#include "htvs/error.hpp"
#include "htvs/nelder_mead.hpp"
#include "htvs/normal.hpp"
#include "htvs/rng.hpp"

namespace htvs {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kSearchStream = 0x5EA7C4;
constexpr std::uint64_t kFreshStream = 0xF2E5A;
constexpr std::uint64_t kPolishStream = 0x9011511;
constexpr int kProjectionSteps = 30;

// Runs fn(0..n-1) on up to `threads` workers. Each index writes only its own
// slot, so results do not depend on scheduling.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

bool lex_better(double fa, const std::vector<double>& a, double fb, const std::vector<double>& b) {
  if (fa != fb) return fa < fb;
  return a < b;
}

std::vector<double> clamp_unit(std::vector<double> q) {
  for (auto& v : q) v = std::clamp(v, 0.0, 1.0);
  return q;
}

std::vector<std::vector<double>> seed_points(std::size_t dim, const OptConfig& opt) {
  std::vector<std::vector<double>> seeds;
  if (dim == 0) return {{}};
  if (dim <= 3) {
    std::vector<std::size_t> idx(dim, 0);
    const std::size_t levels = opt.seed_levels.size();
    while (true) {
      std::vector<double> q(dim);
      for (std::size_t j = 0; j < dim; ++j) q[j] = opt.seed_levels[idx[j]];
      seeds.push_back(std::move(q));
      std::size_t j = dim;
      while (j > 0) {
        --j;
        if (++idx[j] < levels) break;
        idx[j] = 0;
        if (j == 0) return seeds;
      }
    }
  }
  const auto n = static_cast<std::size_t>(opt.lhs_seeds);
  Rng rng(opt.seed, 0x1A5);
  std::vector<std::vector<std::size_t>> perms(dim, std::vector<std::size_t>(n));
  for (auto& p : perms) {
    std::iota(p.begin(), p.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> q(dim);
    for (std::size_t j = 0; j < dim; ++j) q[j] = (static_cast<double>(perms[j][i]) + rng.uniform()) / static_cast<double>(n);
    seeds.push_back(std::move(q));
  }
  seeds.push_back(std::vector<double>(dim, 0.0));
  return seeds;
}

enum class Mode { kBudgeted, kJoint };

class PolicySearch {
 public:
  PolicySearch(const GmmModel& model, const PipelineSpec& spec, Mode mode, double budget, double alpha,
               const OptConfig& opt)
      : model_(model), spec_(spec), mode_(mode), budget_(budget), alpha_(alpha), opt_(opt), qmap_(model, spec) {
    tail_ = final_tail(model, spec);
    if (tail_ < kZeroTailGuard) throw Error(ErrorCode::kZeroTail, "final-stage tail probability underflows");
    search_integ_ = opt.search_integration;
    search_integ_.seed = derive_seed(opt.integration.seed, kSearchStream);
    polish_integ_ = opt.polish_integration;
    polish_integ_.seed = derive_seed(opt.integration.seed, kPolishStream);
    polish_fresh_integ_ = opt.polish_integration;
    polish_fresh_integ_.seed = derive_seed(polish_integ_.seed, kFreshStream);
    fresh_integ_ = opt.integration;
    fresh_integ_.seed = derive_seed(opt.integration.seed, kFreshStream);
  }

  std::size_t dim() const { return spec_.num_stages() - 1; }
  const QuantileMap& qmap() const { return qmap_; }

  double report_alpha() const { return mode_ == Mode::kJoint ? alpha_ : 1.0; }

  // Minimized objective. The budgeted objective is the exact-penalty reward
  // divided by the final tail, which rescales it without moving the optimum.
  double value(const std::vector<double>& q, const IntegrationConfig& integ) {
    ++evaluations_;
    return value_uncounted(q, integ);
  }

  bool affordable(const std::vector<double>& q, const IntegrationConfig& a, const IntegrationConfig& b) {
    const Policy p = qmap_.to_policy(q);
    evaluations_ += 2;
    return expected_total_cost(spec_, expected_stage_counts(model_, spec_, p, a)) <= budget_ &&
           expected_total_cost(spec_, expected_stage_counts(model_, spec_, p, b)) <= budget_;
  }

  // Raises all quantiles uniformly toward 1 until the cost fits under both the
  // working and an independent integration seed.
  std::vector<double> project(const std::vector<double>& q, const IntegrationConfig& a, const IntegrationConfig& b) {
    if (affordable(q, a, b)) return q;
    auto raised = [&](double t) {
      std::vector<double> out(q.size());
      for (std::size_t j = 0; j < q.size(); ++j) out[j] = t >= 1.0 ? 1.0 : q[j] + t * (1.0 - q[j]);
      return out;
    };
    double lo = 0.0, hi = 1.0;
    for (int step = 0; step < kProjectionSteps; ++step) {
      const double mid = 0.5 * (lo + hi);
      if (affordable(raised(mid), a, b)) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    return raised(hi);
  }

  OptimizationResult run(const std::vector<std::vector<double>>& extra_seeds,
                         const std::vector<std::vector<double>>& extra_candidates) {
    if (dim() == 0) return fixed_result({});
    auto seeds = seed_points(dim(), opt_);
    seeds.insert(seeds.end(), extra_seeds.begin(), extra_seeds.end());

    std::vector<double> seed_values(seeds.size());
    parallel_for(seeds.size(), opt_.threads, [&](std::size_t i) { seed_values[i] = value_uncounted(seeds[i], search_integ_); });
    evaluations_ += static_cast<long long>(seeds.size());

    std::vector<std::size_t> order(seeds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return lex_better(seed_values[a], seeds[a], seed_values[b], seeds[b]);
    });
    std::vector<std::vector<double>> starts;
    for (auto i : order) {
      if (static_cast<int>(starts.size()) >= opt_.n_polish) break;
      if (std::find(starts.begin(), starts.end(), seeds[i]) == starts.end()) starts.push_back(seeds[i]);
    }

    NelderMeadOptions nm;
    nm.max_iters = opt_.polish_iters;
    std::vector<NelderMeadResult> polished(starts.size());
    parallel_for(starts.size(), opt_.threads, [&](std::size_t i) {
      polished[i] = nelder_mead(
          [&](const std::vector<double>& x) { return value_uncounted(clamp_unit(x), polish_integ_); }, starts[i], nm);
    });

    std::vector<std::vector<double>> candidates;
    for (auto& p : polished) {
      evaluations_ += p.evaluations;
      candidates.push_back(clamp_unit(p.x));
    }
    candidates.insert(candidates.end(), extra_candidates.begin(), extra_candidates.end());

    OptimizationResult result;
    double best_value = kInf;
    for (auto& c : candidates) {
      std::vector<double> q = c;
      if (mode_ == Mode::kBudgeted) {
        // Cheap bisection first; redo at full accuracy only if that misses.
        q = project(q, polish_integ_, polish_fresh_integ_);
        q = project(q, opt_.integration, fresh_integ_);
      }
      const double v = value(q, opt_.integration);
      if (opt_.keep_trace) result.trace.push_back({qmap_.to_policy(q), v});
      if (result.quantiles.empty() || lex_better(v, q, best_value, result.quantiles)) {
        best_value = v;
        result.quantiles = q;
      }
    }
    if (opt_.keep_trace) {
      for (std::size_t i = 0; i < seeds.size(); ++i) result.trace.push_back({qmap_.to_policy(seeds[i]), seed_values[i]});
    }
    result.policy = qmap_.to_policy(result.quantiles);
    result.report = evaluate_policy(model_, spec_, result.policy, report_alpha(), opt_.integration).report;
    ++evaluations_;
    result.feasible = mode_ == Mode::kJoint || result.report.expected_total_cost <= budget_;
    result.evaluations = evaluations_;
    return result;
  }

 private:
  // Nothing to choose: the only policy is the empty one.
  OptimizationResult fixed_result(std::vector<double> q) {
    OptimizationResult result;
    result.quantiles = std::move(q);
    result.policy = qmap_.to_policy(result.quantiles);
    result.report = evaluate_policy(model_, spec_, result.policy, report_alpha(), opt_.integration).report;
    result.feasible = mode_ == Mode::kJoint || result.report.expected_total_cost <= budget_;
    result.evaluations = ++evaluations_;
    return result;
  }

  double value_uncounted(const std::vector<double>& q, const IntegrationConfig& integ) const {
    const auto ev = evaluate_policy(model_, spec_, qmap_.to_policy(q), report_alpha(), integ);
    if (mode_ == Mode::kJoint) return ev.report.joint_value;
    const double violation = std::max(0.0, ev.report.expected_total_cost - budget_) / budget_;
    return -(ev.report.reward - opt_.penalty * violation) / tail_;
  }

  const GmmModel& model_;
  const PipelineSpec& spec_;
  Mode mode_;
  double budget_;
  double alpha_;
  const OptConfig& opt_;
  QuantileMap qmap_;
  double tail_ = 0.0;
  IntegrationConfig search_integ_;
  IntegrationConfig polish_integ_;
  IntegrationConfig polish_fresh_integ_;
  IntegrationConfig fresh_integ_;
  long long evaluations_ = 0;
};

OptimizationResult infeasible_result(const GmmModel& model, const PipelineSpec& spec, const OptConfig& opt) {
  OptimizationResult r;
  r.policy = Policy::block_all(spec.num_stages());
  r.quantiles.assign(spec.num_stages() - 1, 1.0);
  r.report = evaluate_policy(model, spec, r.policy, 1.0, opt.integration).report;
  r.feasible = false;
  r.evaluations = 1;
  return r;
}

double cheapest_cost(const PipelineSpec& spec) {
  return spec.stages.front().cost * static_cast<double>(spec.population);
}

}  // namespace

void validate(const OptConfig& config) {
  validate(config.integration);
  validate(config.polish_integration);
  validate(config.search_integration);
  if (config.seed_levels.empty() || config.n_polish < 1 || config.polish_iters < 0 || config.lhs_seeds < 1 ||
      !(config.penalty > 0.0) || config.threads < 1) {
    throw Error(ErrorCode::kInvalidArgument, "optimizer config has a non-positive count or penalty");
  }
  for (double l : config.seed_levels) {
    if (!(l >= 0.0 && l <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "seed levels must lie in [0, 1]");
  }
}

QuantileMap::QuantileMap(const GmmModel& model, const PipelineSpec& spec) {
  for (std::size_t i = 0; i + 1 < spec.num_stages(); ++i) {
    const auto col = static_cast<Eigen::Index>(spec.stages[i].column);
    if (spec.stages[i].column >= model.dim()) throw Error(ErrorCode::kBadDimension, "stage column out of range");
    Marginal m;
    for (const auto& c : model.components()) {
      m.weight.push_back(c.weight);
      m.mean.push_back(c.mean(col));
      m.sd.push_back(std::sqrt(c.cov(col, col)));
    }
    marginals_.push_back(std::move(m));
  }
}

double QuantileMap::cdf(std::size_t stage, double x) const {
  const auto& m = marginals_[stage];
  double p = 0.0;
  for (std::size_t c = 0; c < m.weight.size(); ++c) p += m.weight[c] * normal_cdf((x - m.mean[c]) / m.sd[c]);
  return p;
}

double QuantileMap::threshold(std::size_t stage, double q) const {
  if (q <= 0.0) return -kInf;
  if (q >= 1.0) return kInf;
  const auto& m = marginals_[stage];
  if (m.weight.size() == 1) return m.mean[0] + m.sd[0] * normal_quantile(q);
  // Bracket from per-component quantiles, then bisect the mixture CDF.
  double lo = kInf, hi = -kInf;
  for (std::size_t c = 0; c < m.weight.size(); ++c) {
    const double x = m.mean[c] + m.sd[c] * normal_quantile(q);
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::fabs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(stage, mid) < q) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

Policy QuantileMap::to_policy(const std::vector<double>& quantiles) const {
  if (quantiles.size() != marginals_.size()) throw Error(ErrorCode::kLengthMismatch, "quantile vector length");
  Policy p;
  for (std::size_t i = 0; i < quantiles.size(); ++i) p.thresholds.push_back(threshold(i, quantiles[i]));
  return p;
}

OptimizationResult optimize_budgeted(const GmmModel& model, const PipelineSpec& spec, const BudgetSpec& budget,
                                     const OptConfig& opt) {
  validate(spec);
  validate(opt);
  if (!(budget.budget > 0.0)) throw Error(ErrorCode::kInvalidArgument, "budget must be positive");
  if (cheapest_cost(spec) > budget.budget) return infeasible_result(model, spec, opt);
  PolicySearch search(model, spec, Mode::kBudgeted, budget.budget, 1.0, opt);
  return search.run({}, {});
}

OptimizationResult optimize_joint(const GmmModel& model, const PipelineSpec& spec, double alpha,
                                  const OptConfig& opt) {
  validate(spec);
  validate(opt);
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must lie in [0, 1]");
  PolicySearch search(model, spec, Mode::kJoint, 0.0, alpha, opt);
  return search.run({}, {});
}

BudgetCurve budget_sweep(const GmmModel& model, const PipelineSpec& spec, const std::vector<double>& budgets,
                         const OptConfig& opt) {
  validate(spec);
  validate(opt);
  if (budgets.empty()) throw Error(ErrorCode::kInvalidArgument, "budget list is empty");
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    if (!(budgets[i] > 0.0)) throw Error(ErrorCode::kInvalidArgument, "budgets must be positive");
    if (i > 0 && !(budgets[i] > budgets[i - 1])) {
      throw Error(ErrorCode::kInvalidArgument, "budgets must be strictly increasing");
    }
  }
  BudgetCurve curve;
  std::optional<std::vector<double>> previous;
  const auto pop = static_cast<double>(spec.population);
  for (double b : budgets) {
    BudgetCurvePoint point;
    point.budget = b;
    if (cheapest_cost(spec) > b) {
      point.feasible = false;
      point.expected_detected = 0.0;
      point.policy = Policy::block_all(spec.num_stages());
      curve.points.push_back(std::move(point));
      continue;
    }
    PolicySearch search(model, spec, Mode::kBudgeted, b, 1.0, opt);
    std::vector<std::vector<double>> warm;
    if (previous) warm.push_back(*previous);
    const auto result = search.run(warm, warm);
    point.feasible = result.feasible;
    point.policy = result.policy;
    point.expected_detected = result.feasible ? pop * result.report.reward : 0.0;
    previous = result.quantiles;
    curve.points.push_back(std::move(point));
  }
  return curve;
}

}  // namespace htvs
