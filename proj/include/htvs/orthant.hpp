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
#include <cstdint>
#include <vector>

#include "htvs/gmm.hpp"

namespace htvs {

struct IntegrationConfig {
  int n_points = 8192;
  int n_randomizations = 16;
  std::uint64_t seed = 0;
};

void validate(const IntegrationConfig& config);

/// Lower bounds `thresholds[j]` on model dimension `dims[j]`. -inf means the
/// dimension is unconstrained and is dropped before integration; +inf makes
/// the event empty.
struct OrthantQuery {
  std::vector<double> thresholds;
  std::vector<std::size_t> dims;
};

struct OrthantEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// P[y_d >= t_d for every queried d], estimated per mixture component by
/// randomized QMC over the sequential-conditioning transform of the
/// standardized Gaussian. Variables are conditioned in query order; the first
/// retained variable is integrated in closed form, so one-dimensional queries
/// are exact (std_error 0).
OrthantEstimate upper_orthant_prob(const GmmModel& model, const OrthantQuery& query, const IntegrationConfig& integ);

/// Same pass as upper_orthant_prob, but returns the estimate for every query
/// prefix: entry j covers the constraints at query positions 0..j. All
/// prefixes share QMC points, so the sequence is exactly non-increasing.
std::vector<OrthantEstimate> upper_orthant_prefixes(const GmmModel& model, const OrthantQuery& query,
                                                    const IntegrationConfig& integ);

}  // namespace htvs
