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

#include <cmath>

namespace htvs {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

/// Standard normal upper tail 1 - CDF, accurate far into the right tail.
inline double normal_sf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

/// Inverse standard normal CDF (Wichura AS 241, ~1e-16 relative accuracy).
/// Returns -inf at p == 0 and +inf at p == 1.
double normal_quantile(double p);

}  // namespace htvs
