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

#include <functional>
#include <vector>

namespace htvs {

struct NelderMeadOptions {
  int max_iters = 200;
  double initial_step = 0.05;
  double xtol = 1e-5;  // simplex extent (infinity norm) at convergence
  double ftol = 1e-9;  // value spread at convergence
  double lower = 0.0;  // box for the initial simplex; the objective sees raw points
  double upper = 1.0;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
};

/// Downhill simplex minimization. Vertices with equal values are ordered
/// lexicographically, so ties resolve toward smaller coordinates.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                             const NelderMeadOptions& options);

}  // namespace htvs
