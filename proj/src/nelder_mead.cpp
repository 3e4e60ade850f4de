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

#include "htvs/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace htvs {
namespace {

struct Vertex {
  std::vector<double> x;
  double f = 0.0;
};

bool better(const Vertex& a, const Vertex& b) {
  if (a.f != b.f) return a.f < b.f;
  return a.x < b.x;
}

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                             const NelderMeadOptions& options) {
  const std::size_t n = x0.size();
  NelderMeadResult result;
  auto eval = [&](const std::vector<double>& x) {
    ++result.evaluations;
    return f(x);
  };

  std::vector<Vertex> simplex;
  simplex.push_back({x0, eval(x0)});
  if (n == 0) {
    result.x = x0;
    result.value = simplex[0].f;
    return result;
  }
  for (std::size_t i = 0; i < n; ++i) {
    Vertex v{x0, 0.0};
    const double up = v.x[i] + options.initial_step;
    v.x[i] = up <= options.upper ? up : v.x[i] - options.initial_step;
    v.f = eval(v.x);
    simplex.push_back(std::move(v));
  }

  auto point = [&](const std::vector<double>& centroid, const std::vector<double>& worst, double coef) {
    std::vector<double> p(n);
    for (std::size_t j = 0; j < n; ++j) p[j] = centroid[j] + coef * (worst[j] - centroid[j]);
    return p;
  };

  result.iterations = options.max_iters;
  for (int iter = 0; iter < options.max_iters; ++iter) {
    std::sort(simplex.begin(), simplex.end(), better);

    double extent = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
      for (std::size_t j = 0; j < n; ++j) extent = std::max(extent, std::fabs(simplex[k].x[j] - simplex[0].x[j]));
    }
    if (extent <= options.xtol && simplex[n].f - simplex[0].f <= options.ftol) {
      result.iterations = iter;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[k].x[j] / static_cast<double>(n);
    }
    const Vertex& worst = simplex[n];

    Vertex reflected{point(centroid, worst.x, -1.0), 0.0};
    reflected.f = eval(reflected.x);
    if (better(reflected, simplex[0])) {
      Vertex expanded{point(centroid, worst.x, -2.0), 0.0};
      expanded.f = eval(expanded.x);
      simplex[n] = better(expanded, reflected) ? std::move(expanded) : std::move(reflected);
      continue;
    }
    if (better(reflected, simplex[n - 1])) {
      simplex[n] = std::move(reflected);
      continue;
    }
    const bool outside = better(reflected, worst);
    Vertex contracted{point(centroid, outside ? reflected.x : worst.x, 0.5), 0.0};
    contracted.f = eval(contracted.x);
    if (better(contracted, outside ? reflected : worst)) {
      simplex[n] = std::move(contracted);
      continue;
    }
    for (std::size_t k = 1; k <= n; ++k) {
      for (std::size_t j = 0; j < n; ++j) simplex[k].x[j] = simplex[0].x[j] + 0.5 * (simplex[k].x[j] - simplex[0].x[j]);
      simplex[k].f = eval(simplex[k].x);
    }
  }
  std::sort(simplex.begin(), simplex.end(), better);
  result.x = simplex[0].x;
  result.value = simplex[0].f;
  return result;
}

}  // namespace htvs
