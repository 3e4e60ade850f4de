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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "htvs/nelder_mead.hpp"

namespace htvs {
namespace {

TEST(NelderMeadTest, Rosenbrock) {
  auto f = [](const std::vector<double>& x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  NelderMeadOptions opt;
  opt.max_iters = 5000;
  opt.xtol = 1e-10;
  opt.ftol = 1e-14;
  opt.initial_step = 0.5;
  const auto r = nelder_mead(f, {-1.2, 1.0}, opt);
  EXPECT_NEAR(r.x[0], 1.0, 1e-4);
  EXPECT_NEAR(r.x[1], 1.0, 1e-4);
  EXPECT_LT(r.iterations, opt.max_iters);
}

TEST(NelderMeadTest, ShiftedQuadraticInFourDimensions) {
  const std::vector<double> c = {0.1, 0.7, 0.4, 0.9};
  auto f = [&](const std::vector<double>& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (i + 1.0) * (x[i] - c[i]) * (x[i] - c[i]);
    return s;
  };
  NelderMeadOptions opt;
  opt.max_iters = 2000;
  opt.xtol = 1e-8;
  opt.ftol = 1e-14;
  const auto r = nelder_mead(f, {0.5, 0.5, 0.5, 0.5}, opt);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(r.x[i], c[i], 1e-5);
  EXPECT_EQ(r.value, f(r.x));
}

TEST(NelderMeadTest, CountsEveryEvaluation) {
  int calls = 0;
  auto f = [&](const std::vector<double>& x) {
    ++calls;
    return std::fabs(x[0] - 0.3) + std::fabs(x[1] - 0.6);
  };
  const auto r = nelder_mead(f, {0.0, 0.0}, NelderMeadOptions{});
  EXPECT_EQ(r.evaluations, calls);
}

TEST(NelderMeadTest, IterationCapIsHonored) {
  auto f = [](const std::vector<double>& x) { return x[0] * x[0] + x[1] * x[1]; };
  NelderMeadOptions opt;
  opt.max_iters = 3;
  opt.xtol = 0.0;
  opt.ftol = 0.0;
  const auto r = nelder_mead(f, {0.5, 0.5}, opt);
  EXPECT_EQ(r.iterations, 3);
  EXPECT_LE(r.evaluations, 3 + 3 * 3);
}

TEST(NelderMeadTest, ZeroDimensions) {
  const auto r = nelder_mead([](const std::vector<double>&) { return 4.0; }, {}, NelderMeadOptions{});
  EXPECT_TRUE(r.x.empty());
  EXPECT_EQ(r.value, 4.0);
  EXPECT_EQ(r.evaluations, 1);
}

TEST(NelderMeadTest, InitialStepStaysInBox) {
  std::vector<std::vector<double>> seen;
  auto f = [&](const std::vector<double>& x) {
    seen.push_back(x);
    return 0.0;
  };
  NelderMeadOptions opt;
  opt.max_iters = 0;
  nelder_mead(f, {1.0, 0.5}, opt);
  ASSERT_EQ(seen.size(), 3u);
  EXPECT_EQ(seen[1], (std::vector<double>{0.95, 0.5}));
  EXPECT_EQ(seen[2], (std::vector<double>{1.0, 0.55}));
}

// On a flat function every vertex ties, so the lexicographically smallest wins.
TEST(NelderMeadTest, TiesPreferSmallerCoordinates) {
  auto f = [](const std::vector<double>&) { return 1.0; };
  NelderMeadOptions opt;
  opt.max_iters = 0;
  const auto r = nelder_mead(f, {0.5, 0.5}, opt);
  EXPECT_EQ(r.x, (std::vector<double>{0.5, 0.5}));
  const auto r2 = nelder_mead(f, {1.0, 0.5}, opt);
  EXPECT_EQ(r2.x, (std::vector<double>{0.95, 0.5}));
}

TEST(NelderMeadTest, Deterministic) {
  auto f = [](const std::vector<double>& x) { return std::sin(5 * x[0]) + std::cos(3 * x[1]) + x[0] * x[1]; };
  const auto a = nelder_mead(f, {0.2, 0.8}, NelderMeadOptions{});
  const auto b = nelder_mead(f, {0.2, 0.8}, NelderMeadOptions{});
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.evaluations, b.evaluations);
}

}  // namespace
}  // namespace htvs
