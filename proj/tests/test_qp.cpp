// Copyright 2026 The WMPC Lab Authors
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

#include "doctest.h"

#include "wmpc/qp.hpp"

#include <limits>
#include <random>

using namespace wmpc;
using namespace wmpc::qp;

namespace
{
Mat random_spd(int n, std::mt19937_64 & rng)
{
  std::normal_distribution<double> nd;
  Mat B(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      B(i, j) = nd(rng);
    }
  }
  return B * B.transpose() + Mat::Identity(n, n);
}
}  // namespace

TEST_CASE("unconstrained QP returns the Newton step")
{
  Mat H(2, 2);
  H << 4.0, 1.0, 1.0, 3.0;
  Vec g(2);
  g << 1.0, 2.0;
  DualActiveSetSolver solver;
  const QpResult r = solver.solve_with_hessian(H, g, Mat(0, 2), Vec(0));
  CHECK(r.feasible);
  const Vec expected = -H.ldlt().solve(g);
  CHECK((r.x - expected).norm() < 1e-12);
}

TEST_CASE("random QPs satisfy the KKT conditions")
{
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  DualActiveSetSolver solver;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 6;
    const int m = 8;
    const Mat H = random_spd(n, rng);
    Vec g(n);
    Mat A(m, n);
    Vec c(m);
    for (int i = 0; i < n; ++i) {
      g[i] = 3.0 * nd(rng);
    }
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        A(i, j) = nd(rng);
      }
      c[i] = 1.0 + std::abs(nd(rng));  // x = 0 is strictly feasible
    }
    Vec lower = Vec::Constant(n, -0.5);
    Vec upper = Vec::Constant(n, 0.5);
    const QpResult r = solver.solve(inverse_cholesky_factor(H), g, A, c, lower, upper);
    REQUIRE(r.feasible);
    // Primal feasibility.
    CHECK(((A * r.x + c).array() >= -1e-9).all());
    CHECK(((r.x - lower).array() >= -1e-9).all());
    CHECK(((upper - r.x).array() >= -1e-9).all());
    // Dual feasibility, complementarity, stationarity.
    Vec grad = H * r.x + g;
    for (int i = 0; i < m + 2 * n; ++i) {
      const double lambda = r.multipliers[i];
      CHECK(lambda >= -1e-9);
      double slack;
      Vec normal = Vec::Zero(n);
      if (i < m) {
        normal = A.row(i).transpose();
        slack = A.row(i).dot(r.x) + c[i];
      } else {
        const int v = (i - m) / 2;
        const bool lo = (i - m) % 2 == 0;
        normal[v] = lo ? 1.0 : -1.0;
        slack = lo ? r.x[v] - lower[v] : upper[v] - r.x[v];
      }
      CHECK(std::abs(lambda * slack) < 1e-8);
      grad -= lambda * normal;
    }
    CHECK(grad.norm() < 1e-8);
  }
}

TEST_CASE("contradictory bounds are reported infeasible")
{
  Mat H = Mat::Identity(1, 1);
  Vec g = Vec::Zero(1);
  Mat A(2, 1);
  A << 1.0, -1.0;
  Vec c(2);
  c << -1.0, 0.0;  // x >= 1 and x <= 0
  DualActiveSetSolver solver;
  const QpResult r = solver.solve_with_hessian(H, g, A, c);
  CHECK_FALSE(r.feasible);
}
