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

#pragma once

#include "wmpc/common.hpp"

#include <vector>

namespace wmpc::qp
{
/// Strictly convex inequality-constrained QP
///
///   min 0.5 x'Hx + g'x   s.t.   A x + c >= 0   (row-wise),   lower <= x <= upper
///
/// solved by the Goldfarb-Idnani dual active-set method. The method starts at
/// the unconstrained minimiser and only touches violated constraints, so
/// problems whose constraints are mostly inactive cost one factorisation.
struct QpResult
{
  Vec x;
  /// One per constraint, zero when inactive. Rows of A come first, then the
  /// lower and upper bound of variable i at m + 2i and m + 2i + 1.
  Vec multipliers;
  std::vector<int> active;  // active constraint indices, same numbering
  bool feasible{false};
  int iterations{0};
};

/// J = L^{-T} for H = L L'. H must be symmetric positive definite; a jitter
/// ladder is tried before giving up.
Mat inverse_cholesky_factor(const Mat & hessian);

class DualActiveSetSolver
{
public:
  explicit DualActiveSetSolver(int max_iterations = 500, double tolerance = 1e-10)
  : max_iterations_(max_iterations), tol_(tolerance)
  {
  }

  /// Solve with a precomputed inverse Cholesky factor J (H^{-1} = J J').
  QpResult solve(const Mat & inv_factor, const Vec & g, const Mat & A, const Vec & c);

  /// With simple bounds (entries may be infinite). Constraints listed in
  /// `first` are activated before any other when violated, in order; with
  /// bounds on leading variables this keeps their activation free of rotations.
  QpResult solve(
    const Mat & inv_factor, const Vec & g, const Mat & A, const Vec & c, const Vec & lower,
    const Vec & upper, const std::vector<int> & first = {});

  QpResult solve_with_hessian(const Mat & H, const Vec & g, const Mat & A, const Vec & c)
  {
    return solve(inverse_cholesky_factor(H), g, A, c);
  }

private:
  void add_constraint(int q, Vec & d);
  void drop_constraint(int k, int & q);

  int max_iterations_;
  double tol_;
  Mat J_;
  Mat R_;
};

}  // namespace wmpc::qp
