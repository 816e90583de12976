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

#include <algorithm>
#include <cmath>
#include <functional>

namespace wmpc::testing
{
inline Vec central_difference(const std::function<double(const Vec &)> & f, const Vec & x, double h)
{
  Vec g(x.size());
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + step;
    const double fp = f(xp);
    xp[i] = x[i] - step;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

/// Norm-wise relative error ||a - b|| / max(||b||, floor).
inline double relative_error(const Vec & a, const Vec & b, double floor = 1e-8)
{
  return (a - b).norm() / std::max(b.norm(), floor);
}

}  // namespace wmpc::testing
