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

#include "wmpc/vehicle.hpp"

#include <cmath>
#include <vector>

using namespace wmpc;
using namespace wmpc::vehicle;

namespace
{
StateVector<double> euler(const StateVector<double> & x, const InputVector<double> & u, double dt, double L, int substeps)
{
  StateVector<double> y = x;
  const double h = dt / substeps;
  for (int i = 0; i < substeps; ++i) {
    y += h * derivative<double>(y, u, L);
  }
  return y;
}
}  // namespace

TEST_CASE("rk4 one-step error converges with fourth order against a fine Euler oracle")
{
  const StateVector<double> x0(0.0, 0.0, 0.3, 20.0, 1.0, 0.05);
  const InputVector<double> u(2.0, 0.1);
  const double L = 2.9;
  // Fine Euler with one Richardson extrapolation step, accurate to O((h/n)^2).
  std::vector<double> errors;
  for (double h : {0.4, 0.2, 0.1}) {
    const int n = 200000;
    const StateVector<double> oracle = 2.0 * euler(x0, u, h, L, 2 * n) - euler(x0, u, h, L, n);
    errors.push_back((rk4<double>(x0, u, h, L) - oracle).norm());
  }
  const double order1 = std::log2(errors[0] / errors[1]);
  const double order2 = std::log2(errors[1] / errors[2]);
  MESSAGE("local orders " << order1 << " " << order2);
  CHECK(order1 > 4.5);
  CHECK(order2 > 4.5);
}

TEST_CASE("step clamps speed and steering and flags the clamp")
{
  VehicleParams params;
  VehicleState s;
  s.v = params.v_max - 0.01;
  s.a = 5.0;
  const auto r = step(s, {0.0, 0.0}, 0.1, params);
  CHECK(r.state.v == doctest::Approx(params.v_max));
  CHECK(r.clamped);

  VehicleState t;
  t.v = 10.0;
  const auto q = step(t, {0.0, 0.0}, 0.02, params);
  CHECK_FALSE(q.clamped);
  CHECK(q.state.x == doctest::Approx(0.2));
}

TEST_CASE("vehicle parameters are validated")
{
  VehicleParams p;
  p.v_max = 40.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = VehicleParams{};
  p.a_min = 1.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  CHECK_THROWS_AS(step(VehicleState{}, ControlInput{}, 0.0, VehicleParams{}), ValidationError);
}
