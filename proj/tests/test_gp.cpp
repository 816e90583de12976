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

#include "test_support.hpp"
#include "wmpc/gp.hpp"

#include <cmath>
#include <random>

using namespace wmpc;
using namespace wmpc::gp;

namespace
{
struct Data
{
  Mat X;
  Vec y;
};

Data sample(int n, int d, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Data out{Mat(n, d), Vec(n)};
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j) {
      out.X(i, j) = u(rng);
      acc += std::sin(3.0 * out.X(i, j) + j);
    }
    out.y[i] = acc;
  }
  return out;
}
}  // namespace

TEST_CASE("log marginal likelihood gradient matches central differences")
{
  const Data data = sample(25, 7, 11);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 0.5);
  for (int trial = 0; trial < 5; ++trial) {
    Hyperparameters h;
    h.mean = 0.3 * nd(rng);
    h.log_lengthscales = Vec::Constant(7, -0.5);
    for (int j = 0; j < 7; ++j) {
      h.log_lengthscales[j] += nd(rng);
    }
    h.log_signal_var = nd(rng);
    h.log_noise_var = std::log(1e-2) + nd(rng);
    const Vec p = h.pack();
    Vec grad;
    log_marginal_likelihood(data.X, data.y, p, Vec(), &grad);
    const Vec fd = testing::central_difference(
      [&](const Vec & q) { return log_marginal_likelihood(data.X, data.y, q, Vec(), nullptr); }, p, 1e-6);
    const double err = testing::relative_error(grad, fd);
    MESSAGE("relative error " << err);
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("fitted GP interpolates smooth data and reports small variance at data")
{
  const Data data = sample(30, 2, 4);
  const GpRegressor gp = GpRegressor::fit(data.X, data.y);
  for (int i = 0; i < 30; i += 7) {
    const Prediction p = gp.predict(data.X.row(i).transpose());
    CHECK(p.mean == doctest::Approx(data.y[i]).epsilon(1e-2));
    CHECK(p.std < 0.05);
  }
  Vec far(2);
  far << 5.0, 5.0;
  CHECK(gp.predict(far).std > gp.predict(data.X.row(0).transpose()).std);
}

TEST_CASE("fitting is deterministic for a fixed seed")
{
  const Data data = sample(20, 3, 9);
  FitOptions o;
  o.seed = 42;
  const GpRegressor a = GpRegressor::fit(data.X, data.y, o);
  const GpRegressor b = GpRegressor::fit(data.X, data.y, o);
  CHECK(a.to_json() == b.to_json());
}

TEST_CASE("json round trip reproduces predictions")
{
  const Data data = sample(15, 2, 2);
  const GpRegressor gp = GpRegressor::fit(data.X, data.y);
  const GpRegressor back = GpRegressor::from_json(gp.to_json());
  Vec x(2);
  x << 0.3, 0.7;
  CHECK(back.predict(x).mean == doctest::Approx(gp.predict(x).mean).epsilon(1e-12));
  CHECK(back.predict(x).std == doctest::Approx(gp.predict(x).std).epsilon(1e-12));
}

TEST_CASE("conditioning on a pseudo-observation shrinks the variance there")
{
  const Data data = sample(12, 2, 6);
  const GpRegressor gp = GpRegressor::fit(data.X, data.y);
  Vec x(2);
  x << 0.51, 0.49;
  const Prediction before = gp.predict(x);
  const GpRegressor cond = gp.conditioned_on(x, before.mean);
  CHECK(cond.predict(x).std < before.std);
  CHECK(cond.predict(x).mean == doctest::Approx(before.mean).epsilon(1e-6));
}

TEST_CASE("feasibility model separates classes and its probabilities sum to one")
{
  const int n = 40;
  Mat X(n, 1);
  std::vector<bool> feasible(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = static_cast<double>(i) / (n - 1);
    feasible[i] = X(i, 0) < 0.5;
  }
  const FeasibilityModel model = FeasibilityModel::fit(X, feasible);
  Vec lo(1);
  lo << 0.1;
  Vec hi(1);
  hi << 0.9;
  CHECK(model.predict(lo).mean > 0.8);
  CHECK(model.predict(hi).mean < 0.2);
  const auto p = model.class_probabilities(lo);
  CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-12));

  const FeasibilityModel all = FeasibilityModel::fit(X, std::vector<bool>(n, true));
  CHECK(all.is_constant());
  CHECK(all.predict(lo).mean == doctest::Approx(1.0));
}
