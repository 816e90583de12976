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

#include "wmpc/mobo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace wmpc::mobo
{
namespace
{
// E[(t - Y)^+] for Y ~ N(mu, sigma^2).
double expected_shortfall(double t, double mu, double sigma)
{
  if (sigma <= 0.0) {
    return std::max(t - mu, 0.0);
  }
  const double z = (t - mu) / sigma;
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return (t - mu) * cdf + sigma * pdf;
}

Front strictly_inside(const Front & points, const Point2 & reference)
{
  Front inside;
  for (const auto & p : points) {
    if (p[0] < reference[0] && p[1] < reference[1]) {
      inside.push_back(p);
    }
  }
  return nondominated(inside);
}

}  // namespace

bool dominates(const Point2 & a, const Point2 & b)
{
  return a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1]);
}

std::vector<std::size_t> nondominated_indices(const Front & points)
{
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < points.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < points.size() && !dominated; ++j) {
      if (j == i) {
        continue;
      }
      dominated = dominates(points[j], points[i]) || (j < i && points[j] == points[i]);
    }
    if (!dominated) {
      keep.push_back(i);
    }
  }
  return keep;
}

Front nondominated(const Front & points)
{
  Front out;
  for (std::size_t i : nondominated_indices(points)) {
    out.push_back(points[i]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double hypervolume(const Front & points, const Point2 & reference)
{
  const Front front = strictly_inside(points, reference);
  double volume = 0.0;
  // Ascending j0 means descending j1 along a nondominated front.
  for (std::size_t i = 0; i < front.size(); ++i) {
    const double next_x = (i + 1 < front.size()) ? front[i + 1][0] : reference[0];
    volume += (next_x - front[i][0]) * (reference[1] - front[i][1]);
  }
  return volume;
}

double ehvi(
  const gp::Prediction & y0, const gp::Prediction & y1, const Front & front, const Point2 & reference)
{
  const Front f = strictly_inside(front, reference);
  const std::size_t n = f.size();
  // Strip i spans j0 in [a_i, a_{i+1}) with the front covering j1 >= b_i,
  // where a_0 = -inf, a_{n+1} = r0 and b_0 = r1.
  double total = 0.0;
  double lower_shortfall = 0.0;  // E[(a_i - Y0)^+], zero for a_0 = -inf
  for (std::size_t i = 0; i <= n; ++i) {
    const double a_next = (i < n) ? f[i][0] : reference[0];
    const double b = (i == 0) ? reference[1] : f[i - 1][1];
    const double upper_shortfall = expected_shortfall(a_next, y0.mean, y0.std);
    total += (upper_shortfall - lower_shortfall) * expected_shortfall(b, y1.mean, y1.std);
    lower_shortfall = upper_shortfall;
  }
  return std::max(total, 0.0);
}

void AcquisitionConfig::validate() const
{
  if (!(k > 0.0) || !(epsilon >= 0.0)) {
    throw ValidationError("acquisition needs k > 0 and epsilon >= 0");
  }
  for (const auto & r : reference) {
    if (!(r[0] > 0.0 && r[1] > 0.0) || !std::isfinite(r[0]) || !std::isfinite(r[1])) {
      throw ValidationError("hypervolume reference points must be positive and finite");
    }
  }
}

double feasibility_weight(const gp::FeasibilityModel::Estimate & feasibility, double k, double epsilon)
{
  const double mu = std::clamp(feasibility.mean, 0.0, 1.0);
  const double w = std::pow(mu, k) + epsilon * std::max(feasibility.std, 0.0);
  return std::clamp(w, 0.0, 1.0);
}

double acquisition(
  const GroupModels & models, const Front & front, const Point2 & reference,
  const AcquisitionConfig & config, const Vec & u)
{
  const double value = ehvi(models.j0.predict(u), models.j1.predict(u), front, reference);
  if (models.feasibility == nullptr) {
    return value;
  }
  return value * feasibility_weight(models.feasibility->predict(u), config.k, config.epsilon);
}

}  // namespace wmpc::mobo
