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

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace wmpc
{
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Speed ceiling of the vehicle interface (m/s).
inline constexpr double kVelocityCap = 37.5;

/// Raised for invalid configuration or arguments. Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation cannot complete. Maps to CLI exit code 2.
class RuntimeFailure : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Wraps an angle to (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar angle)
{
  using std::remainder;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  Scalar wrapped = remainder(angle, Scalar(two_pi));
  if (wrapped <= Scalar(-std::numbers::pi)) {
    wrapped += Scalar(two_pi);
  }
  return wrapped;
}

/// 64-bit FNV-1a; stable across platforms, used for provenance hashes.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Hex rendering of a 64-bit hash.
std::string hex64(std::uint64_t value);

/// Root-mean-square of a range of doubles; 0 for an empty range.
template <typename Range>
double rms(const Range & values)
{
  double acc = 0.0;
  std::size_t n = 0;
  for (double v : values) {
    acc += v * v;
    ++n;
  }
  return n == 0 ? 0.0 : std::sqrt(acc / static_cast<double>(n));
}

/// Number of worker threads; honours the WMPC_WORKERS environment variable.
unsigned worker_count();

/// Warnings go to stderr unless a sink is installed (tests capture them).
using WarningSink = std::function<void(const std::string &)>;
void set_warning_sink(WarningSink sink);
void warn(const std::string & message);

}  // namespace wmpc
