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

// Kinematic bicycle with acceleration and steering angle as states, so that
// longitudinal jerk and steering rate are the controls.
//
//   state  x = [px, py, psi, v, a, delta]
//   input  u = [j, omega]
//
//   px'    = v cos(psi)
//   py'    = v sin(psi)
//   psi'   = v tan(delta) / L
//   v'     = a
//   a'     = j
//   delta' = omega

#include "wmpc/common.hpp"

#include <algorithm>

namespace wmpc::vehicle
{
inline constexpr int kStateDim = 6;
inline constexpr int kInputDim = 2;

template <typename Scalar>
using StateVector = Eigen::Matrix<Scalar, kStateDim, 1>;
template <typename Scalar>
using InputVector = Eigen::Matrix<Scalar, kInputDim, 1>;

enum StateIndex { kX = 0, kY = 1, kPsi = 2, kV = 3, kA = 4, kDelta = 5 };
enum InputIndex { kJerk = 0, kOmega = 1 };

struct VehicleParams
{
  double wheelbase{2.9};
  double delta_max{0.35};
  double j_max{15.0};
  double omega_max{0.32};
  double a_min{-10.0};
  double a_max{6.0};
  double v_max{kVelocityCap};

  void validate() const
  {
    if (!(wheelbase > 0.0 && delta_max > 0.0 && j_max > 0.0 && omega_max > 0.0)) {
      throw ValidationError("vehicle parameters must be positive");
    }
    if (!(a_min < 0.0 && a_max > 0.0)) {
      throw ValidationError("vehicle acceleration bounds must straddle zero");
    }
    if (!(v_max > 0.0) || v_max > kVelocityCap) {
      throw ValidationError("vehicle v_max must lie in (0, 37.5]");
    }
  }
};

struct VehicleState
{
  double x{0.0};
  double y{0.0};
  double psi{0.0};
  double v{0.0};
  double a{0.0};
  double delta{0.0};

  StateVector<double> vector() const { return {x, y, psi, v, a, delta}; }
  static VehicleState from_vector(const StateVector<double> & s)
  {
    return {s[kX], s[kY], s[kPsi], s[kV], s[kA], s[kDelta]};
  }
};

struct ControlInput
{
  double j{0.0};
  double omega{0.0};

  InputVector<double> vector() const { return {j, omega}; }
};

/// Continuous-time dynamics f(x, u).
template <typename Scalar>
StateVector<Scalar> derivative(
  const StateVector<Scalar> & x, const InputVector<Scalar> & u, double wheelbase)
{
  using std::cos;
  using std::sin;
  using std::tan;
  StateVector<Scalar> dx;
  dx[kX] = x[kV] * cos(x[kPsi]);
  dx[kY] = x[kV] * sin(x[kPsi]);
  dx[kPsi] = x[kV] * tan(x[kDelta]) / wheelbase;
  dx[kV] = x[kA];
  dx[kA] = u[kJerk];
  dx[kDelta] = u[kOmega];
  return dx;
}

/// One classical Runge-Kutta step of f with zero-order-hold input.
template <typename Scalar>
StateVector<Scalar> rk4(
  const StateVector<Scalar> & x, const InputVector<Scalar> & u, double dt, double wheelbase)
{
  const StateVector<Scalar> k1 = derivative<Scalar>(x, u, wheelbase);
  const StateVector<Scalar> k2 = derivative<Scalar>(x + (0.5 * dt) * k1, u, wheelbase);
  const StateVector<Scalar> k3 = derivative<Scalar>(x + (0.5 * dt) * k2, u, wheelbase);
  const StateVector<Scalar> k4 = derivative<Scalar>(x + dt * k3, u, wheelbase);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Lateral acceleration v^2 tan(delta) / L.
template <typename Scalar>
Scalar lateral_acceleration(const StateVector<Scalar> & x, double wheelbase)
{
  using std::tan;
  return x[kV] * x[kV] * tan(x[kDelta]) / wheelbase;
}

/// Magnitude of the combined longitudinal and lateral acceleration.
/// A tiny floor keeps the gradient finite at rest.
template <typename Scalar>
Scalar combined_acceleration(const StateVector<Scalar> & x, double wheelbase)
{
  using std::sqrt;
  const Scalar lat = lateral_acceleration<Scalar>(x, wheelbase);
  return sqrt(x[kA] * x[kA] + lat * lat + 1e-12);
}

inline constexpr double kClampTolerance = 1e-9;

struct StepResult
{
  VehicleState state;
  bool clamped{false};  // a speed or steering clamp moved the state by more than kClampTolerance
};

/// Plant step: RK4 over dt, then v clamped to [0, v_max] and delta to +-delta_max.
inline StepResult step(
  const VehicleState & state, const ControlInput & input, double dt, const VehicleParams & params)
{
  if (!(dt > 0.0)) {
    throw ValidationError("vehicle step needs dt > 0");
  }
  StateVector<double> next = rk4<double>(state.vector(), input.vector(), dt, params.wheelbase);
  StepResult out;
  const double v = std::clamp(next[kV], 0.0, params.v_max);
  const double delta = std::clamp(next[kDelta], -params.delta_max, params.delta_max);
  out.clamped = std::abs(v - next[kV]) > kClampTolerance ||
                std::abs(delta - next[kDelta]) > kClampTolerance;
  next[kV] = v;
  next[kDelta] = delta;
  out.state = VehicleState::from_vector(next);
  return out;
}

}  // namespace wmpc::vehicle
