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

#include "wmpc/nmpc.hpp"
#include "wmpc/track.hpp"
#include "wmpc/vehicle.hpp"

#include <optional>
#include <random>

namespace wmpc::sim
{
struct LoopTiming
{
  double sim_dt{0.02};      // plant integration step
  double control_dt{0.08};  // MPC re-solve period, a multiple of sim_dt

  int control_every() const;
  void validate() const;
};

/// One plant step of the closed loop.
struct StepRecord
{
  int step{0};          // index of the plant step just taken (0-based)
  double t{0.0};        // time after the step
  vehicle::VehicleState state;
  double s{0.0};        // projected arc length after the step
  double e_lat{0.0};    // signed lateral deviation (m), positive left
  double e_vel{0.0};    // v - v_ref(s) (m/s)
  bool solved{false};   // an MPC solve happened before this step
  nmpc::SolveStatus status{nmpc::SolveStatus::Converged};  // status of the input in force
  int solve_iterations{0};
  bool clamped{false};
  bool terminated{false};  // infeasible MPC or a non-finite state; no plant step was taken
};

/// Vehicle state on the raceline at arc length s: heading aligned, speed at
/// v_ref, acceleration at the reference's v_ref * dv_ref/ds and steering at
/// the curvature's kinematic angle.
vehicle::VehicleState state_on_line(
  const track::Raceline & line, double s, const vehicle::VehicleParams & params);

/// Plant, MPC and projection for one vehicle. The weights may change
/// between steps; the MPC is re-solved every control period with the
/// previous solution as warm start.
class ClosedLoop
{
public:
  ClosedLoop(const track::Raceline & line, const nmpc::MpcConfig & mpc, const LoopTiming & timing);

  void reset(const vehicle::VehicleState & start);
  void set_weights(const nmpc::WeightSet & weights) { weights_ = weights; }
  const nmpc::WeightSet & weights() const { return weights_; }

  StepRecord step();

  const vehicle::VehicleState & state() const { return state_; }
  const track::Raceline & line() const { return *line_; }
  const nmpc::MpcConfig & mpc_config() const { return solver_.config(); }
  const LoopTiming & timing() const { return timing_; }
  int steps_taken() const { return step_; }
  double time() const { return step_ * timing_.sim_dt; }
  /// Arc length covered since reset (projection based, may be slightly negative).
  double distance() const { return distance_; }
  double arc_length() const { return s_; }
  int soft_violations() const { return soft_violations_; }
  int clamp_events() const { return clamp_events_; }

private:
  const track::Raceline * line_;
  LoopTiming timing_;
  int control_every_;
  nmpc::GaussNewtonSqp solver_;
  track::ArcLengthProjector projector_;
  nmpc::WeightSet weights_{};
  vehicle::VehicleState state_{};
  vehicle::ControlInput input_{};
  nmpc::MpcSolution last_;
  nmpc::SolveStatus last_status_{nmpc::SolveStatus::Converged};
  int last_iterations_{0};
  int step_{0};
  double s_{0.0};
  double distance_{0.0};
  int soft_violations_{0};
  int clamp_events_{0};
};

}  // namespace wmpc::sim
