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

#include "wmpc/closed_loop.hpp"

#include <algorithm>
#include <cmath>

namespace wmpc::sim
{
int LoopTiming::control_every() const
{
  return static_cast<int>(std::lround(control_dt / sim_dt));
}

void LoopTiming::validate() const
{
  if (!(sim_dt > 0.0) || !(control_dt > 0.0)) {
    throw ValidationError("simulation and control periods must be positive");
  }
  const double ratio = control_dt / sim_dt;
  if (ratio < 1.0 - 1e-9 || std::abs(ratio - std::round(ratio)) > 1e-6) {
    throw ValidationError("control period must be an integer multiple of the simulation step");
  }
}

vehicle::VehicleState state_on_line(
  const track::Raceline & line, double s, const vehicle::VehicleParams & params)
{
  const auto at = [&line](double q) {
    return line.closed() ? track::lookup(line, line.wrap_s(q))
                         : track::lookup(line, std::clamp(q, line.start_s(), line.end_s()));
  };
  const track::RacelinePoint p = at(s);
  constexpr double h = 0.5;
  const double lo = line.closed() ? s - h : std::max(s - h, line.start_s());
  const double hi = line.closed() ? s + h : std::min(s + h, line.end_s());
  const double dv_ds = hi > lo ? (at(hi).v_ref - at(lo).v_ref) / (hi - lo) : 0.0;
  vehicle::VehicleState st;
  st.x = p.x;
  st.y = p.y;
  st.psi = p.psi;
  st.v = std::clamp(p.v_ref, 0.0, params.v_max);
  st.a = std::clamp(p.v_ref * dv_ds, params.a_min, params.a_max);
  st.delta = std::clamp(std::atan(params.wheelbase * p.kappa), -params.delta_max, params.delta_max);
  return st;
}

ClosedLoop::ClosedLoop(
  const track::Raceline & line, const nmpc::MpcConfig & mpc, const LoopTiming & timing)
: line_(&line),
  timing_(timing),
  control_every_(timing.control_every()),
  solver_(mpc),
  projector_(line)
{
  timing_.validate();
}

void ClosedLoop::reset(const vehicle::VehicleState & start)
{
  state_ = start;
  input_ = {};
  last_ = {};
  last_status_ = nmpc::SolveStatus::Converged;
  last_iterations_ = 0;
  step_ = 0;
  distance_ = 0.0;
  soft_violations_ = 0;
  clamp_events_ = 0;
  projector_.reset();
  s_ = projector_.project(state_.x, state_.y).s;
}

StepRecord ClosedLoop::step()
{
  StepRecord rec;
  rec.step = step_;
  const auto & mpc = solver_.config();

  if (step_ % control_every_ == 0) {
    const nmpc::Reference ref = nmpc::build_reference(*line_, s_, mpc);
    nmpc::MpcSolution warm;
    if (!last_.empty()) {
      warm = last_;
      // A control period shorter than one MPC stage reuses the plan unshifted.
      const int shifts = static_cast<int>(std::lround(timing_.control_dt / mpc.dt));
      for (int i = 0; i < shifts; ++i) {
        warm = nmpc::shift(warm, mpc);
      }
    }
    nmpc::MpcSolution sol = solver_.solve(state_, ref, weights_, warm.empty() ? nullptr : &warm);
    rec.solved = true;
    last_status_ = sol.status;
    last_iterations_ = sol.iterations;
    if (sol.status == nmpc::SolveStatus::Infeasible) {
      rec.status = sol.status;
      rec.solve_iterations = sol.iterations;
      rec.terminated = true;
      rec.state = state_;
      rec.t = time();
      rec.s = s_;
      return rec;
    }
    if (sol.status == nmpc::SolveStatus::MaxIter) {
      ++soft_violations_;
    }
    input_ = nmpc::first_input(sol, mpc);
    last_ = std::move(sol);
  }
  rec.status = last_status_;
  rec.solve_iterations = rec.solved ? last_iterations_ : 0;

  const vehicle::StepResult res = vehicle::step(state_, input_, timing_.sim_dt, mpc.vehicle);
  if (!res.state.vector().allFinite()) {
    rec.terminated = true;
    rec.state = state_;
    rec.t = time();
    rec.s = s_;
    return rec;
  }
  state_ = res.state;
  ++step_;
  if (res.clamped) {
    ++clamp_events_;
  }

  const auto proj = projector_.project(state_.x, state_.y);
  double ds = proj.s - s_;
  if (line_->closed()) {
    ds = std::remainder(ds, line_->length());
  }
  distance_ += ds;
  s_ = proj.s;

  rec.t = time();
  rec.state = state_;
  rec.s = s_;
  rec.e_lat = proj.lateral;
  rec.e_vel = state_.v - track::lookup(*line_, s_).v_ref;
  rec.clamped = res.clamped;
  return rec;
}

}  // namespace wmpc::sim
