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
#include "wmpc/qp.hpp"
#include "wmpc/track.hpp"
#include "wmpc/vehicle.hpp"

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace wmpc::nmpc
{
inline constexpr int kWeightCount = 7;
using WeightVector = Eigen::Matrix<double, kWeightCount, 1>;

/// Tracking cost weights and slack penalties, in the order
/// [q_xy, q_psi, q_v, r_j, r_omega, l1, l2].
struct WeightSet
{
  double q_xy{1.0};
  double q_psi{1.0};
  double q_v{1.0};
  double r_j{1.0};
  double r_omega{1.0};
  double l1{100.0};
  double l2{100.0};

  WeightVector vector() const { return {q_xy, q_psi, q_v, r_j, r_omega, l1, l2}; }
  static WeightSet from_vector(const WeightVector & w)
  {
    return {w[0], w[1], w[2], w[3], w[4], w[5], w[6]};
  }
  WeightSet scaled(double factor) const { return from_vector(factor * vector()); }
  bool operator==(const WeightSet &) const = default;
};

/// Box bounds of the tuning space; the optimiser works in log-normalised
/// coordinates u = (log w - log lb) / (log ub - log lb) in [0, 1]^7.
struct TuningBounds
{
  WeightVector lower{(WeightVector() << 1e-2, 1e-2, 1e-2, 1e-2, 1e-2, 1e0, 1e0).finished()};
  WeightVector upper{(WeightVector() << 1e3, 1e3, 1e3, 1e3, 1e3, 1e4, 1e4).finished()};

  void validate() const;
  bool contains(const WeightSet & w, double rel_tol = 1e-9) const;
  WeightVector normalize(const WeightSet & w) const;
  WeightSet denormalize(const WeightVector & u) const;
};

struct SolverSettings
{
  int max_iterations_cold{30};
  int max_iterations_warm{5};
  double kkt_tolerance{1e-6};
  int max_line_search{12};
};

struct MpcConfig
{
  double horizon{3.04};  // T_p (s)
  double dt{0.08};       // T_s (s)
  double a_comb_max{10.0};
  vehicle::VehicleParams vehicle{};
  SolverSettings solver{};

  int steps() const;
  void validate() const;
};

enum class SolveStatus { Converged, MaxIter, Infeasible };

const char * to_string(SolveStatus status);

struct StageReference
{
  double s{0.0};
  double x{0.0};
  double y{0.0};
  double psi{0.0};
  double v{0.0};
  double kappa{0.0};
};
using Reference = std::vector<StageReference>;

/// Stage k references the raceline point reached after k*T_s by a virtual
/// vehicle that starts at arc length s0 and travels at v_ref.
Reference build_reference(const track::Raceline & line, double s0, const MpcConfig & config);

/// As above, projecting the vehicle onto the line first (global search).
Reference build_reference(
  const track::Raceline & line, const vehicle::VehicleState & state, const MpcConfig & config);

struct MpcSolution
{
  std::vector<vehicle::StateVector<double>> states;  // N + 1
  std::vector<vehicle::InputVector<double>> inputs;  // N
  std::vector<double> slacks;                        // N, stage k+1 constraint
  double kkt_residual{0.0};
  double cost{0.0};
  int iterations{0};
  SolveStatus status{SolveStatus::MaxIter};
  /// Merit before and after each accepted step, both at that step's penalty.
  std::vector<std::array<double, 2>> merit_steps;

  bool empty() const { return inputs.empty(); }
};

/// Shifts a solution by one stage for warm starting, repeating the last stage.
MpcSolution shift(const MpcSolution & solution, const MpcConfig & config);

/// Gauss-Newton SQP over a multiple-shooting discretisation (RK4 per stage).
/// Each QP is condensed onto the inputs plus the slacks that are needed,
/// then solved densely. Holds workspace only; no state between calls.
class GaussNewtonSqp
{
public:
  explicit GaussNewtonSqp(MpcConfig config);

  const MpcConfig & config() const { return config_; }

  MpcSolution solve(
    const vehicle::VehicleState & state, const Reference & reference, const WeightSet & weights,
    const MpcSolution * warm_start = nullptr);

  /// Least-squares objective over the full multiple-shooting vector
  /// z = [x_0..x_N, u_0..u_{N-1}, s_1..s_N]; exposed for gradient checks.
  double objective(
    const Vec & z, const Reference & reference, const WeightSet & weights, Vec * gradient) const;

  /// Packs/unpacks the multiple-shooting vector.
  Vec pack(const MpcSolution & sol) const;
  MpcSolution unpack(const Vec & z) const;

private:
  MpcConfig config_;
  int N_;
  qp::DualActiveSetSolver qp_;
};

/// u*_0 clamped to the input bounds. Throws on Infeasible solutions.
vehicle::ControlInput first_input(const MpcSolution & solution, const MpcConfig & config);

/// Debug dump: stage,x,y,psi,v,a,delta,j,omega,slack
void write_solution_csv(const MpcSolution & solution, std::ostream & out);

}  // namespace wmpc::nmpc
