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

#include "wmpc/nmpc.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace wmpc::nmpc
{
namespace
{
using vehicle::kA;
using vehicle::kDelta;
using vehicle::kInputDim;
using vehicle::kPsi;
using vehicle::kStateDim;
using vehicle::kV;
using State = vehicle::StateVector<double>;
using Input = vehicle::InputVector<double>;
using Mat66 = Eigen::Matrix<double, kStateDim, kStateDim>;
using Mat62 = Eigen::Matrix<double, kStateDim, kInputDim>;
using Row6 = Eigen::Matrix<double, 1, kStateDim>;
using AdStateInput = Eigen::AutoDiffScalar<Eigen::Matrix<double, kStateDim + kInputDim, 1>>;
using AdState = Eigen::AutoDiffScalar<Eigen::Matrix<double, kStateDim, 1>>;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Iterate
{
  std::vector<State> X;
  std::vector<Input> U;
  std::vector<double> S;
};

struct Evaluation
{
  double cost{0.0};
  double violation{0.0};      // l1 norm of all constraint violations
  double max_violation{0.0};  // infinity norm
};

Eigen::Vector4d tracking_residual(const State & x, const StageReference & r)
{
  return {x[0] - r.x, x[1] - r.y, wrap_angle(x[kPsi] - r.psi), x[kV] - r.v};
}

void linearize(
  const State & x, const Input & u, double dt, double wheelbase, State & f, Mat66 & A, Mat62 & B)
{
  vehicle::StateVector<AdStateInput> xa;
  vehicle::InputVector<AdStateInput> ua;
  for (int i = 0; i < kStateDim; ++i) {
    xa[i] = AdStateInput(x[i], kStateDim + kInputDim, i);
  }
  for (int i = 0; i < kInputDim; ++i) {
    ua[i] = AdStateInput(u[i], kStateDim + kInputDim, kStateDim + i);
  }
  const auto out = vehicle::rk4<AdStateInput>(xa, ua, dt, wheelbase);
  for (int i = 0; i < kStateDim; ++i) {
    f[i] = out[i].value();
    A.row(i) = out[i].derivatives().head<kStateDim>().transpose();
    B.row(i) = out[i].derivatives().tail<kInputDim>().transpose();
  }
}

double combined_with_gradient(const State & x, double wheelbase, Row6 & gradient)
{
  vehicle::StateVector<AdState> xa;
  for (int i = 0; i < kStateDim; ++i) {
    xa[i] = AdState(x[i], kStateDim, i);
  }
  const AdState g = vehicle::combined_acceleration<AdState>(xa, wheelbase);
  gradient = g.derivatives().transpose();
  return g.value();
}

class Problem
{
public:
  Problem(const MpcConfig & config, const Reference & reference, const WeightSet & weights)
  : config_(config), ref_(reference), w_(weights), N_(config.steps())
  {
    q_ << w_.q_xy, w_.q_xy, w_.q_psi, w_.q_v;
    r_ << w_.r_j, w_.r_omega;
  }

  const Eigen::Vector4d & q() const { return q_; }
  const Eigen::Vector2d & r() const { return r_; }

  double cost(const Iterate & it) const
  {
    double f = 0.0;
    for (int k = 0; k <= N_; ++k) {
      const Eigen::Vector4d e = tracking_residual(it.X[k], ref_[k]);
      f += 0.5 * e.dot(q_.cwiseProduct(e));
    }
    for (int k = 0; k < N_; ++k) {
      f += 0.5 * it.U[k].dot(r_.cwiseProduct(it.U[k]));
      f += w_.l1 * it.S[k] + w_.l2 * it.S[k] * it.S[k];
    }
    return f;
  }

  Evaluation evaluate(const Iterate & it) const
  {
    const auto & veh = config_.vehicle;
    Evaluation e;
    e.cost = cost(it);
    auto add = [&e](double v) {
      if (v > 0.0) {
        e.violation += v;
        e.max_violation = std::max(e.max_violation, v);
      }
    };
    for (int k = 0; k < N_; ++k) {
      const State next = vehicle::rk4<double>(it.X[k], it.U[k], config_.dt, veh.wheelbase);
      for (int i = 0; i < kStateDim; ++i) {
        add(std::abs(next[i] - it.X[k + 1][i]));
      }
      add(std::abs(it.U[k][0]) - veh.j_max);
      add(std::abs(it.U[k][1]) - veh.omega_max);
      const State & x = it.X[k + 1];
      add(-x[kV]);
      add(x[kV] - veh.v_max);
      add(veh.a_min - x[kA]);
      add(x[kA] - veh.a_max);
      add(std::abs(x[kDelta]) - veh.delta_max);
      add(vehicle::combined_acceleration<double>(x, veh.wheelbase) - it.S[k] - config_.a_comb_max);
      add(-it.S[k]);
    }
    return e;
  }

private:
  const MpcConfig & config_;
  const Reference & ref_;
  const WeightSet & w_;
  int N_;
  Eigen::Vector4d q_;
  Eigen::Vector2d r_;
};

void validate_weights(const WeightSet & w)
{
  const WeightVector v = w.vector();
  if (!v.allFinite() || (v.array() <= 0.0).any()) {
    throw ValidationError("MPC weights must be finite and positive");
  }
}

Iterate cold_start(const vehicle::VehicleState & state, const Reference & ref, const MpcConfig & config)
{
  const int N = config.steps();
  Iterate it;
  it.X.resize(N + 1);
  it.U.assign(N, Input::Zero());
  it.S.assign(N, 0.0);
  it.X[0] = state.vector();
  double psi = state.psi + wrap_angle(ref[0].psi - state.psi);
  for (int k = 1; k <= N; ++k) {
    psi += wrap_angle(ref[k].psi - ref[k - 1].psi);
    const double delta = std::clamp(
      std::atan(config.vehicle.wheelbase * ref[k].kappa), -config.vehicle.delta_max,
      config.vehicle.delta_max);
    it.X[k] << ref[k].x, ref[k].y, psi, std::clamp(ref[k].v, 0.0, config.vehicle.v_max), 0.0, delta;
  }
  return it;
}

Iterate warm_iterate(const vehicle::VehicleState & state, const MpcSolution & warm, int N)
{
  if (
    static_cast<int>(warm.states.size()) != N + 1 || static_cast<int>(warm.inputs.size()) != N ||
    static_cast<int>(warm.slacks.size()) != N) {
    throw ValidationError("warm start does not match the horizon length");
  }
  Iterate it{warm.states, warm.inputs, warm.slacks};
  // Re-anchor the heading branch so the guess is continuous with the plant.
  const double turns = std::round((state.psi - it.X[0][kPsi]) / kTwoPi);
  if (turns != 0.0) {
    for (auto & x : it.X) {
      x[kPsi] += turns * kTwoPi;
    }
  }
  it.X[0] = state.vector();
  for (auto & s : it.S) {
    s = std::max(s, 0.0);
  }
  return it;
}

}  // namespace

void TuningBounds::validate() const
{
  if (!lower.allFinite() || !upper.allFinite() || (lower.array() <= 0.0).any()) {
    throw ValidationError("tuning bounds must be finite and positive");
  }
  if ((upper.array() <= lower.array()).any()) {
    throw ValidationError("tuning upper bounds must exceed lower bounds");
  }
}

bool TuningBounds::contains(const WeightSet & w, double rel_tol) const
{
  const WeightVector v = w.vector();
  return (v.array() >= lower.array() * (1.0 - rel_tol)).all() &&
         (v.array() <= upper.array() * (1.0 + rel_tol)).all();
}

WeightVector TuningBounds::normalize(const WeightSet & w) const
{
  const WeightVector v = w.vector();
  if ((v.array() <= 0.0).any()) {
    throw ValidationError("weights must be positive to normalise");
  }
  return (v.array().log() - lower.array().log()) / (upper.array().log() - lower.array().log());
}

WeightSet TuningBounds::denormalize(const WeightVector & u) const
{
  const WeightVector clamped = u.cwiseMax(0.0).cwiseMin(1.0);
  const WeightVector logw =
    lower.array().log() + clamped.array() * (upper.array().log() - lower.array().log());
  return WeightSet::from_vector(logw.array().exp());
}

int MpcConfig::steps() const
{
  return static_cast<int>(std::lround(horizon / dt));
}

void MpcConfig::validate() const
{
  if (!(dt > 0.0) || !(horizon > 0.0)) {
    throw ValidationError("MPC horizon and dt must be positive");
  }
  const double ratio = horizon / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-6 || steps() < 1) {
    throw ValidationError("MPC horizon must be a positive integer multiple of dt");
  }
  if (!(a_comb_max > 0.0)) {
    throw ValidationError("a_comb_max must be positive");
  }
  if (solver.max_iterations_cold < 1 || solver.max_iterations_warm < 1) {
    throw ValidationError("SQP iteration limits must be at least 1");
  }
  if (!(solver.kkt_tolerance > 0.0) || solver.max_line_search < 1) {
    throw ValidationError("invalid SQP solver settings");
  }
  vehicle.validate();
}

const char * to_string(SolveStatus status)
{
  switch (status) {
    case SolveStatus::Converged:
      return "converged";
    case SolveStatus::MaxIter:
      return "max_iter";
    case SolveStatus::Infeasible:
      return "infeasible";
  }
  return "unknown";
}

Reference build_reference(const track::Raceline & line, double s0, const MpcConfig & config)
{
  const int N = config.steps();
  Reference ref(static_cast<std::size_t>(N + 1));
  double s = s0;
  for (int k = 0; k <= N; ++k) {
    const track::RacelinePoint p =
      line.closed() ? track::lookup(line, line.wrap_s(s)) : track::lookup_extrapolated(line, s);
    ref[k] = {line.closed() ? line.wrap_s(s) : s, p.x, p.y, p.psi, p.v_ref, p.kappa};
    s += p.v_ref * config.dt;
  }
  return ref;
}

Reference build_reference(
  const track::Raceline & line, const vehicle::VehicleState & state, const MpcConfig & config)
{
  track::ArcLengthProjector projector(line);
  return build_reference(line, projector.project(state.x, state.y).s, config);
}

MpcSolution shift(const MpcSolution & solution, const MpcConfig & config)
{
  if (solution.empty()) {
    return solution;
  }
  MpcSolution out = solution;
  const std::size_t N = solution.inputs.size();
  for (std::size_t k = 0; k + 1 < N; ++k) {
    out.inputs[k] = solution.inputs[k + 1];
    out.slacks[k] = solution.slacks[k + 1];
  }
  for (std::size_t k = 0; k < N; ++k) {
    out.states[k] = solution.states[k + 1];
  }
  out.states[N] =
    vehicle::rk4<double>(out.states[N - 1], out.inputs[N - 1], config.dt, config.vehicle.wheelbase);
  out.merit_steps.clear();
  return out;
}

GaussNewtonSqp::GaussNewtonSqp(MpcConfig config) : config_(std::move(config)), N_(0)
{
  config_.validate();
  N_ = config_.steps();
}

MpcSolution GaussNewtonSqp::solve(
  const vehicle::VehicleState & state, const Reference & reference, const WeightSet & weights,
  const MpcSolution * warm_start)
{
  validate_weights(weights);
  if (static_cast<int>(reference.size()) != N_ + 1) {
    throw ValidationError("reference must have N + 1 stages");
  }
  if (!state.vector().allFinite()) {
    throw ValidationError("vehicle state is not finite");
  }
  const auto & veh = config_.vehicle;
  const int N = N_;
  const int nu = kInputDim * N;
  const bool warm = warm_start != nullptr && !warm_start->empty();
  Iterate it = warm ? warm_iterate(state, *warm_start, N) : cold_start(state, reference, config_);
  const int max_iter = warm ? config_.solver.max_iterations_warm : config_.solver.max_iterations_cold;

  const Problem problem(config_, reference, weights);
  const Eigen::Vector4d q_sqrt = problem.q().cwiseSqrt();
  const Eigen::Vector2d r = problem.r();

  std::vector<Mat66> A(static_cast<std::size_t>(N));
  std::vector<Mat62> B(static_cast<std::size_t>(N));
  std::vector<Row6> dg(static_cast<std::size_t>(N));
  std::vector<double> gval(static_cast<std::size_t>(N));
  Mat G = Mat::Zero(kStateDim * (N + 1), nu);
  Vec c = Vec::Zero(kStateDim * (N + 1));
  Mat H(nu, nu);
  Vec grad(nu);
  std::vector<char> soft(static_cast<std::size_t>(N), 0);
  for (int k = 0; k < N; ++k) {
    soft[k] = it.S[k] > 0.0;
  }

  // State bounds (v, a, delta at stages 1..N) enter the QP lazily: a row is
  // included once it is close to binding or violated by a QP step.
  const int state_rows = 6 * N;
  std::vector<char> state_row_on(static_cast<std::size_t>(state_rows), 0);
  Vec state_value(state_rows);

  MpcSolution out;
  out.status = SolveStatus::MaxIter;
  out.kkt_residual = std::numeric_limits<double>::infinity();
  double mu = 1.0;
  int iterations = 0;

  for (int iter = 0; iter < max_iter; ++iter) {
    // Linearise the shooting gaps and propagate sensitivities.
    c.segment<kStateDim>(0).setZero();
    for (int k = 0; k < N; ++k) {
      State f;
      linearize(it.X[k], it.U[k], config_.dt, veh.wheelbase, f, A[k], B[k]);
      const int row = kStateDim * (k + 1);
      c.segment<kStateDim>(row) = A[k] * c.segment<kStateDim>(row - kStateDim) + (f - it.X[k + 1]);
      if (k > 0) {
        G.block(row, 0, kStateDim, kInputDim * k).noalias() =
          A[k] * G.block(row - kStateDim, 0, kStateDim, kInputDim * k);
      }
      G.block(row, kInputDim * k, kStateDim, kInputDim) = B[k];
    }

    // Gauss-Newton Hessian and gradient in the input increments.
    H.setZero();
    for (int k = 0; k < N; ++k) {
      H.diagonal().segment<kInputDim>(kInputDim * k) = r;
      grad.segment<kInputDim>(kInputDim * k) = r.cwiseProduct(it.U[k]);
    }
    for (int k = 1; k <= N; ++k) {
      const int row = kStateDim * k;
      const int cols = kInputDim * k;
      const Mat M = q_sqrt.asDiagonal() * G.block(row, 0, 4, cols);
      const Eigen::Vector4d e =
        q_sqrt.cwiseProduct(tracking_residual(it.X[k], reference[k]) + c.segment<4>(row));
      H.topLeftCorner(cols, cols).selfadjointView<Eigen::Lower>().rankUpdate(M.transpose());
      grad.head(cols).noalias() += M.transpose() * e;
    }
    const Mat H_full = H.selfadjointView<Eigen::Lower>();
    const Mat J_u = qp::inverse_cholesky_factor(H_full);

    // Input bounds are simple bounds on the increments.
    const double inf = std::numeric_limits<double>::infinity();
    Vec du_lower(nu);
    Vec du_upper(nu);
    for (int k = 0; k < N; ++k) {
      du_lower[kInputDim * k] = -veh.j_max - it.U[k][0];
      du_upper[kInputDim * k] = veh.j_max - it.U[k][0];
      du_lower[kInputDim * k + 1] = -veh.omega_max - it.U[k][1];
      du_upper[kInputDim * k + 1] = veh.omega_max - it.U[k][1];
    }

    // Row 2*(3*(k-1)+j) is the lower, +1 the upper bound of state idx[j] at stage k.
    const int idx[3] = {kV, kA, kDelta};
    const double lo[3] = {0.0, veh.a_min, -veh.delta_max};
    const double hi[3] = {veh.v_max, veh.a_max, veh.delta_max};
    const double near[3] = {2.0, 2.0, 0.05};
    for (int k = 1; k <= N; ++k) {
      for (int j = 0; j < 3; ++j) {
        const int rr = 2 * (3 * (k - 1) + j);
        const double value = it.X[k][idx[j]] + c[kStateDim * k + idx[j]];
        state_value[rr] = value - lo[j];
        state_value[rr + 1] = hi[j] - value;
        for (int side = 0; side < 2; ++side) {
          if (state_value[rr + side] < near[j]) {
            state_row_on[rr + side] = 1;
          }
        }
      }
    }
    auto state_row = [&](int rr, Eigen::Ref<Eigen::RowVectorXd> out_row) {
      const int stage = rr / 6 + 1;
      const int j = (rr % 6) / 2;
      const double sign = (rr % 2 == 0) ? 1.0 : -1.0;
      const int cols = kInputDim * stage;
      out_row.head(cols) = sign * G.row(kStateDim * stage + idx[j]).head(cols);
      return state_value[rr];
    };

    for (int k = 0; k < N; ++k) {
      gval[k] = combined_with_gradient(it.X[k + 1], veh.wheelbase, dg[k]);
      const double predicted = gval[k] + dg[k].dot(c.segment<kStateDim>(kStateDim * (k + 1)));
      if (predicted > config_.a_comb_max - 0.5) {
        soft[k] = 1;
      }
    }
    auto soft_row = [&](int k, Eigen::Ref<Eigen::RowVectorXd> out_row) {
      const int cols = kInputDim * (k + 1);
      out_row.head(cols).noalias() = -dg[k] * G.block(kStateDim * (k + 1), 0, kStateDim, cols);
      return config_.a_comb_max - gval[k] - dg[k].dot(c.segment<kStateDim>(kStateDim * (k + 1)));
    };

    // QP variables are [slacks of soft stages, input increments]. Solve, then
    // grow the soft set and the state rows until the relaxed constraints that
    // were left out hold at the QP solution.
    qp::QpResult qp_result;
    std::vector<int> soft_stages;
    std::vector<int> rows_on;
    Eigen::RowVectorXd scratch(nu);
    int ns = 0;
    while (true) {
      soft_stages.clear();
      for (int k = 0; k < N; ++k) {
        if (soft[k]) {
          soft_stages.push_back(k);
        }
      }
      rows_on.clear();
      for (int rr = 0; rr < state_rows; ++rr) {
        if (state_row_on[rr]) {
          rows_on.push_back(rr);
        }
      }
      ns = static_cast<int>(soft_stages.size());
      const int n = ns + nu;
      const int m = ns + static_cast<int>(rows_on.size());
      Mat J = Mat::Zero(n, n);
      J.bottomRightCorner(nu, nu) = J_u;
      Vec g(n);
      g.tail(nu) = grad;
      Vec lower(n);
      Vec upper(n);
      lower.tail(nu) = du_lower;
      upper.tail(nu) = du_upper;
      Mat Aqp = Mat::Zero(m, n);
      Vec cqp(m);
      std::vector<int> first;
      for (int i = 0; i < ns; ++i) {
        const int k = soft_stages[static_cast<std::size_t>(i)];
        J(i, i) = 1.0 / std::sqrt(2.0 * weights.l2);
        g[i] = weights.l1;
        lower[i] = 0.0;
        upper[i] = inf;
        scratch.setZero();
        cqp[i] = soft_row(k, scratch);
        Aqp.row(i).tail(nu) = scratch;
        Aqp(i, i) = 1.0;
        first.push_back(m + 2 * i);
      }
      for (std::size_t r = 0; r < rows_on.size(); ++r) {
        scratch.setZero();
        const int qrow = ns + static_cast<int>(r);
        cqp[qrow] = state_row(rows_on[r], scratch);
        Aqp.row(qrow).tail(nu) = scratch;
      }
      qp_result = qp_.solve(J, g, Aqp, cqp, lower, upper, first);
      if (!qp_result.feasible) {
        break;
      }
      const auto du_try = qp_result.x.tail(nu);
      bool grown = false;
      for (int k = 0; k < N; ++k) {
        if (soft[k]) {
          continue;
        }
        scratch.setZero();
        const double c0 = soft_row(k, scratch);
        if (scratch.dot(du_try) + c0 < -1e-9) {
          soft[k] = 1;
          grown = true;
        }
      }
      for (int rr = 0; rr < state_rows; ++rr) {
        if (state_row_on[rr]) {
          continue;
        }
        scratch.setZero();
        const double c0 = state_row(rr, scratch);
        if (scratch.dot(du_try) + c0 < -1e-9) {
          state_row_on[rr] = 1;
          grown = true;
        }
      }
      if (!grown) {
        break;
      }
    }
    ++iterations;
    if (!qp_result.feasible) {
      out.status = SolveStatus::Infeasible;
      break;
    }

    // Expand the step to the full multiple-shooting space.
    const Vec du = qp_result.x.tail(nu);
    const Vec dx = c + G * du;
    std::vector<double> ds(static_cast<std::size_t>(N));
    for (int k = 0; k < N; ++k) {
      ds[k] = -it.S[k];
    }
    for (std::size_t i = 0; i < soft_stages.size(); ++i) {
      const int k = soft_stages[i];
      ds[k] = qp_result.x[static_cast<int>(i)] - it.S[k];
    }
    double step_norm = std::max(du.lpNorm<Eigen::Infinity>(), dx.lpNorm<Eigen::Infinity>());
    for (double v : ds) {
      step_norm = std::max(step_norm, std::abs(v));
    }

    auto trial = [&](double alpha) {
      Iterate t = it;
      for (int k = 0; k <= N; ++k) {
        t.X[k] += alpha * dx.segment<kStateDim>(kStateDim * k);
      }
      for (int k = 0; k < N; ++k) {
        t.U[k] += alpha * du.segment<kInputDim>(kInputDim * k);
        t.S[k] += alpha * ds[k];
      }
      return t;
    };

    const Evaluation e0 = problem.evaluate(it);
    out.kkt_residual = std::max(step_norm, e0.max_violation);
    if (out.kkt_residual <= config_.solver.kkt_tolerance) {
      it = trial(1.0);
      out.status = SolveStatus::Converged;
      out.kkt_residual = std::max(step_norm, problem.evaluate(it).max_violation);
      break;
    }

    // Directional derivative and curvature of the quadratic model along the step.
    double slope = 0.0;
    double curvature = 0.0;
    for (int k = 0; k <= N; ++k) {
      const Eigen::Vector4d e = tracking_residual(it.X[k], reference[k]);
      const Eigen::Vector4d step = dx.segment<4>(kStateDim * k);
      slope += e.dot(problem.q().cwiseProduct(step));
      curvature += step.dot(problem.q().cwiseProduct(step));
    }
    for (int k = 0; k < N; ++k) {
      const Input step = du.segment<kInputDim>(kInputDim * k);
      slope += it.U[k].dot(r.cwiseProduct(step));
      curvature += step.dot(r.cwiseProduct(step));
      slope += (weights.l1 + 2.0 * weights.l2 * it.S[k]) * ds[k];
      curvature += 2.0 * weights.l2 * ds[k] * ds[k];
    }
    if (e0.violation > 0.0) {
      constexpr double rho = 0.5;
      const double required = (slope + 0.5 * curvature) / ((1.0 - rho) * e0.violation);
      mu = std::max(mu, 1.1 * required);
    }
    const double phi0 = e0.cost + mu * e0.violation;
    const double descent = std::min(0.0, slope - mu * e0.violation);

    bool accepted = false;
    double alpha = 1.0;
    for (int ls = 0; ls < config_.solver.max_line_search; ++ls) {
      Iterate t = trial(alpha);
      const Evaluation et = problem.evaluate(t);
      const double phi = et.cost + mu * et.violation;
      if (phi <= phi0 + 1e-4 * alpha * descent) {
        out.merit_steps.push_back({phi0, phi});
        it = std::move(t);
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      break;
    }
  }

  out.iterations = iterations;
  out.states = std::move(it.X);
  out.inputs = std::move(it.U);
  out.slacks = std::move(it.S);
  Iterate final_it{out.states, out.inputs, out.slacks};
  out.cost = problem.cost(final_it);
  return out;
}

double GaussNewtonSqp::objective(
  const Vec & z, const Reference & reference, const WeightSet & weights, Vec * gradient) const
{
  const MpcSolution sol = unpack(z);
  const Iterate it{sol.states, sol.inputs, sol.slacks};
  const Problem problem(config_, reference, weights);
  if (gradient != nullptr) {
    gradient->setZero(z.size());
    for (int k = 0; k <= N_; ++k) {
      const Eigen::Vector4d e = tracking_residual(it.X[k], reference[k]);
      gradient->segment<4>(kStateDim * k) = problem.q().cwiseProduct(e);
    }
    const int u0 = kStateDim * (N_ + 1);
    const int s0 = u0 + kInputDim * N_;
    for (int k = 0; k < N_; ++k) {
      gradient->segment<kInputDim>(u0 + kInputDim * k) = problem.r().cwiseProduct(it.U[k]);
      (*gradient)[s0 + k] = weights.l1 + 2.0 * weights.l2 * it.S[k];
    }
  }
  return problem.cost(it);
}

Vec GaussNewtonSqp::pack(const MpcSolution & sol) const
{
  Vec z((kStateDim + kInputDim + 1) * N_ + kStateDim);
  const int u0 = kStateDim * (N_ + 1);
  const int s0 = u0 + kInputDim * N_;
  for (int k = 0; k <= N_; ++k) {
    z.segment<kStateDim>(kStateDim * k) = sol.states.at(k);
  }
  for (int k = 0; k < N_; ++k) {
    z.segment<kInputDim>(u0 + kInputDim * k) = sol.inputs.at(k);
    z[s0 + k] = sol.slacks.at(k);
  }
  return z;
}

MpcSolution GaussNewtonSqp::unpack(const Vec & z) const
{
  if (z.size() != (kStateDim + kInputDim + 1) * N_ + kStateDim) {
    throw ValidationError("multiple-shooting vector has the wrong size");
  }
  MpcSolution sol;
  const int u0 = kStateDim * (N_ + 1);
  const int s0 = u0 + kInputDim * N_;
  for (int k = 0; k <= N_; ++k) {
    sol.states.push_back(z.segment<kStateDim>(kStateDim * k));
  }
  for (int k = 0; k < N_; ++k) {
    sol.inputs.push_back(z.segment<kInputDim>(u0 + kInputDim * k));
    sol.slacks.push_back(z[s0 + k]);
  }
  return sol;
}

vehicle::ControlInput first_input(const MpcSolution & solution, const MpcConfig & config)
{
  if (solution.status == SolveStatus::Infeasible) {
    throw RuntimeFailure("MPC solution is infeasible");
  }
  if (solution.empty()) {
    throw ValidationError("MPC solution is empty");
  }
  const Input & u = solution.inputs.front();
  return {
    std::clamp(u[0], -config.vehicle.j_max, config.vehicle.j_max),
    std::clamp(u[1], -config.vehicle.omega_max, config.vehicle.omega_max)};
}

void write_solution_csv(const MpcSolution & solution, std::ostream & out)
{
  out << "stage,x,y,psi,v,a,delta,j,omega,slack\n";
  char buf[512];
  for (std::size_t k = 0; k < solution.states.size(); ++k) {
    const State & x = solution.states[k];
    const bool has_input = k < solution.inputs.size();
    std::snprintf(
      buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", k, x[0], x[1],
      x[2], x[3], x[4], x[5], has_input ? solution.inputs[k][0] : 0.0,
      has_input ? solution.inputs[k][1] : 0.0, has_input ? solution.slacks[k] : 0.0);
    out << buf;
  }
}

}  // namespace wmpc::nmpc
