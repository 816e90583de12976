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

#include "wmpc/closed_loop.hpp"
#include "wmpc/gp.hpp"
#include "wmpc/nmpc.hpp"
#include "wmpc/track.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace wmpc::mobo
{
using nmpc::WeightVector;
using track::SegmentLabel;
using Point2 = std::array<double, 2>;  // (j0, j1), both minimised
using Front = std::vector<Point2>;

/// Closed-loop performance of one weight set on one segment group.
struct ObjectiveVector
{
  double j0{0.0};  // max |e_lat| over the group's steps (m)
  double j1{0.0};  // RMS of v - v_ref over the group's steps (m/s)
  bool feasible{false};
  SegmentLabel group{SegmentLabel::Straight};

  Point2 point() const { return {j0, j1}; }
};

// ---------------------------------------------------------------------------
// Hypervolume and expected improvement

/// a dominates b: no worse in both objectives and better in one.
bool dominates(const Point2 & a, const Point2 & b);

/// Indices of the nondominated points; of identical points only the first is kept.
std::vector<std::size_t> nondominated_indices(const Front & points);

/// Nondominated subset sorted by ascending j0.
Front nondominated(const Front & points);

/// Area dominated by the points and bounded by R. Points that do not
/// strictly dominate R contribute nothing.
double hypervolume(const Front & points, const Point2 & reference);

/// Exact expected hypervolume improvement of an independent Gaussian
/// prediction over the front, relative to R.
double ehvi(const gp::Prediction & y0, const gp::Prediction & y1, const Front & front, const Point2 & reference);

struct AcquisitionConfig
{
  double k{1.0};
  double epsilon{0.9};
  std::array<Point2, 2> reference{Point2{0.5, 0.75}, Point2{0.5, 0.75}};  // per group

  void validate() const;
};

/// min(mu^k + epsilon * sigma, 1), never negative.
double feasibility_weight(const gp::FeasibilityModel::Estimate & feasibility, double k, double epsilon);

/// Surrogates of one group plus the shared feasibility model.
struct GroupModels
{
  gp::GpRegressor j0;
  gp::GpRegressor j1;
  const gp::FeasibilityModel * feasibility{nullptr};
};

double acquisition(
  const GroupModels & models, const Front & front, const Point2 & reference,
  const AcquisitionConfig & config, const Vec & u);

// ---------------------------------------------------------------------------
// Closed-loop evaluation

struct EvaluationConfig
{
  nmpc::MpcConfig mpc{};
  sim::LoopTiming timing{};
  double e_lat_max{1.0};
  /// Laps longer than this multiple of the reference lap time are aborted as infeasible.
  double time_limit_factor{2.0};

  void validate() const;
};

struct EvaluationResult
{
  std::array<ObjectiveVector, 2> objectives;  // indexed by SegmentLabel
  bool feasible{false};
  std::string cause;  // empty when feasible
  double max_abs_e_lat{0.0};
  double rms_e_vel{0.0};
  int steps{0};
};

using SegmentGroups = std::pair<track::SegmentGroup, track::SegmentGroup>;

/// One lap from the start of the line with static weights.
EvaluationResult evaluate_weights(
  const nmpc::WeightSet & theta, const track::Raceline & line, const SegmentGroups & groups,
  const EvaluationConfig & config);

// ---------------------------------------------------------------------------
// Tuning loop

/// Scrambled Halton points in [0, 1)^dim (random digit permutations per
/// dimension drawn from the seed), starting at sequence index `offset`.
Mat scrambled_halton(int count, int dim, std::uint64_t seed, int offset = 1);

struct SearchOptions
{
  int probes{512};
  int local_starts{8};
  int local_iterations{80};

  void validate() const;
};

struct TuningConfig
{
  int n_init{16};
  int n_bo{48};  // evaluations after the initial design
  int batch{4};
  nmpc::TuningBounds bounds{};
  AcquisitionConfig acquisition{};
  EvaluationConfig evaluation{};
  gp::FitOptions gp{};
  double alpha_epsilon{0.01};
  SearchOptions search{};
  track::SegmentationOptions segmentation{};
  double reference_margin{1.1};
  std::uint64_t seed{0};

  void validate() const;
};

struct TuningRecord
{
  nmpc::WeightSet theta;
  WeightVector u;  // log-normalised coordinates
  std::array<ObjectiveVector, 2> objectives;
  bool feasible{false};
  int batch{0};   // 0 for the initial design
  int active{-1};  // group whose acquisition proposed it, -1 for the initial design
};

struct TuningDataset
{
  std::vector<TuningRecord> records;
  int iteration{0};      // completed batches after the initial design
  std::string rng_state;  // engine state after the last completed batch
};

/// Candidate points for one batch, maximising the acquisition of one group
/// with posterior-mean believer updates between picks.
std::vector<WeightVector> propose_batch(
  const GroupModels & models, const Front & front, const Point2 & reference,
  const AcquisitionConfig & config, const SearchOptions & search, int batch,
  const std::vector<WeightVector> & existing, std::uint64_t seed);

struct TuningResult
{
  TuningDataset dataset;
  std::array<Point2, 2> reference;                  // anchored reference points
  std::array<std::vector<std::size_t>, 2> fronts;    // record indices, ascending j0
  std::array<std::vector<double>, 2> hv_trace;       // after each evaluation
};

/// Pareto sets per group among feasible records (record indices, ascending j0).
std::array<std::vector<std::size_t>, 2> group_fronts(const TuningDataset & dataset);

/// Called after every batch with the partial result; used for logs and resume files.
using TuningObserver = std::function<void(const TuningResult &)>;

TuningResult run_tuning(
  const track::Raceline & line, const TuningConfig & config, const TuningObserver & observer = {},
  const TuningDataset * resume = nullptr);

/// Same budget, independent uniform samples; hypervolume traces are measured
/// against the given reference points.
TuningResult random_search(
  const track::Raceline & line, const TuningConfig & config, const std::array<Point2, 2> & reference);

/// Tuning log rows: iter,group,theta0..theta6,j0,j1,feasible,hv_straight,hv_curve
void write_tuning_log(const TuningResult & result, std::ostream & out);

/// Resume file (JSON): the dataset with exact doubles.
std::string dataset_to_json(const TuningDataset & dataset, const std::string & config_hash);
TuningDataset dataset_from_json(const std::string & text, const std::string & config_hash);

}  // namespace wmpc::mobo
