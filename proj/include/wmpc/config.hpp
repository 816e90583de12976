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

#include "wmpc/agent.hpp"
#include "wmpc/mobo.hpp"
#include "wmpc/pareto.hpp"
#include "wmpc/ppo.hpp"
#include "wmpc/scheduler.hpp"
#include "wmpc/track.hpp"

#include <cstdint>
#include <string>

namespace wmpc::config
{
/// A track given by preset name, by CSV file, or by an element list.
struct TrackSource
{
  std::string preset{"oval"};  // empty when csv or elements are used
  std::string csv_path;        // resolved against the config file's directory
  track::TrackSpec spec{};     // used when preset and csv_path are empty
  track::SegmentationOptions segmentation{};

  track::Raceline build() const;
};

struct EvaluationBlock
{
  int n_seeds{3};
  /// Hand-tuned static baseline [q_xy, q_psi, q_v, r_j, r_omega, l1, l2].
  nmpc::WeightSet hand_tuned{100.0, 10.0, 100.0, 0.1, 1.0, 1000.0, 1000.0};
};

struct ExperimentConfig
{
  std::string name{"experiment"};
  std::uint64_t seed{0};
  std::string output{"out"};
  TrackSource track{};
  TrackSource eval_track{};
  vehicle::VehicleParams vehicle{};
  double a_comb_max{10.0};
  nmpc::SolverSettings solver{};
  scheduler::ScheduleConfig schedule{};
  mobo::TuningConfig mobo{};
  pareto::ReduceOptions pareto{};
  agent::PpoConfig ppo{};
  agent::RewardConfig reward{};
  agent::ObservationConfig observation{};
  EvaluationBlock evaluation{};
  /// Extra text folded into the hash (contents of referenced track files).
  std::string external_digest;

  nmpc::MpcConfig mpc() const;
  scheduler::EpisodeOptions episode_options() const;
  /// Tuning settings with the MPC, timing and seed of this experiment applied.
  mobo::TuningConfig tuning() const;
  void validate() const;

  /// Canonical JSON of every setting after defaults are applied (seed excluded).
  std::string canonical_json() const;
  /// Hash of the canonical JSON; identifies the configuration in every output.
  std::string hash() const;
};

/// Parses TOML text; unknown keys and tables are validation errors.
ExperimentConfig parse_config(const std::string & text, const std::string & base_dir = ".");
ExperimentConfig load_config(const std::string & path);

}  // namespace wmpc::config
