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

#include "wmpc/config.hpp"
#include "wmpc/scheduler.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace wmpc::harness
{
struct RunContext
{
  config::ExperimentConfig config;
  std::string out_dir;

  std::uint64_t seed() const { return config.seed; }
  /// {"config_hash", "seed", "version"} embedded in JSON outputs.
  std::string provenance_json() const;
  /// "# config_hash=... seed=... version=..." first line of CSV outputs.
  std::string provenance_comment() const;
  std::string path(const std::string & file) const;
};

/// Loads the config, applies the seed override and picks the output directory.
RunContext make_context(
  const std::string & config_path, const std::optional<std::uint64_t> & seed, const std::string & out_dir);

// ---------------------------------------------------------------------------
// Aggregated closed-loop results

struct ConditionResult
{
  std::string name;
  std::vector<scheduler::EpisodeMetrics> episodes;
  scheduler::DeviationSummary lat;  // over all steps of all episodes
  scheduler::DeviationSummary vel;
  int hard_violations{0};
  int e_lat_exceedances{0};
  int catalog_violations{0};

  mobo::Point2 rms_point() const { return {lat.rms, vel.rms}; }
};

/// Runs one episode per seed (seed_base, seed_base + 1, ...) in parallel and aggregates.
ConditionResult evaluate_condition(
  const std::string & name, const track::Raceline & line, const pareto::Catalog & catalog,
  const scheduler::Controller & controller, const scheduler::EpisodeOptions & options, int n_seeds,
  std::uint64_t seed_base);

/// Per-step action counts on [Straight, Curve] segments.
std::array<std::vector<long>, 2> action_histogram(
  const std::vector<scheduler::EpisodeMetrics> & episodes, const mobo::SegmentGroups & groups,
  int n_actions);

/// Total-variation distance between two count histograms (normalised first).
double total_variation(const std::vector<long> & a, const std::vector<long> & b);

struct BenchmarkReport
{
  std::vector<ConditionResult> conditions;  // trained, untrained, static_0.., hand_tuned
  std::vector<std::vector<bool>> dominates;  // [i][j]: i dominates j in (RMS e_lat, RMS e_vel)
  std::array<std::vector<long>, 2> trained_histogram;
  std::array<std::vector<long>, 2> untrained_histogram;
};

BenchmarkReport run_benchmark(
  const track::Raceline & line, const mobo::SegmentGroups & groups, const pareto::Catalog & catalog,
  const agent::PolicyNetwork & trained, const scheduler::EpisodeOptions & options,
  const nmpc::WeightSet & hand_tuned, int n_seeds, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Commands; each writes into ctx.out_dir and returns nothing on success.

void cmd_tune(const RunContext & ctx, bool resume);
void cmd_reduce(const RunContext & ctx, const std::string & fronts_path);
void cmd_train(const RunContext & ctx, const std::string & catalog_path);

struct EvaluateOptions
{
  std::string catalog_path;
  std::string policy_path;
  std::string condition{"trained"};  // trained | untrained | fixed | hand_tuned
  int action{0};                     // for fixed
  bool eval_track{false};
  int n_seeds{0};                    // 0: the config's value
};

void cmd_evaluate(const RunContext & ctx, const EvaluateOptions & options);

struct BenchmarkOptions
{
  std::string catalog_path;
  std::string policy_path;
  bool eval_track{false};
  int n_seeds{0};
};

void cmd_benchmark(const RunContext & ctx, const BenchmarkOptions & options);

}  // namespace wmpc::harness
