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
#include "wmpc/closed_loop.hpp"
#include "wmpc/pareto.hpp"
#include "wmpc/ppo.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace wmpc::scheduler
{
struct ScheduleConfig
{
  double sim_dt{0.02};       // T_s,sim
  double control_dt{0.08};   // T_s
  double horizon{3.04};      // T_p
  double switch_time{1.6};   // T_sw
  double lookahead{3.04};    // T_la
  double duration{110.0};

  void validate() const;
  int episode_steps() const;
  int switch_every() const;
  /// Policy queries per full episode, the one at step 0 included.
  int queries() const;
  int lookahead_samples() const;
  sim::LoopTiming timing() const { return {sim_dt, control_dt}; }
};

/// Weight set of catalog entry a.
const nmpc::WeightSet & map_action(int action, const pareto::Catalog & catalog);

/// Who picks the weights at switching times.
struct Controller
{
  enum class Kind { Policy, FixedAction, StaticWeights };
  Kind kind{Kind::FixedAction};
  const agent::PolicyNetwork * policy{nullptr};
  agent::ActMode mode{agent::ActMode::Argmax};
  int action{0};
  nmpc::WeightSet weights{};

  static Controller from_policy(const agent::PolicyNetwork & policy, agent::ActMode mode);
  static Controller fixed(int action);
  static Controller static_weights(const nmpc::WeightSet & weights);
};

struct EpisodeOptions
{
  ScheduleConfig schedule{};
  nmpc::MpcConfig mpc{};
  agent::ObservationConfig observation{};
  agent::RewardConfig reward{};
  double e_lat_max{1.0};
  /// Start arc length; when unset the start is drawn uniformly from the seed.
  std::optional<double> start_s{};
  std::uint64_t seed{0};

  void validate() const;
};

struct DeviationSummary
{
  double rms{0.0};
  double max{0.0};
  double q25{0.0};
  double q50{0.0};
  double q75{0.0};

  bool operator==(const DeviationSummary &) const = default;
};

/// Summary of |values|; quartiles by linear interpolation between order statistics.
DeviationSummary summarize(const std::vector<double> & values);

struct EpisodeMetrics
{
  std::vector<double> t;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> psi;
  std::vector<double> v;
  std::vector<double> s;
  std::vector<double> e_lat;
  std::vector<double> e_vel;
  std::vector<int> action;           // -1 for static weights
  std::vector<int> solver_status;    // nmpc::SolveStatus of the input in force
  std::vector<int> solve_iters;      // 0 on steps without a solve
  std::vector<bool> feasible;        // no clamp and |e_lat| <= e_lat_max on this step
  std::vector<double> rewards;       // one per completed switching interval

  DeviationSummary lat;
  DeviationSummary vel;
  int steps{0};
  int queries{0};
  bool hard_violation{false};  // terminated by an infeasible MPC or a non-finite state
  bool e_lat_exceeded{false};
  int soft_violations{0};
  int clamp_events{0};
  int catalog_violations{0};   // control steps whose weights were not a catalog entry
  double start_s{0.0};

  void finalize();
  /// Summaries recomputed from the series match the stored ones exactly.
  bool consistent() const;
};

/// Closed loop under a switching schedule; also the RL training environment.
class WmpcEnvironment : public agent::Environment
{
public:
  WmpcEnvironment(const track::Raceline & line, const pareto::Catalog & catalog, EpisodeOptions options);

  int observation_dim() const override { return options_.observation.dimension(); }
  int n_actions() const override { return catalog_->size(); }
  /// Random start drawn from the seed (or options.start_s when set).
  Vec reset(std::uint64_t seed) override;
  Step step(int action) override;

  /// Starts an episode at arc length s.
  Vec begin(double s);
  /// Applies the weights until the next switching time or the episode end.
  Step advance(const nmpc::WeightSet & weights, int action);

  const EpisodeMetrics & metrics() const { return metrics_; }
  EpisodeMetrics take_metrics();
  bool finished() const { return finished_; }
  const agent::Observation & last_observation() const { return observation_; }

private:
  Vec observe();

  const track::Raceline * line_;
  const pareto::Catalog * catalog_;
  EpisodeOptions options_;
  sim::ClosedLoop loop_;
  agent::DeviationBuffer deviations_;
  agent::Observation observation_;
  EpisodeMetrics metrics_;
  bool finished_{true};
};

/// One episode under the given controller. Policy sampling draws from the seed.
EpisodeMetrics run_episode(
  const track::Raceline & line, const pareto::Catalog & catalog, const Controller & controller,
  const EpisodeOptions & options);

/// Trains a policy over the catalog with n_envs WMPC environments (random starts).
agent::TrainResult train_policy(
  const track::Raceline & line, const pareto::Catalog & catalog, const EpisodeOptions & options,
  const agent::PpoConfig & ppo, std::uint64_t seed, const agent::TrainObserver & observer = {},
  const std::string & dump_path = {});

/// step,t,x,y,psi,v,e_lat,e_vel,action,solver_status,solve_iters
void write_trace_csv(const EpisodeMetrics & metrics, std::ostream & out);

/// Summaries and counters as JSON, with a provenance object embedded.
std::string metrics_json(const EpisodeMetrics & metrics, const std::string & provenance_json = "{}");

}  // namespace wmpc::scheduler
