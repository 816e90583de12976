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

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace wmpc::agent
{
struct PpoConfig
{
  double lr_init{0.005};
  double lr_final{0.0001};
  double lr_decay{0.4};
  int n_steps{512};  // per environment and update
  double gamma{0.8};
  double gae_lambda{0.98};
  double clip{0.2};
  double entropy_coef{0.006};
  double value_coef{0.5};
  double max_grad_norm{0.5};
  int minibatch{4096};
  int epochs{10};
  long total_steps{1500000};
  int n_envs{16};
  int hidden{64};

  void validate() const;
  /// lr_init * (lr_final / lr_init)^((t / total_steps)^lr_decay), t clamped to [0, total_steps].
  double learning_rate(long step) const;
};

struct GaeResult
{
  Vec advantages;
  Vec returns;
};

/// Generalised advantage estimation over one environment's series.
/// dones[t] marks the last transition of an episode (no bootstrap past it);
/// last_value bootstraps the final transition when it is not terminal.
GaeResult gae(
  const Vec & rewards, const Vec & values, const std::vector<bool> & dones, double last_value,
  double gamma, double lambda);

/// Transitions of one update, flattened over environments.
struct RolloutBuffer
{
  Mat observations;  // one row per transition
  std::vector<int> actions;
  Vec log_probs;
  Vec values;
  Vec rewards;
  std::vector<bool> dones;
  Vec advantages;
  Vec returns;

  Eigen::Index size() const { return observations.rows(); }
  void write_csv(std::ostream & out) const;
};

struct PpoLoss
{
  double policy_loss{0.0};
  double value_loss{0.0};
  double entropy{0.0};
  double clip_fraction{0.0};
  double approx_kl{0.0};
  double total{0.0};  // policy + value_coef * value - entropy_coef * entropy
};

/// Clipped-surrogate loss over the listed transitions; adds d(total)/d(parameters)
/// to `gradient` when given. Advantages are used as stored.
PpoLoss ppo_loss(
  const PolicyNetwork & policy, const RolloutBuffer & buffer, const std::vector<Eigen::Index> & rows,
  const PpoConfig & config, Vec * gradient = nullptr);

struct UpdateDiagnostics
{
  int update{0};
  long timesteps{0};
  double mean_reward{0.0};  // mean return of the episodes finished in this rollout
  int episodes{0};
  double mean_step_reward{0.0};
  double policy_loss{0.0};
  double value_loss{0.0};
  double entropy{0.0};
  double clip_fraction{0.0};
  double approx_kl{0.0};
  double learning_rate{0.0};
};

/// Adam-based learner; keeps optimiser moments between updates.
class PpoLearner
{
public:
  PpoLearner(PolicyNetwork & policy, PpoConfig config, std::uint64_t seed);

  /// Normalises advantages, runs `epochs` passes of shuffled minibatches.
  /// A non-finite loss aborts the update, dumps the buffer to `dump_path`
  /// (when set) and throws RuntimeFailure.
  UpdateDiagnostics update(const RolloutBuffer & buffer, long timesteps);

  void set_dump_path(std::string path) { dump_path_ = std::move(path); }

private:
  PolicyNetwork * policy_;
  PpoConfig config_;
  std::mt19937_64 rng_;
  Vec m_;
  Vec v_;
  long adam_steps_{0};
  std::string dump_path_;
};

/// Episodic environment with a discrete action space.
class Environment
{
public:
  struct Step
  {
    Vec observation;
    double reward{0.0};
    bool done{false};
  };

  virtual ~Environment() = default;
  virtual int observation_dim() const = 0;
  virtual int n_actions() const = 0;
  virtual Vec reset(std::uint64_t seed) = 0;
  virtual Step step(int action) = 0;
};

using EnvironmentFactory = std::function<std::unique_ptr<Environment>(int index)>;

struct TrainResult
{
  PolicyNetwork policy;
  std::vector<UpdateDiagnostics> curve;
};

using TrainObserver = std::function<void(const UpdateDiagnostics &)>;

/// Synchronous PPO: n_envs environments roll out n_steps each with a frozen
/// policy snapshot, then one learner update. Environments run in parallel.
TrainResult train(
  const EnvironmentFactory & factory, const PpoConfig & config, std::uint64_t seed,
  const TrainObserver & observer = {}, const std::string & dump_path = {});

/// update,mean_reward,policy_loss,value_loss,entropy,clip_frac,kl
void write_training_curve(const std::vector<UpdateDiagnostics> & curve, std::ostream & out);

/// Contextual bandit: the context bit is observed, and the best of n arms
/// (reward 1, others 0) depends on its parity. Episodes last one step.
class ParityBandit : public Environment
{
public:
  ParityBandit(int n_actions, int best_even, int best_odd);

  int observation_dim() const override { return 2; }
  int n_actions() const override { return n_actions_; }
  Vec reset(std::uint64_t seed) override;
  Step step(int action) override;
  int best_action() const { return context_ == 0 ? best_even_ : best_odd_; }
  static Vec observation_for(int context);

private:
  int n_actions_;
  int best_even_;
  int best_odd_;
  int context_{0};
  std::mt19937_64 rng_;
};

}  // namespace wmpc::agent
