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

#include "wmpc/ppo.hpp"

#include "wmpc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>

namespace wmpc::agent
{
namespace
{
std::uint64_t mix(std::uint64_t a, std::uint64_t b)
{
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct EnvSlot
{
  std::unique_ptr<Environment> env;
  std::mt19937_64 rng;
  Vec observation;
  double episode_return{0.0};
  std::uint64_t episodes_started{0};
};

struct EnvRollout
{
  Mat observations;
  std::vector<int> actions;
  Vec log_probs;
  Vec values;
  Vec rewards;
  std::vector<bool> dones;
  double last_value{0.0};
  std::vector<double> finished_returns;
};

}  // namespace

void PpoConfig::validate() const
{
  if (!(lr_init > 0.0 && lr_final > 0.0 && lr_decay > 0.0)) {
    throw ValidationError("learning rates and decay must be positive");
  }
  if (n_steps < 1 || n_envs < 1 || minibatch < 1 || epochs < 1 || total_steps < 1 || hidden < 1) {
    throw ValidationError("PPO step counts must be positive");
  }
  if (!(gamma > 0.0 && gamma <= 1.0) || !(gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
    throw ValidationError("PPO needs gamma in (0, 1] and gae_lambda in [0, 1]");
  }
  if (!(clip > 0.0) || !(entropy_coef >= 0.0) || !(value_coef >= 0.0) || !(max_grad_norm > 0.0)) {
    throw ValidationError("PPO clip and gradient norm must be positive, coefficients nonnegative");
  }
  if (static_cast<long>(minibatch) > static_cast<long>(n_steps) * n_envs) {
    throw ValidationError("PPO minibatch exceeds n_steps * n_envs");
  }
}

double PpoConfig::learning_rate(long step) const
{
  const double t = std::clamp(static_cast<double>(step) / static_cast<double>(total_steps), 0.0, 1.0);
  return lr_init * std::pow(lr_final / lr_init, std::pow(t, lr_decay));
}

GaeResult gae(
  const Vec & rewards, const Vec & values, const std::vector<bool> & dones, double last_value,
  double gamma, double lambda)
{
  const Eigen::Index n = rewards.size();
  if (values.size() != n || static_cast<Eigen::Index>(dones.size()) != n) {
    throw ValidationError("GAE series must have equal lengths");
  }
  GaeResult out;
  out.advantages = Vec::Zero(n);
  double next_advantage = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const bool done = dones[static_cast<std::size_t>(t)];
    const double next_value = done ? 0.0 : (t + 1 < n ? values[t + 1] : last_value);
    const double delta = rewards[t] + gamma * next_value - values[t];
    next_advantage = delta + (done ? 0.0 : gamma * lambda * next_advantage);
    out.advantages[t] = next_advantage;
  }
  out.returns = out.advantages + values;
  return out;
}

void RolloutBuffer::write_csv(std::ostream & out) const
{
  out << std::setprecision(17) << "row,action,log_prob,value,reward,done,advantage,return";
  for (Eigen::Index c = 0; c < observations.cols(); ++c) {
    out << ",obs" << c;
  }
  out << '\n';
  for (Eigen::Index i = 0; i < size(); ++i) {
    out << i << ',' << actions[static_cast<std::size_t>(i)] << ',' << log_probs[i] << ',' << values[i]
        << ',' << rewards[i] << ',' << (dones[static_cast<std::size_t>(i)] ? 1 : 0) << ','
        << (advantages.size() > i ? advantages[i] : 0.0) << ',' << (returns.size() > i ? returns[i] : 0.0);
    for (Eigen::Index c = 0; c < observations.cols(); ++c) {
      out << ',' << observations(i, c);
    }
    out << '\n';
  }
}

PpoLoss ppo_loss(
  const PolicyNetwork & policy, const RolloutBuffer & buffer, const std::vector<Eigen::Index> & rows,
  const PpoConfig & config, Vec * gradient)
{
  PpoLoss loss;
  if (rows.empty()) {
    return loss;
  }
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  if (gradient != nullptr && gradient->size() != policy.parameter_count()) {
    *gradient = Vec::Zero(policy.parameter_count());
  }
  PolicyNetwork::Cache cache;
  for (Eigen::Index row : rows) {
    const Vec x = buffer.observations.row(row).transpose();
    const auto out = policy.forward(x, gradient != nullptr ? &cache : nullptr);
    const Vec p = softmax(out.logits);
    const Vec logp = (out.logits.array() - out.logits.maxCoeff()).matrix().array() -
                     std::log((out.logits.array() - out.logits.maxCoeff()).exp().sum());
    const int a = buffer.actions[static_cast<std::size_t>(row)];
    const double adv = buffer.advantages[row];
    const double ratio = std::exp(logp[a] - buffer.log_probs[row]);
    const double clipped = std::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip);
    const double surr1 = ratio * adv;
    const double surr2 = clipped * adv;
    const bool unclipped = surr1 <= surr2;
    loss.policy_loss -= std::min(surr1, surr2) * inv_n;

    const double entropy = -(p.array() * logp.array()).sum();
    loss.entropy += entropy * inv_n;
    const double err = out.value - buffer.returns[row];
    loss.value_loss += err * err * inv_n;
    loss.clip_fraction += (std::abs(ratio - 1.0) > config.clip ? 1.0 : 0.0) * inv_n;
    loss.approx_kl += ((ratio - 1.0) - std::log(ratio)) * inv_n;

    if (gradient != nullptr) {
      Vec d_logits = Vec::Zero(p.size());
      if (unclipped) {
        // d(-ratio * adv)/d(logits) = -adv * ratio * (onehot(a) - p)
        d_logits = adv * ratio * p;
        d_logits[a] -= adv * ratio;
      }
      // d(-c_e * H)/d(logits_j) = c_e * p_j * (log p_j + H)
      d_logits.array() += config.entropy_coef * p.array() * (logp.array() + entropy);
      d_logits *= inv_n;
      const double d_value = config.value_coef * 2.0 * err * inv_n;
      policy.backward(cache, d_logits, d_value, *gradient);
    }
  }
  loss.total = loss.policy_loss + config.value_coef * loss.value_loss - config.entropy_coef * loss.entropy;
  return loss;
}

PpoLearner::PpoLearner(PolicyNetwork & policy, PpoConfig config, std::uint64_t seed)
: policy_(&policy), config_(std::move(config)), rng_(seed)
{
  config_.validate();
  m_ = Vec::Zero(policy.parameter_count());
  v_ = Vec::Zero(policy.parameter_count());
}

UpdateDiagnostics PpoLearner::update(const RolloutBuffer & input, long timesteps)
{
  RolloutBuffer buffer = input;
  const Eigen::Index n = buffer.size();
  if (n == 0) {
    throw ValidationError("empty rollout buffer");
  }
  const double mean = buffer.advantages.mean();
  const double sd = std::sqrt((buffer.advantages.array() - mean).square().mean());
  buffer.advantages = (buffer.advantages.array() - mean) / (sd + 1e-8);

  UpdateDiagnostics diag;
  diag.timesteps = timesteps;
  diag.learning_rate = config_.learning_rate(timesteps);
  const double lr = diag.learning_rate;
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-5;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto mb = static_cast<std::size_t>(std::min<Eigen::Index>(config_.minibatch, n));
  int batches = 0;
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[static_cast<std::size_t>(rng_() % (i + 1))]);
    }
    for (std::size_t start = 0; start < order.size(); start += mb) {
      const std::size_t end = std::min(order.size(), start + mb);
      const std::vector<Eigen::Index> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
      Vec grad = Vec::Zero(policy_->parameter_count());
      const PpoLoss loss = ppo_loss(*policy_, buffer, rows, config_, &grad);
      if (!std::isfinite(loss.total) || !grad.allFinite()) {
        if (!dump_path_.empty()) {
          std::ofstream dump(dump_path_);
          input.write_csv(dump);
        }
        throw RuntimeFailure(
          "non-finite PPO loss; update aborted" +
          (dump_path_.empty() ? std::string() : ", buffer written to " + dump_path_));
      }
      const double norm = grad.norm();
      if (norm > config_.max_grad_norm) {
        grad *= config_.max_grad_norm / norm;
      }
      ++adam_steps_;
      m_ = beta1 * m_ + (1.0 - beta1) * grad;
      v_ = beta2 * v_ + (1.0 - beta2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam_steps_));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam_steps_));
      const Vec step = (lr / c1) * m_.array() / ((v_.array() / c2).sqrt() + eps);
      policy_->set_parameters(policy_->parameters() - step);

      diag.policy_loss += loss.policy_loss;
      diag.value_loss += loss.value_loss;
      diag.entropy += loss.entropy;
      diag.clip_fraction += loss.clip_fraction;
      diag.approx_kl += loss.approx_kl;
      ++batches;
    }
  }
  const double inv = 1.0 / batches;
  diag.policy_loss *= inv;
  diag.value_loss *= inv;
  diag.entropy *= inv;
  diag.clip_fraction *= inv;
  diag.approx_kl *= inv;
  return diag;
}

TrainResult train(
  const EnvironmentFactory & factory, const PpoConfig & config, std::uint64_t seed,
  const TrainObserver & observer, const std::string & dump_path)
{
  config.validate();
  std::vector<EnvSlot> slots(static_cast<std::size_t>(config.n_envs));
  for (int e = 0; e < config.n_envs; ++e) {
    auto & slot = slots[static_cast<std::size_t>(e)];
    slot.env = factory(e);
    if (!slot.env) {
      throw ValidationError("environment factory returned nothing");
    }
    slot.rng.seed(mix(seed, 1000 + static_cast<std::uint64_t>(e)));
  }
  const int obs_dim = slots.front().env->observation_dim();
  const int n_actions = slots.front().env->n_actions();
  for (const auto & slot : slots) {
    if (slot.env->observation_dim() != obs_dim || slot.env->n_actions() != n_actions) {
      throw ValidationError("environments disagree on observation or action size");
    }
  }

  TrainResult result;
  result.policy = PolicyNetwork(obs_dim, n_actions, mix(seed, 1), config.hidden);
  PpoLearner learner(result.policy, config, mix(seed, 2));
  learner.set_dump_path(dump_path);

  for (std::size_t e = 0; e < slots.size(); ++e) {
    auto & slot = slots[e];
    slot.observation = slot.env->reset(mix(mix(seed, 3 + e), slot.episodes_started++));
  }

  const long per_update = static_cast<long>(config.n_steps) * config.n_envs;
  const long updates = std::max<long>(1, config.total_steps / per_update);
  long timesteps = 0;
  double last_mean_reward = 0.0;
  for (long u = 0; u < updates; ++u) {
    const PolicyNetwork snapshot = result.policy;
    std::vector<EnvRollout> rollouts(slots.size());
    parallel_for(slots.size(), [&](std::size_t e) {
      auto & slot = slots[e];
      auto & r = rollouts[e];
      r.observations.resize(config.n_steps, obs_dim);
      r.log_probs.resize(config.n_steps);
      r.values.resize(config.n_steps);
      r.rewards.resize(config.n_steps);
      for (int t = 0; t < config.n_steps; ++t) {
        const auto out = snapshot.forward(slot.observation);
        const int a = select_action(out.logits, ActMode::Sample, slot.rng);
        const Vec p = softmax(out.logits);
        r.observations.row(t) = slot.observation.transpose();
        r.actions.push_back(a);
        r.log_probs[t] = std::log(std::max(p[a], 1e-300));
        r.values[t] = out.value;
        const Environment::Step step = slot.env->step(a);
        r.rewards[t] = step.reward;
        r.dones.push_back(step.done);
        slot.episode_return += step.reward;
        if (step.done) {
          r.finished_returns.push_back(slot.episode_return);
          slot.episode_return = 0.0;
          slot.observation = slot.env->reset(mix(mix(seed, 3 + e), slot.episodes_started++));
        } else {
          slot.observation = step.observation;
        }
      }
      r.last_value = snapshot.forward(slot.observation).value;
    });

    RolloutBuffer buffer;
    buffer.observations.resize(per_update, obs_dim);
    buffer.log_probs.resize(per_update);
    buffer.values.resize(per_update);
    buffer.rewards.resize(per_update);
    buffer.advantages.resize(per_update);
    buffer.returns.resize(per_update);
    std::vector<double> finished;
    Eigen::Index at = 0;
    for (const auto & r : rollouts) {
      const GaeResult g = gae(r.rewards, r.values, r.dones, r.last_value, config.gamma, config.gae_lambda);
      buffer.observations.middleRows(at, config.n_steps) = r.observations;
      buffer.log_probs.segment(at, config.n_steps) = r.log_probs;
      buffer.values.segment(at, config.n_steps) = r.values;
      buffer.rewards.segment(at, config.n_steps) = r.rewards;
      buffer.advantages.segment(at, config.n_steps) = g.advantages;
      buffer.returns.segment(at, config.n_steps) = g.returns;
      buffer.actions.insert(buffer.actions.end(), r.actions.begin(), r.actions.end());
      buffer.dones.insert(buffer.dones.end(), r.dones.begin(), r.dones.end());
      finished.insert(finished.end(), r.finished_returns.begin(), r.finished_returns.end());
      at += config.n_steps;
    }
    timesteps += per_update;

    UpdateDiagnostics diag = learner.update(buffer, timesteps - per_update);
    diag.update = static_cast<int>(u);
    diag.timesteps = timesteps;
    diag.episodes = static_cast<int>(finished.size());
    diag.mean_step_reward = buffer.rewards.mean();
    if (!finished.empty()) {
      last_mean_reward = std::accumulate(finished.begin(), finished.end(), 0.0) / finished.size();
    }
    diag.mean_reward = last_mean_reward;
    result.curve.push_back(diag);
    if (observer) {
      observer(diag);
    }
  }
  return result;
}

void write_training_curve(const std::vector<UpdateDiagnostics> & curve, std::ostream & out)
{
  out << "update,mean_reward,policy_loss,value_loss,entropy,clip_frac,kl\n" << std::setprecision(12);
  for (const auto & d : curve) {
    out << d.update << ',' << d.mean_reward << ',' << d.policy_loss << ',' << d.value_loss << ','
        << d.entropy << ',' << d.clip_fraction << ',' << d.approx_kl << '\n';
  }
}

ParityBandit::ParityBandit(int n_actions, int best_even, int best_odd)
: n_actions_(n_actions), best_even_(best_even), best_odd_(best_odd)
{
  if (n_actions < 1 || best_even < 0 || best_even >= n_actions || best_odd < 0 || best_odd >= n_actions) {
    throw ValidationError("bandit arms out of range");
  }
}

Vec ParityBandit::observation_for(int context)
{
  Vec o(2);
  o << (context == 0 ? 1.0 : 0.0), (context == 1 ? 1.0 : 0.0);
  return o;
}

Vec ParityBandit::reset(std::uint64_t seed)
{
  rng_.seed(seed);
  context_ = static_cast<int>(rng_() & 1U);
  return observation_for(context_);
}

Environment::Step ParityBandit::step(int action)
{
  if (action < 0 || action >= n_actions_) {
    throw ValidationError("bandit action out of range");
  }
  Step s;
  s.reward = action == best_action() ? 1.0 : 0.0;
  s.done = true;
  s.observation = observation_for(context_);
  return s;
}

}  // namespace wmpc::agent
