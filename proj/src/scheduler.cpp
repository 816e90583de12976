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

#include "wmpc/scheduler.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace wmpc::scheduler
{
namespace
{
int checked_ratio(double a, double b, const char * what)
{
  const double r = a / b;
  if (r < 1.0 - 1e-9 || std::abs(r - std::round(r)) > 1e-6) {
    throw ValidationError(std::string(what) + " must be an integer multiple");
  }
  return static_cast<int>(std::lround(r));
}

nlohmann::json summary_json(const DeviationSummary & s)
{
  return {{"rms", s.rms}, {"max", s.max}, {"q25", s.q25}, {"q50", s.q50}, {"q75", s.q75}};
}

}  // namespace

void ScheduleConfig::validate() const
{
  if (!(sim_dt > 0.0 && control_dt > 0.0 && horizon > 0.0 && switch_time > 0.0 && lookahead > 0.0 &&
        duration > 0.0)) {
    throw ValidationError("schedule times must be positive");
  }
  checked_ratio(control_dt, sim_dt, "T_s over T_s,sim");
  checked_ratio(switch_time, sim_dt, "T_sw over T_s,sim");
  checked_ratio(switch_time, control_dt, "T_sw over T_s");
  checked_ratio(lookahead, control_dt, "T_la over T_s");
  checked_ratio(duration, sim_dt, "episode duration over T_s,sim");
}

int ScheduleConfig::episode_steps() const
{
  return static_cast<int>(std::lround(duration / sim_dt));
}

int ScheduleConfig::switch_every() const
{
  return static_cast<int>(std::lround(switch_time / sim_dt));
}

int ScheduleConfig::queries() const
{
  return (episode_steps() + switch_every() - 1) / switch_every();
}

int ScheduleConfig::lookahead_samples() const
{
  return static_cast<int>(std::lround(lookahead / control_dt));
}

const nmpc::WeightSet & map_action(int action, const pareto::Catalog & catalog)
{
  return catalog.weights(action);
}

Controller Controller::from_policy(const agent::PolicyNetwork & policy, agent::ActMode mode)
{
  Controller c;
  c.kind = Kind::Policy;
  c.policy = &policy;
  c.mode = mode;
  return c;
}

Controller Controller::fixed(int action)
{
  Controller c;
  c.kind = Kind::FixedAction;
  c.action = action;
  return c;
}

Controller Controller::static_weights(const nmpc::WeightSet & weights)
{
  Controller c;
  c.kind = Kind::StaticWeights;
  c.weights = weights;
  return c;
}

void EpisodeOptions::validate() const
{
  schedule.validate();
  mpc.validate();
  observation.validate();
  reward.validate();
  if (!(e_lat_max > 0.0)) {
    throw ValidationError("e_lat_max must be positive");
  }
  if (observation.lookahead_samples != schedule.lookahead_samples() ||
      std::abs(observation.sample_dt - schedule.control_dt) > 1e-12) {
    throw ValidationError("observation look-ahead must sample T_la at T_s");
  }
  if (std::abs(mpc.horizon - schedule.horizon) > 1e-9 || std::abs(mpc.dt - schedule.control_dt) > 1e-12) {
    throw ValidationError("MPC horizon and step must match the schedule's T_p and T_s");
  }
}

DeviationSummary summarize(const std::vector<double> & values)
{
  DeviationSummary s;
  if (values.empty()) {
    return s;
  }
  std::vector<double> a(values.size());
  std::transform(values.begin(), values.end(), a.begin(), [](double v) { return std::abs(v); });
  s.rms = rms(a);
  std::sort(a.begin(), a.end());
  s.max = a.back();
  const auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(a.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, a.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return a[lo] + frac * (a[hi] - a[lo]);
  };
  s.q25 = quantile(0.25);
  s.q50 = quantile(0.5);
  s.q75 = quantile(0.75);
  return s;
}

void EpisodeMetrics::finalize()
{
  steps = static_cast<int>(e_lat.size());
  lat = summarize(e_lat);
  vel = summarize(e_vel);
}

bool EpisodeMetrics::consistent() const
{
  const std::size_t n = e_lat.size();
  const bool lengths = e_vel.size() == n && t.size() == n && x.size() == n && action.size() == n &&
                       solver_status.size() == n && solve_iters.size() == n && feasible.size() == n &&
                       s.size() == n && static_cast<std::size_t>(steps) == n;
  return lengths && summarize(e_lat) == lat && summarize(e_vel) == vel;
}

WmpcEnvironment::WmpcEnvironment(
  const track::Raceline & line, const pareto::Catalog & catalog, EpisodeOptions options)
: line_(&line),
  catalog_(&catalog),
  options_(std::move(options)),
  loop_(line, options_.mpc, options_.schedule.timing()),
  deviations_(options_.schedule.switch_every())
{
  options_.validate();
}

Vec WmpcEnvironment::observe()
{
  observation_ = agent::build_observation(
    loop_.state().v, loop_.arc_length(), *line_, deviations_, options_.observation);
  return observation_.features(options_.observation);
}

Vec WmpcEnvironment::begin(double s)
{
  loop_.reset(sim::state_on_line(*line_, s, options_.mpc.vehicle));
  deviations_.clear();
  metrics_ = EpisodeMetrics{};
  metrics_.start_s = s;
  finished_ = false;
  return observe();
}

Vec WmpcEnvironment::reset(std::uint64_t seed)
{
  if (options_.start_s) {
    return begin(*options_.start_s);
  }
  std::mt19937_64 rng(seed);
  const double u = agent::unit_uniform(rng);
  const double s = line_->closed() ? line_->start_s() + u * line_->length() : line_->start_s();
  return begin(s);
}

agent::Environment::Step WmpcEnvironment::step(int action)
{
  return advance(map_action(action, *catalog_), action);
}

agent::Environment::Step WmpcEnvironment::advance(const nmpc::WeightSet & weights, int action)
{
  if (finished_) {
    throw ValidationError("episode already finished; call reset first");
  }
  loop_.set_weights(weights);
  ++metrics_.queries;
  const int total = options_.schedule.episode_steps();
  const int every = loop_.timing().control_every();
  const int n = std::min(options_.schedule.switch_every(), total - metrics_.steps);
  for (int i = 0; i < n; ++i) {
    if (action >= 0 && loop_.steps_taken() % every == 0 && !catalog_->contains(loop_.weights())) {
      ++metrics_.catalog_violations;
    }
    const sim::StepRecord rec = loop_.step();
    if (rec.terminated) {
      metrics_.hard_violation = true;
      finished_ = true;
      break;
    }
    metrics_.t.push_back(rec.t);
    metrics_.x.push_back(rec.state.x);
    metrics_.y.push_back(rec.state.y);
    metrics_.psi.push_back(rec.state.psi);
    metrics_.v.push_back(rec.state.v);
    metrics_.s.push_back(rec.s);
    metrics_.e_lat.push_back(rec.e_lat);
    metrics_.e_vel.push_back(rec.e_vel);
    metrics_.action.push_back(action);
    metrics_.solver_status.push_back(static_cast<int>(rec.status));
    metrics_.solve_iters.push_back(rec.solve_iterations);
    const bool exceeded = std::abs(rec.e_lat) > options_.e_lat_max;
    metrics_.feasible.push_back(!rec.clamped && !exceeded);
    metrics_.e_lat_exceeded = metrics_.e_lat_exceeded || exceeded;
    metrics_.steps = static_cast<int>(metrics_.e_lat.size());
    deviations_.push(rec.e_lat, rec.e_vel);
  }
  if (metrics_.steps >= total) {
    finished_ = true;
  }
  Step out;
  out.reward = agent::mog_reward(deviations_.lat_rms(), deviations_.vel_rms(), options_.reward);
  metrics_.rewards.push_back(out.reward);
  out.observation = observe();
  out.done = finished_;
  metrics_.soft_violations = loop_.soft_violations();
  metrics_.clamp_events = loop_.clamp_events();
  if (finished_) {
    metrics_.finalize();
  }
  return out;
}

EpisodeMetrics WmpcEnvironment::take_metrics()
{
  metrics_.finalize();
  return std::move(metrics_);
}

EpisodeMetrics run_episode(
  const track::Raceline & line, const pareto::Catalog & catalog, const Controller & controller,
  const EpisodeOptions & options)
{
  if (controller.kind != Controller::Kind::StaticWeights) {
    if (catalog.empty()) {
      throw ValidationError("scheduling needs a nonempty catalog");
    }
    if (controller.kind == Controller::Kind::Policy) {
      if (controller.policy == nullptr || controller.policy->n_actions() != catalog.size()) {
        throw ValidationError("policy output size does not match the catalog");
      }
      if (controller.policy->input_dim() != options.observation.dimension()) {
        throw ValidationError("policy input size does not match the observation");
      }
    } else {
      map_action(controller.action, catalog);
    }
  }
  WmpcEnvironment env(line, catalog, options);
  Vec obs = env.reset(options.seed);
  std::mt19937_64 rng(options.seed ^ 0x5851f42d4c957f2dULL);
  while (!env.finished()) {
    switch (controller.kind) {
      case Controller::Kind::Policy: {
        const int a = agent::act(*controller.policy, obs, controller.mode, rng);
        obs = env.advance(map_action(a, catalog), a).observation;
        break;
      }
      case Controller::Kind::FixedAction:
        obs = env.advance(map_action(controller.action, catalog), controller.action).observation;
        break;
      case Controller::Kind::StaticWeights:
        obs = env.advance(controller.weights, -1).observation;
        break;
    }
  }
  return env.take_metrics();
}

agent::TrainResult train_policy(
  const track::Raceline & line, const pareto::Catalog & catalog, const EpisodeOptions & options,
  const agent::PpoConfig & ppo, std::uint64_t seed, const agent::TrainObserver & observer,
  const std::string & dump_path)
{
  if (catalog.empty()) {
    throw ValidationError("training needs a nonempty catalog");
  }
  EpisodeOptions env_options = options;
  env_options.start_s.reset();
  env_options.validate();
  const agent::EnvironmentFactory factory = [&](int) -> std::unique_ptr<agent::Environment> {
    return std::make_unique<WmpcEnvironment>(line, catalog, env_options);
  };
  return agent::train(factory, ppo, seed, observer, dump_path);
}

void write_trace_csv(const EpisodeMetrics & m, std::ostream & out)
{
  out << "step,t,x,y,psi,v,e_lat,e_vel,action,solver_status,solve_iters\n" << std::setprecision(12);
  for (std::size_t i = 0; i < m.e_lat.size(); ++i) {
    out << i << ',' << m.t[i] << ',' << m.x[i] << ',' << m.y[i] << ',' << m.psi[i] << ',' << m.v[i]
        << ',' << m.e_lat[i] << ',' << m.e_vel[i] << ',' << m.action[i] << ','
        << nmpc::to_string(static_cast<nmpc::SolveStatus>(m.solver_status[i])) << ','
        << m.solve_iters[i] << '\n';
  }
}

std::string metrics_json(const EpisodeMetrics & m, const std::string & provenance_json)
{
  nlohmann::json j;
  j["provenance"] = nlohmann::json::parse(provenance_json);
  j["steps"] = m.steps;
  j["queries"] = m.queries;
  j["start_s"] = m.start_s;
  j["hard_violation"] = m.hard_violation;
  j["e_lat_exceeded"] = m.e_lat_exceeded;
  j["soft_violations"] = m.soft_violations;
  j["clamp_events"] = m.clamp_events;
  j["catalog_violations"] = m.catalog_violations;
  j["e_lat"] = summary_json(m.lat);
  j["e_vel"] = summary_json(m.vel);
  double reward_sum = 0.0;
  for (double r : m.rewards) {
    reward_sum += r;
  }
  j["episode_reward"] = reward_sum;
  return j.dump(1);
}

}  // namespace wmpc::scheduler
