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

#include "doctest.h"

#include "wmpc/scheduler.hpp"

#include <sstream>

using namespace wmpc;
using namespace wmpc::scheduler;

namespace
{
const track::Raceline & oval()
{
  static const track::Raceline line = track::generate_synthetic_track(track::canned_spec("oval"));
  return line;
}

pareto::Catalog small_catalog()
{
  std::vector<pareto::CatalogEntry> entries;
  entries.push_back({0, nmpc::WeightSet{}, 0.1, 0.2, pareto::Provenance::Straight});
  entries.push_back({1, nmpc::WeightSet{10.0, 1.0, 1.0, 0.1, 1.0, 100.0, 100.0}, 0.05, 0.3, pareto::Provenance::Both});
  entries.push_back({2, nmpc::WeightSet{1.0, 1.0, 10.0, 1.0, 0.1, 100.0, 100.0}, 0.2, 0.1, pareto::Provenance::Curve});
  return pareto::Catalog(entries);
}

EpisodeOptions short_options(double duration)
{
  EpisodeOptions o;
  o.schedule.duration = duration;
  o.start_s = 250.0;
  return o;
}
}  // namespace

TEST_CASE("timing constants of a full episode")
{
  const ScheduleConfig s;
  CHECK(s.episode_steps() == 5500);
  CHECK(s.switch_every() == 80);
  CHECK(s.queries() == 69);
  CHECK(s.lookahead_samples() == 38);
  ScheduleConfig bad;
  bad.switch_time = 1.61;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("mismatched look-ahead and horizon settings are rejected")
{
  EpisodeOptions o;
  o.observation.lookahead_samples = 20;
  CHECK_THROWS_AS(o.validate(), ValidationError);
  o = EpisodeOptions{};
  o.mpc.horizon = 1.6;
  CHECK_THROWS_AS(o.validate(), ValidationError);
  CHECK_NOTHROW(EpisodeOptions{}.validate());
}

TEST_CASE("actions map onto catalog entries only")
{
  const pareto::Catalog cat = small_catalog();
  CHECK(map_action(1, cat) == cat.weights(1));
  CHECK_THROWS_AS(map_action(3, cat), ValidationError);
  CHECK_THROWS_AS(map_action(-1, cat), ValidationError);
}

TEST_CASE("fixed-action episode records consistent series")
{
  const pareto::Catalog cat = small_catalog();
  const EpisodeMetrics m = run_episode(oval(), cat, Controller::fixed(2), short_options(8.0));
  CHECK(m.steps == 400);
  CHECK(m.queries == 5);
  CHECK(m.t.size() == 400);
  CHECK(m.e_lat.size() == 400);
  CHECK(m.rewards.size() == 5);
  CHECK_FALSE(m.hard_violation);
  CHECK(m.catalog_violations == 0);
  CHECK(m.consistent());
  for (int a : m.action) {
    CHECK(a == 2);
  }
  for (double r : m.rewards) {
    CHECK(r > 0.0);
    CHECK(r <= 1.0);
  }
  std::ostringstream csv;
  write_trace_csv(m, csv);
  CHECK(csv.str().rfind("step,t,x,y,psi,v,e_lat,e_vel,action,solver_status,solve_iters", 0) == 0);
  CHECK(metrics_json(m).find("\"hard_violation\"") != std::string::npos);
}

TEST_CASE("policy episodes switch only at switching instants and are reproducible")
{
  const pareto::Catalog cat = small_catalog();
  const agent::PolicyNetwork net(79, cat.size(), 11);
  const Controller c = Controller::from_policy(net, agent::ActMode::Sample);
  EpisodeOptions o = short_options(16.0);
  o.seed = 3;
  const EpisodeMetrics a = run_episode(oval(), cat, c, o);
  const EpisodeMetrics b = run_episode(oval(), cat, c, o);
  CHECK(a.e_lat == b.e_lat);
  CHECK(a.action == b.action);
  for (std::size_t i = 1; i < a.action.size(); ++i) {
    if (i % 80 != 0) {
      CHECK(a.action[i] == a.action[i - 1]);
    }
  }
}

TEST_CASE("static weights outside the catalog are allowed for the baseline")
{
  const pareto::Catalog cat = small_catalog();
  const nmpc::WeightSet w{3.0, 2.0, 1.0, 0.5, 0.5, 100.0, 100.0};
  const EpisodeMetrics m = run_episode(oval(), cat, Controller::static_weights(w), short_options(4.0));
  CHECK(m.steps == 200);
  for (int a : m.action) {
    CHECK(a == -1);
  }
}

TEST_CASE("environment episodes end after the configured duration")
{
  const pareto::Catalog cat = small_catalog();
  WmpcEnvironment env(oval(), cat, short_options(4.0));
  const Vec obs = env.reset(1);
  CHECK(obs.size() == 79);
  int steps = 0;
  bool done = false;
  while (!done) {
    const auto s = env.step(0);
    done = s.done;
    ++steps;
    CHECK(s.reward >= 0.0);
  }
  CHECK(steps == 3);
  CHECK(env.metrics().steps == 200);
}

TEST_CASE("deviation summaries use absolute values and linear quantiles")
{
  const DeviationSummary s = summarize({-1.0, 2.0, -3.0, 4.0});
  CHECK(s.max == 4.0);
  CHECK(s.q50 == doctest::Approx(2.5));
  CHECK(s.q25 == doctest::Approx(1.75));
  CHECK(s.rms == doctest::Approx(std::sqrt(30.0 / 4.0)));
}
