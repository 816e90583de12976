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

#include "wmpc/mobo.hpp"

#include <set>
#include <sstream>
#include <string>

using namespace wmpc;
using namespace wmpc::mobo;

namespace
{
const track::Raceline & oval()
{
  static const track::Raceline line = track::generate_synthetic_track(track::canned_spec("oval"));
  return line;
}

TuningConfig tiny_config(std::uint64_t seed)
{
  TuningConfig c;
  c.n_init = 4;
  c.n_bo = 6;
  c.batch = 2;
  c.seed = seed;
  c.gp.restarts = 2;
  c.search.probes = 64;
  c.search.local_starts = 2;
  c.search.local_iterations = 20;
  return c;
}

struct Interrupt
{
};
}  // namespace

TEST_CASE("scrambled Halton points fill the unit cube without repeats")
{
  const Mat P = scrambled_halton(64, 7, 3);
  CHECK(P.rows() == 64);
  CHECK(P.cols() == 7);
  CHECK(P.minCoeff() >= 0.0);
  CHECK(P.maxCoeff() < 1.0);
  std::set<double> first;
  for (int i = 0; i < 64; ++i) {
    first.insert(P(i, 0));
  }
  CHECK(first.size() == 64);
  CHECK(scrambled_halton(64, 7, 3) == P);
  CHECK(scrambled_halton(64, 7, 4) != P);
}

TEST_CASE("default weights complete a feasible lap with per-group objectives")
{
  const auto groups = track::segment_by_curvature(oval());
  const EvaluationResult r = evaluate_weights(nmpc::WeightSet{}, oval(), groups, EvaluationConfig{});
  CHECK(r.feasible);
  CHECK(r.cause.empty());
  CHECK(r.objectives[0].group == SegmentLabel::Straight);
  CHECK(r.objectives[1].group == SegmentLabel::Curve);
  CHECK(r.objectives[0].j0 >= 0.0);
  CHECK(r.objectives[1].j1 > 0.0);
  CHECK(r.max_abs_e_lat >= std::max(r.objectives[0].j0, r.objectives[1].j0) - 1e-12);
}

TEST_CASE("a tight lateral bound aborts the lap as infeasible")
{
  const auto groups = track::segment_by_curvature(oval());
  EvaluationConfig cfg;
  cfg.e_lat_max = 1e-6;
  const nmpc::WeightSet sloppy{0.01, 0.01, 1000.0, 1000.0, 1000.0, 1.0, 1.0};
  const EvaluationResult r = evaluate_weights(sloppy, oval(), groups, cfg);
  CHECK_FALSE(r.feasible);
  CHECK(r.cause == "lateral deviation above e_lat_max");
}

TEST_CASE("tuning produces nondecreasing hypervolume traces")
{
  const TuningResult r = run_tuning(oval(), tiny_config(5));
  CHECK(r.dataset.records.size() == 10);
  for (int g = 0; g < 2; ++g) {
    REQUIRE(r.hv_trace[g].size() == 10);
    for (std::size_t i = 1; i < r.hv_trace[g].size(); ++i) {
      CHECK(r.hv_trace[g][i] >= r.hv_trace[g][i - 1]);
    }
    for (std::size_t idx : r.fronts[g]) {
      CHECK(r.dataset.records[idx].feasible);
    }
  }
  std::ostringstream log;
  write_tuning_log(r, log);
  CHECK(log.str().find("hv_straight") != std::string::npos);
}

TEST_CASE("resuming an interrupted tuning run reproduces the uninterrupted run exactly")
{
  const TuningConfig cfg = tiny_config(9);
  const TuningResult full = run_tuning(oval(), cfg);

  std::string saved;
  try {
    run_tuning(oval(), cfg, [&](const TuningResult & r) {
      saved = dataset_to_json(r.dataset, "key");
      if (r.dataset.iteration == 1) {
        throw Interrupt{};
      }
    });
    FAIL("observer should have interrupted the run");
  } catch (const Interrupt &) {
  }
  const TuningDataset partial = dataset_from_json(saved, "key");
  CHECK(partial.records.size() == 6);
  const TuningResult resumed = run_tuning(oval(), cfg, {}, &partial);
  CHECK(dataset_to_json(resumed.dataset, "key") == dataset_to_json(full.dataset, "key"));
  CHECK(resumed.hv_trace == full.hv_trace);
  CHECK_THROWS_AS(dataset_from_json(saved, "other"), ValidationError);
}

TEST_CASE("tuning configuration is validated")
{
  TuningConfig c = tiny_config(0);
  c.batch = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = tiny_config(0);
  c.n_init = 1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}
