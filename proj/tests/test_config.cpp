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

#include "wmpc/config.hpp"

#include <filesystem>
#include <fstream>

using namespace wmpc;

namespace
{
std::string source(const std::string & rel)
{
  return std::string(WMPC_SOURCE_DIR) + "/" + rel;
}
}  // namespace

TEST_CASE("shipped configurations load and validate")
{
  const auto desk = config::load_config(source("configs/desk.toml"));
  CHECK(desk.mobo.n_init == 16);
  CHECK(desk.mobo.n_bo == 48);
  CHECK(desk.mobo.batch == 4);
  CHECK(desk.pareto.n_actions == 12);
  CHECK(desk.ppo.total_steps == 100000);
  CHECK(desk.ppo.n_envs == 4);
  CHECK(desk.track.preset == "oval");
  CHECK(desk.eval_track.preset == "speedway");

  const auto full = config::load_config(source("configs/full.toml"));
  CHECK(full.mobo.n_init == 50);
  CHECK(full.mobo.n_bo == 400);
  CHECK(full.mobo.batch == 5);
  CHECK(full.mobo.acquisition.reference[0] == mobo::Point2{0.5, 0.75});
  CHECK(full.mobo.acquisition.reference[1] == mobo::Point2{0.4, 0.9});
  CHECK(full.ppo.minibatch == 4096);
  CHECK(full.ppo.total_steps == 1500000);
  CHECK(full.schedule.duration == 110.0);
  CHECK(full.hash() != desk.hash());
}

TEST_CASE("defaults apply to an empty file")
{
  const auto c = config::parse_config("");
  CHECK_NOTHROW(c.validate());
  CHECK(c.schedule.switch_time == 1.6);
  CHECK(c.reward.sigma_lat == 0.1);
  CHECK(c.episode_options().observation.lookahead_samples == 38);
  CHECK(c.tuning().evaluation.mpc.horizon == 3.04);
}

TEST_CASE("unknown keys, tables and bad values are validation errors")
{
  CHECK_THROWS_AS(config::parse_config("[mobo]\nn_initial = 3\n"), ValidationError);
  CHECK_THROWS_AS(config::parse_config("[nonsense]\n"), ValidationError);
  CHECK_THROWS_AS(config::parse_config("[mobo]\nbatch = 0\n"), ValidationError);
  CHECK_THROWS_AS(config::parse_config("[mobo]\nbatch = \"four\"\n"), ValidationError);
  CHECK_THROWS_AS(config::parse_config("[track]\npreset = \"moon\"\n"), ValidationError);
  CHECK_THROWS_AS(config::parse_config("[track]\ncsv = \"missing.csv\"\n"), ValidationError);
  CHECK_THROWS_AS(config::parse_config("this is = = not toml"), ValidationError);
}

TEST_CASE("hash ignores the seed and tracks every setting")
{
  const auto a = config::parse_config("[experiment]\nseed = 1\n");
  const auto b = config::parse_config("[experiment]\nseed = 2\n");
  const auto c = config::parse_config("[experiment]\nseed = 1\n[ppo]\ngamma = 0.9\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
  CHECK(a.hash().size() == 16);
}

TEST_CASE("tracks can come from element lists and csv files")
{
  const auto c = config::parse_config(
    "[track]\npreset = \"\"\nv_max = 20.0\n"
    "elements = [ {kind = \"straight\", length = 100.0},"
    " {kind = \"arc\", radius = 30.0, angle_deg = 180.0},"
    " {kind = \"straight\", length = 100.0},"
    " {kind = \"arc\", radius = 30.0, angle_deg = 180.0} ]\n");
  const track::Raceline line = c.track.build();
  CHECK(line.length() == doctest::Approx(200.0 + 60.0 * 3.141592653589793).epsilon(1e-9));

  const auto dir = std::filesystem::temp_directory_path() / "wmpc_config_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "line.csv");
    track::write_csv(line, out);
  }
  const auto d = config::parse_config("[track]\npreset = \"\"\ncsv = \"line.csv\"\n", dir.string());
  CHECK(d.track.build().size() == line.size());
  std::string before = d.hash();
  {
    std::ofstream out(dir / "line.csv", std::ios::app);
    out << "";
  }
  CHECK(config::parse_config("[track]\npreset = \"\"\ncsv = \"line.csv\"\n", dir.string()).hash() == before);
}
