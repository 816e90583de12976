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

#include "wmpc/harness.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace wmpc;
namespace fs = std::filesystem;

namespace
{
std::string slurp(const fs::path & p)
{
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path & p)
{
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

fs::path tiny_config()
{
  const fs::path dir = fs::temp_directory_path() / "wmpc_harness_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream out(dir / "tiny.toml");
  out << "[experiment]\nseed = 4\noutput = \"out\"\n"
         "[mobo]\nn_init = 4\nn_bo = 4\nbatch = 2\ngp_restarts = 2\nprobes = 64\nlocal_starts = 2\n"
         "[pareto]\nn_actions = 3\n"
         "[ppo]\nn_steps = 16\nminibatch = 32\ntotal_steps = 64\nn_envs = 2\n"
         "[schedule]\nduration = 4.8\n"
         "[evaluation]\nn_seeds = 2\n";
  return dir / "tiny.toml";
}
}  // namespace

TEST_CASE("total variation distance")
{
  CHECK(harness::total_variation({1, 0}, {0, 1}) == doctest::Approx(1.0));
  CHECK(harness::total_variation({2, 2}, {5, 5}) == doctest::Approx(0.0));
  CHECK(harness::total_variation({3, 1, 0}, {1, 1, 2}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(harness::total_variation({1}, {1, 2}), ValidationError);
}

TEST_CASE("commands write provenance-stamped outputs and refuse foreign catalogs")
{
  const fs::path cfg = tiny_config();
  const auto ctx = harness::make_context(cfg.string(), std::nullopt, (cfg.parent_path() / "out").string());
  const std::string stamp = "# config_hash=" + ctx.config.hash() + " seed=4 version=";

  harness::cmd_tune(ctx, false);
  CHECK(first_line(ctx.path("tuning_log.csv")).rfind(stamp, 0) == 0);
  harness::cmd_reduce(ctx, "");
  const auto catalog = nlohmann::json::parse(slurp(ctx.path("catalog.json")));
  CHECK(catalog.at("provenance").at("config_hash") == ctx.config.hash());
  harness::cmd_train(ctx, "");
  CHECK(first_line(ctx.path("training_curve.csv")).rfind(stamp, 0) == 0);

  harness::EvaluateOptions eval;
  eval.condition = "hand_tuned";
  harness::cmd_evaluate(ctx, eval);
  CHECK(first_line(ctx.path("evaluate_hand_tuned_train/episode_0.csv")).rfind(stamp, 0) == 0);

  harness::BenchmarkOptions bench;
  harness::cmd_benchmark(ctx, bench);
  const auto report = nlohmann::json::parse(slurp(ctx.path("benchmark_train/report.json")));
  CHECK(report.at("conditions").size() == static_cast<std::size_t>(catalog.at("entries").size() + 3));
  CHECK(first_line(ctx.path("benchmark_train/dominance.csv")).rfind(stamp, 0) == 0);

  // A policy bound to another catalog is refused.
  const agent::PolicyNetwork foreign(79, 3, 1);
  {
    std::ofstream out(ctx.path("foreign_policy.json"));
    out << foreign.to_json("0000000000000000", agent::ObservationConfig{});
  }
  bench.policy_path = ctx.path("foreign_policy.json");
  CHECK_THROWS_AS(harness::cmd_benchmark(ctx, bench), ValidationError);
}

TEST_CASE("seed override changes the provenance but not the config hash")
{
  const fs::path cfg = tiny_config();
  const auto a = harness::make_context(cfg.string(), std::nullopt, (cfg.parent_path() / "a").string());
  const auto b = harness::make_context(cfg.string(), 9, (cfg.parent_path() / "b").string());
  CHECK(a.seed() == 4);
  CHECK(b.seed() == 9);
  CHECK(a.config.hash() == b.config.hash());
  CHECK(a.provenance_comment() != b.provenance_comment());
  CHECK_THROWS_AS(harness::make_context((cfg.parent_path() / "missing.toml").string(), std::nullopt, ""), ValidationError);
}
