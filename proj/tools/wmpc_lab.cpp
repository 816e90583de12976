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

#include "wmpc/common.hpp"
#include "wmpc/harness.hpp"

#include "CLI11.hpp"

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

namespace
{
constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct CommonArgs
{
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App * cmd, CommonArgs & args)
{
  cmd->add_option("--config", args.config, "Experiment TOML file")->required();
  cmd->add_option("--seed", args.seed, "Override the experiment seed");
  cmd->add_option("--out", args.out, "Output directory (default: the config's output)");
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Weights-varying MPC laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(WMPC_VERSION));

  CommonArgs common;
  bool resume = false;
  std::string fronts;
  std::string catalog;
  wmpc::harness::EvaluateOptions evaluate;
  wmpc::harness::BenchmarkOptions benchmark;

  auto * tune = app.add_subcommand("tune", "Multi-objective Bayesian weight tuning");
  add_common(tune, common);
  tune->add_flag("--resume", resume, "Continue from tuning_resume.json in the output directory");

  auto * reduce = app.add_subcommand("reduce", "Reduce the Pareto fronts to an action catalog");
  add_common(reduce, common);
  reduce->add_option("--fronts", fronts, "Fronts file (default: <out>/fronts.json)");

  auto * train = app.add_subcommand("train", "Train the scheduling policy with PPO");
  add_common(train, common);
  train->add_option("--catalog", catalog, "Catalog file (default: <out>/catalog.json)");

  auto * eval = app.add_subcommand("evaluate", "Closed-loop evaluation of one controller");
  add_common(eval, common);
  eval->add_option("--catalog", evaluate.catalog_path, "Catalog file");
  eval->add_option("--policy", evaluate.policy_path, "Policy checkpoint");
  eval->add_option("--condition", evaluate.condition, "trained | untrained | fixed | hand_tuned")
    ->check(CLI::IsMember({"trained", "untrained", "fixed", "hand_tuned"}));
  eval->add_option("--action", evaluate.action, "Catalog index for the fixed condition");
  eval->add_flag("--eval-track", evaluate.eval_track, "Use the evaluation track");
  eval->add_option("--n-seeds", evaluate.n_seeds, "Number of episodes");

  auto * bench = app.add_subcommand("benchmark", "Benchmark all conditions");
  add_common(bench, common);
  bench->add_option("--catalog", benchmark.catalog_path, "Catalog file");
  bench->add_option("--policy", benchmark.policy_path, "Policy checkpoint");
  bench->add_flag("--eval-track", benchmark.eval_track, "Use the evaluation track");
  bench->add_option("--n-seeds", benchmark.n_seeds, "Number of episodes per condition");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    const auto ctx = wmpc::harness::make_context(common.config, common.seed, common.out);
    if (tune->parsed()) {
      wmpc::harness::cmd_tune(ctx, resume);
    } else if (reduce->parsed()) {
      wmpc::harness::cmd_reduce(ctx, fronts);
    } else if (train->parsed()) {
      wmpc::harness::cmd_train(ctx, catalog);
    } else if (eval->parsed()) {
      wmpc::harness::cmd_evaluate(ctx, evaluate);
    } else if (bench->parsed()) {
      wmpc::harness::cmd_benchmark(ctx, benchmark);
    }
  } catch (const wmpc::ValidationError & e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception & e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
