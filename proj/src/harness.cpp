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

#include "wmpc/harness.hpp"

#include "wmpc/parallel.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace wmpc::harness
{
namespace
{
namespace fs = std::filesystem;

std::string read_file(const std::string & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("cannot read '" + path + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string & path, const std::string & text)
{
  const fs::path p(path);
  if (p.has_parent_path()) {
    fs::create_directories(p.parent_path());
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) {
      throw RuntimeFailure("cannot write '" + path + "'");
    }
    out << text;
    if (!out) {
      throw RuntimeFailure("failed writing '" + path + "'");
    }
  }
  fs::rename(tmp, path);
}

std::string resume_key(const RunContext & ctx)
{
  return ctx.config.hash() + ":" + std::to_string(ctx.seed());
}

std::string or_default(const std::string & value, const std::string & fallback)
{
  return value.empty() ? fallback : value;
}

pareto::Catalog load_catalog(const std::string & path)
{
  return pareto::Catalog::from_json(read_file(path));
}

nlohmann::json front_json(const std::vector<pareto::FrontEntry> & entries)
{
  nlohmann::json arr = nlohmann::json::array();
  for (const auto & e : entries) {
    const nmpc::WeightVector w = e.theta.vector();
    arr.push_back({{"theta", std::vector<double>(w.data(), w.data() + w.size())},
                   {"j0", e.point[0]},
                   {"j1", e.point[1]},
                   {"group", pareto::to_string(e.provenance)}});
  }
  return arr;
}

std::vector<pareto::FrontEntry> front_from_json(const nlohmann::json & arr)
{
  std::vector<pareto::FrontEntry> out;
  for (const auto & e : arr) {
    const auto theta = e.at("theta").get<std::vector<double>>();
    if (theta.size() != static_cast<std::size_t>(nmpc::kWeightCount)) {
      throw ValidationError("front entry needs 7 weights");
    }
    nmpc::WeightVector w;
    for (int d = 0; d < nmpc::kWeightCount; ++d) {
      w[d] = theta[static_cast<std::size_t>(d)];
    }
    out.push_back({nmpc::WeightSet::from_vector(w), {e.at("j0").get<double>(), e.at("j1").get<double>()},
                   pareto::provenance_from_string(e.at("group").get<std::string>())});
  }
  return out;
}

const track::Raceline & pick_line(
  bool eval, const track::Raceline & train_line, const track::Raceline & eval_line)
{
  return eval ? eval_line : train_line;
}

nlohmann::json summary_json(const scheduler::DeviationSummary & s)
{
  return {{"rms", s.rms}, {"max", s.max}, {"q25", s.q25}, {"q50", s.q50}, {"q75", s.q75}};
}

}  // namespace

std::string RunContext::provenance_json() const
{
  nlohmann::json j;
  j["config_hash"] = config.hash();
  j["seed"] = config.seed;
  j["version"] = WMPC_VERSION;
  return j.dump();
}

std::string RunContext::provenance_comment() const
{
  return "# config_hash=" + config.hash() + " seed=" + std::to_string(config.seed) +
         " version=" + WMPC_VERSION + "\n";
}

std::string RunContext::path(const std::string & file) const
{
  return (fs::path(out_dir) / file).string();
}

RunContext make_context(
  const std::string & config_path, const std::optional<std::uint64_t> & seed, const std::string & out_dir)
{
  RunContext ctx;
  ctx.config = config::load_config(config_path);
  if (seed) {
    ctx.config.seed = *seed;
  }
  ctx.out_dir = out_dir.empty() ? ctx.config.output : out_dir;
  fs::create_directories(ctx.out_dir);
  return ctx;
}

ConditionResult evaluate_condition(
  const std::string & name, const track::Raceline & line, const pareto::Catalog & catalog,
  const scheduler::Controller & controller, const scheduler::EpisodeOptions & options, int n_seeds,
  std::uint64_t seed_base)
{
  if (n_seeds < 1) {
    throw ValidationError("evaluation needs at least one seed");
  }
  ConditionResult result;
  result.name = name;
  result.episodes.resize(static_cast<std::size_t>(n_seeds));
  parallel_for(result.episodes.size(), [&](std::size_t i) {
    scheduler::EpisodeOptions o = options;
    o.seed = seed_base + i;
    result.episodes[i] = scheduler::run_episode(line, catalog, controller, o);
  });
  std::vector<double> lat;
  std::vector<double> vel;
  for (const auto & m : result.episodes) {
    lat.insert(lat.end(), m.e_lat.begin(), m.e_lat.end());
    vel.insert(vel.end(), m.e_vel.begin(), m.e_vel.end());
    result.hard_violations += m.hard_violation ? 1 : 0;
    result.e_lat_exceedances += m.e_lat_exceeded ? 1 : 0;
    result.catalog_violations += m.catalog_violations;
  }
  result.lat = scheduler::summarize(lat);
  result.vel = scheduler::summarize(vel);
  return result;
}

std::array<std::vector<long>, 2> action_histogram(
  const std::vector<scheduler::EpisodeMetrics> & episodes, const mobo::SegmentGroups & groups,
  int n_actions)
{
  std::array<std::vector<long>, 2> h{std::vector<long>(static_cast<std::size_t>(n_actions), 0),
                                     std::vector<long>(static_cast<std::size_t>(n_actions), 0)};
  for (const auto & m : episodes) {
    for (std::size_t i = 0; i < m.action.size(); ++i) {
      const int a = m.action[i];
      if (a < 0 || a >= n_actions) {
        continue;
      }
      const auto g = static_cast<std::size_t>(track::label_at(groups, m.s[i]));
      ++h[g][static_cast<std::size_t>(a)];
    }
  }
  return h;
}

double total_variation(const std::vector<long> & a, const std::vector<long> & b)
{
  if (a.size() != b.size()) {
    throw ValidationError("histograms differ in size");
  }
  double sa = 0.0;
  double sb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += static_cast<double>(a[i]);
    sb += static_cast<double>(b[i]);
  }
  if (!(sa > 0.0) || !(sb > 0.0)) {
    return 0.0;
  }
  double tv = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    tv += std::abs(static_cast<double>(a[i]) / sa - static_cast<double>(b[i]) / sb);
  }
  return 0.5 * tv;
}

BenchmarkReport run_benchmark(
  const track::Raceline & line, const mobo::SegmentGroups & groups, const pareto::Catalog & catalog,
  const agent::PolicyNetwork & trained, const scheduler::EpisodeOptions & options,
  const nmpc::WeightSet & hand_tuned, int n_seeds, std::uint64_t seed)
{
  BenchmarkReport report;
  const std::uint64_t base = seed * 1000003ULL + 101;
  const agent::PolicyNetwork untrained(
    options.observation.dimension(), catalog.size(), seed ^ 0xa0761d6478bd642fULL);
  report.conditions.push_back(evaluate_condition(
    "trained", line, catalog, scheduler::Controller::from_policy(trained, agent::ActMode::Argmax),
    options, n_seeds, base));
  report.conditions.push_back(evaluate_condition(
    "untrained", line, catalog, scheduler::Controller::from_policy(untrained, agent::ActMode::Argmax),
    options, n_seeds, base));
  for (int a = 0; a < catalog.size(); ++a) {
    report.conditions.push_back(evaluate_condition(
      "static_" + std::to_string(a), line, catalog, scheduler::Controller::fixed(a), options, n_seeds, base));
  }
  report.conditions.push_back(evaluate_condition(
    "hand_tuned", line, catalog, scheduler::Controller::static_weights(hand_tuned), options, n_seeds, base));

  const std::size_t n = report.conditions.size();
  report.dominates.assign(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      report.dominates[i][j] =
        mobo::dominates(report.conditions[i].rms_point(), report.conditions[j].rms_point());
    }
  }
  report.trained_histogram = action_histogram(report.conditions[0].episodes, groups, catalog.size());
  report.untrained_histogram = action_histogram(report.conditions[1].episodes, groups, catalog.size());
  return report;
}

void cmd_tune(const RunContext & ctx, bool resume)
{
  const auto & cfg = ctx.config;
  const track::Raceline line = cfg.track.build();
  {
    std::ostringstream os;
    track::write_csv(line, os);
    write_file(ctx.path("track.csv"), os.str());
  }
  const mobo::TuningConfig tuning = cfg.tuning();
  const std::string resume_path = ctx.path("tuning_resume.json");
  std::optional<mobo::TuningDataset> previous;
  if (resume && fs::exists(resume_path)) {
    previous = mobo::dataset_from_json(read_file(resume_path), resume_key(ctx));
  }

  std::ostringstream header;
  header << ctx.provenance_comment() << "# n_init=" << tuning.n_init << " n_bo=" << tuning.n_bo
         << " batch=" << tuning.batch << " k=" << tuning.acquisition.k
         << " epsilon=" << tuning.acquisition.epsilon << " e_lat_max=" << tuning.evaluation.e_lat_max
         << '\n';
  const auto save = [&](const mobo::TuningResult & r) {
    std::ostringstream log;
    log << header.str();
    mobo::write_tuning_log(r, log);
    write_file(ctx.path("tuning_log.csv"), log.str());
    write_file(resume_path, mobo::dataset_to_json(r.dataset, resume_key(ctx)));
  };
  const mobo::TuningResult result =
    mobo::run_tuning(line, tuning, save, previous ? &*previous : nullptr);
  save(result);

  std::array<std::vector<pareto::FrontEntry>, 2> groups;
  for (std::size_t g = 0; g < 2; ++g) {
    for (std::size_t idx : result.fronts[g]) {
      const auto & rec = result.dataset.records[idx];
      groups[g].push_back({rec.theta, rec.objectives[g].point(),
                           g == 0 ? pareto::Provenance::Straight : pareto::Provenance::Curve});
    }
  }
  nlohmann::json j;
  j["provenance"] = nlohmann::json::parse(ctx.provenance_json());
  j["reference"] = {result.reference[0], result.reference[1]};
  j["straight"] = front_json(groups[0]);
  j["curve"] = front_json(groups[1]);
  j["merged"] = front_json(pareto::merge_fronts(result));
  j["hypervolume"] = {result.hv_trace[0].back(), result.hv_trace[1].back()};
  write_file(ctx.path("fronts.json"), j.dump(1));
  std::cout << "tune: " << result.dataset.records.size() << " evaluations, front sizes "
            << result.fronts[0].size() << " (straight) / " << result.fronts[1].size()
            << " (curve), hypervolume " << result.hv_trace[0].back() << " / "
            << result.hv_trace[1].back() << '\n';
}

void cmd_reduce(const RunContext & ctx, const std::string & fronts_path)
{
  const std::string path = or_default(fronts_path, ctx.path("fronts.json"));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception & e) {
    throw ValidationError("fronts file is not valid JSON: " + std::string(e.what()));
  }
  std::vector<pareto::FrontEntry> merged;
  try {
    merged = front_from_json(j.at("merged"));
  } catch (const nlohmann::json::exception & e) {
    throw ValidationError("fronts file is malformed: " + std::string(e.what()));
  }
  pareto::ReduceOptions opts = ctx.config.pareto;
  opts.seed = ctx.seed();
  const pareto::Catalog catalog = pareto::reduce(merged, opts);
  write_file(ctx.path("catalog.json"), catalog.to_json(ctx.provenance_json()));
  std::cout << "reduce: " << merged.size() << " front entries -> catalog of " << catalog.size()
            << " (hash " << catalog.hash() << ")\n";
}

void cmd_train(const RunContext & ctx, const std::string & catalog_path)
{
  const auto & cfg = ctx.config;
  const pareto::Catalog catalog = load_catalog(or_default(catalog_path, ctx.path("catalog.json")));
  const track::Raceline line = cfg.track.build();
  const scheduler::EpisodeOptions options = cfg.episode_options();
  const agent::TrainResult result = scheduler::train_policy(
    line, catalog, options, cfg.ppo, ctx.seed(),
    [](const agent::UpdateDiagnostics & d) {
      std::cout << "train: update " << d.update << " steps " << d.timesteps << " mean_reward "
                << d.mean_reward << std::endl;
    },
    ctx.path("ppo_buffer_dump.csv"));
  write_file(ctx.path("policy.json"), result.policy.to_json(catalog.hash(), options.observation));
  std::ostringstream curve;
  curve << ctx.provenance_comment();
  agent::write_training_curve(result.curve, curve);
  write_file(ctx.path("training_curve.csv"), curve.str());
}

void cmd_evaluate(const RunContext & ctx, const EvaluateOptions & options)
{
  const auto & cfg = ctx.config;
  const pareto::Catalog catalog = load_catalog(or_default(options.catalog_path, ctx.path("catalog.json")));
  const track::Raceline train_line = cfg.track.build();
  const track::Raceline eval_line = cfg.eval_track.build();
  const track::Raceline & line = pick_line(options.eval_track, train_line, eval_line);
  const scheduler::EpisodeOptions episode = cfg.episode_options();
  const int n_seeds = options.n_seeds > 0 ? options.n_seeds : cfg.evaluation.n_seeds;

  agent::PolicyNetwork policy;
  scheduler::Controller controller;
  std::string name = options.condition;
  if (options.condition == "trained") {
    policy = agent::PolicyNetwork::from_json(
      read_file(or_default(options.policy_path, ctx.path("policy.json"))), catalog.hash());
    controller = scheduler::Controller::from_policy(policy, agent::ActMode::Argmax);
  } else if (options.condition == "untrained") {
    policy = agent::PolicyNetwork(episode.observation.dimension(), catalog.size(), ctx.seed() ^ 0xa0761d6478bd642fULL);
    controller = scheduler::Controller::from_policy(policy, agent::ActMode::Argmax);
  } else if (options.condition == "fixed") {
    scheduler::map_action(options.action, catalog);
    controller = scheduler::Controller::fixed(options.action);
    name = "fixed_" + std::to_string(options.action);
  } else if (options.condition == "hand_tuned") {
    controller = scheduler::Controller::static_weights(cfg.evaluation.hand_tuned);
  } else {
    throw ValidationError("unknown condition '" + options.condition + "'");
  }

  const ConditionResult result = evaluate_condition(
    name, line, catalog, controller, episode, n_seeds, ctx.seed() * 1000003ULL + 101);
  const std::string dir = "evaluate_" + name + (options.eval_track ? "_eval" : "_train");
  for (std::size_t i = 0; i < result.episodes.size(); ++i) {
    const auto & m = result.episodes[i];
    const std::string stem = dir + "/episode_" + std::to_string(i);
    write_file(ctx.path(stem + ".json"), scheduler::metrics_json(m, ctx.provenance_json()));
    std::ostringstream trace;
    trace << ctx.provenance_comment();
    scheduler::write_trace_csv(m, trace);
    write_file(ctx.path(stem + ".csv"), trace.str());
  }
  std::cout << "evaluate " << name << ": RMS e_lat " << result.lat.rms << " m, RMS e_vel "
            << result.vel.rms << " m/s, hard violations " << result.hard_violations << '\n';
}

void cmd_benchmark(const RunContext & ctx, const BenchmarkOptions & options)
{
  const auto & cfg = ctx.config;
  const pareto::Catalog catalog = load_catalog(or_default(options.catalog_path, ctx.path("catalog.json")));
  const agent::PolicyNetwork trained = agent::PolicyNetwork::from_json(
    read_file(or_default(options.policy_path, ctx.path("policy.json"))), catalog.hash());
  const track::Raceline train_line = cfg.track.build();
  const track::Raceline eval_line = cfg.eval_track.build();
  const track::Raceline & line = pick_line(options.eval_track, train_line, eval_line);
  const auto & segmentation = options.eval_track ? cfg.eval_track.segmentation : cfg.track.segmentation;
  const mobo::SegmentGroups groups = track::segment_by_curvature(line, segmentation);
  const int n_seeds = options.n_seeds > 0 ? options.n_seeds : cfg.evaluation.n_seeds;

  const BenchmarkReport report = run_benchmark(
    line, groups, catalog, trained, cfg.episode_options(), cfg.evaluation.hand_tuned, n_seeds, ctx.seed());
  const std::string dir = std::string("benchmark_") + (options.eval_track ? "eval" : "train") + "/";

  std::ostringstream summary;
  summary << ctx.provenance_comment() << std::setprecision(12)
          << "condition,rms_e_lat,rms_e_vel,max_e_lat,max_e_vel,hard_violations,e_lat_exceedances\n";
  std::ostringstream quantiles;
  quantiles << ctx.provenance_comment() << std::setprecision(12) << "condition,metric,q25,q50,q75,max\n";
  for (const auto & c : report.conditions) {
    summary << c.name << ',' << c.lat.rms << ',' << c.vel.rms << ',' << c.lat.max << ',' << c.vel.max
            << ',' << c.hard_violations << ',' << c.e_lat_exceedances << '\n';
    quantiles << c.name << ",abs_e_lat," << c.lat.q25 << ',' << c.lat.q50 << ',' << c.lat.q75 << ','
              << c.lat.max << '\n';
    quantiles << c.name << ",abs_e_vel," << c.vel.q25 << ',' << c.vel.q50 << ',' << c.vel.q75 << ','
              << c.vel.max << '\n';
  }
  write_file(ctx.path(dir + "summary.csv"), summary.str());
  write_file(ctx.path(dir + "quantiles.csv"), quantiles.str());

  std::ostringstream dom;
  dom << ctx.provenance_comment() << "condition";
  for (const auto & c : report.conditions) {
    dom << ',' << c.name;
  }
  dom << '\n';
  for (std::size_t i = 0; i < report.conditions.size(); ++i) {
    dom << report.conditions[i].name;
    for (std::size_t j = 0; j < report.conditions.size(); ++j) {
      dom << ',' << (report.dominates[i][j] ? 1 : 0);
    }
    dom << '\n';
  }
  write_file(ctx.path(dir + "dominance.csv"), dom.str());

  std::ostringstream hist;
  hist << ctx.provenance_comment() << "condition,segment,action,count\n";
  const auto emit = [&](const char * name, const std::array<std::vector<long>, 2> & h) {
    for (std::size_t g = 0; g < 2; ++g) {
      for (std::size_t a = 0; a < h[g].size(); ++a) {
        hist << name << ',' << track::to_string(static_cast<track::SegmentLabel>(g)) << ',' << a << ','
             << h[g][a] << '\n';
      }
    }
  };
  emit("trained", report.trained_histogram);
  emit("untrained", report.untrained_histogram);
  write_file(ctx.path(dir + "action_histogram.csv"), hist.str());

  nlohmann::json j;
  j["provenance"] = nlohmann::json::parse(ctx.provenance_json());
  j["catalog_hash"] = catalog.hash();
  j["track"] = options.eval_track ? "eval" : "train";
  nlohmann::json conds = nlohmann::json::array();
  for (const auto & c : report.conditions) {
    conds.push_back({{"name", c.name},
                     {"e_lat", summary_json(c.lat)},
                     {"e_vel", summary_json(c.vel)},
                     {"hard_violations", c.hard_violations},
                     {"e_lat_exceedances", c.e_lat_exceedances},
                     {"catalog_violations", c.catalog_violations}});
  }
  j["conditions"] = conds;
  int dominated_by = 0;
  int dominates = 0;
  for (std::size_t i = 2; i + 1 < report.conditions.size(); ++i) {
    dominated_by += report.dominates[i][0] ? 1 : 0;
    dominates += report.dominates[0][i] ? 1 : 0;
  }
  j["trained_dominated_by_static"] = dominated_by;
  j["trained_dominates_static"] = dominates;
  j["histogram_total_variation"] =
    total_variation(report.trained_histogram[0], report.trained_histogram[1]);
  write_file(ctx.path(dir + "report.json"), j.dump(1));
  std::cout << "benchmark: trained policy dominated by " << dominated_by << " and dominates "
            << dominates << " of " << catalog.size() << " static catalog sets\n";
}

}  // namespace wmpc::harness
