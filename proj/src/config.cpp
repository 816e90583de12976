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

#include "wmpc/config.hpp"

#include "json.hpp"
#include "toml.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace wmpc::config
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

/// One TOML table; records the keys read so leftovers can be reported.
class Section
{
public:
  Section(const toml::table * table, std::string name) : table_(table), name_(std::move(name)) {}

  bool present() const { return table_ != nullptr; }

  void get(const char * key, double & out)
  {
    if (const toml::node * n = find(key)) {
      const auto v = n->value<double>();
      if (!v) {
        fail(key, "a number");
      }
      out = *v;
    }
  }

  void get(const char * key, int & out)
  {
    if (const toml::node * n = find(key)) {
      const auto v = n->value<std::int64_t>();
      if (!v || !n->is_integer()) {
        fail(key, "an integer");
      }
      out = static_cast<int>(*v);
    }
  }

  void get(const char * key, long & out)
  {
    if (const toml::node * n = find(key)) {
      if (n->is_integer()) {
        out = static_cast<long>(*n->value<std::int64_t>());
      } else if (n->is_floating_point() && std::floor(*n->value<double>()) == *n->value<double>()) {
        out = static_cast<long>(*n->value<double>());
      } else {
        fail(key, "an integer");
      }
    }
  }

  void get(const char * key, std::uint64_t & out)
  {
    if (const toml::node * n = find(key)) {
      const auto v = n->value<std::int64_t>();
      if (!v || !n->is_integer() || *v < 0) {
        fail(key, "a nonnegative integer");
      }
      out = static_cast<std::uint64_t>(*v);
    }
  }

  void get(const char * key, bool & out)
  {
    if (const toml::node * n = find(key)) {
      const auto v = n->value<bool>();
      if (!v) {
        fail(key, "a boolean");
      }
      out = *v;
    }
  }

  void get(const char * key, std::string & out)
  {
    if (const toml::node * n = find(key)) {
      const auto v = n->value<std::string>();
      if (!v) {
        fail(key, "a string");
      }
      out = *v;
    }
  }

  std::vector<double> numbers(const char * key, std::size_t expected, bool & found)
  {
    found = false;
    std::vector<double> out;
    if (const toml::node * n = find(key)) {
      const toml::array * arr = n->as_array();
      if (arr == nullptr || (expected > 0 && arr->size() != expected)) {
        fail(key, expected > 0 ? "an array of " + std::to_string(expected) + " numbers" : "an array");
      }
      for (const auto & item : *arr) {
        const auto v = item.value<double>();
        if (!v) {
          fail(key, "an array of numbers");
        }
        out.push_back(*v);
      }
      found = true;
    }
    return out;
  }

  const toml::array * array(const char * key)
  {
    if (const toml::node * n = find(key)) {
      if (const toml::array * arr = n->as_array()) {
        return arr;
      }
      fail(key, "an array");
    }
    return nullptr;
  }

  void finish() const
  {
    if (table_ == nullptr) {
      return;
    }
    for (const auto & [k, v] : *table_) {
      if (!used_.count(std::string(k.str()))) {
        throw ValidationError("unknown key '" + std::string(k.str()) + "' in [" + name_ + "]");
      }
    }
  }

private:
  const toml::node * find(const char * key)
  {
    if (table_ == nullptr) {
      return nullptr;
    }
    used_.insert(key);
    return table_->get(key);
  }

  [[noreturn]] void fail(const char * key, const std::string & what) const
  {
    throw ValidationError("[" + name_ + "] " + key + " must be " + what);
  }

  const toml::table * table_;
  std::string name_;
  std::set<std::string> used_;
};

void read_weights(Section & s, const char * key, nmpc::WeightVector & out)
{
  bool found = false;
  const auto v = s.numbers(key, nmpc::kWeightCount, found);
  if (found) {
    for (int i = 0; i < nmpc::kWeightCount; ++i) {
      out[i] = v[static_cast<std::size_t>(i)];
    }
  }
}

TrackSource read_track(const toml::table * table, const std::string & name, const std::string & base_dir,
                       const TrackSource & defaults, std::string & digest)
{
  TrackSource src = defaults;
  Section s(table, name);
  if (!s.present()) {
    return src;
  }
  std::string preset = src.preset;
  std::string csv;
  s.get("preset", preset);
  s.get("csv", csv);
  s.get("kappa_threshold", src.segmentation.kappa_threshold);
  s.get("min_dwell_time", src.segmentation.min_dwell_time);
  const toml::array * elements = s.array("elements");

  track::TrackSpec spec;
  spec.name = name;
  s.get("closed", spec.closed);
  s.get("v_max", spec.v_max);
  s.get("v_start", spec.v_start);
  s.get("step", spec.step);
  s.get("a_lat_max", spec.gg.a_lat_max);
  s.get("a_accel_max", spec.gg.a_accel_max);
  s.get("a_brake_max", spec.gg.a_brake_max);
  s.finish();

  const int sources = (!csv.empty() ? 1 : 0) + (elements != nullptr ? 1 : 0);
  if (sources > 1) {
    throw ValidationError("[" + name + "] takes either csv or elements, not both");
  }
  if (!csv.empty()) {
    const fs::path p = fs::path(csv).is_absolute() ? fs::path(csv) : fs::path(base_dir) / csv;
    if (!fs::exists(p)) {
      throw ValidationError("[" + name + "] csv file '" + p.string() + "' does not exist");
    }
    src.preset.clear();
    src.csv_path = p.string();
    digest += name + ":" + hex64(fnv1a(read_file(src.csv_path))) + ";";
  } else if (elements != nullptr) {
    src.preset.clear();
    for (const auto & node : *elements) {
      const toml::table * et = node.as_table();
      if (et == nullptr) {
        throw ValidationError("[" + name + "] elements must be inline tables");
      }
      Section e(et, name + ".elements");
      std::string kind;
      double length = 0.0;
      double radius = 0.0;
      double angle_deg = 0.0;
      e.get("kind", kind);
      e.get("length", length);
      e.get("radius", radius);
      e.get("angle_deg", angle_deg);
      e.finish();
      if (kind == "straight") {
        spec.elements.push_back(track::TrackElement::straight(length));
      } else if (kind == "arc") {
        spec.elements.push_back(track::TrackElement::arc(radius, angle_deg * std::numbers::pi / 180.0));
      } else {
        throw ValidationError("[" + name + "] element kind must be 'straight' or 'arc'");
      }
    }
    src.spec = spec;
  } else {
    src.preset = preset;
  }
  return src;
}

nlohmann::json weights_json(const nmpc::WeightVector & w)
{
  return std::vector<double>(w.data(), w.data() + w.size());
}

nlohmann::json track_json(const TrackSource & t)
{
  nlohmann::json j;
  j["preset"] = t.preset;
  j["csv"] = t.csv_path.empty() ? "" : fs::path(t.csv_path).filename().string();
  j["kappa_threshold"] = t.segmentation.kappa_threshold;
  j["min_dwell_time"] = t.segmentation.min_dwell_time;
  if (t.preset.empty() && t.csv_path.empty()) {
    nlohmann::json els = nlohmann::json::array();
    for (const auto & e : t.spec.elements) {
      els.push_back({{"kind", e.kind == track::TrackElement::Kind::Straight ? "straight" : "arc"},
                     {"length", e.length},
                     {"radius", e.radius},
                     {"angle", e.angle}});
    }
    j["elements"] = els;
    j["closed"] = t.spec.closed;
    j["v_max"] = t.spec.v_max;
    j["v_start"] = t.spec.v_start;
    j["step"] = t.spec.step;
    j["gg"] = {t.spec.gg.a_lat_max, t.spec.gg.a_accel_max, t.spec.gg.a_brake_max};
  }
  return j;
}

}  // namespace

track::Raceline TrackSource::build() const
{
  if (!csv_path.empty()) {
    std::ifstream in(csv_path);
    if (!in) {
      throw ValidationError("cannot read track file '" + csv_path + "'");
    }
    return track::read_csv(in);
  }
  if (!preset.empty()) {
    return track::generate_synthetic_track(track::canned_spec(preset));
  }
  return track::generate_synthetic_track(spec);
}

nmpc::MpcConfig ExperimentConfig::mpc() const
{
  nmpc::MpcConfig m;
  m.horizon = schedule.horizon;
  m.dt = schedule.control_dt;
  m.a_comb_max = a_comb_max;
  m.vehicle = vehicle;
  m.solver = solver;
  return m;
}

scheduler::EpisodeOptions ExperimentConfig::episode_options() const
{
  scheduler::EpisodeOptions o;
  o.schedule = schedule;
  o.mpc = mpc();
  o.observation = observation;
  o.observation.lookahead_samples = schedule.lookahead_samples();
  o.observation.sample_dt = schedule.control_dt;
  o.reward = reward;
  o.e_lat_max = mobo.evaluation.e_lat_max;
  o.seed = seed;
  return o;
}

mobo::TuningConfig ExperimentConfig::tuning() const
{
  mobo::TuningConfig t = mobo;
  t.evaluation.mpc = mpc();
  t.evaluation.timing = schedule.timing();
  t.segmentation = track.segmentation;
  t.seed = seed;
  return t;
}

void ExperimentConfig::validate() const
{
  if (output.empty()) {
    throw ValidationError("[experiment] output must not be empty");
  }
  for (const TrackSource * t : {&track, &eval_track}) {
    if (!t->preset.empty()) {
      track::canned_spec(t->preset);
    }
  }
  vehicle.validate();
  schedule.validate();
  mpc().validate();
  tuning().validate();
  ppo.validate();
  reward.validate();
  episode_options().validate();
  if (pareto.n_actions < pareto.n_objectives || pareto.restarts < 1) {
    throw ValidationError("[pareto] needs n_actions >= n_objectives and restarts >= 1");
  }
  if (evaluation.n_seeds < 1) {
    throw ValidationError("[evaluation] n_seeds must be positive");
  }
  const nmpc::WeightVector h = evaluation.hand_tuned.vector();
  if (!(h.array() > 0.0).all()) {
    throw ValidationError("[evaluation] hand_tuned weights must be positive");
  }
}

std::string ExperimentConfig::canonical_json() const
{
  nlohmann::json j;
  j["name"] = name;
  j["track"] = track_json(track);
  j["eval_track"] = track_json(eval_track);
  j["vehicle"] = {vehicle.wheelbase, vehicle.delta_max, vehicle.j_max, vehicle.omega_max,
                  vehicle.a_min, vehicle.a_max, vehicle.v_max};
  j["mpc"] = {a_comb_max, solver.max_iterations_cold, solver.max_iterations_warm,
              solver.kkt_tolerance, solver.max_line_search};
  j["schedule"] = {schedule.sim_dt, schedule.control_dt, schedule.horizon, schedule.switch_time,
                   schedule.lookahead, schedule.duration};
  const auto & m = mobo;
  j["mobo"] = {
    {"n_init", m.n_init}, {"n_bo", m.n_bo}, {"batch", m.batch},
    {"lower", weights_json(m.bounds.lower)}, {"upper", weights_json(m.bounds.upper)},
    {"k", m.acquisition.k}, {"epsilon", m.acquisition.epsilon},
    {"reference", {m.acquisition.reference[0], m.acquisition.reference[1]}},
    {"e_lat_max", m.evaluation.e_lat_max}, {"time_limit_factor", m.evaluation.time_limit_factor},
    {"gp", {m.gp.restarts, m.gp.max_iterations}}, {"alpha_epsilon", m.alpha_epsilon},
    {"search", {m.search.probes, m.search.local_starts, m.search.local_iterations}},
    {"reference_margin", m.reference_margin}};
  j["pareto"] = {pareto.n_actions, pareto.n_objectives, pareto.restarts};
  const auto & p = ppo;
  j["ppo"] = {p.lr_init, p.lr_final, p.lr_decay, p.n_steps, p.gamma, p.gae_lambda, p.clip,
              p.entropy_coef, p.value_coef, p.max_grad_norm, p.minibatch, p.epochs,
              p.total_steps, p.n_envs, p.hidden};
  j["reward"] = {reward.amplitude, reward.sigma_lat, reward.sigma_vel, reward.lat_bound,
                 reward.vel_bound, reward.normalized};
  j["observation"] = {observation.v_scale, observation.lat_scale, observation.vel_scale,
                      observation.yaw_rate_scale};
  j["evaluation"] = {{"n_seeds", evaluation.n_seeds},
                     {"hand_tuned", weights_json(evaluation.hand_tuned.vector())}};
  j["external"] = external_digest;
  return j.dump();
}

std::string ExperimentConfig::hash() const
{
  return hex64(fnv1a(canonical_json()));
}

ExperimentConfig parse_config(const std::string & text, const std::string & base_dir)
{
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error & e) {
    std::ostringstream msg;
    msg << "config is not valid TOML: " << e.description() << " at line " << e.source().begin.line;
    throw ValidationError(msg.str());
  }
  static const std::set<std::string> known{
    "experiment", "track", "eval_track", "vehicle", "mpc", "schedule", "mobo", "pareto",
    "ppo", "reward", "observation", "evaluation"};
  for (const auto & [k, v] : root) {
    if (!known.count(std::string(k.str()))) {
      throw ValidationError("unknown table [" + std::string(k.str()) + "]");
    }
    if (!v.is_table()) {
      throw ValidationError("'" + std::string(k.str()) + "' must be a table");
    }
  }
  const auto table = [&](const char * name) { return root[name].as_table(); };

  ExperimentConfig c;
  c.eval_track.preset = "speedway";
  {
    Section s(table("experiment"), "experiment");
    s.get("name", c.name);
    s.get("seed", c.seed);
    s.get("output", c.output);
    s.finish();
  }
  c.track = read_track(table("track"), "track", base_dir, c.track, c.external_digest);
  c.eval_track = read_track(table("eval_track"), "eval_track", base_dir, c.eval_track, c.external_digest);
  {
    Section s(table("vehicle"), "vehicle");
    s.get("wheelbase", c.vehicle.wheelbase);
    s.get("delta_max", c.vehicle.delta_max);
    s.get("j_max", c.vehicle.j_max);
    s.get("omega_max", c.vehicle.omega_max);
    s.get("a_min", c.vehicle.a_min);
    s.get("a_max", c.vehicle.a_max);
    s.get("v_max", c.vehicle.v_max);
    s.finish();
  }
  {
    Section s(table("mpc"), "mpc");
    s.get("a_comb_max", c.a_comb_max);
    s.get("max_iterations_cold", c.solver.max_iterations_cold);
    s.get("max_iterations_warm", c.solver.max_iterations_warm);
    s.get("kkt_tolerance", c.solver.kkt_tolerance);
    s.get("max_line_search", c.solver.max_line_search);
    s.finish();
  }
  {
    Section s(table("schedule"), "schedule");
    s.get("sim_dt", c.schedule.sim_dt);
    s.get("control_dt", c.schedule.control_dt);
    s.get("horizon", c.schedule.horizon);
    s.get("switch_time", c.schedule.switch_time);
    s.get("lookahead", c.schedule.lookahead);
    s.get("duration", c.schedule.duration);
    s.finish();
  }
  {
    auto & m = c.mobo;
    Section s(table("mobo"), "mobo");
    s.get("n_init", m.n_init);
    s.get("n_bo", m.n_bo);
    s.get("batch", m.batch);
    read_weights(s, "lower", m.bounds.lower);
    read_weights(s, "upper", m.bounds.upper);
    s.get("k", m.acquisition.k);
    s.get("epsilon", m.acquisition.epsilon);
    bool found = false;
    auto r = s.numbers("reference_straight", 2, found);
    if (found) {
      m.acquisition.reference[0] = {r[0], r[1]};
    }
    r = s.numbers("reference_curve", 2, found);
    if (found) {
      m.acquisition.reference[1] = {r[0], r[1]};
    }
    s.get("reference_margin", m.reference_margin);
    s.get("e_lat_max", m.evaluation.e_lat_max);
    s.get("time_limit_factor", m.evaluation.time_limit_factor);
    s.get("gp_restarts", m.gp.restarts);
    s.get("gp_max_iterations", m.gp.max_iterations);
    s.get("alpha_epsilon", m.alpha_epsilon);
    s.get("probes", m.search.probes);
    s.get("local_starts", m.search.local_starts);
    s.get("local_iterations", m.search.local_iterations);
    s.finish();
  }
  {
    Section s(table("pareto"), "pareto");
    s.get("n_actions", c.pareto.n_actions);
    s.get("n_objectives", c.pareto.n_objectives);
    s.get("restarts", c.pareto.restarts);
    s.finish();
  }
  {
    auto & p = c.ppo;
    Section s(table("ppo"), "ppo");
    s.get("lr_init", p.lr_init);
    s.get("lr_final", p.lr_final);
    s.get("lr_decay", p.lr_decay);
    s.get("n_steps", p.n_steps);
    s.get("gamma", p.gamma);
    s.get("gae_lambda", p.gae_lambda);
    s.get("clip", p.clip);
    s.get("entropy_coef", p.entropy_coef);
    s.get("value_coef", p.value_coef);
    s.get("max_grad_norm", p.max_grad_norm);
    s.get("minibatch", p.minibatch);
    s.get("epochs", p.epochs);
    s.get("total_steps", p.total_steps);
    s.get("n_envs", p.n_envs);
    s.get("hidden", p.hidden);
    s.finish();
  }
  {
    Section s(table("reward"), "reward");
    s.get("amplitude", c.reward.amplitude);
    s.get("sigma_lat", c.reward.sigma_lat);
    s.get("sigma_vel", c.reward.sigma_vel);
    s.get("lat_bound", c.reward.lat_bound);
    s.get("vel_bound", c.reward.vel_bound);
    s.get("normalized", c.reward.normalized);
    s.finish();
  }
  {
    Section s(table("observation"), "observation");
    s.get("v_scale", c.observation.v_scale);
    s.get("lat_scale", c.observation.lat_scale);
    s.get("vel_scale", c.observation.vel_scale);
    s.get("yaw_rate_scale", c.observation.yaw_rate_scale);
    s.finish();
  }
  {
    Section s(table("evaluation"), "evaluation");
    s.get("n_seeds", c.evaluation.n_seeds);
    nmpc::WeightVector h = c.evaluation.hand_tuned.vector();
    read_weights(s, "hand_tuned", h);
    c.evaluation.hand_tuned = nmpc::WeightSet::from_vector(h);
    s.finish();
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string & path)
{
  const std::string text = read_file(path);
  const fs::path dir = fs::path(path).parent_path();
  return parse_config(text, dir.empty() ? "." : dir.string());
}

}  // namespace wmpc::config
