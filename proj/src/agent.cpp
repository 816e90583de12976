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

#include "wmpc/agent.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>

namespace wmpc::agent
{
namespace
{
Mat orthogonal(int rows, int cols, double gain, std::mt19937_64 & rng)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  const int big = std::max(rows, cols);
  const int small = std::min(rows, cols);
  Mat g(big, small);
  for (int j = 0; j < small; ++j) {
    for (int i = 0; i < big; ++i) {
      g(i, j) = normal(rng);
    }
  }
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ() * Mat::Identity(big, small);
  const Vec d = qr.matrixQR().diagonal();
  for (int j = 0; j < small; ++j) {
    if (d[j] < 0.0) {
      q.col(j) = -q.col(j);
    }
  }
  Mat w = rows >= cols ? q : Mat(q.transpose());
  return gain * w;
}

void append(Vec & out, Eigen::Index & at, const Eigen::Ref<const Vec> & v)
{
  out.segment(at, v.size()) = v;
  at += v.size();
}

nlohmann::json mat_json(const Mat & m)
{
  return {{"rows", m.rows()}, {"cols", m.cols()},
          {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Mat json_mat(const nlohmann::json & j)
{
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
    throw ValidationError("checkpoint matrix has inconsistent dimensions");
  }
  return Eigen::Map<const Mat>(data.data(), rows, cols);
}

}  // namespace

void ObservationConfig::validate() const
{
  if (lookahead_samples < 1 || !(sample_dt > 0.0)) {
    throw ValidationError("observation look-ahead needs at least one sample and a positive step");
  }
  if (!(v_scale > 0.0 && lat_scale > 0.0 && vel_scale > 0.0 && yaw_rate_scale > 0.0)) {
    throw ValidationError("observation scaling constants must be positive");
  }
}

Vec Observation::features(const ObservationConfig & config) const
{
  const auto n = static_cast<Eigen::Index>(config.lookahead_samples);
  if (v_profile.size() != static_cast<std::size_t>(n) || psidot_profile.size() != static_cast<std::size_t>(n)) {
    throw ValidationError("observation profiles do not match the look-ahead length");
  }
  Vec f(config.dimension());
  f[0] = v_ego / config.v_scale;
  f[1] = e_lat_rms / config.lat_scale;
  f[2] = e_vel_rms / config.vel_scale;
  for (Eigen::Index k = 0; k < n; ++k) {
    f[3 + k] = v_profile[static_cast<std::size_t>(k)] / config.v_scale;
    f[3 + n + k] = psidot_profile[static_cast<std::size_t>(k)] / config.yaw_rate_scale;
  }
  return f;
}

DeviationBuffer::DeviationBuffer(int capacity) : capacity_(capacity)
{
  if (capacity < 1) {
    throw ValidationError("deviation buffer capacity must be positive");
  }
}

void DeviationBuffer::push(double e_lat, double e_vel)
{
  lat_.push_back(e_lat);
  vel_.push_back(e_vel);
  if (static_cast<int>(lat_.size()) > capacity_) {
    lat_.pop_front();
    vel_.pop_front();
  }
}

void DeviationBuffer::clear()
{
  lat_.clear();
  vel_.clear();
}

Observation build_observation(
  double v_ego, double s, const track::Raceline & line, const DeviationBuffer & deviations,
  const ObservationConfig & config)
{
  config.validate();
  Observation obs;
  obs.v_ego = v_ego;
  obs.e_lat_rms = deviations.lat_rms();
  obs.e_vel_rms = deviations.vel_rms();
  double sk = s;
  for (int k = 0; k < config.lookahead_samples; ++k) {
    const track::RacelinePoint p = track::lookup_extrapolated(line, sk);
    obs.v_profile.push_back(p.v_ref);
    obs.psidot_profile.push_back(p.kappa * p.v_ref);
    sk += p.v_ref * config.sample_dt;
  }
  return obs;
}

void RewardConfig::validate() const
{
  if (!(amplitude > 0.0) || !(sigma_lat > 0.0) || !(sigma_vel > 0.0)) {
    throw ValidationError("reward amplitude and standard deviations must be positive");
  }
  if (!(lat_bound > 0.0) || !(vel_bound > 0.0)) {
    throw ValidationError("reward truncation bounds must be nonempty");
  }
}

double mog_reward(double e_lat_rms, double e_vel_rms, const RewardConfig & config)
{
  if (!(e_lat_rms >= 0.0) || !(e_vel_rms >= 0.0)) {
    throw ValidationError("reward deviations must be nonnegative");
  }
  double lat = std::min(e_lat_rms, config.lat_bound);
  double vel = std::min(e_vel_rms, config.vel_bound);
  if (config.normalized) {
    lat /= config.lat_bound;
    vel /= config.vel_bound;
  }
  const double exponent = lat * lat / (2.0 * config.sigma_lat * config.sigma_lat) +
                          vel * vel / (2.0 * config.sigma_vel * config.sigma_vel);
  return config.amplitude * std::exp(-exponent);
}

PolicyNetwork::PolicyNetwork(int input_dim, int n_actions, std::uint64_t seed, int hidden)
{
  if (input_dim < 1 || n_actions < 1 || hidden < 1) {
    throw ValidationError("network dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  W1_ = orthogonal(hidden, input_dim, std::sqrt(2.0), rng);
  W2_ = orthogonal(hidden, hidden, std::sqrt(2.0), rng);
  Wp_ = orthogonal(n_actions, hidden, 0.01, rng);
  wv_ = orthogonal(1, hidden, 1.0, rng).row(0).transpose();
  b1_ = Vec::Zero(hidden);
  b2_ = Vec::Zero(hidden);
  bp_ = Vec::Zero(n_actions);
  bv_ = 0.0;
}

PolicyNetwork::Output PolicyNetwork::forward(const Vec & x, Cache * cache) const
{
  if (x.size() != W1_.cols()) {
    throw ValidationError("observation dimension does not match the network input");
  }
  Vec h1 = (W1_ * x + b1_).array().tanh();
  Vec h2 = (W2_ * h1 + b2_).array().tanh();
  Output out;
  out.logits = Wp_ * h2 + bp_;
  out.value = wv_.dot(h2) + bv_;
  if (cache != nullptr) {
    cache->x = x;
    cache->h1 = std::move(h1);
    cache->h2 = std::move(h2);
  }
  return out;
}

void PolicyNetwork::backward(const Cache & cache, const Vec & d_logits, double d_value, Vec & gradient) const
{
  const Eigen::Index h = W1_.rows();
  const Eigen::Index in = W1_.cols();
  const Eigen::Index na = Wp_.rows();
  if (gradient.size() != parameter_count()) {
    gradient = Vec::Zero(parameter_count());
  }
  const Vec d_h2 = Wp_.transpose() * d_logits + wv_ * d_value;
  const Vec d_a2 = d_h2.array() * (1.0 - cache.h2.array().square());
  const Vec d_h1 = W2_.transpose() * d_a2;
  const Vec d_a1 = d_h1.array() * (1.0 - cache.h1.array().square());

  Eigen::Index at = 0;
  Eigen::Map<Mat>(gradient.data() + at, h, in) += d_a1 * cache.x.transpose();
  at += h * in;
  gradient.segment(at, h) += d_a1;
  at += h;
  Eigen::Map<Mat>(gradient.data() + at, h, h) += d_a2 * cache.h1.transpose();
  at += h * h;
  gradient.segment(at, h) += d_a2;
  at += h;
  Eigen::Map<Mat>(gradient.data() + at, na, h) += d_logits * cache.h2.transpose();
  at += na * h;
  gradient.segment(at, na) += d_logits;
  at += na;
  gradient.segment(at, h) += d_value * cache.h2;
  at += h;
  gradient[at] += d_value;
}

Eigen::Index PolicyNetwork::parameter_count() const
{
  return W1_.size() + b1_.size() + W2_.size() + b2_.size() + Wp_.size() + bp_.size() + wv_.size() + 1;
}

Vec PolicyNetwork::parameters() const
{
  Vec p(parameter_count());
  Eigen::Index at = 0;
  append(p, at, W1_.reshaped());
  append(p, at, b1_);
  append(p, at, W2_.reshaped());
  append(p, at, b2_);
  append(p, at, Wp_.reshaped());
  append(p, at, bp_);
  append(p, at, wv_);
  p[at] = bv_;
  return p;
}

void PolicyNetwork::set_parameters(const Vec & p)
{
  if (p.size() != parameter_count()) {
    throw ValidationError("parameter vector has the wrong length");
  }
  const Eigen::Index h = W1_.rows();
  const Eigen::Index in = W1_.cols();
  const Eigen::Index na = Wp_.rows();
  Eigen::Index at = 0;
  W1_ = Eigen::Map<const Mat>(p.data() + at, h, in);
  at += h * in;
  b1_ = p.segment(at, h);
  at += h;
  W2_ = Eigen::Map<const Mat>(p.data() + at, h, h);
  at += h * h;
  b2_ = p.segment(at, h);
  at += h;
  Wp_ = Eigen::Map<const Mat>(p.data() + at, na, h);
  at += na * h;
  bp_ = p.segment(at, na);
  at += na;
  wv_ = p.segment(at, h);
  at += h;
  bv_ = p[at];
}

std::string PolicyNetwork::to_json(const std::string & catalog_hash, const ObservationConfig & observation) const
{
  nlohmann::json j;
  j["format"] = "wmpc-policy";
  j["version"] = 1;
  j["catalog_hash"] = catalog_hash;
  j["observation"] = {
    {"lookahead_samples", observation.lookahead_samples},
    {"sample_dt", observation.sample_dt},
    {"v_scale", observation.v_scale},
    {"lat_scale", observation.lat_scale},
    {"vel_scale", observation.vel_scale},
    {"yaw_rate_scale", observation.yaw_rate_scale}};
  j["W1"] = mat_json(W1_);
  j["b1"] = mat_json(b1_);
  j["W2"] = mat_json(W2_);
  j["b2"] = mat_json(b2_);
  j["Wp"] = mat_json(Wp_);
  j["bp"] = mat_json(bp_);
  j["wv"] = mat_json(wv_);
  j["bv"] = bv_;
  return j.dump();
}

PolicyNetwork PolicyNetwork::from_json(
  const std::string & text, const std::string & expected_catalog_hash, ObservationConfig * observation)
{
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("format") != "wmpc-policy" || j.at("version") != 1) {
      throw ValidationError("policy checkpoint has an unknown format or version");
    }
    const auto hash = j.at("catalog_hash").get<std::string>();
    if (hash != expected_catalog_hash) {
      throw ValidationError(
        "policy checkpoint belongs to catalog " + hash + ", not " + expected_catalog_hash);
    }
    PolicyNetwork net;
    net.W1_ = json_mat(j.at("W1"));
    net.b1_ = json_mat(j.at("b1"));
    net.W2_ = json_mat(j.at("W2"));
    net.b2_ = json_mat(j.at("b2"));
    net.Wp_ = json_mat(j.at("Wp"));
    net.bp_ = json_mat(j.at("bp"));
    net.wv_ = json_mat(j.at("wv"));
    net.bv_ = j.at("bv").get<double>();
    const auto h = net.W1_.rows();
    if (net.b1_.size() != h || net.W2_.rows() != h || net.W2_.cols() != h || net.b2_.size() != h ||
        net.Wp_.cols() != h || net.bp_.size() != net.Wp_.rows() || net.wv_.size() != h) {
      throw ValidationError("policy checkpoint has inconsistent layer sizes");
    }
    const auto & o = j.at("observation");
    ObservationConfig oc;
    oc.lookahead_samples = o.at("lookahead_samples").get<int>();
    oc.sample_dt = o.at("sample_dt").get<double>();
    oc.v_scale = o.at("v_scale").get<double>();
    oc.lat_scale = o.at("lat_scale").get<double>();
    oc.vel_scale = o.at("vel_scale").get<double>();
    oc.yaw_rate_scale = o.at("yaw_rate_scale").get<double>();
    oc.validate();
    if (oc.dimension() != net.input_dim()) {
      throw ValidationError("policy checkpoint input size does not match its observation layout");
    }
    if (observation != nullptr) {
      *observation = oc;
    }
    return net;
  } catch (const nlohmann::json::exception & e) {
    throw ValidationError(std::string("policy checkpoint is malformed: ") + e.what());
  }
}

Vec softmax(const Vec & logits)
{
  const Vec e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

double unit_uniform(std::mt19937_64 & rng)
{
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int select_action(const Vec & logits, ActMode mode, std::mt19937_64 & rng)
{
  if (logits.size() == 0) {
    throw ValidationError("no actions to choose from");
  }
  if (mode == ActMode::Argmax) {
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < logits.size(); ++i) {
      if (logits[i] > logits[arg]) {
        arg = i;
      }
    }
    return static_cast<int>(arg);
  }
  const Vec p = softmax(logits);
  const double u = unit_uniform(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) {
      return static_cast<int>(i);
    }
  }
  return static_cast<int>(p.size() - 1);
}

int act(const PolicyNetwork & policy, const Vec & features, ActMode mode, std::mt19937_64 & rng)
{
  return select_action(policy.forward(features).logits, mode, rng);
}

}  // namespace wmpc::agent
