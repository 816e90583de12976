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

#pragma once

#include "wmpc/common.hpp"
#include "wmpc/track.hpp"

#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <vector>

namespace wmpc::agent
{
/// Look-ahead length and the scaling constants applied before the network.
struct ObservationConfig
{
  int lookahead_samples{38};  // T_la / T_s
  double sample_dt{0.08};     // T_s (s)
  double v_scale{37.5};       // m/s
  double lat_scale{0.4};      // m
  double vel_scale{1.0};      // m/s
  double yaw_rate_scale{0.5};  // rad/s

  int dimension() const { return 3 + 2 * lookahead_samples; }
  void validate() const;
};

struct Observation
{
  double v_ego{0.0};
  double e_lat_rms{0.0};
  double e_vel_rms{0.0};
  std::vector<double> v_profile;
  std::vector<double> psidot_profile;

  /// Scaled network input [v, lat, vel, v_profile..., psidot_profile...].
  Vec features(const ObservationConfig & config) const;
};

/// Lateral and velocity deviations of the last switching interval.
class DeviationBuffer
{
public:
  explicit DeviationBuffer(int capacity = 80);

  void push(double e_lat, double e_vel);
  void clear();
  int size() const { return static_cast<int>(lat_.size()); }
  double lat_rms() const { return rms(lat_); }
  double vel_rms() const { return rms(vel_); }

private:
  int capacity_;
  std::deque<double> lat_;
  std::deque<double> vel_;
};

/// Ego speed, interval RMS deviations, and the reference speed and yaw rate
/// (kappa * v_ref) at the arc lengths a v_ref-following point reaches after
/// k * sample_dt for k = 0..lookahead_samples-1, starting from s.
Observation build_observation(
  double v_ego, double s, const track::Raceline & line, const DeviationBuffer & deviations,
  const ObservationConfig & config);

struct RewardConfig
{
  double amplitude{1.0};
  double sigma_lat{0.1};  // m
  double sigma_vel{0.5};  // m/s
  double lat_bound{0.4};  // m
  double vel_bound{1.0};  // m/s
  /// Evaluate the Gaussian on deviations divided by their bounds instead of
  /// physical units (sigma values then act on the [0, 1] scale).
  bool normalized{false};

  void validate() const;
};

/// A * exp(-(e_lat^2 / (2 sigma_lat^2) + e_vel^2 / (2 sigma_vel^2))) on the
/// deviations truncated at their upper bounds; targets are zero.
double mog_reward(double e_lat_rms, double e_vel_rms, const RewardConfig & config);

enum class ActMode { Sample, Argmax };

/// Two tanh hidden layers shared by a softmax policy head and a value head.
class PolicyNetwork
{
public:
  PolicyNetwork() = default;
  /// Orthogonal initialisation (gain sqrt(2) hidden, 0.01 policy, 1 value), zero biases.
  PolicyNetwork(int input_dim, int n_actions, std::uint64_t seed, int hidden = 64);

  struct Output
  {
    Vec logits;
    double value{0.0};
  };

  struct Cache
  {
    Vec x;
    Vec h1;
    Vec h2;
  };

  Output forward(const Vec & x, Cache * cache = nullptr) const;

  /// Accumulates d(loss)/d(parameters) into `gradient` (flattened layout)
  /// given d(loss)/d(logits) and d(loss)/d(value) for one cached input.
  void backward(const Cache & cache, const Vec & d_logits, double d_value, Vec & gradient) const;

  int input_dim() const { return static_cast<int>(W1_.cols()); }
  int hidden() const { return static_cast<int>(W1_.rows()); }
  int n_actions() const { return static_cast<int>(Wp_.rows()); }
  Eigen::Index parameter_count() const;
  Vec parameters() const;
  void set_parameters(const Vec & p);

  /// Checkpoint bound to a catalog hash; from_json refuses any other catalog.
  std::string to_json(const std::string & catalog_hash, const ObservationConfig & observation) const;
  static PolicyNetwork from_json(
    const std::string & text, const std::string & expected_catalog_hash,
    ObservationConfig * observation = nullptr);

private:
  Mat W1_, W2_, Wp_;
  Vec b1_, b2_, bp_;
  Vec wv_;
  double bv_{0.0};
};

/// Numerically stable softmax.
Vec softmax(const Vec & logits);

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
double unit_uniform(std::mt19937_64 & rng);

/// Sample draws from softmax(logits); Argmax returns the first maximum.
int select_action(const Vec & logits, ActMode mode, std::mt19937_64 & rng);

int act(const PolicyNetwork & policy, const Vec & features, ActMode mode, std::mt19937_64 & rng);

}  // namespace wmpc::agent
