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

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace wmpc::gp
{
/// Box bounds for the hyperparameters (variances, not log variances).
struct HyperBounds
{
  double lengthscale_min{0.05};
  double lengthscale_max{10.0};
  double signal_var_min{1e-3};
  double signal_var_max{1e2};
  double noise_var_min{1e-8};
  double noise_var_max{1e-1};
  double mean_abs_max{50.0};

  void validate() const;
};

/// Constant mean c and ARD squared-exponential kernel
///   k(x, x') = sf2 * exp(-0.5 * sum_d (x_d - x'_d)^2 / l_d^2),
/// packed as p = [c, log l_1..log l_d, log sf2, log sn2].
struct Hyperparameters
{
  double mean{0.0};
  Vec log_lengthscales;
  double log_signal_var{0.0};
  double log_noise_var{std::log(1e-4)};

  Vec pack() const;
  static Hyperparameters unpack(const Vec & p);
};

struct FitOptions
{
  int restarts{8};
  int max_iterations{150};
  std::uint64_t seed{0};
  bool standardize{true};
  HyperBounds bounds{};
};

struct Prediction
{
  double mean{0.0};
  double std{0.0};
};

/// Log marginal likelihood of targets y at inputs X (rows) for the packed
/// hyperparameters p; `fixed_noise` adds a per-point variance on top of
/// exp(log sn2). Writes dL/dp when `gradient` is given. Returns -inf when
/// no jitter level makes the kernel matrix factorisable.
double log_marginal_likelihood(
  const Mat & X, const Vec & y, const Vec & p, const Vec & fixed_noise, Vec * gradient = nullptr);

class GpRegressor
{
public:
  /// Maximises the log marginal likelihood over the hyperparameters from
  /// `restarts` starting points (the first one deterministic).
  static GpRegressor fit(
    const Mat & X, const Vec & y, const FitOptions & options = {}, const Vec & fixed_noise = {});

  /// Builds the posterior for given hyperparameters without optimising.
  static GpRegressor with_hyperparameters(
    const Mat & X, const Vec & y, const Hyperparameters & hyp, bool standardize = true,
    const Vec & fixed_noise = {});

  /// Latent posterior mean and standard deviation in target units.
  Prediction predict(const Vec & x) const;

  /// Same hyperparameters and target scaling, one more observation.
  GpRegressor conditioned_on(const Vec & x, double y) const;

  const Mat & inputs() const { return X_; }
  const Vec & targets() const { return y_; }
  const Hyperparameters & hyperparameters() const { return hyp_; }
  double log_marginal_likelihood() const { return lml_; }
  double jitter() const { return jitter_; }
  int dimension() const { return static_cast<int>(X_.cols()); }

  std::string to_json() const;
  static GpRegressor from_json(const std::string & text);

private:
  GpRegressor() = default;
  void factorize();

  Mat X_;
  Vec y_;            // raw targets
  Vec fixed_noise_;  // per-point extra variance in standardised units
  double y_offset_{0.0};
  double y_scale_{1.0};
  bool standardize_{true};
  Hyperparameters hyp_;
  Eigen::LLT<Mat> llt_;
  Vec alpha_;
  double jitter_{0.0};
  double lml_{0.0};
};

/// Probability of feasibility from binary labels via two GP regressions on
/// Dirichlet-transformed pseudo-counts (one per class).
class FeasibilityModel
{
public:
  struct Options
  {
    double alpha_epsilon{0.01};
    FitOptions fit{};
  };

  struct Estimate
  {
    double mean{0.0};  // probability of the feasible class
    double std{0.0};   // its uncertainty (delta method on the class latents)
  };

  static FeasibilityModel fit(const Mat & X, const std::vector<bool> & feasible, const Options & options);
  static FeasibilityModel fit(const Mat & X, const std::vector<bool> & feasible)
  {
    return fit(X, feasible, Options{});
  }

  Estimate predict(const Vec & x) const;
  /// [p(infeasible), p(feasible)], summing to one.
  std::array<double, 2> class_probabilities(const Vec & x) const;
  bool is_constant() const { return !class_models_[0].has_value(); }

private:
  FeasibilityModel() = default;

  std::array<std::optional<GpRegressor>, 2> class_models_;
  double constant_mean_{0.5};
};

}  // namespace wmpc::gp
