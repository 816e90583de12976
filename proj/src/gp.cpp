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

#include "wmpc/gp.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace wmpc::gp
{
namespace
{
constexpr double kJitterLadder[] = {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};

Mat kernel_matrix(const Mat & X, const Hyperparameters & hyp)
{
  const Eigen::Index n = X.rows();
  const Vec inv_l2 = (-2.0 * hyp.log_lengthscales).array().exp();
  const double sf2 = std::exp(hyp.log_signal_var);
  Mat K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = sf2;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double r2 = ((X.row(i) - X.row(j)).array().square() * inv_l2.transpose().array()).sum();
      K(i, j) = K(j, i) = sf2 * std::exp(-0.5 * r2);
    }
  }
  return K;
}

Vec cross_kernel(const Mat & X, const Vec & x, const Hyperparameters & hyp)
{
  const Vec inv_l2 = (-2.0 * hyp.log_lengthscales).array().exp();
  const double sf2 = std::exp(hyp.log_signal_var);
  Vec k(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double r2 = ((X.row(i).transpose() - x).array().square() * inv_l2.array()).sum();
    k[i] = sf2 * std::exp(-0.5 * r2);
  }
  return k;
}

// Factorises K with the jitter ladder; returns the jitter used or NaN.
double factorize_with_jitter(const Mat & K, Eigen::LLT<Mat> & llt)
{
  const Eigen::Index n = K.rows();
  for (double jitter : kJitterLadder) {
    llt.compute(K + jitter * Mat::Identity(n, n));
    if (llt.info() == Eigen::Success) {
      return jitter;
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

std::string jitter_attempts()
{
  std::ostringstream os;
  for (std::size_t i = 0; i < std::size(kJitterLadder); ++i) {
    os << (i ? ", " : "") << kJitterLadder[i];
  }
  return os.str();
}

struct Box
{
  Vec lower;
  Vec upper;
};

Box parameter_box(const HyperBounds & b, int dim)
{
  Box box{Vec(dim + 3), Vec(dim + 3)};
  box.lower[0] = -b.mean_abs_max;
  box.upper[0] = b.mean_abs_max;
  box.lower.segment(1, dim).setConstant(std::log(b.lengthscale_min));
  box.upper.segment(1, dim).setConstant(std::log(b.lengthscale_max));
  box.lower[dim + 1] = std::log(b.signal_var_min);
  box.upper[dim + 1] = std::log(b.signal_var_max);
  box.lower[dim + 2] = std::log(b.noise_var_min);
  box.upper[dim + 2] = std::log(b.noise_var_max);
  return box;
}

// Projected gradient ascent with Barzilai-Borwein steps and Armijo backtracking.
Vec maximize(
  const Mat & X, const Vec & y, Vec p, const Vec & noise, const Box & box, int max_iterations,
  double & best_value)
{
  auto project = [&box](const Vec & v) { return Vec(v.cwiseMax(box.lower).cwiseMin(box.upper)); };
  p = project(p);
  Vec g(p.size());
  double f = log_marginal_likelihood(X, y, p, noise, &g);
  if (!std::isfinite(f)) {
    best_value = f;
    return p;
  }
  double step = 0.1 / std::max(1.0, g.lpNorm<Eigen::Infinity>());
  Vec g_new(p.size());
  for (int it = 0; it < max_iterations; ++it) {
    Vec p_new = project(p + step * g);
    Vec d = p_new - p;
    if (d.lpNorm<Eigen::Infinity>() < 1e-10) {
      break;
    }
    double f_new = log_marginal_likelihood(X, y, p_new, noise, &g_new);
    int backtracks = 0;
    while (!(f_new >= f + 1e-4 * g.dot(d)) && backtracks < 30) {
      step *= 0.5;
      p_new = project(p + step * g);
      d = p_new - p;
      f_new = log_marginal_likelihood(X, y, p_new, noise, &g_new);
      ++backtracks;
    }
    if (!(f_new >= f + 1e-4 * g.dot(d)) || d.lpNorm<Eigen::Infinity>() < 1e-10) {
      break;
    }
    const Vec yv = g_new - g;
    const double sy = d.dot(yv);
    step = sy < 0.0 ? std::clamp(d.squaredNorm() / -sy, 1e-6, 1e3) : std::min(step * 2.0, 1e3);
    const bool small = std::abs(f_new - f) < 1e-9 * (1.0 + std::abs(f));
    p = p_new;
    f = f_new;
    g = g_new;
    if (small) {
      break;
    }
  }
  best_value = f;
  return p;
}

nlohmann::json vec_json(const Vec & v)
{
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vec json_vec(const nlohmann::json & j)
{
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void HyperBounds::validate() const
{
  if (
    !(lengthscale_min > 0.0 && lengthscale_max > lengthscale_min && signal_var_min > 0.0 &&
      signal_var_max > signal_var_min && noise_var_min > 0.0 && noise_var_max > noise_var_min &&
      mean_abs_max > 0.0)) {
    throw ValidationError("invalid GP hyperparameter bounds");
  }
}

Vec Hyperparameters::pack() const
{
  const Eigen::Index d = log_lengthscales.size();
  Vec p(d + 3);
  p[0] = mean;
  p.segment(1, d) = log_lengthscales;
  p[d + 1] = log_signal_var;
  p[d + 2] = log_noise_var;
  return p;
}

Hyperparameters Hyperparameters::unpack(const Vec & p)
{
  if (p.size() < 4) {
    throw ValidationError("packed GP hyperparameters need at least 4 entries");
  }
  const Eigen::Index d = p.size() - 3;
  Hyperparameters h;
  h.mean = p[0];
  h.log_lengthscales = p.segment(1, d);
  h.log_signal_var = p[d + 1];
  h.log_noise_var = p[d + 2];
  return h;
}

double log_marginal_likelihood(
  const Mat & X, const Vec & y, const Vec & p, const Vec & fixed_noise, Vec * gradient)
{
  const Eigen::Index n = X.rows();
  const Eigen::Index dim = X.cols();
  if (p.size() != dim + 3 || y.size() != n) {
    throw ValidationError("GP likelihood arguments have inconsistent sizes");
  }
  const Hyperparameters hyp = Hyperparameters::unpack(p);
  const Mat Kf = kernel_matrix(X, hyp);
  Mat K = Kf;
  const double sn2 = std::exp(hyp.log_noise_var);
  K.diagonal().array() += sn2;
  if (fixed_noise.size() == n) {
    K.diagonal() += fixed_noise;
  }
  Eigen::LLT<Mat> llt;
  const double jitter = factorize_with_jitter(K, llt);
  if (std::isnan(jitter)) {
    return -std::numeric_limits<double>::infinity();
  }
  const Vec r = y.array() - hyp.mean;
  const Vec alpha = llt.solve(r);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double value =
    -0.5 * r.dot(alpha) - 0.5 * log_det - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

  if (gradient != nullptr) {
    gradient->resize(p.size());
    const Mat W = alpha * alpha.transpose() - llt.solve(Mat::Identity(n, n));
    (*gradient)[0] = alpha.sum();
    for (Eigen::Index d = 0; d < dim; ++d) {
      const double inv_l2 = std::exp(-2.0 * hyp.log_lengthscales[d]);
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
          const double diff = X(i, d) - X(j, d);
          acc += W(i, j) * Kf(i, j) * diff * diff * inv_l2;
        }
      }
      (*gradient)[1 + d] = acc;  // symmetric: 2 * 0.5 * sum over i > j
    }
    (*gradient)[dim + 1] = 0.5 * (W.array() * Kf.array()).sum();
    (*gradient)[dim + 2] = 0.5 * sn2 * W.trace();
  }
  return value;
}

GpRegressor GpRegressor::with_hyperparameters(
  const Mat & X, const Vec & y, const Hyperparameters & hyp, bool standardize, const Vec & fixed_noise)
{
  if (X.rows() < 1 || X.rows() != y.size()) {
    throw ValidationError("GP needs matching, nonempty inputs and targets");
  }
  if (hyp.log_lengthscales.size() != X.cols()) {
    throw ValidationError("GP lengthscale count must match the input dimension");
  }
  if (fixed_noise.size() != 0 && fixed_noise.size() != y.size()) {
    throw ValidationError("per-point noise must have one entry per target");
  }
  if (!X.allFinite() || !y.allFinite()) {
    throw ValidationError("GP data must be finite");
  }
  GpRegressor gp;
  gp.X_ = X;
  gp.y_ = y;
  gp.fixed_noise_ = fixed_noise.size() == 0 ? Vec::Zero(y.size()) : fixed_noise;
  gp.standardize_ = standardize;
  if (standardize) {
    gp.y_offset_ = y.mean();
    const double sd = std::sqrt((y.array() - gp.y_offset_).square().mean());
    gp.y_scale_ = sd < 1e-12 ? 1.0 : sd;
  }
  gp.hyp_ = hyp;
  gp.factorize();
  return gp;
}

void GpRegressor::factorize()
{
  Mat K = kernel_matrix(X_, hyp_);
  K.diagonal().array() += std::exp(hyp_.log_noise_var);
  K.diagonal() += fixed_noise_;
  jitter_ = factorize_with_jitter(K, llt_);
  if (std::isnan(jitter_)) {
    throw RuntimeFailure(
      "GP kernel matrix is not positive definite; jitter attempts: " + jitter_attempts());
  }
  const Vec z = (y_.array() - y_offset_) / y_scale_;
  const Vec r = z.array() - hyp_.mean;
  alpha_ = llt_.solve(r);
  const double log_det = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
  lml_ = -0.5 * r.dot(alpha_) - 0.5 * log_det -
         0.5 * static_cast<double>(y_.size()) * std::log(2.0 * std::numbers::pi);
}

GpRegressor GpRegressor::fit(
  const Mat & X, const Vec & y, const FitOptions & options, const Vec & fixed_noise)
{
  if (X.rows() < 2) {
    throw ValidationError("GP fit needs at least 2 points");
  }
  if (X.rows() != y.size()) {
    throw ValidationError("GP inputs and targets differ in length");
  }
  if (options.restarts < 1) {
    throw ValidationError("GP fit needs at least one restart");
  }
  options.bounds.validate();
  const int dim = static_cast<int>(X.cols());
  double offset = 0.0;
  double scale = 1.0;
  if (options.standardize) {
    offset = y.mean();
    const double sd = std::sqrt((y.array() - offset).square().mean());
    scale = sd < 1e-12 ? 1.0 : sd;
  }
  const Vec z = (y.array() - offset) / scale;
  const Vec noise = fixed_noise.size() == 0 ? Vec::Zero(y.size()) : Vec(fixed_noise);
  const Box box = parameter_box(options.bounds, dim);

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec best_p;
  double best = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < options.restarts; ++r) {
    Vec p0(dim + 3);
    if (r == 0) {
      p0[0] = z.mean();
      p0.segment(1, dim).setConstant(std::log(0.5));
      p0[dim + 1] = 0.0;
      p0[dim + 2] = std::log(1e-4);
    } else {
      p0[0] = z.mean() + (unit(rng) - 0.5);
      for (int d = 0; d < dim; ++d) {
        p0[1 + d] = std::log(0.1) + unit(rng) * (std::log(3.0) - std::log(0.1));
      }
      p0[dim + 1] = std::log(0.1) + unit(rng) * (std::log(10.0) - std::log(0.1));
      p0[dim + 2] = std::log(1e-6) + unit(rng) * (std::log(1e-2) - std::log(1e-6));
    }
    double value = 0.0;
    Vec p = maximize(X, z, p0, noise, box, options.max_iterations, value);
    if (std::isfinite(value) && value > best) {
      best = value;
      best_p = p;
    }
  }
  if (best_p.size() == 0) {
    throw RuntimeFailure(
      "GP fit failed: no restart produced a positive-definite kernel; jitter attempts: " +
      jitter_attempts());
  }
  return with_hyperparameters(X, y, Hyperparameters::unpack(best_p), options.standardize, noise);
}

Prediction GpRegressor::predict(const Vec & x) const
{
  if (x.size() != X_.cols()) {
    throw ValidationError("GP query dimension does not match the training inputs");
  }
  const Vec k = cross_kernel(X_, x, hyp_);
  const double sf2 = std::exp(hyp_.log_signal_var);
  const double mean = hyp_.mean + k.dot(alpha_);
  const Vec v = llt_.matrixL().solve(k);
  double var = sf2 - v.squaredNorm();
  if (var < -1e-12) {
    throw RuntimeFailure("GP posterior variance is negative beyond rounding");
  }
  var = std::max(var, 0.0);
  return {y_offset_ + y_scale_ * mean, y_scale_ * std::sqrt(var)};
}

GpRegressor GpRegressor::conditioned_on(const Vec & x, double y) const
{
  if (x.size() != X_.cols()) {
    throw ValidationError("GP conditioning point has the wrong dimension");
  }
  GpRegressor gp = *this;
  gp.X_.conservativeResize(X_.rows() + 1, Eigen::NoChange);
  gp.X_.row(X_.rows()) = x.transpose();
  gp.y_.conservativeResize(y_.size() + 1);
  gp.y_[y_.size()] = y;
  gp.fixed_noise_.conservativeResize(fixed_noise_.size() + 1);
  gp.fixed_noise_[fixed_noise_.size()] = 0.0;
  gp.factorize();
  return gp;
}

std::string GpRegressor::to_json() const
{
  nlohmann::json j;
  j["format"] = "wmpc-gp";
  j["version"] = 1;
  std::vector<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < X_.rows(); ++i) {
    rows.push_back(std::vector<double>(X_.cols()));
    for (Eigen::Index d = 0; d < X_.cols(); ++d) {
      rows.back()[static_cast<std::size_t>(d)] = X_(i, d);
    }
  }
  j["inputs"] = rows;
  j["targets"] = vec_json(y_);
  j["fixed_noise"] = vec_json(fixed_noise_);
  j["standardize"] = standardize_;
  j["hyperparameters"] = vec_json(hyp_.pack());
  return j.dump();
}

GpRegressor GpRegressor::from_json(const std::string & text)
{
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception & e) {
    throw ValidationError(std::string("GP blob is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != "wmpc-gp" || j.value("version", 0) != 1) {
    throw ValidationError("GP blob has an unknown format or version");
  }
  const auto rows = j.at("inputs").get<std::vector<std::vector<double>>>();
  if (rows.empty()) {
    throw ValidationError("GP blob has no inputs");
  }
  Mat X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) {
      throw ValidationError("GP blob inputs are ragged");
    }
    for (std::size_t d = 0; d < rows[i].size(); ++d) {
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = rows[i][d];
    }
  }
  return with_hyperparameters(
    X, json_vec(j.at("targets")), Hyperparameters::unpack(json_vec(j.at("hyperparameters"))),
    j.at("standardize").get<bool>(), json_vec(j.at("fixed_noise")));
}

FeasibilityModel FeasibilityModel::fit(
  const Mat & X, const std::vector<bool> & feasible, const Options & options)
{
  if (X.rows() != static_cast<Eigen::Index>(feasible.size()) || feasible.empty()) {
    throw ValidationError("feasibility labels must match the inputs");
  }
  if (!(options.alpha_epsilon > 0.0)) {
    throw ValidationError("alpha_epsilon must be positive");
  }
  FeasibilityModel model;
  const auto n_feasible = std::count(feasible.begin(), feasible.end(), true);
  if (n_feasible == 0 || n_feasible == static_cast<long>(feasible.size())) {
    model.constant_mean_ = n_feasible == 0 ? 0.0 : 1.0;
    return model;
  }
  for (int cls = 0; cls < 2; ++cls) {
    Vec targets(X.rows());
    Vec noise(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const bool member = feasible[static_cast<std::size_t>(i)] == (cls == 1);
      const double alpha = options.alpha_epsilon + (member ? 1.0 : 0.0);
      noise[i] = std::log(1.0 / alpha + 1.0);
      targets[i] = std::log(alpha) - 0.5 * noise[i];
    }
    FitOptions fo = options.fit;
    fo.standardize = false;
    fo.seed = options.fit.seed + static_cast<std::uint64_t>(cls);
    model.class_models_[static_cast<std::size_t>(cls)] = GpRegressor::fit(X, targets, fo, noise);
  }
  return model;
}

std::array<double, 2> FeasibilityModel::class_probabilities(const Vec & x) const
{
  if (is_constant()) {
    return {1.0 - constant_mean_, constant_mean_};
  }
  const Prediction p0 = class_models_[0]->predict(x);
  const Prediction p1 = class_models_[1]->predict(x);
  // Moment-matched means of the log-normal class weights, normalised.
  const double l0 = p0.mean + 0.5 * p0.std * p0.std;
  const double l1 = p1.mean + 0.5 * p1.std * p1.std;
  const double p_feasible = 1.0 / (1.0 + std::exp(l0 - l1));
  return {1.0 - p_feasible, p_feasible};
}

FeasibilityModel::Estimate FeasibilityModel::predict(const Vec & x) const
{
  if (is_constant()) {
    return {constant_mean_, 0.5};
  }
  const Prediction p0 = class_models_[0]->predict(x);
  const Prediction p1 = class_models_[1]->predict(x);
  const double p = class_probabilities(x)[1];
  return {p, p * (1.0 - p) * std::sqrt(p0.std * p0.std + p1.std * p1.std)};
}

}  // namespace wmpc::gp
