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

#include "wmpc/mobo.hpp"

#include "wmpc/parallel.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace wmpc::mobo
{
namespace
{
constexpr int kDim = nmpc::kWeightCount;
constexpr double kDuplicateDistance = 1e-6;

double reference_lap_time(const track::Raceline & line)
{
  const auto & pts = line.points();
  double t = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    t += (pts[i + 1].s - pts[i].s) / (0.5 * (pts[i].v_ref + pts[i + 1].v_ref));
  }
  if (line.closed()) {
    const double gap = line.end_s() - pts.back().s;
    t += gap / (0.5 * (pts.back().v_ref + pts.front().v_ref));
  }
  return t;
}

WeightVector clamp_unit(const WeightVector & u)
{
  return u.cwiseMax(0.0).cwiseMin(1.0);
}

// Nelder-Mead on -f over the unit cube, with vertices projected onto the cube.
WeightVector nelder_mead_maximize(
  const std::function<double(const WeightVector &)> & f, const WeightVector & start, int iterations,
  double & best_value)
{
  constexpr int n = kDim;
  std::array<WeightVector, n + 1> simplex;
  std::array<double, n + 1> value;
  simplex[0] = clamp_unit(start);
  for (int i = 0; i < n; ++i) {
    WeightVector v = simplex[0];
    v[i] += (v[i] < 0.5) ? 0.05 : -0.05;
    simplex[static_cast<std::size_t>(i + 1)] = v;
  }
  for (std::size_t i = 0; i <= n; ++i) {
    value[i] = -f(simplex[i]);
  }
  std::array<std::size_t, n + 1> order;
  for (int it = 0; it < iterations; ++it) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return value[a] < value[b];
    });
    const std::size_t best = order[0];
    const std::size_t worst = order[n];
    const std::size_t second = order[n - 1];
    WeightVector centroid = WeightVector::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      centroid += simplex[order[i]];
    }
    centroid /= n;

    const WeightVector reflected = clamp_unit(centroid + (centroid - simplex[worst]));
    const double fr = -f(reflected);
    if (fr < value[best]) {
      const WeightVector expanded = clamp_unit(centroid + 2.0 * (centroid - simplex[worst]));
      const double fe = -f(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        value[worst] = fe;
      } else {
        simplex[worst] = reflected;
        value[worst] = fr;
      }
      continue;
    }
    if (fr < value[second]) {
      simplex[worst] = reflected;
      value[worst] = fr;
      continue;
    }
    const bool outside = fr < value[worst];
    const WeightVector contracted = outside ? clamp_unit(centroid + 0.5 * (reflected - centroid))
                                            : clamp_unit(centroid + 0.5 * (simplex[worst] - centroid));
    const double fc = -f(contracted);
    if (fc < std::min(fr, value[worst])) {
      simplex[worst] = contracted;
      value[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i != best) {
        simplex[i] = clamp_unit(simplex[best] + 0.5 * (simplex[i] - simplex[best]));
        value[i] = -f(simplex[i]);
      }
    }
  }
  std::size_t arg = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    if (value[i] < value[arg]) {
      arg = i;
    }
  }
  best_value = -value[arg];
  return simplex[arg];
}

double min_distance(const WeightVector & u, const std::vector<WeightVector> & others)
{
  double d = std::numeric_limits<double>::infinity();
  for (const auto & o : others) {
    d = std::min(d, (u - o).norm());
  }
  return d;
}

Front group_points(const TuningDataset & dataset, int group, std::size_t count)
{
  Front pts;
  for (std::size_t i = 0; i < count; ++i) {
    const auto & r = dataset.records[i];
    if (r.feasible) {
      pts.push_back(r.objectives[static_cast<std::size_t>(group)].point());
    }
  }
  return pts;
}

std::array<std::vector<double>, 2> hypervolume_traces(
  const TuningDataset & dataset, const std::array<Point2, 2> & reference)
{
  std::array<std::vector<double>, 2> traces;
  for (int g = 0; g < 2; ++g) {
    Front running;
    for (const auto & r : dataset.records) {
      if (r.feasible) {
        running.push_back(r.objectives[static_cast<std::size_t>(g)].point());
        running = nondominated(running);
      }
      traces[static_cast<std::size_t>(g)].push_back(hypervolume(running, reference[static_cast<std::size_t>(g)]));
    }
  }
  return traces;
}

std::array<Point2, 2> anchored_reference(
  const TuningDataset & dataset, const TuningConfig & config, bool announce)
{
  std::array<Point2, 2> reference = config.acquisition.reference;
  const auto count = std::min<std::size_t>(dataset.records.size(), static_cast<std::size_t>(config.n_init));
  for (int g = 0; g < 2; ++g) {
    const Front pts = group_points(dataset, g, count);
    auto & r = reference[static_cast<std::size_t>(g)];
    const Point2 configured = r;
    for (const auto & p : pts) {
      for (int k = 0; k < 2; ++k) {
        r[static_cast<std::size_t>(k)] =
          std::max(r[static_cast<std::size_t>(k)], config.reference_margin * p[static_cast<std::size_t>(k)]);
      }
    }
    if (announce && r != configured) {
      std::ostringstream msg;
      msg << "hypervolume reference for group " << track::to_string(static_cast<SegmentLabel>(g))
          << " re-anchored from (" << configured[0] << ", " << configured[1] << ") to (" << r[0]
          << ", " << r[1] << ") to cover every feasible initial observation";
      warn(msg.str());
    }
  }
  return reference;
}

std::vector<TuningRecord> evaluate_batch(
  const std::vector<WeightVector> & candidates, const track::Raceline & line,
  const SegmentGroups & groups, const TuningConfig & config, int batch, int active)
{
  std::vector<TuningRecord> out(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t i) {
    TuningRecord rec;
    rec.u = candidates[i];
    rec.theta = config.bounds.denormalize(rec.u);
    const EvaluationResult res = evaluate_weights(rec.theta, line, groups, config.evaluation);
    rec.objectives = res.objectives;
    rec.feasible = res.feasible;
    rec.batch = batch;
    rec.active = active;
    out[i] = rec;
  });
  return out;
}

std::string engine_state(const std::mt19937_64 & engine)
{
  std::ostringstream os;
  os << engine;
  return os.str();
}

void restore_engine(std::mt19937_64 & engine, const std::string & state)
{
  std::istringstream is(state);
  is >> engine;
  if (!is) {
    throw ValidationError("resume file holds an unreadable random engine state");
  }
}

TuningResult finish(TuningDataset dataset, const std::array<Point2, 2> & reference)
{
  TuningResult result;
  result.hv_trace = hypervolume_traces(dataset, reference);
  result.fronts = group_fronts(dataset);
  result.reference = reference;
  result.dataset = std::move(dataset);
  return result;
}

nlohmann::json weight_json(const WeightVector & w)
{
  return nlohmann::json(std::vector<double>(w.data(), w.data() + w.size()));
}

WeightVector json_weight(const nlohmann::json & j)
{
  const auto v = j.get<std::vector<double>>();
  if (v.size() != static_cast<std::size_t>(kDim)) {
    throw ValidationError("resume file holds a weight vector of the wrong length");
  }
  WeightVector w;
  for (int i = 0; i < kDim; ++i) {
    w[i] = v[static_cast<std::size_t>(i)];
  }
  return w;
}

}  // namespace

void EvaluationConfig::validate() const
{
  mpc.validate();
  timing.validate();
  if (!(e_lat_max > 0.0)) {
    throw ValidationError("e_lat_max must be positive");
  }
  if (!(time_limit_factor > 1.0)) {
    throw ValidationError("time_limit_factor must exceed 1");
  }
}

void SearchOptions::validate() const
{
  if (probes < 1 || local_starts < 0 || local_starts > probes || local_iterations < 0) {
    throw ValidationError("acquisition search needs probes >= 1 and 0 <= local_starts <= probes");
  }
}

void TuningConfig::validate() const
{
  if (n_init < 2 || n_bo < 0 || batch < 1) {
    throw ValidationError("tuning needs n_init >= 2, n_bo >= 0 and batch >= 1");
  }
  bounds.validate();
  acquisition.validate();
  evaluation.validate();
  gp.bounds.validate();
  if (gp.restarts < 1 || gp.max_iterations < 1) {
    throw ValidationError("GP fitting needs at least one restart and one iteration");
  }
  if (!(alpha_epsilon > 0.0)) {
    throw ValidationError("alpha_epsilon must be positive");
  }
  search.validate();
  if (!(segmentation.kappa_threshold > 0.0) || segmentation.min_dwell_time < 0.0) {
    throw ValidationError("segmentation needs a positive curvature threshold");
  }
  if (!(reference_margin >= 1.0)) {
    throw ValidationError("reference_margin must be at least 1");
  }
}

EvaluationResult evaluate_weights(
  const nmpc::WeightSet & theta, const track::Raceline & line, const SegmentGroups & groups,
  const EvaluationConfig & config)
{
  config.validate();
  sim::ClosedLoop loop(line, config.mpc, config.timing);
  loop.reset(sim::state_on_line(line, line.start_s(), config.mpc.vehicle));
  loop.set_weights(theta);

  const double time_limit = config.time_limit_factor * reference_lap_time(line);
  const double lap = line.closed() ? line.length() : line.end_s() - line.start_s();

  EvaluationResult result;
  std::array<double, 2> max_lat{0.0, 0.0};
  std::array<double, 2> sq_vel{0.0, 0.0};
  std::array<int, 2> count{0, 0};
  double sq_all = 0.0;

  while (loop.distance() < lap) {
    if (loop.time() > time_limit) {
      result.cause = "lap time limit exceeded";
      break;
    }
    const sim::StepRecord rec = loop.step();
    if (rec.terminated) {
      result.cause = (rec.solved && rec.status == nmpc::SolveStatus::Infeasible)
                       ? "MPC infeasible"
                       : "non-finite plant state";
      break;
    }
    ++result.steps;
    const auto g = static_cast<std::size_t>(label_at(groups, rec.s));
    max_lat[g] = std::max(max_lat[g], std::abs(rec.e_lat));
    sq_vel[g] += rec.e_vel * rec.e_vel;
    sq_all += rec.e_vel * rec.e_vel;
    ++count[g];
    result.max_abs_e_lat = std::max(result.max_abs_e_lat, std::abs(rec.e_lat));
    if (rec.clamped) {
      result.cause = "hard-bound clamp activated";
      break;
    }
    if (std::abs(rec.e_lat) > config.e_lat_max) {
      result.cause = "lateral deviation above e_lat_max";
      break;
    }
    if (!line.closed() && rec.s >= line.end_s()) {
      break;
    }
  }

  result.feasible = result.cause.empty();
  result.rms_e_vel = result.steps > 0 ? std::sqrt(sq_all / result.steps) : 0.0;
  for (std::size_t g = 0; g < 2; ++g) {
    auto & obj = result.objectives[g];
    obj.group = static_cast<SegmentLabel>(g);
    obj.j0 = max_lat[g];
    obj.j1 = count[g] > 0 ? std::sqrt(sq_vel[g] / count[g]) : 0.0;
    obj.feasible = result.feasible;
  }
  return result;
}

Mat scrambled_halton(int count, int dim, std::uint64_t seed, int offset)
{
  static constexpr std::array<int, 16> primes{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
  if (dim < 1 || dim > static_cast<int>(primes.size()) || count < 0 || offset < 0) {
    throw ValidationError("scrambled Halton supports 1 to 16 dimensions");
  }
  constexpr int kDigits = 24;
  std::mt19937_64 rng(seed);
  // perms[d][k] permutes the k-th digit of dimension d.
  std::vector<std::vector<std::vector<int>>> perms(static_cast<std::size_t>(dim));
  for (int d = 0; d < dim; ++d) {
    const int base = primes[static_cast<std::size_t>(d)];
    for (int k = 0; k < kDigits; ++k) {
      std::vector<int> p(static_cast<std::size_t>(base));
      std::iota(p.begin(), p.end(), 0);
      for (int i = base - 1; i > 0; --i) {
        const auto j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
        std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
      }
      perms[static_cast<std::size_t>(d)].push_back(std::move(p));
    }
  }
  Mat out(count, dim);
  for (int i = 0; i < count; ++i) {
    for (int d = 0; d < dim; ++d) {
      const int base = primes[static_cast<std::size_t>(d)];
      long long index = static_cast<long long>(i) + offset;
      double value = 0.0;
      double scale = 1.0 / base;
      for (int k = 0; k < kDigits && scale > 1e-17; ++k) {
        const int digit = static_cast<int>(index % base);
        index /= base;
        value += perms[static_cast<std::size_t>(d)][static_cast<std::size_t>(k)][static_cast<std::size_t>(digit)] * scale;
        scale /= base;
      }
      out(i, d) = std::min(value, std::nextafter(1.0, 0.0));
    }
  }
  return out;
}

std::vector<WeightVector> propose_batch(
  const GroupModels & models, const Front & front, const Point2 & reference,
  const AcquisitionConfig & config, const SearchOptions & search, int batch,
  const std::vector<WeightVector> & existing, std::uint64_t seed)
{
  if (batch < 1) {
    throw ValidationError("batch size must be positive");
  }
  search.validate();
  std::mt19937_64 rng(seed);
  const Mat probes = scrambled_halton(search.probes, kDim, rng());
  std::normal_distribution<double> jitter(0.0, 1e-3);

  GroupModels current = models;
  Front current_front = nondominated(front);
  std::vector<WeightVector> taken = existing;
  std::vector<WeightVector> picks;

  for (int b = 0; b < batch; ++b) {
    const auto acq = [&](const WeightVector & u) {
      return acquisition(current, current_front, reference, config, Vec(u));
    };
    std::vector<std::pair<double, int>> scored(static_cast<std::size_t>(probes.rows()));
    for (Eigen::Index i = 0; i < probes.rows(); ++i) {
      const WeightVector u = probes.row(i).transpose();
      scored[static_cast<std::size_t>(i)] = {acq(u), static_cast<int>(i)};
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto & a, const auto & b) {
      return a.first > b.first;
    });
    WeightVector best = probes.row(scored.front().second).transpose();
    double best_value = scored.front().first;
    for (int s = 0; s < search.local_starts; ++s) {
      const WeightVector start = probes.row(scored[static_cast<std::size_t>(s)].second).transpose();
      double value = 0.0;
      const WeightVector local = nelder_mead_maximize(acq, start, search.local_iterations, value);
      if (value > best_value) {
        best_value = value;
        best = local;
      }
    }

    if (min_distance(best, taken) < kDuplicateDistance) {
      WeightVector moved = best;
      for (int d = 0; d < kDim; ++d) {
        moved[d] += jitter(rng);
      }
      moved = clamp_unit(moved);
      if (min_distance(moved, taken) < kDuplicateDistance) {
        warn("acquisition maximiser returned a duplicate candidate; accepting it");
      }
      best = moved;
    }
    picks.push_back(best);
    taken.push_back(best);

    if (b + 1 < batch) {
      const Vec x = best;
      const double m0 = current.j0.predict(x).mean;
      const double m1 = current.j1.predict(x).mean;
      current.j0 = current.j0.conditioned_on(x, m0);
      current.j1 = current.j1.conditioned_on(x, m1);
      current_front.push_back({m0, m1});
      current_front = nondominated(current_front);
    }
  }
  return picks;
}

std::array<std::vector<std::size_t>, 2> group_fronts(const TuningDataset & dataset)
{
  std::array<std::vector<std::size_t>, 2> fronts;
  for (int g = 0; g < 2; ++g) {
    std::vector<std::size_t> ids;
    Front pts;
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
      if (dataset.records[i].feasible) {
        ids.push_back(i);
        pts.push_back(dataset.records[i].objectives[static_cast<std::size_t>(g)].point());
      }
    }
    std::vector<std::size_t> keep;
    for (std::size_t k : nondominated_indices(pts)) {
      keep.push_back(ids[k]);
    }
    std::stable_sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) {
      return dataset.records[a].objectives[static_cast<std::size_t>(g)].j0 <
             dataset.records[b].objectives[static_cast<std::size_t>(g)].j0;
    });
    fronts[static_cast<std::size_t>(g)] = std::move(keep);
  }
  return fronts;
}

TuningResult run_tuning(
  const track::Raceline & line, const TuningConfig & config, const TuningObserver & observer,
  const TuningDataset * resume)
{
  config.validate();
  const SegmentGroups groups = track::segment_by_curvature(line, config.segmentation);
  std::mt19937_64 engine(config.seed ^ 0x9e3779b97f4a7c15ULL);

  TuningDataset dataset;
  if (resume != nullptr) {
    dataset = *resume;
    if (static_cast<int>(dataset.records.size()) < config.n_init) {
      throw ValidationError("resume file ends inside the initial design");
    }
    restore_engine(engine, dataset.rng_state);
  } else {
    const Mat design = scrambled_halton(config.n_init, kDim, config.seed);
    std::vector<WeightVector> candidates;
    for (int i = 0; i < config.n_init; ++i) {
      candidates.push_back(design.row(i).transpose());
    }
    dataset.records = evaluate_batch(candidates, line, groups, config, 0, -1);
    dataset.rng_state = engine_state(engine);
  }

  const auto n_feasible = std::count_if(
    dataset.records.begin(), dataset.records.begin() + config.n_init,
    [](const TuningRecord & r) { return r.feasible; });
  if (n_feasible == 0) {
    throw RuntimeFailure(
      "no feasible weight set among the " + std::to_string(config.n_init) +
      " initial samples; widen the bounds or relax e_lat_max");
  }
  const std::array<Point2, 2> reference = anchored_reference(dataset, config, resume == nullptr);
  if (resume == nullptr && observer) {
    observer(finish(dataset, reference));
  }

  const int total_batches = (config.n_bo + config.batch - 1) / config.batch;
  while (dataset.iteration < total_batches) {
    const int k = dataset.iteration;
    const int active = k % 2;
    const int size = std::min(config.batch, config.n_bo - k * config.batch);
    const std::uint64_t batch_seed = engine();

    Mat X(static_cast<Eigen::Index>(dataset.records.size()), kDim);
    std::vector<bool> labels;
    std::vector<WeightVector> existing;
    std::vector<std::size_t> feasible_ids;
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
      X.row(static_cast<Eigen::Index>(i)) = dataset.records[i].u.transpose();
      labels.push_back(dataset.records[i].feasible);
      existing.push_back(dataset.records[i].u);
      if (dataset.records[i].feasible) {
        feasible_ids.push_back(i);
      }
    }

    std::vector<WeightVector> candidates;
    if (feasible_ids.size() < 2) {
      warn("fewer than two feasible points; drawing the batch uniformly");
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::mt19937_64 rng(batch_seed);
      for (int b = 0; b < size; ++b) {
        WeightVector u;
        for (int d = 0; d < kDim; ++d) {
          u[d] = unit(rng);
        }
        candidates.push_back(u);
      }
    } else {
      gp::FeasibilityModel::Options fo;
      fo.alpha_epsilon = config.alpha_epsilon;
      fo.fit = config.gp;
      fo.fit.seed = batch_seed + 11;
      const gp::FeasibilityModel feasibility = gp::FeasibilityModel::fit(X, labels, fo);

      Mat Xf(static_cast<Eigen::Index>(feasible_ids.size()), kDim);
      Vec y0(Xf.rows());
      Vec y1(Xf.rows());
      Front front;
      for (std::size_t r = 0; r < feasible_ids.size(); ++r) {
        const auto & rec = dataset.records[feasible_ids[r]];
        const auto & obj = rec.objectives[static_cast<std::size_t>(active)];
        Xf.row(static_cast<Eigen::Index>(r)) = rec.u.transpose();
        y0[static_cast<Eigen::Index>(r)] = obj.j0;
        y1[static_cast<Eigen::Index>(r)] = obj.j1;
        front.push_back(obj.point());
      }
      gp::FitOptions go = config.gp;
      go.seed = batch_seed + 1;
      gp::GpRegressor m0 = gp::GpRegressor::fit(Xf, y0, go);
      go.seed = batch_seed + 2;
      gp::GpRegressor m1 = gp::GpRegressor::fit(Xf, y1, go);
      const GroupModels models{std::move(m0), std::move(m1), &feasibility};
      candidates = propose_batch(
        models, nondominated(front), reference[static_cast<std::size_t>(active)], config.acquisition,
        config.search, size, existing, batch_seed + 3);
    }

    const auto records = evaluate_batch(candidates, line, groups, config, k + 1, active);
    dataset.records.insert(dataset.records.end(), records.begin(), records.end());
    dataset.iteration = k + 1;
    dataset.rng_state = engine_state(engine);
    if (observer) {
      observer(finish(dataset, reference));
    }
  }
  return finish(std::move(dataset), reference);
}

TuningResult random_search(
  const track::Raceline & line, const TuningConfig & config, const std::array<Point2, 2> & reference)
{
  config.validate();
  const SegmentGroups groups = track::segment_by_curvature(line, config.segmentation);
  std::mt19937_64 rng(config.seed ^ 0xd1b54a32d192ed03ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int total = config.n_init + config.n_bo;
  std::vector<WeightVector> candidates;
  for (int i = 0; i < total; ++i) {
    WeightVector u;
    for (int d = 0; d < kDim; ++d) {
      u[d] = unit(rng);
    }
    candidates.push_back(u);
  }
  TuningDataset dataset;
  dataset.records = evaluate_batch(candidates, line, groups, config, 0, -1);
  for (int i = 0; i < total; ++i) {
    const int batch = i < config.n_init ? 0 : 1 + (i - config.n_init) / config.batch;
    dataset.records[static_cast<std::size_t>(i)].batch = batch;
  }
  dataset.iteration = (config.n_bo + config.batch - 1) / config.batch;
  dataset.rng_state = engine_state(rng);
  return finish(std::move(dataset), reference);
}

void write_tuning_log(const TuningResult & result, std::ostream & out)
{
  out << "iter,group";
  for (int i = 0; i < kDim; ++i) {
    out << ",theta" << i;
  }
  out << ",j0,j1,feasible,hv_straight,hv_curve\n";
  out << std::setprecision(12);
  const auto & records = result.dataset.records;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto & r = records[i];
    const WeightVector w = r.theta.vector();
    for (int g = 0; g < 2; ++g) {
      const auto & obj = r.objectives[static_cast<std::size_t>(g)];
      out << i << ',' << track::to_string(static_cast<SegmentLabel>(g));
      for (int d = 0; d < kDim; ++d) {
        out << ',' << w[d];
      }
      out << ',' << obj.j0 << ',' << obj.j1 << ',' << (r.feasible ? 1 : 0) << ','
          << result.hv_trace[0][i] << ',' << result.hv_trace[1][i] << '\n';
    }
  }
}

std::string dataset_to_json(const TuningDataset & dataset, const std::string & config_hash)
{
  nlohmann::json j;
  j["format"] = "wmpc-tuning";
  j["version"] = 1;
  j["config_hash"] = config_hash;
  j["iteration"] = dataset.iteration;
  j["rng_state"] = dataset.rng_state;
  nlohmann::json records = nlohmann::json::array();
  for (const auto & r : dataset.records) {
    nlohmann::json rec;
    rec["theta"] = weight_json(r.theta.vector());
    rec["u"] = weight_json(r.u);
    rec["feasible"] = r.feasible;
    rec["batch"] = r.batch;
    rec["active"] = r.active;
    nlohmann::json objs = nlohmann::json::array();
    for (const auto & o : r.objectives) {
      objs.push_back({{"j0", o.j0}, {"j1", o.j1}});
    }
    rec["objectives"] = objs;
    records.push_back(rec);
  }
  j["records"] = records;
  return j.dump(1);
}

TuningDataset dataset_from_json(const std::string & text, const std::string & config_hash)
{
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception & e) {
    throw ValidationError(std::string("resume file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != "wmpc-tuning" || j.at("version") != 1) {
      throw ValidationError("resume file has an unknown format or version");
    }
    if (j.at("config_hash").get<std::string>() != config_hash) {
      throw ValidationError("resume file was written for a different configuration");
    }
    TuningDataset dataset;
    dataset.iteration = j.at("iteration").get<int>();
    dataset.rng_state = j.at("rng_state").get<std::string>();
    for (const auto & rec : j.at("records")) {
      TuningRecord r;
      r.theta = nmpc::WeightSet::from_vector(json_weight(rec.at("theta")));
      r.u = json_weight(rec.at("u"));
      r.feasible = rec.at("feasible").get<bool>();
      r.batch = rec.at("batch").get<int>();
      r.active = rec.at("active").get<int>();
      const auto & objs = rec.at("objectives");
      if (objs.size() != 2) {
        throw ValidationError("resume record needs two objective vectors");
      }
      for (std::size_t g = 0; g < 2; ++g) {
        r.objectives[g].j0 = objs[g].at("j0").get<double>();
        r.objectives[g].j1 = objs[g].at("j1").get<double>();
        r.objectives[g].feasible = r.feasible;
        r.objectives[g].group = static_cast<SegmentLabel>(g);
      }
      dataset.records.push_back(r);
    }
    return dataset;
  } catch (const nlohmann::json::exception & e) {
    throw ValidationError(std::string("resume file is malformed: ") + e.what());
  }
}

}  // namespace wmpc::mobo
