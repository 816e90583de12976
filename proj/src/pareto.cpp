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

#include "wmpc/pareto.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <set>

namespace wmpc::pareto
{
namespace
{
double unit_draw(std::mt19937_64 & rng)
{
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Index drawn with probability proportional to the weights.
std::size_t weighted_draw(const std::vector<double> & weights, std::mt19937_64 & rng)
{
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) {
    return static_cast<std::size_t>(rng() % weights.size());
  }
  const double target = unit_draw(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (target < acc) {
      return i;
    }
  }
  return weights.size() - 1;
}

KMeansResult lloyd(const Mat & points, int k, std::mt19937_64 & rng, int max_iterations)
{
  const auto n = static_cast<std::size_t>(points.rows());
  KMeansResult r;
  r.centroids.resize(k, points.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t first = static_cast<std::size_t>(rng() % n);
  r.centroids.row(0) = points.row(static_cast<Eigen::Index>(first));
  for (int c = 1; c < k; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(static_cast<Eigen::Index>(i)) - r.centroids.row(c - 1)).squaredNorm());
    }
    r.centroids.row(c) = points.row(static_cast<Eigen::Index>(weighted_draw(d2, rng)));
  }

  r.assignment.assign(n, -1);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (points.row(static_cast<Eigen::Index>(i)) - r.centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (r.assignment[i] != best) {
        r.assignment[i] = best;
        changed = true;
      }
    }
    Mat sums = Mat::Zero(k, points.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(r.assignment[i]) += points.row(static_cast<Eigen::Index>(i));
      ++counts[static_cast<std::size_t>(r.assignment[i])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        r.centroids.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
        continue;
      }
      // Empty cluster: move it to the point farthest from its centroid.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d =
          (points.row(static_cast<Eigen::Index>(i)) - r.centroids.row(r.assignment[i])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      r.centroids.row(c) = points.row(static_cast<Eigen::Index>(far));
      changed = true;
    }
    if (!changed) {
      break;
    }
  }
  r.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r.inertia += (points.row(static_cast<Eigen::Index>(i)) - r.centroids.row(r.assignment[i])).squaredNorm();
  }
  return r;
}

std::string format_double(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int provenance_rank(Provenance p)
{
  switch (p) {
    case Provenance::Straight:
      return 0;
    case Provenance::Both:
      return 1;
    case Provenance::Curve:
      return 2;
  }
  return 3;
}

}  // namespace

const char * to_string(Provenance provenance)
{
  switch (provenance) {
    case Provenance::Straight:
      return "straight";
    case Provenance::Curve:
      return "curve";
    case Provenance::Both:
      return "both";
  }
  return "unknown";
}

Provenance provenance_from_string(const std::string & text)
{
  if (text == "straight") {
    return Provenance::Straight;
  }
  if (text == "curve") {
    return Provenance::Curve;
  }
  if (text == "both") {
    return Provenance::Both;
  }
  throw ValidationError("unknown catalog group '" + text + "'");
}

std::vector<FrontEntry> merge_fronts(
  const std::vector<FrontEntry> & straight, const std::vector<FrontEntry> & curve)
{
  std::vector<FrontEntry> merged;
  for (const auto & e : straight) {
    FrontEntry copy = e;
    copy.provenance = Provenance::Straight;
    merged.push_back(copy);
  }
  const std::size_t n_straight = merged.size();
  for (const auto & e : curve) {
    bool shared = false;
    for (std::size_t i = 0; i < n_straight; ++i) {
      if (merged[i].theta == e.theta) {
        merged[i].provenance = Provenance::Both;
        shared = true;
        break;
      }
    }
    if (!shared) {
      FrontEntry copy = e;
      copy.provenance = Provenance::Curve;
      merged.push_back(copy);
    }
  }
  return merged;
}

std::vector<FrontEntry> merge_fronts(const mobo::TuningResult & result)
{
  std::array<std::vector<FrontEntry>, 2> fronts;
  for (std::size_t g = 0; g < 2; ++g) {
    for (std::size_t idx : result.fronts[g]) {
      const auto & rec = result.dataset.records[idx];
      if (!rec.feasible) {
        throw ValidationError("front holds an infeasible record");
      }
      fronts[g].push_back(
        {rec.theta, rec.objectives[g].point(), g == 0 ? Provenance::Straight : Provenance::Curve});
    }
  }
  return merge_fronts(fronts[0], fronts[1]);
}

KMeansResult kmeans(const Mat & points, int k, int restarts, std::uint64_t seed, int max_iterations)
{
  if (k < 1 || k > points.rows() || restarts < 1) {
    throw ValidationError("k-means needs 1 <= k <= number of points and at least one restart");
  }
  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    KMeansResult trial = lloyd(points, k, rng, max_iterations);
    if (trial.inertia < best.inertia) {
      best = std::move(trial);
    }
  }
  return best;
}

Catalog::Catalog(std::vector<CatalogEntry> entries) : entries_(std::move(entries))
{
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    entries_[i].index = static_cast<int>(i);
  }
}

const nmpc::WeightSet & Catalog::weights(int index) const
{
  if (index < 0 || index >= size()) {
    throw ValidationError("action index " + std::to_string(index) + " outside the catalog");
  }
  return entries_[static_cast<std::size_t>(index)].theta;
}

int Catalog::find(const nmpc::WeightSet & theta) const
{
  for (const auto & e : entries_) {
    if (e.theta == theta) {
      return e.index;
    }
  }
  return -1;
}

std::string Catalog::hash() const
{
  std::string canonical;
  for (const auto & e : entries_) {
    canonical += std::to_string(e.index);
    const nmpc::WeightVector w = e.theta.vector();
    for (int d = 0; d < w.size(); ++d) {
      canonical += ',' + format_double(w[d]);
    }
    canonical += ';';
  }
  return hex64(fnv1a(canonical));
}

std::string Catalog::to_json(const std::string & provenance_json) const
{
  nlohmann::json j;
  j["format"] = "wmpc-catalog";
  j["version"] = 1;
  j["catalog_hash"] = hash();
  j["provenance"] = nlohmann::json::parse(provenance_json);
  nlohmann::json arr = nlohmann::json::array();
  for (const auto & e : entries_) {
    const nmpc::WeightVector w = e.theta.vector();
    arr.push_back(
      {{"index", e.index},
       {"theta", std::vector<double>(w.data(), w.data() + w.size())},
       {"j0", e.j0},
       {"j1", e.j1},
       {"group", to_string(e.group)}});
  }
  j["entries"] = arr;
  return j.dump(1);
}

Catalog Catalog::from_json(const std::string & text)
{
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("format") != "wmpc-catalog" || j.at("version") != 1) {
      throw ValidationError("catalog file has an unknown format or version");
    }
    std::vector<CatalogEntry> entries;
    for (const auto & e : j.at("entries")) {
      CatalogEntry c;
      c.index = e.at("index").get<int>();
      const auto theta = e.at("theta").get<std::vector<double>>();
      if (theta.size() != static_cast<std::size_t>(nmpc::kWeightCount)) {
        throw ValidationError("catalog entry needs 7 weights");
      }
      nmpc::WeightVector w;
      for (int d = 0; d < nmpc::kWeightCount; ++d) {
        w[d] = theta[static_cast<std::size_t>(d)];
        if (!(w[d] > 0.0) || !std::isfinite(w[d])) {
          throw ValidationError("catalog weights must be positive and finite");
        }
      }
      c.theta = nmpc::WeightSet::from_vector(w);
      c.j0 = e.at("j0").get<double>();
      c.j1 = e.at("j1").get<double>();
      c.group = provenance_from_string(e.at("group").get<std::string>());
      if (c.index != static_cast<int>(entries.size())) {
        throw ValidationError("catalog indices must run 0..n-1 in order");
      }
      entries.push_back(c);
    }
    Catalog catalog(std::move(entries));
    if (j.contains("catalog_hash") && j.at("catalog_hash").get<std::string>() != catalog.hash()) {
      throw ValidationError("catalog hash does not match its entries");
    }
    return catalog;
  } catch (const nlohmann::json::exception & e) {
    throw ValidationError(std::string("catalog file is malformed: ") + e.what());
  }
}

Catalog reduce(const std::vector<FrontEntry> & front, const ReduceOptions & options)
{
  if (options.n_objectives != 2) {
    throw ValidationError("catalog reduction supports two objectives");
  }
  if (options.n_actions < options.n_objectives) {
    throw ValidationError("catalog size must be at least the number of objectives");
  }
  if (options.restarts < 1) {
    throw ValidationError("k-means needs at least one restart");
  }
  if (front.empty()) {
    throw ValidationError("cannot reduce an empty front");
  }
  for (const auto & e : front) {
    if (!std::isfinite(e.point[0]) || !std::isfinite(e.point[1])) {
      throw ValidationError("front objective vectors must be finite");
    }
  }

  const auto n = front.size();
  std::vector<std::size_t> chosen;
  if (n < static_cast<std::size_t>(options.n_actions)) {
    warn(
      "front has " + std::to_string(n) + " entries, fewer than the catalog size " +
      std::to_string(options.n_actions) + "; keeping all of them");
    chosen.resize(n);
    std::iota(chosen.begin(), chosen.end(), std::size_t{0});
  } else {
    Mat P(static_cast<Eigen::Index>(n), 2);
    for (std::size_t i = 0; i < n; ++i) {
      P(static_cast<Eigen::Index>(i), 0) = front[i].point[0];
      P(static_cast<Eigen::Index>(i), 1) = front[i].point[1];
    }
    for (int d = 0; d < 2; ++d) {
      const double lo = P.col(d).minCoeff();
      const double span = P.col(d).maxCoeff() - lo;
      P.col(d) = span > 0.0 ? Vec((P.col(d).array() - lo) / span) : Vec::Zero(P.rows());
    }

    std::set<std::size_t> selected;
    for (int d = 0; d < 2; ++d) {
      Eigen::Index arg = 0;
      P.col(d).minCoeff(&arg);
      selected.insert(static_cast<std::size_t>(arg));
    }
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < n; ++i) {
      if (!selected.count(i)) {
        rest.push_back(i);
      }
    }
    const int k = options.n_actions - static_cast<int>(selected.size());
    if (k > 0) {
      Mat R(static_cast<Eigen::Index>(rest.size()), 2);
      for (std::size_t r = 0; r < rest.size(); ++r) {
        R.row(static_cast<Eigen::Index>(r)) = P.row(static_cast<Eigen::Index>(rest[r]));
      }
      const KMeansResult km = kmeans(R, k, options.restarts, options.seed);
      // Medoid of each cluster, then the nearest unused member while short.
      std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(k));
      for (std::size_t r = 0; r < rest.size(); ++r) {
        members[static_cast<std::size_t>(km.assignment[r])].push_back(r);
      }
      const auto nearest_unused = [&](int c) -> std::optional<std::size_t> {
        std::optional<std::size_t> best;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t r : members[static_cast<std::size_t>(c)]) {
          if (selected.count(rest[r])) {
            continue;
          }
          const double d = (R.row(static_cast<Eigen::Index>(r)) - km.centroids.row(c)).squaredNorm();
          if (d < best_d) {
            best_d = d;
            best = rest[r];
          }
        }
        return best;
      };
      for (int c = 0; c < k; ++c) {
        if (auto m = nearest_unused(c)) {
          selected.insert(*m);
        }
      }
      std::vector<int> by_size(static_cast<std::size_t>(k));
      std::iota(by_size.begin(), by_size.end(), 0);
      std::stable_sort(by_size.begin(), by_size.end(), [&](int a, int b) {
        return members[static_cast<std::size_t>(a)].size() > members[static_cast<std::size_t>(b)].size();
      });
      while (selected.size() < static_cast<std::size_t>(options.n_actions)) {
        bool added = false;
        for (int c : by_size) {
          if (auto m = nearest_unused(c)) {
            selected.insert(*m);
            added = true;
            break;
          }
        }
        if (!added) {
          break;
        }
      }
    }
    chosen.assign(selected.begin(), selected.end());
  }

  std::stable_sort(chosen.begin(), chosen.end(), [&](std::size_t a, std::size_t b) {
    const int ra = provenance_rank(front[a].provenance);
    const int rb = provenance_rank(front[b].provenance);
    if (ra != rb) {
      return ra < rb;
    }
    return front[a].point[1] < front[b].point[1];
  });
  std::vector<CatalogEntry> entries;
  for (std::size_t i : chosen) {
    entries.push_back({0, front[i].theta, front[i].point[0], front[i].point[1], front[i].provenance});
  }
  return Catalog(std::move(entries));
}

}  // namespace wmpc::pareto
