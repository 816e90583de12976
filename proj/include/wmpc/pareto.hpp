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

#include "wmpc/mobo.hpp"
#include "wmpc/nmpc.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace wmpc::pareto
{
/// Which group fronts an entry belongs to.
enum class Provenance { Straight = 1, Curve = 2, Both = 3 };

const char * to_string(Provenance provenance);
Provenance provenance_from_string(const std::string & text);

/// One member of the merged front. `point` is the entry's objective vector
/// on its provenance group (the straight one for dual entries).
struct FrontEntry
{
  nmpc::WeightSet theta;
  mobo::Point2 point{0.0, 0.0};
  Provenance provenance{Provenance::Straight};
};

/// Union of the two fronts; an identical weight set in both keeps one entry
/// with the dual label. Order: straight entries, then curve-only entries.
std::vector<FrontEntry> merge_fronts(
  const std::vector<FrontEntry> & straight, const std::vector<FrontEntry> & curve);

/// Merged front of a tuning result.
std::vector<FrontEntry> merge_fronts(const mobo::TuningResult & result);

struct KMeansResult
{
  Mat centroids;                  // k x dim
  std::vector<int> assignment;    // per point
  double inertia{0.0};
};

/// Lloyd iterations from k-means++ seeds; the lowest-inertia restart wins.
KMeansResult kmeans(const Mat & points, int k, int restarts, std::uint64_t seed, int max_iterations = 100);

struct CatalogEntry
{
  int index{0};
  nmpc::WeightSet theta;
  double j0{0.0};
  double j1{0.0};
  Provenance group{Provenance::Straight};
};

/// The frozen action space: weight sets addressed by index.
class Catalog
{
public:
  Catalog() = default;
  explicit Catalog(std::vector<CatalogEntry> entries);

  const std::vector<CatalogEntry> & entries() const { return entries_; }
  int size() const { return static_cast<int>(entries_.size()); }
  bool empty() const { return entries_.empty(); }
  const nmpc::WeightSet & weights(int index) const;
  /// Index of an identical weight set, or -1.
  int find(const nmpc::WeightSet & theta) const;
  bool contains(const nmpc::WeightSet & theta) const { return find(theta) >= 0; }

  /// Hash of the entries (not of any file metadata); policies are bound to it.
  std::string hash() const;

  /// {"format", "version", "catalog_hash", "provenance", "entries": [{index, theta, j0, j1, group}]}
  std::string to_json(const std::string & provenance_json = "{}") const;
  static Catalog from_json(const std::string & text);

private:
  std::vector<CatalogEntry> entries_;
};

struct ReduceOptions
{
  int n_actions{26};
  int n_objectives{2};
  int restarts{10};
  std::uint64_t seed{0};
};

/// Catalog of exactly min(n_actions, |P|) entries: the per-objective minima
/// plus one medoid per k-means cluster of the remaining points, clustered in
/// min-max normalised objective space. Entries are ordered straight, dual,
/// curve, each by ascending j1.
Catalog reduce(const std::vector<FrontEntry> & front, const ReduceOptions & options);

}  // namespace wmpc::pareto
