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

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace wmpc::track
{
struct RacelinePoint
{
  double s{0.0};      // arc length (m)
  double x{0.0};
  double y{0.0};
  double psi{0.0};    // heading, wrapped to (-pi, pi]
  double v_ref{0.0};  // reference speed (m/s)
  double kappa{0.0};  // curvature (1/m), positive = left turn
};

/// Immutable, arc-length sampled reference line. Closed lines wrap at length().
class Raceline
{
public:
  Raceline(std::vector<RacelinePoint> points, bool closed);

  const std::vector<RacelinePoint> & points() const { return points_; }
  const RacelinePoint & operator[](std::size_t i) const { return points_[i]; }
  std::size_t size() const { return points_.size(); }
  bool closed() const { return closed_; }

  double start_s() const { return points_.front().s; }
  double end_s() const { return closed_ ? points_.front().s + length_ : points_.back().s; }
  /// Loop length for closed lines, span for open ones.
  double length() const { return length_; }
  /// Arc length wrapped into [start_s, end_s) for closed lines; unchanged for open ones.
  double wrap_s(double s) const;
  /// Index i such that s lies in [s_i, s_{i+1}); s must already be wrapped/in range.
  std::size_t segment_index(double s) const;

private:
  std::vector<RacelinePoint> points_;
  bool closed_;
  double length_;
};

struct TrackElement
{
  enum class Kind { Straight, Arc };
  Kind kind{Kind::Straight};
  double length{0.0};  // straights only (m)
  double radius{0.0};  // arcs only (m)
  double angle{0.0};   // arcs only, signed turning angle (rad), positive = left

  double arc_length() const { return kind == Kind::Straight ? length : radius * std::abs(angle); }
  double curvature() const
  {
    return kind == Kind::Straight ? 0.0 : (angle >= 0.0 ? 1.0 : -1.0) / radius;
  }
  static TrackElement straight(double length) { return {Kind::Straight, length, 0.0, 0.0}; }
  static TrackElement arc(double radius, double angle) { return {Kind::Arc, 0.0, radius, angle}; }
};

/// Point-mass acceleration limits used for the reference speed profile.
struct GgLimits
{
  double a_lat_max{10.0};
  double a_accel_max{6.0};
  double a_brake_max{10.0};
};

struct TrackSpec
{
  std::string name{"custom"};
  std::vector<TrackElement> elements;
  bool closed{true};
  double v_max{30.0};
  /// Initial speed of an open line; <= 0 starts at the local speed limit.
  double v_start{0.0};
  double step{1.0};
  double closure_tolerance{1e-6};
  GgLimits gg{};
};

/// Named synthetic layouts: "oval", "roadcourse", "speedway", "straight".
TrackSpec canned_spec(const std::string & name);

/// Samples the element chain at a fixed arc-length step and attaches a
/// friction-ellipse limited forward/backward speed profile.
Raceline generate_synthetic_track(const TrackSpec & spec);

enum class SegmentLabel { Straight = 0, Curve = 1 };

const char * to_string(SegmentLabel label);

struct Interval
{
  double start{0.0};
  double end{0.0};
  double length() const { return end - start; }
};

struct SegmentGroup
{
  SegmentLabel label{SegmentLabel::Straight};
  std::vector<Interval> intervals;

  bool contains(double s) const;
  double measure() const;
  bool empty() const { return intervals.empty(); }
};

struct SegmentationOptions
{
  double kappa_threshold{0.01};
  /// Runs whose traversal time at v_ref is below this are merged into a neighbour.
  double min_dwell_time{3.2};
};

/// Splits the line into (Straight, Curve) groups by |kappa| against the threshold.
std::pair<SegmentGroup, SegmentGroup> segment_by_curvature(
  const Raceline & line, const SegmentationOptions & options = {});

/// Label of the group containing s.
SegmentLabel label_at(const std::pair<SegmentGroup, SegmentGroup> & groups, double s);

/// Interpolated point at arc length s (wraps on closed lines; throws out of span on open ones).
RacelinePoint lookup(const Raceline & line, double s);

/// Like lookup, but extends an open line straight past its ends.
RacelinePoint lookup_extrapolated(const Raceline & line, double s);

/// Signed distance to the line near the closest sample; positive to the left of travel.
double lateral_deviation(const Raceline & line, double x, double y);

/// Stateful arc-length projection that follows the previous projection, so a
/// vehicle near a crossing or a hairpin keeps its branch.
class ArcLengthProjector
{
public:
  explicit ArcLengthProjector(const Raceline & line, int search_window = 40);

  struct Projection
  {
    double s{0.0};
    std::size_t index{0};
    double lateral{0.0};
  };

  /// First call searches globally and throws ValidationError when two distant
  /// branches are equally close.
  Projection project(double x, double y);
  void reset() { last_index_.reset(); }

private:
  Projection refine(std::size_t index, double x, double y) const;

  const Raceline * line_;
  int window_;
  std::optional<std::size_t> last_index_;
};

void write_csv(const Raceline & line, std::ostream & out);
/// Reads the track CSV; `closed` defaults to a first/last proximity check.
Raceline read_csv(std::istream & in, std::optional<bool> closed = std::nullopt);

}  // namespace wmpc::track
