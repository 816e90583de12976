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

#include "wmpc/track.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace wmpc::track
{
namespace
{
constexpr double kPi = std::numbers::pi;

double hypot2(double dx, double dy) { return std::sqrt(dx * dx + dy * dy); }

struct Pose
{
  double x{0.0};
  double y{0.0};
  double psi{0.0};
};

Pose advance(const Pose & start, const TrackElement & e, double d)
{
  if (e.kind == TrackElement::Kind::Straight) {
    return {start.x + d * std::cos(start.psi), start.y + d * std::sin(start.psi), start.psi};
  }
  const double kappa = e.curvature();
  const double psi = start.psi + kappa * d;
  return {
    start.x + (std::sin(psi) - std::sin(start.psi)) / kappa,
    start.y - (std::cos(psi) - std::cos(start.psi)) / kappa, psi};
}

// Signed offset of (x, y) from the osculating circle (or tangent line) at p.
double signed_offset(const RacelinePoint & p, double x, double y)
{
  const double nx = -std::sin(p.psi);
  const double ny = std::cos(p.psi);
  if (std::abs(p.kappa) < 1e-9) {
    return (x - p.x) * nx + (y - p.y) * ny;
  }
  const double radius = 1.0 / std::abs(p.kappa);
  const double cx = p.x + nx / p.kappa;
  const double cy = p.y + ny / p.kappa;
  const double rho = hypot2(x - cx, y - cy);
  return (p.kappa > 0.0 ? 1.0 : -1.0) * (radius - rho);
}

void validate_spec(const TrackSpec & spec)
{
  if (spec.elements.empty()) {
    throw ValidationError("track spec '" + spec.name + "' has no elements");
  }
  if (!(spec.v_max > 0.0) || spec.v_max > kVelocityCap) {
    throw ValidationError("track v_max must lie in (0, 37.5]");
  }
  if (!(spec.step > 0.0)) {
    throw ValidationError("track sample step must be positive");
  }
  if (!(spec.gg.a_lat_max > 0.0 && spec.gg.a_accel_max > 0.0 && spec.gg.a_brake_max > 0.0)) {
    throw ValidationError("gg limits must be positive");
  }
  for (const auto & e : spec.elements) {
    if (e.kind == TrackElement::Kind::Straight && !(e.length > 0.0)) {
      throw ValidationError("straight length must be positive");
    }
    if (e.kind == TrackElement::Kind::Arc && (!(e.radius > 0.0) || e.angle == 0.0)) {
      throw ValidationError("arc needs a positive radius and a nonzero angle");
    }
  }
}

}  // namespace

Raceline::Raceline(std::vector<RacelinePoint> points, bool closed)
: points_(std::move(points)), closed_(closed), length_(0.0)
{
  if (points_.size() < 2) {
    throw ValidationError("raceline needs at least two points");
  }
  double max_gap = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto & p = points_[i];
    if (!(p.v_ref > 0.0) || p.v_ref > kVelocityCap + 1e-12) {
      throw ValidationError("raceline v_ref must lie in (0, 37.5]");
    }
    if (i > 0) {
      const double ds = p.s - points_[i - 1].s;
      if (!(ds > 0.0)) {
        throw ValidationError("raceline arc length must be strictly increasing");
      }
      max_gap = std::max(max_gap, ds);
    }
  }
  if (closed_) {
    const auto & first = points_.front();
    const auto & last = points_.back();
    const double gap = hypot2(first.x - last.x, first.y - last.y);
    if (gap > 1.5 * max_gap + 1e-9) {
      throw ValidationError("closed raceline: first and last samples are not adjacent");
    }
    // Uniform sampling is the common case; fall back to the chord otherwise.
    const double mean_gap = (last.s - first.s) / static_cast<double>(points_.size() - 1);
    const double closing = std::abs(gap - mean_gap) < 1e-3 * mean_gap ? mean_gap : gap;
    length_ = last.s - first.s + closing;
  } else {
    length_ = points_.back().s - points_.front().s;
  }
}

double Raceline::wrap_s(double s) const
{
  if (!closed_) {
    return s;
  }
  double rel = std::fmod(s - start_s(), length_);
  if (rel < 0.0) {
    rel += length_;
  }
  if (rel >= length_) {
    rel = 0.0;
  }
  return start_s() + rel;
}

std::size_t Raceline::segment_index(double s) const
{
  auto it = std::upper_bound(
    points_.begin(), points_.end(), s,
    [](double value, const RacelinePoint & p) { return value < p.s; });
  if (it == points_.begin()) {
    return 0;
  }
  std::size_t i = static_cast<std::size_t>(std::distance(points_.begin(), it)) - 1;
  if (!closed_ && i + 1 >= points_.size()) {
    i = points_.size() - 2;
  }
  return i;
}

TrackSpec canned_spec(const std::string & name)
{
  TrackSpec spec;
  spec.name = name;
  if (name == "oval") {
    spec.v_max = 30.0;
    spec.elements = {
      TrackElement::straight(300.0), TrackElement::arc(60.0, kPi),
      TrackElement::straight(300.0), TrackElement::arc(60.0, kPi)};
  } else if (name == "roadcourse") {
    // Rounded rectangle with four distinct corner radii; side lengths close the loop.
    const double r1 = 50.0, r2 = 80.0, r3 = 60.0, r4 = 100.0;
    const double l1 = 300.0, l2 = 160.0;
    const double l3 = l1 + r1 - r2 - r3 + r4;
    const double l4 = r1 + l2 + r2 - r3 - r4;
    spec.v_max = 32.0;
    spec.elements = {
      TrackElement::straight(l1), TrackElement::arc(r1, kPi / 2),
      TrackElement::straight(l2), TrackElement::arc(r2, kPi / 2),
      TrackElement::straight(l3), TrackElement::arc(r3, kPi / 2),
      TrackElement::straight(l4), TrackElement::arc(r4, kPi / 2)};
  } else if (name == "speedway") {
    spec.v_max = kVelocityCap;
    spec.elements = {
      TrackElement::straight(500.0), TrackElement::arc(120.0, kPi),
      TrackElement::straight(500.0), TrackElement::arc(120.0, kPi)};
  } else if (name == "straight") {
    spec.closed = false;
    spec.v_max = 10.0;
    spec.elements = {TrackElement::straight(100.0)};
  } else {
    throw ValidationError("unknown track preset '" + name + "'");
  }
  return spec;
}

Raceline generate_synthetic_track(const TrackSpec & spec)
{
  validate_spec(spec);

  std::vector<Pose> starts;
  std::vector<double> s_starts;
  Pose pose{};
  double total = 0.0;
  for (const auto & e : spec.elements) {
    starts.push_back(pose);
    s_starts.push_back(total);
    pose = advance(pose, e, e.arc_length());
    total += e.arc_length();
  }

  if (spec.closed) {
    const double dx = pose.x - starts.front().x;
    const double dy = pose.y - starts.front().y;
    const double dpsi = wrap_angle(pose.psi - starts.front().psi);
    if (hypot2(dx, dy) > spec.closure_tolerance || std::abs(dpsi) > spec.closure_tolerance) {
      std::ostringstream msg;
      msg << "track '" << spec.name << "' does not close: gap dx=" << dx << " m, dy=" << dy
          << " m, dpsi=" << dpsi << " rad";
      throw ValidationError(msg.str());
    }
  }

  const std::size_t n = spec.closed
    ? std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(total / spec.step)))
    : static_cast<std::size_t>(std::ceil(total / spec.step - 1e-9)) + 1;
  const double spacing = spec.closed ? total / static_cast<double>(n)
                                     : total / static_cast<double>(n - 1);

  std::vector<RacelinePoint> pts(n);
  std::size_t e = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = (i + 1 == n && !spec.closed) ? total : spacing * static_cast<double>(i);
    while (e + 1 < spec.elements.size() && s >= s_starts[e + 1]) {
      ++e;
    }
    const auto & el = spec.elements[e];
    const Pose p = advance(starts[e], el, s - s_starts[e]);
    pts[i] = {s, p.x, p.y, wrap_angle(p.psi), 0.0, el.curvature()};
  }

  // Speed profile: lateral cap, then forward (traction) and backward (braking)
  // passes under a friction ellipse.
  const double v_top = std::min(spec.v_max, kVelocityCap);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double k = std::abs(pts[i].kappa);
    v[i] = k > 0.0 ? std::min(v_top, std::sqrt(spec.gg.a_lat_max / k)) : v_top;
  }
  const std::vector<double> v_cap = v;
  auto ellipse = [&](double speed, double kappa) {
    const double ratio = speed * speed * std::abs(kappa) / spec.gg.a_lat_max;
    return std::sqrt(std::max(0.0, 1.0 - ratio * ratio));
  };
  auto gap_after = [&](std::size_t i) {
    return (i + 1 < n) ? pts[i + 1].s - pts[i].s : spacing;
  };
  if (!spec.closed) {
    v[0] = spec.v_start > 0.0 ? std::min(spec.v_start, v_cap[0]) : v_cap[0];
  }
  const int rounds = spec.closed ? 3 : 1;
  for (int r = 0; r < rounds; ++r) {
    const std::size_t span = spec.closed ? n : n - 1;
    for (std::size_t k = 0; k < span; ++k) {
      const std::size_t i = k;
      const std::size_t j = (k + 1) % n;
      const double a = spec.gg.a_accel_max * ellipse(v[i], pts[i].kappa);
      v[j] = std::min(v[j], std::sqrt(v[i] * v[i] + 2.0 * a * gap_after(i)));
    }
    if (spec.closed) {
      for (std::size_t k = n; k-- > 0;) {
        const std::size_t i = k;
        const std::size_t j = (k + 1) % n;
        const double a = spec.gg.a_brake_max * ellipse(v[j], pts[i].kappa);
        v[i] = std::min(v[i], std::sqrt(v[j] * v[j] + 2.0 * a * gap_after(i)));
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    pts[i].v_ref = v[i];
  }
  return Raceline(std::move(pts), spec.closed);
}

const char * to_string(SegmentLabel label)
{
  return label == SegmentLabel::Straight ? "straight" : "curve";
}

bool SegmentGroup::contains(double s) const
{
  for (std::size_t k = 0; k < intervals.size(); ++k) {
    const auto & iv = intervals[k];
    if (s >= iv.start && s < iv.end) {
      return true;
    }
  }
  return false;
}

double SegmentGroup::measure() const
{
  double m = 0.0;
  for (const auto & iv : intervals) {
    m += iv.length();
  }
  return m;
}

std::pair<SegmentGroup, SegmentGroup> segment_by_curvature(
  const Raceline & line, const SegmentationOptions & options)
{
  if (!(options.kappa_threshold > 0.0)) {
    throw ValidationError("kappa_threshold must be positive");
  }
  const std::size_t n = line.size();
  const bool closed = line.closed();
  const std::size_t cells = closed ? n : n - 1;

  auto cell_end = [&](std::size_t i) { return (i + 1 < n) ? line[i + 1].s : line.end_s(); };

  struct Run
  {
    std::size_t first;  // first cell
    std::size_t count;  // number of cells
    SegmentLabel label;
    double duration;
  };
  std::vector<Run> runs;
  for (std::size_t i = 0; i < cells; ++i) {
    const SegmentLabel label = std::abs(line[i].kappa) < options.kappa_threshold
      ? SegmentLabel::Straight
      : SegmentLabel::Curve;
    const double dt = (cell_end(i) - line[i].s) / line[i].v_ref;
    if (!runs.empty() && runs.back().label == label) {
      runs.back().count += 1;
      runs.back().duration += dt;
    } else {
      runs.push_back({i, 1, label, dt});
    }
  }
  if (closed && runs.size() > 1 && runs.front().label == runs.back().label) {
    runs.back().count += runs.front().count;
    runs.back().duration += runs.front().duration;
    runs.erase(runs.begin());
  }

  // Absorb runs too short to host two weight switches into their neighbours.
  while (runs.size() > 1) {
    std::size_t shortest = 0;
    for (std::size_t r = 1; r < runs.size(); ++r) {
      if (runs[r].duration < runs[shortest].duration) {
        shortest = r;
      }
    }
    if (runs[shortest].duration >= options.min_dwell_time) {
      break;
    }
    const std::size_t m = runs.size();
    const bool has_prev = closed || shortest > 0;
    const bool has_next = closed || shortest + 1 < m;
    const std::size_t prev = (shortest + m - 1) % m;
    const std::size_t next = (shortest + 1) % m;
    Run merged = runs[shortest];
    merged.label = merged.label == SegmentLabel::Straight ? SegmentLabel::Curve
                                                          : SegmentLabel::Straight;
    std::vector<std::size_t> drop;
    if (has_prev) {
      merged.first = runs[prev].first;
      merged.count += runs[prev].count;
      merged.duration += runs[prev].duration;
      drop.push_back(prev);
    }
    if (has_next && (!has_prev || next != prev)) {
      merged.count += runs[next].count;
      merged.duration += runs[next].duration;
      drop.push_back(next);
    }
    runs[shortest] = merged;
    std::sort(drop.begin(), drop.end(), std::greater<>());
    for (std::size_t d : drop) {
      runs.erase(runs.begin() + static_cast<std::ptrdiff_t>(d));
    }
  }

  SegmentGroup straight{SegmentLabel::Straight, {}};
  SegmentGroup curve{SegmentLabel::Curve, {}};
  for (const auto & run : runs) {
    auto & group = run.label == SegmentLabel::Straight ? straight : curve;
    const std::size_t last = run.first + run.count - 1;
    if (last < cells) {
      group.intervals.push_back({line[run.first].s, cell_end(last)});
    } else {
      group.intervals.push_back({line[run.first].s, line.end_s()});
      group.intervals.push_back({line.start_s(), cell_end(last - cells)});
    }
  }
  if (!closed) {
    // The final sample of an open line belongs to the last interval.
    auto & group = runs.back().label == SegmentLabel::Straight ? straight : curve;
    for (auto & iv : group.intervals) {
      if (iv.end == line.end_s()) {
        iv.end = std::nextafter(line.end_s(), std::numeric_limits<double>::max());
      }
    }
  }
  auto by_start = [](const Interval & a, const Interval & b) { return a.start < b.start; };
  std::sort(straight.intervals.begin(), straight.intervals.end(), by_start);
  std::sort(curve.intervals.begin(), curve.intervals.end(), by_start);
  return {straight, curve};
}

SegmentLabel label_at(const std::pair<SegmentGroup, SegmentGroup> & groups, double s)
{
  return groups.second.contains(s) ? SegmentLabel::Curve : SegmentLabel::Straight;
}

RacelinePoint lookup(const Raceline & line, double s)
{
  if (!line.closed()) {
    const double tol = 1e-9 * std::max(1.0, line.length());
    if (s < line.start_s() - tol || s > line.end_s() + tol) {
      throw ValidationError("lookup: arc length outside an open raceline");
    }
    s = std::clamp(s, line.start_s(), line.end_s());
  } else {
    s = line.wrap_s(s);
  }
  const std::size_t i = line.segment_index(s);
  const RacelinePoint & a = line[i];
  RacelinePoint b = (i + 1 < line.size()) ? line[i + 1] : line[0];
  if (i + 1 >= line.size()) {
    b.s = line.end_s();
  }
  const double t = std::clamp((s - a.s) / (b.s - a.s), 0.0, 1.0);
  RacelinePoint out;
  out.s = s;
  out.x = a.x + t * (b.x - a.x);
  out.y = a.y + t * (b.y - a.y);
  out.psi = wrap_angle(a.psi + t * wrap_angle(b.psi - a.psi));
  out.v_ref = a.v_ref + t * (b.v_ref - a.v_ref);
  out.kappa = a.kappa + t * (b.kappa - a.kappa);
  return out;
}

RacelinePoint lookup_extrapolated(const Raceline & line, double s)
{
  if (line.closed() || (s >= line.start_s() && s <= line.end_s())) {
    return lookup(line, s);
  }
  const bool before = s < line.start_s();
  RacelinePoint p = before ? line.points().front() : line.points().back();
  const double d = s - p.s;
  p.x += d * std::cos(p.psi);
  p.y += d * std::sin(p.psi);
  p.s = s;
  p.kappa = 0.0;
  return p;
}

double lateral_deviation(const Raceline & line, double x, double y)
{
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < line.size(); ++i) {
    const double dx = line[i].x - x;
    const double dy = line[i].y - y;
    const double d2 = dx * dx + dy * dy;
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return signed_offset(line[best], x, y);
}

ArcLengthProjector::ArcLengthProjector(const Raceline & line, int search_window)
: line_(&line), window_(search_window)
{
}

ArcLengthProjector::Projection ArcLengthProjector::refine(std::size_t index, double x, double y) const
{
  const auto & p = (*line_)[index];
  const double along = (x - p.x) * std::cos(p.psi) + (y - p.y) * std::sin(p.psi);
  double s = p.s + along;
  if (line_->closed()) {
    s = line_->wrap_s(s);
  } else {
    s = std::clamp(s, line_->start_s(), line_->end_s());
  }
  return {s, index, signed_offset(p, x, y)};
}

ArcLengthProjector::Projection ArcLengthProjector::project(double x, double y)
{
  const auto & line = *line_;
  const std::size_t n = line.size();
  auto dist2 = [&](std::size_t i) {
    const double dx = line[i].x - x;
    const double dy = line[i].y - y;
    return dx * dx + dy * dy;
  };

  std::size_t best = 0;
  if (!last_index_) {
    double d1 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double d = dist2(i);
      if (d < d1) {
        d1 = d;
        best = i;
      }
    }
    // Look for an equally close sample on a distant branch.
    const double separation = 10.0;
    for (std::size_t i = 0; i < n; ++i) {
      double ds = std::abs(line[i].s - line[best].s);
      if (line.closed()) {
        ds = std::min(ds, line.length() - ds);
      }
      if (ds > separation && std::abs(std::sqrt(dist2(i)) - std::sqrt(d1)) < 1e-9) {
        throw ValidationError("projection is ambiguous between two distant raceline branches");
      }
    }
  } else {
    const long center = static_cast<long>(*last_index_);
    double d1 = std::numeric_limits<double>::infinity();
    for (long k = -window_; k <= window_; ++k) {
      long i = center + k;
      if (line.closed()) {
        i = ((i % static_cast<long>(n)) + static_cast<long>(n)) % static_cast<long>(n);
      } else if (i < 0 || i >= static_cast<long>(n)) {
        continue;
      }
      const double d = dist2(static_cast<std::size_t>(i));
      if (d < d1) {
        d1 = d;
        best = static_cast<std::size_t>(i);
      }
    }
  }
  last_index_ = best;
  return refine(best, x, y);
}

void write_csv(const Raceline & line, std::ostream & out)
{
  out << "s,x,y,psi,v_ref,kappa\n";
  char buf[256];
  for (const auto & p : line.points()) {
    std::snprintf(
      buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", p.s, p.x, p.y, p.psi, p.v_ref,
      p.kappa);
    out << buf;
  }
}

Raceline read_csv(std::istream & in, std::optional<bool> closed)
{
  std::string line;
  if (!std::getline(in, line)) {
    throw ValidationError("track CSV is empty");
  }
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  if (line != "s,x,y,psi,v_ref,kappa") {
    throw ValidationError("track CSV header must be 's,x,y,psi,v_ref,kappa'");
  }
  std::vector<RacelinePoint> pts;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    RacelinePoint p;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf", &p.s, &p.x, &p.y, &p.psi, &p.v_ref, &p.kappa) != 6) {
      throw ValidationError("malformed track CSV row: " + line);
    }
    pts.push_back(p);
  }
  if (pts.size() < 2) {
    throw ValidationError("track CSV needs at least two rows");
  }
  bool is_closed = false;
  if (closed) {
    is_closed = *closed;
  } else {
    const double spacing = (pts.back().s - pts.front().s) / static_cast<double>(pts.size() - 1);
    is_closed = hypot2(pts.back().x - pts.front().x, pts.back().y - pts.front().y) <= 1.5 * spacing;
  }
  return Raceline(std::move(pts), is_closed);
}

}  // namespace wmpc::track
