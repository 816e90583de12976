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

#include "doctest.h"

#include "wmpc/track.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace wmpc;
using namespace wmpc::track;

TEST_CASE("oval preset has the expected length and closes")
{
  const Raceline line = generate_synthetic_track(canned_spec("oval"));
  CHECK(line.closed());
  CHECK(line.length() == doctest::Approx(600.0 + 2.0 * std::numbers::pi * 60.0).epsilon(1e-9));
  const auto & first = line[0];
  const auto end = lookup(line, line.end_s() - 1e-9);
  CHECK(std::hypot(end.x - first.x, end.y - first.y) < 1e-6);
}

TEST_CASE("reference speed respects the lateral acceleration limit")
{
  const TrackSpec spec = canned_spec("oval");
  const Raceline line = generate_synthetic_track(spec);
  for (const auto & p : line.points()) {
    CHECK(p.v_ref <= spec.v_max + 1e-9);
    CHECK(p.v_ref * p.v_ref * std::abs(p.kappa) <= spec.gg.a_lat_max + 1e-6);
  }
}

TEST_CASE("curvature segmentation splits the oval into straights and curves")
{
  const Raceline line = generate_synthetic_track(canned_spec("oval"));
  const auto groups = segment_by_curvature(line);
  CHECK(groups.first.label == SegmentLabel::Straight);
  CHECK(groups.second.label == SegmentLabel::Curve);
  CHECK(groups.first.measure() + groups.second.measure() == doctest::Approx(line.length()).epsilon(1e-9));
  CHECK(groups.first.measure() == doctest::Approx(600.0).epsilon(0.02));
  CHECK(label_at(groups, 150.0) == SegmentLabel::Straight);
  CHECK(label_at(groups, 300.0 + 60.0 * std::numbers::pi / 2) == SegmentLabel::Curve);
}

TEST_CASE("wrap_s maps into one lap")
{
  const Raceline line = generate_synthetic_track(canned_spec("oval"));
  const double s = line.wrap_s(line.length() * 2.5);
  CHECK(s == doctest::Approx(line.length() * 0.5));
  CHECK(line.wrap_s(-1.0) == doctest::Approx(line.length() - 1.0));
}

TEST_CASE("csv round trip keeps the raceline")
{
  const Raceline line = generate_synthetic_track(canned_spec("roadcourse"));
  std::stringstream ss;
  write_csv(line, ss);
  const Raceline back = read_csv(ss, true);
  REQUIRE(back.size() == line.size());
  for (std::size_t i = 0; i < line.size(); i += 37) {
    CHECK(back[i].x == doctest::Approx(line[i].x).epsilon(1e-12));
    CHECK(back[i].v_ref == doctest::Approx(line[i].v_ref).epsilon(1e-12));
  }
}

TEST_CASE("projector recovers arc length and signed lateral offset")
{
  const Raceline line = generate_synthetic_track(canned_spec("oval"));
  ArcLengthProjector projector(line);
  const auto p = lookup(line, 120.0);
  const double nx = -std::sin(p.psi);
  const double ny = std::cos(p.psi);
  const auto proj = projector.project(p.x + 0.3 * nx, p.y + 0.3 * ny);
  CHECK(proj.s == doctest::Approx(120.0).epsilon(1e-6));
  CHECK(proj.lateral == doctest::Approx(0.3).epsilon(1e-6));
}

TEST_CASE("open line extrapolates beyond its end")
{
  const Raceline line = generate_synthetic_track(canned_spec("straight"));
  CHECK_FALSE(line.closed());
  const auto p = lookup_extrapolated(line, line.end_s() + 10.0);
  CHECK(p.x == doctest::Approx(line.points().back().x + 10.0).epsilon(1e-9));
}

TEST_CASE("invalid track specs are rejected")
{
  CHECK_THROWS_AS(canned_spec("nowhere"), ValidationError);
  TrackSpec spec;
  spec.elements = {TrackElement::straight(100.0), TrackElement::arc(50.0, std::numbers::pi / 2)};
  spec.closed = true;
  CHECK_THROWS_AS(generate_synthetic_track(spec), ValidationError);
}
