#include "doctest.h"

#include "sthg/rng.hpp"
#include "sthg/types.hpp"

using namespace sthg;

TEST_CASE("iou identity, disjoint and overlap cases") {
  const BBox b{0, 0, 1, 1};
  CHECK(iou(b, b) == doctest::Approx(1.0));
  CHECK(iou({0, 0, 1, 1}, {2, 2, 3, 3}) == 0.0);
  CHECK(iou({0, 0, 2, 2}, {1, 0, 3, 2}) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("iou rejects degenerate boxes") {
  CHECK_THROWS_AS(iou({1, 0, 1, 1}, {0, 0, 1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(iou({0, 0, 1, 1}, {0, 2, 1, 1}), std::invalid_argument);
}

TEST_CASE("iou is symmetric and 1 only for identical boxes") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const auto rand_box = [&rng]() {
      const Scalar x1 = rng.uniform(-10, 10), y1 = rng.uniform(-10, 10);
      return BBox{x1, y1, x1 + rng.uniform(0.1, 8.0), y1 + rng.uniform(0.1, 8.0)};
    };
    const BBox a = rand_box(), b = rand_box();
    const Scalar ab = iou(a, b), ba = iou(b, a);
    CHECK(ab == ba);
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    const bool same = a.x1 == b.x1 && a.y1 == b.y1 && a.x2 == b.x2 && a.y2 == b.y2;
    if (ab == 1.0) CHECK(same);
    if (same) CHECK(ab == 1.0);
  }
}

TEST_CASE("frame_to_time") {
  CHECK(frame_to_time(0, 30) == 0.0);
  CHECK(frame_to_time(30, 30) == 1.0);
  CHECK(frame_to_time(45, 30) == 1.5);
  CHECK_THROWS_AS(frame_to_time(1, 0), std::invalid_argument);
  CHECK_THROWS_AS(frame_to_time(1, -5), std::invalid_argument);
}

TEST_CASE("edge type is determined by endpoint node types") {
  CHECK(edge_type_of(NodeType::Visible, NodeType::Visible) == EdgeType::VV);
  CHECK(edge_type_of(NodeType::Visible, NodeType::Wearer) == EdgeType::VW);
  CHECK(edge_type_of(NodeType::Wearer, NodeType::Visible) == EdgeType::VW);
  CHECK(edge_type_of(NodeType::Wearer, NodeType::Wearer) == EdgeType::WW);
}

TEST_CASE("track validation catches ordering and dimension errors") {
  FaceTrack t;
  t.track_id = 1;
  t.person_id = "P0";
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);  // empty

  t.entries.push_back({5, {0, 0, 1, 1}, Vector::Zero(3)});
  t.entries.push_back({5, {0, 0, 1, 1}, Vector::Zero(3)});
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);  // not strictly increasing

  t.entries[1].frame = 6;
  t.entries[1].feature = Vector::Zero(4);
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);  // dim mismatch

  t.entries[1].feature = Vector::Zero(3);
  CHECK_NOTHROW(t.validate());
}

TEST_CASE("bundle rejects the reserved wearer id and duplicate tracks") {
  VideoBundle b;
  b.video_id = "v";
  FaceTrack t;
  t.track_id = 0;
  t.person_id = "CW";
  t.entries.push_back({0, {0, 0, 1, 1}, Vector::Zero(2)});
  b.tracks.push_back(t);
  CHECK_THROWS_AS(b.validate(), std::invalid_argument);

  b.tracks[0].person_id = "P0";
  CHECK_NOTHROW(b.validate());
  b.tracks.push_back(b.tracks[0]);
  CHECK_THROWS_AS(b.validate(), std::invalid_argument);
}

TEST_CASE("graph validation enforces structural invariants") {
  HeteroGraph g;
  g.nodes.push_back({NodeType::Visible, 0, 0, "P0", Vector::Zero(2), 1});
  g.nodes.push_back({NodeType::Wearer, -1, 0, "CW", Vector::Zero(2), 0});
  g.edges.push_back({0, 1, EdgeType::VW});
  CHECK_NOTHROW(g.validate());

  SUBCASE("self loop") {
    g.edges.push_back({1, 1, EdgeType::WW});
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  }
  SUBCASE("duplicate edge") {
    g.edges.push_back({0, 1, EdgeType::VW});
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  }
  SUBCASE("wrong edge type") {
    g.edges[0].type = EdgeType::VV;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  }
  SUBCASE("partial labels") {
    g.nodes[1].label = -1;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  }
  SUBCASE("duplicate node key") {
    g.nodes.push_back({NodeType::Wearer, -1, 0, "CW", Vector::Zero(2), 1});
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  }
}
