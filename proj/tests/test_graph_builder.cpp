#include "doctest.h"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <set>

#include "sthg/graph_builder.hpp"
#include "sthg/rng.hpp"

using namespace sthg;

namespace {

VideoBundle two_tracks_one_frame() {
  VideoBundle b;
  b.video_id = "v";
  b.fps = 30;
  for (int k = 0; k < 2; ++k) {
    FaceTrack t;
    t.track_id = k;
    t.person_id = "P" + std::to_string(k);
    t.entries.push_back({0, {0, 0, 1, 1}, Vector::Zero(3)});
    b.tracks.push_back(t);
  }
  WearerStream w;
  w.entries.push_back({0, Vector::Zero(2)});
  b.wearer = w;
  return b;
}

/// num_tracks visible tracks and a wearer, everyone present on every frame.
VideoBundle dense_bundle(int num_tracks, int num_frames) {
  VideoBundle b;
  b.video_id = "v";
  b.fps = 30;
  for (int k = 0; k < num_tracks; ++k) {
    FaceTrack t;
    t.track_id = k;
    t.person_id = "P" + std::to_string(k);
    for (int f = 0; f < num_frames; ++f) t.entries.push_back({f, {0, 0, 1, 1}, Vector::Zero(3)});
    b.tracks.push_back(t);
  }
  WearerStream w;
  for (int f = 0; f < num_frames; ++f) w.entries.push_back({f, Vector::Zero(2)});
  b.wearer = w;
  return b;
}

int count_type(const HeteroGraph& g, EdgeType t) {
  int n = 0;
  for (const auto& e : g.edges)
    if (e.type == t) ++n;
  return n;
}

}  // namespace

TEST_CASE("one frame, two tracks plus wearer: complete spatial graph") {
  GraphConfig cfg;
  cfg.temporal_window = 0;
  cfg.clip_len = 0;
  const auto graphs = build_graph(two_tracks_one_frame(), cfg);
  REQUIRE(graphs.size() == 1);
  const HeteroGraph& g = graphs[0];
  g.validate();
  CHECK(g.nodes.size() == 3);
  CHECK(g.edges.size() == 3);
  CHECK(count_type(g, EdgeType::VV) == 1);
  CHECK(count_type(g, EdgeType::VW) == 2);
  CHECK(count_type(g, EdgeType::WW) == 0);
}

TEST_CASE("two frames, one track and wearer, window 1: 2 spatial + 2 temporal") {
  GraphConfig cfg;
  cfg.temporal_window = 1;
  cfg.clip_len = 0;
  const auto graphs = build_graph(dense_bundle(1, 2), cfg);
  REQUIRE(graphs.size() == 1);
  const HeteroGraph& g = graphs[0];
  g.validate();
  CHECK(g.nodes.size() == 4);
  CHECK(g.edges.size() == 4);
  CHECK(count_type(g, EdgeType::VW) == 2);  // spatial, per frame
  CHECK(count_type(g, EdgeType::VV) == 1);  // same track across frames
  CHECK(count_type(g, EdgeType::WW) == 1);  // wearer across frames
}

TEST_CASE("empty bundle is an error") {
  VideoBundle b;
  b.video_id = "v";
  CHECK_THROWS_WITH_AS(build_graph(b, GraphConfig{}), "build_graph: empty video v",
                       std::invalid_argument);
}

TEST_CASE("config validation") {
  GraphConfig cfg;
  cfg.temporal_window = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = GraphConfig{};
  cfg.clip_len = 10;
  cfg.temporal_window = 10;  // clip must exceed the window
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.temporal_window = 9;
  CHECK_NOTHROW(cfg.validate());
  cfg.node_stride = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("spatial completeness: nodes sharing a frame form a clique") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    VideoBundle b = dense_bundle(1 + static_cast<int>(rng.uniform_index(3)),
                                 2 + static_cast<int>(rng.uniform_index(6)));
    // poke random coverage holes
    for (auto& t : b.tracks) {
      std::vector<TrackEntry> kept;
      for (auto& e : t.entries)
        if (rng.uniform() > 0.3) kept.push_back(e);
      t.entries = std::move(kept);
    }
    b.tracks.erase(std::remove_if(b.tracks.begin(), b.tracks.end(),
                                  [](const FaceTrack& t) { return t.entries.empty(); }),
                   b.tracks.end());
    if (b.empty()) continue;

    GraphConfig cfg;
    cfg.temporal_window = static_cast<std::int64_t>(rng.uniform_index(4));
    cfg.clip_len = 0;
    for (const auto& g : build_graph(b, cfg)) {
      g.validate();
      std::map<std::int64_t, std::vector<int>> by_frame;
      for (std::size_t i = 0; i < g.nodes.size(); ++i)
        by_frame[g.nodes[i].frame].push_back(static_cast<int>(i));
      std::set<std::pair<int, int>> edge_set;
      for (const auto& e : g.edges) edge_set.insert({e.src, e.dst});
      for (const auto& [frame, idxs] : by_frame)
        for (std::size_t a = 0; a < idxs.size(); ++a)
          for (std::size_t c = a + 1; c < idxs.size(); ++c)
            CHECK(edge_set.count({idxs[a], idxs[c]}) == 1);
    }
  }
}

TEST_CASE("temporal edges connect only identity-equal nodes within the window") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    VideoBundle b = dense_bundle(2, 8);
    GraphConfig cfg;
    cfg.temporal_window = 1 + static_cast<std::int64_t>(rng.uniform_index(4));
    cfg.clip_len = 0;
    for (const auto& g : build_graph(b, cfg)) {
      for (const auto& e : g.edges) {
        const auto& a = g.nodes[e.src];
        const auto& c = g.nodes[e.dst];
        const std::int64_t gap = std::abs(a.frame - c.frame);
        if (gap == 0) continue;  // spatial
        CHECK(gap <= cfg.temporal_window);
        CHECK(a.type == c.type);
        CHECK(a.track_id == c.track_id);
        CHECK(e.type != EdgeType::VW);
      }
    }
  }
}

TEST_CASE("build_graph is deterministic") {
  GraphConfig cfg;
  cfg.temporal_window = 3;
  cfg.clip_len = 5;
  const VideoBundle b = dense_bundle(2, 12);
  const auto g1 = build_graph(b, cfg);
  const auto g2 = build_graph(b, cfg);
  REQUIRE(g1.size() == g2.size());
  for (std::size_t i = 0; i < g1.size(); ++i) {
    REQUIRE(g1[i].nodes.size() == g2[i].nodes.size());
    REQUIRE(g1[i].edges.size() == g2[i].edges.size());
    for (std::size_t j = 0; j < g1[i].nodes.size(); ++j) {
      CHECK(g1[i].nodes[j].track_id == g2[i].nodes[j].track_id);
      CHECK(g1[i].nodes[j].frame == g2[i].nodes[j].frame);
    }
    for (std::size_t j = 0; j < g1[i].edges.size(); ++j) {
      CHECK(g1[i].edges[j].src == g2[i].edges[j].src);
      CHECK(g1[i].edges[j].dst == g2[i].edges[j].dst);
    }
  }
}

TEST_CASE("clips partition the video and temporal edges stay inside clips") {
  GraphConfig cfg;
  cfg.temporal_window = 2;
  cfg.clip_len = 4;
  const auto graphs = build_graph(dense_bundle(1, 10), cfg);
  REQUIRE(graphs.size() == 3);  // frames [0,4), [4,8), [8,10)
  std::size_t total_nodes = 0;
  for (const auto& g : graphs) {
    std::int64_t lo = g.nodes.front().frame, hi = g.nodes.back().frame;
    CHECK(hi - lo < cfg.clip_len);
    for (const auto& e : g.edges)
      CHECK(std::abs(g.nodes[e.src].frame - g.nodes[e.dst].frame) <= cfg.temporal_window);
    total_nodes += g.nodes.size();
  }
  CHECK(total_nodes == 20);  // 2 per frame, 10 frames
}

TEST_CASE("node stride drops frames") {
  GraphConfig cfg;
  cfg.temporal_window = 2;
  cfg.clip_len = 0;
  cfg.node_stride = 2;
  const auto graphs = build_graph(dense_bundle(1, 6), cfg);
  REQUIRE(graphs.size() == 1);
  CHECK(graphs[0].nodes.size() == 6);  // frames 0,2,4 with 2 nodes each
  for (const auto& node : graphs[0].nodes) CHECK(node.frame % 2 == 0);
}

TEST_CASE("graph_density basics") {
  HeteroGraph g;
  for (int i = 0; i < 4; ++i)
    g.nodes.push_back({NodeType::Visible, i, 0, "P", Vector::Zero(1), -1});
  CHECK_THROWS_AS(graph_density(HeteroGraph{}), std::invalid_argument);
  CHECK(graph_density(g) == 0.0);
  g.edges = {{0, 1, EdgeType::VV}, {0, 2, EdgeType::VV}, {0, 3, EdgeType::VV}};
  CHECK(graph_density(g) == doctest::Approx(0.5));
  g.edges.push_back({1, 2, EdgeType::VV});
  g.edges.push_back({1, 3, EdgeType::VV});
  g.edges.push_back({2, 3, EdgeType::VV});
  CHECK(graph_density(g) == doctest::Approx(1.0));
}

TEST_CASE("density is non-increasing in video length beyond twice the window") {
  GraphConfig cfg;
  cfg.temporal_window = 2;
  cfg.clip_len = 0;
  Scalar prev = 1.0;
  for (int frames = 5; frames <= 14; ++frames) {
    const auto graphs = build_graph(dense_bundle(2, frames), cfg);
    REQUIRE(graphs.size() == 1);
    const Scalar d = graph_density(graphs[0]);
    CHECK(d <= prev + 1e-12);
    prev = d;
  }
}

TEST_CASE("labeled bundles must cover every node") {
  VideoBundle b = dense_bundle(1, 2);
  b.labels[{"P0", 0}] = 1;  // missing P0@1, CW@0, CW@1
  CHECK_THROWS_AS(build_graph(b, GraphConfig{}), std::invalid_argument);
  b.labels[{"P0", 1}] = 0;
  b.labels[{"CW", 0}] = 1;
  b.labels[{"CW", 1}] = 0;
  const auto graphs = build_graph(b, GraphConfig{});
  CHECK(graphs[0].fully_labeled());
}
