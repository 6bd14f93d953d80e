#include "sthg/graph_builder.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <tuple>

namespace sthg {

void GraphConfig::validate() const {
  if (temporal_window < 0) throw std::invalid_argument("GraphConfig: temporal_window must be >= 0");
  if (clip_len < 0) throw std::invalid_argument("GraphConfig: clip_len must be >= 0");
  if (clip_len != 0 && clip_len <= temporal_window)
    throw std::invalid_argument("GraphConfig: clip_len must be 0 or > temporal_window");
  if (node_stride < 1) throw std::invalid_argument("GraphConfig: node_stride must be >= 1");
}

namespace {

int lookup_label(const VideoBundle& bundle, const std::string& person, std::int64_t frame) {
  if (bundle.labels.empty()) return -1;
  const auto it = bundle.labels.find({person, frame});
  if (it == bundle.labels.end())
    throw std::invalid_argument("build_graph: bundle " + bundle.video_id + " has labels but none for (" +
                                person + ", frame " + std::to_string(frame) + ")");
  return it->second;
}

HeteroGraph build_clip(const VideoBundle& bundle, const GraphConfig& cfg, std::int64_t clip_begin,
                       std::int64_t clip_end) {
  HeteroGraph g;
  // frame -> node indices sharing that frame, in node emission order.
  std::map<std::int64_t, std::vector<int>> frame_nodes;
  // identity chains for temporal edges: node indices in ascending frame order.
  std::map<std::int64_t, std::vector<int>> track_chain;  // keyed by track_id; -1 = wearer
  struct Pending {
    std::int64_t frame;
    const FaceTrack* track;   // nullptr for wearer
    const Vector* feature;
  };
  std::map<std::int64_t, std::vector<Pending>> by_frame;
  for (const auto& track : bundle.tracks)
    for (const auto& e : track.entries)
      if (e.frame >= clip_begin && e.frame < clip_end && e.frame % cfg.node_stride == 0)
        by_frame[e.frame].push_back({e.frame, &track, &e.feature});
  if (bundle.wearer)
    for (const auto& e : bundle.wearer->entries)
      if (e.frame >= clip_begin && e.frame < clip_end && e.frame % cfg.node_stride == 0)
        by_frame[e.frame].push_back({e.frame, nullptr, &e.feature});

  for (const auto& [frame, pendings] : by_frame) {
    for (const auto& p : pendings) {
      GraphNode node;
      node.frame = frame;
      node.feature = *p.feature;
      if (p.track != nullptr) {
        node.type = NodeType::Visible;
        node.track_id = p.track->track_id;
        node.person = p.track->person_id;
      } else {
        node.type = NodeType::Wearer;
        node.track_id = -1;
        node.person = kWearerId;
      }
      node.label = lookup_label(bundle, node.person, frame);
      const int idx = static_cast<int>(g.nodes.size());
      g.nodes.push_back(std::move(node));
      frame_nodes[frame].push_back(idx);
      track_chain[p.track ? p.track->track_id : -1].push_back(idx);
    }
  }

  // Spatial: complete graph within each frame.
  for (const auto& [frame, idxs] : frame_nodes)
    for (std::size_t a = 0; a < idxs.size(); ++a)
      for (std::size_t b = a + 1; b < idxs.size(); ++b)
        g.edges.push_back({idxs[a], idxs[b],
                           edge_type_of(g.nodes[idxs[a]].type, g.nodes[idxs[b]].type)});

  // Temporal: same identity, frame gap in [1, temporal_window].
  for (const auto& [tid, chain] : track_chain) {
    for (std::size_t a = 0; a < chain.size(); ++a) {
      for (std::size_t b = a + 1; b < chain.size(); ++b) {
        const std::int64_t gap = g.nodes[chain[b]].frame - g.nodes[chain[a]].frame;
        if (gap > cfg.temporal_window) break;
        if (gap >= 1)
          g.edges.push_back({chain[a], chain[b],
                             edge_type_of(g.nodes[chain[a]].type, g.nodes[chain[b]].type)});
      }
    }
  }

  for (auto& e : g.edges)
    if (e.src > e.dst) std::swap(e.src, e.dst);
  std::sort(g.edges.begin(), g.edges.end(), [](const GraphEdge& a, const GraphEdge& b) {
    return std::tie(a.src, a.dst) < std::tie(b.src, b.dst);
  });
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end(),
                            [](const GraphEdge& a, const GraphEdge& b) {
                              return a.src == b.src && a.dst == b.dst;
                            }),
                g.edges.end());
  return g;
}

}  // namespace

std::vector<HeteroGraph> build_graph(const VideoBundle& bundle, const GraphConfig& cfg) {
  cfg.validate();
  bundle.validate();
  if (bundle.empty()) throw std::invalid_argument("build_graph: empty video " + bundle.video_id);

  const std::int64_t num_frames = bundle.num_frames();
  std::vector<HeteroGraph> graphs;
  if (cfg.clip_len == 0) {
    graphs.push_back(build_clip(bundle, cfg, 0, num_frames));
  } else {
    for (std::int64_t begin = 0; begin < num_frames; begin += cfg.clip_len) {
      HeteroGraph g = build_clip(bundle, cfg, begin, begin + cfg.clip_len);
      if (!g.nodes.empty()) graphs.push_back(std::move(g));
    }
  }
  return graphs;
}

Scalar graph_density(const HeteroGraph& g) {
  const auto n = static_cast<Scalar>(g.nodes.size());
  if (g.nodes.size() < 2) throw std::invalid_argument("graph_density: need at least 2 nodes");
  return static_cast<Scalar>(g.edges.size()) / (n * (n - 1) / 2);
}

}  // namespace sthg
