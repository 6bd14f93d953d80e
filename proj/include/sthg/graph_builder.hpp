#pragma once

#include <cstdint>
#include <vector>

#include "sthg/types.hpp"

namespace sthg {

/// Controls how a video becomes spatial-temporal graphs.
struct GraphConfig {
  /// Max frame gap for temporal (same-identity) edges; 0 disables them.
  std::int64_t temporal_window = 15;
  /// Frames per sub-graph; 0 builds one graph for the whole video.
  std::int64_t clip_len = 300;
  /// Keep frames with frame_index % node_stride == 0.
  std::int64_t node_stride = 1;

  void validate() const;
};

/// Converts a bundle into one graph per clip.
///
/// Per retained frame: one node per visible track entry plus a wearer node
/// where the wearer stream covers the frame. Spatial edges join every node
/// pair sharing a frame, regardless of identity. Temporal edges join
/// same-identity nodes (same track_id, or both wearer) whose frame gap lies in
/// [1, temporal_window], and never cross clip boundaries. Pure and
/// deterministic: node order is (frame, tracks-in-bundle-order, wearer last),
/// edges are canonical and sorted.
///
/// Throws std::invalid_argument on an empty bundle or invalid config. When the
/// bundle carries labels, they must cover every emitted node.
std::vector<HeteroGraph> build_graph(const VideoBundle& bundle, const GraphConfig& cfg);

/// |undirected edges| / (n*(n-1)/2). Throws for n < 2.
Scalar graph_density(const HeteroGraph& g);

}  // namespace sthg
