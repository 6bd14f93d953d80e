#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sthg {

using Scalar = double;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexMatrix = Eigen::MatrixXi;

/// Reserved speaker id for the camera wearer.
inline constexpr const char* kWearerId = "CW";

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Axis-aligned face box in continuous pixel coordinates, corners (x1,y1)-(x2,y2).
struct BBox {
  Scalar x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  bool valid() const;
  Scalar area() const { return (x2 - x1) * (y2 - y1); }
};

/// Intersection-over-union of two valid boxes. 0 when disjoint, 1 iff equal.
/// Throws std::invalid_argument on a degenerate box.
Scalar iou(const BBox& a, const BBox& b);

/// frame_index / fps. Throws std::invalid_argument when fps <= 0.
Scalar frame_to_time(std::int64_t frame_index, Scalar fps);

// ---------------------------------------------------------------------------
// Tracks and streams
// ---------------------------------------------------------------------------

struct TrackEntry {
  std::int64_t frame = 0;
  BBox box;
  Vector feature;  // audio-visual, dimension d_av
};

/// One visible person's face track: frame-indexed boxes plus per-frame
/// audio-visual features. Frames strictly increasing, uniform feature dim.
struct FaceTrack {
  std::int64_t track_id = 0;
  std::string person_id;
  std::vector<TrackEntry> entries;

  void validate() const;
  Eigen::Index feature_dim() const;
};

struct WearerEntry {
  std::int64_t frame = 0;
  Vector feature;  // audio-only, dimension d_a
};

/// The camera wearer's per-frame audio features (the wearer is never visible).
struct WearerStream {
  std::vector<WearerEntry> entries;

  void validate() const;
  Eigen::Index feature_dim() const;
};

/// (person_id, frame) -> speaking flag in {0,1}.
using LabelMap = std::map<std::pair<std::string, std::int64_t>, int>;

/// Everything known about one video: visible tracks, the wearer stream and
/// (optionally) per-frame speaking labels.
struct VideoBundle {
  std::string video_id;
  Scalar fps = 30.0;
  std::vector<FaceTrack> tracks;
  std::optional<WearerStream> wearer;
  LabelMap labels;

  bool empty() const;
  /// Largest frame index present plus one; 0 for an empty bundle.
  std::int64_t num_frames() const;
  void validate() const;
};

// ---------------------------------------------------------------------------
// Heterogeneous graph
// ---------------------------------------------------------------------------

enum class NodeType { Visible, Wearer };
enum class EdgeType { VV, VW, WW };

/// Edge type is a pure function of the endpoint node types.
EdgeType edge_type_of(NodeType a, NodeType b);

const char* to_string(NodeType t);
const char* to_string(EdgeType t);

struct GraphNode {
  NodeType type = NodeType::Visible;
  std::int64_t track_id = -1;  // -1 for wearer nodes
  std::int64_t frame = 0;      // node timestamp
  std::string person;
  Vector feature;
  int label = -1;  // -1 = unlabeled
};

/// Undirected edge stored once with src < dst.
struct GraphEdge {
  int src = 0;
  int dst = 0;
  EdgeType type = EdgeType::VV;
};

/// Typed nodes (Visible | Wearer) plus typed undirected edges (VV | VW | WW).
struct HeteroGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;

  bool fully_labeled() const;
  /// Checks self-loop freedom, edge uniqueness, canonical (src<dst) storage,
  /// type consistency with endpoints, and all-or-none labeling.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Diarization segments
// ---------------------------------------------------------------------------

/// A speaker-attributed speech interval [t_start, t_end) in seconds.
struct Segment {
  std::string speaker;
  Scalar t_start = 0;
  Scalar t_end = 0;

  Scalar duration() const { return t_end - t_start; }
  void validate() const;

  friend bool operator==(const Segment&, const Segment&) = default;
};

using Diarization = std::vector<Segment>;

/// Sorts by (speaker, t_start, t_end).
void sort_segments(Diarization& d);

}  // namespace sthg
