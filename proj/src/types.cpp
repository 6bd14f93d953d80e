#include "sthg/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace sthg {

bool BBox::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
         x1 < x2 && y1 < y2;
}

Scalar iou(const BBox& a, const BBox& b) {
  if (!a.valid() || !b.valid()) throw std::invalid_argument("iou: invalid box");
  const Scalar ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const Scalar iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (ix <= 0 || iy <= 0) return 0.0;
  const Scalar inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

Scalar frame_to_time(std::int64_t frame_index, Scalar fps) {
  if (!(fps > 0)) throw std::invalid_argument("frame_to_time: fps must be > 0");
  return static_cast<Scalar>(frame_index) / fps;
}

void FaceTrack::validate() const {
  if (entries.empty()) throw std::invalid_argument("FaceTrack: empty track " + std::to_string(track_id));
  const Eigen::Index d = entries.front().feature.size();
  std::int64_t prev = -1;
  for (const auto& e : entries) {
    if (e.frame <= prev)
      throw std::invalid_argument("FaceTrack " + std::to_string(track_id) +
                                  ": frame indices not strictly increasing");
    if (e.frame < 0) throw std::invalid_argument("FaceTrack: negative frame index");
    if (!e.box.valid()) throw std::invalid_argument("FaceTrack: invalid box at frame " + std::to_string(e.frame));
    if (e.feature.size() != d) throw std::invalid_argument("FaceTrack: inconsistent feature dimension");
    if (!e.feature.allFinite()) throw std::invalid_argument("FaceTrack: non-finite feature");
    prev = e.frame;
  }
}

Eigen::Index FaceTrack::feature_dim() const {
  return entries.empty() ? 0 : entries.front().feature.size();
}

void WearerStream::validate() const {
  const Eigen::Index d = entries.empty() ? 0 : entries.front().feature.size();
  std::int64_t prev = -1;
  for (const auto& e : entries) {
    if (e.frame <= prev) throw std::invalid_argument("WearerStream: frame indices not strictly increasing");
    if (e.frame < 0) throw std::invalid_argument("WearerStream: negative frame index");
    if (e.feature.size() != d) throw std::invalid_argument("WearerStream: inconsistent feature dimension");
    if (!e.feature.allFinite()) throw std::invalid_argument("WearerStream: non-finite feature");
    prev = e.frame;
  }
}

Eigen::Index WearerStream::feature_dim() const {
  return entries.empty() ? 0 : entries.front().feature.size();
}

bool VideoBundle::empty() const {
  if (wearer && !wearer->entries.empty()) return false;
  for (const auto& t : tracks)
    if (!t.entries.empty()) return false;
  return true;
}

std::int64_t VideoBundle::num_frames() const {
  std::int64_t last = -1;
  for (const auto& t : tracks)
    if (!t.entries.empty()) last = std::max(last, t.entries.back().frame);
  if (wearer && !wearer->entries.empty()) last = std::max(last, wearer->entries.back().frame);
  return last + 1;
}

void VideoBundle::validate() const {
  if (!(fps > 0)) throw std::invalid_argument("VideoBundle " + video_id + ": fps must be > 0");
  std::set<std::int64_t> track_ids;
  for (const auto& t : tracks) {
    t.validate();
    if (t.person_id == kWearerId)
      throw std::invalid_argument("VideoBundle " + video_id + ": person id 'CW' is reserved for the wearer");
    if (!track_ids.insert(t.track_id).second)
      throw std::invalid_argument("VideoBundle " + video_id + ": duplicate track id " +
                                  std::to_string(t.track_id));
  }
  if (wearer) wearer->validate();
  for (const auto& [key, value] : labels)
    if (value != 0 && value != 1)
      throw std::invalid_argument("VideoBundle " + video_id + ": label must be 0 or 1");
}

EdgeType edge_type_of(NodeType a, NodeType b) {
  if (a == NodeType::Visible && b == NodeType::Visible) return EdgeType::VV;
  if (a == NodeType::Wearer && b == NodeType::Wearer) return EdgeType::WW;
  return EdgeType::VW;
}

const char* to_string(NodeType t) {
  return t == NodeType::Visible ? "Visible" : "Wearer";
}

const char* to_string(EdgeType t) {
  switch (t) {
    case EdgeType::VV: return "VV";
    case EdgeType::VW: return "VW";
    default: return "WW";
  }
}

bool HeteroGraph::fully_labeled() const {
  return std::all_of(nodes.begin(), nodes.end(),
                     [](const GraphNode& n) { return n.label == 0 || n.label == 1; });
}

void HeteroGraph::validate() const {
  const int n = static_cast<int>(nodes.size());
  std::set<std::pair<int, int>> seen;
  for (const auto& e : edges) {
    if (e.src < 0 || e.dst < 0 || e.src >= n || e.dst >= n)
      throw std::invalid_argument("HeteroGraph: edge endpoint out of range");
    if (e.src == e.dst) throw std::invalid_argument("HeteroGraph: self-loop");
    if (e.src > e.dst) throw std::invalid_argument("HeteroGraph: edge not stored canonically (src < dst)");
    if (!seen.insert({e.src, e.dst}).second) throw std::invalid_argument("HeteroGraph: duplicate edge");
    if (e.type != edge_type_of(nodes[e.src].type, nodes[e.dst].type))
      throw std::invalid_argument("HeteroGraph: edge type inconsistent with endpoints");
  }
  std::set<std::pair<std::int64_t, std::int64_t>> vis_keys;
  std::set<std::int64_t> wearer_frames;
  bool any_label = false, any_unlabeled = false;
  for (const auto& node : nodes) {
    if (node.type == NodeType::Visible) {
      if (!vis_keys.insert({node.track_id, node.frame}).second)
        throw std::invalid_argument("HeteroGraph: duplicate (track, frame) node");
    } else if (!wearer_frames.insert(node.frame).second) {
      throw std::invalid_argument("HeteroGraph: duplicate wearer frame node");
    }
    if (node.label == 0 || node.label == 1)
      any_label = true;
    else
      any_unlabeled = true;
  }
  if (any_label && any_unlabeled)
    throw std::invalid_argument("HeteroGraph: labels must be present for all nodes or none");
}

void Segment::validate() const {
  if (!std::isfinite(t_start) || !std::isfinite(t_end) || t_start < 0 || !(t_start < t_end))
    throw std::invalid_argument("Segment: requires 0 <= t_start < t_end, finite");
}

void sort_segments(Diarization& d) {
  std::stable_sort(d.begin(), d.end(), [](const Segment& a, const Segment& b) {
    return std::tie(a.speaker, a.t_start, a.t_end) < std::tie(b.speaker, b.t_start, b.t_end);
  });
}

}  // namespace sthg
