#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sthg/graph_builder.hpp"
#include "sthg/hetgnn.hpp"
#include "sthg/types.hpp"

namespace sthg {

enum class VadTarget { None, CwOnly, OthersOnly, All };
enum class VadMode { Intersect, Union };

const char* to_string(VadTarget t);
const char* to_string(VadMode m);
VadTarget vad_target_from_string(const std::string& s);
VadMode vad_mode_from_string(const std::string& s);

struct PostConfig {
  Scalar score_threshold = 0.5;      // inclusive: score >= threshold is positive
  Scalar min_segment_dur = 0.2;      // seconds; shorter segments are dropped
  Scalar merge_gap = 0.3;            // seconds; gaps strictly smaller are merged
  VadTarget vad_target = VadTarget::CwOnly;
  VadMode vad_mode = VadMode::Intersect;
  Scalar voice_match_threshold = 0.5;  // cosine similarity in [-1, 1]
  bool voice_match_enabled = false;

  void validate() const;
};

/// Speaker-agnostic speech spans in seconds; normalized = sorted and
/// non-overlapping.
struct VadSegments {
  std::vector<std::pair<Scalar, Scalar>> spans;

  /// Sorts and merges overlapping or touching spans, drops empty ones.
  void normalize();
  Scalar total_duration() const;
};

/// person -> frame -> score in [0, 1].
using FrameScores = std::map<std::string, std::map<std::int64_t, Scalar>>;

/// Thresholds per-person frame scores into segments: maximal runs of
/// consecutive positive frames become [first/fps, (last+1)/fps); segments
/// separated by gaps < merge_gap merge; segments shorter than min_segment_dur
/// are dropped. Empty input gives empty output.
Diarization scores_to_segments(const FrameScores& scores, Scalar fps, const PostConfig& cfg);

/// VAD fusion on the targeted speakers. Intersect replaces a targeted segment
/// with its intersection with the VAD union (splitting or deleting it); Union
/// extends it to the hull of itself and every overlapping VAD span. Untargeted
/// segments pass through unchanged; output is re-normalized per speaker.
Diarization vad_fuse(const Diarization& diar, const VadSegments& vad, const PostConfig& cfg);

struct VoiceMatchResult {
  Diarization segments;
  int dropped_low_similarity = 0;
  int dropped_no_frames = 0;  // segments covering no feature frames
};

/// Drops segments whose mean in-segment audio vector has cosine similarity to
/// the speaker's centroid below voice_match_threshold. The wearer's audio
/// vectors come from the wearer stream; a visible speaker's from the last
/// audio_dim coordinates of its track features (audio_dim defaults to the
/// wearer stream's feature dim). Identity when voice_match_enabled is false.
VoiceMatchResult voice_match(const Diarization& diar, const VideoBundle& bundle,
                             const PostConfig& cfg, int audio_dim = -1);

/// Ground-truth segments from bundle labels: consecutive positive frames per
/// person merge into [first/fps, (last+1)/fps).
Diarization labels_to_segments(const VideoBundle& bundle);

/// Model scores per person and frame. Multiple nodes mapping to the same
/// (person, frame) keep the max score.
FrameScores predict_frame_scores(const VideoBundle& bundle, const ModelParams& params,
                                 const GraphConfig& graph_cfg, const ModelConfig& model_cfg);

/// build_graph -> predict -> scores_to_segments -> vad_fuse -> voice_match,
/// deterministic end to end.
Diarization run_pipeline(const VideoBundle& bundle, const ModelParams& params,
                         const GraphConfig& graph_cfg, const ModelConfig& model_cfg,
                         const PostConfig& post_cfg, const VadSegments& vad);

}  // namespace sthg
