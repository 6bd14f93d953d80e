#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sthg/types.hpp"

namespace sthg {

/// Rank-based average precision over (score, label in {0,1}) pairs: sort by
/// score descending with ties kept in stable input order, then average the
/// precision at each positive. Throws when no positive labels exist.
Scalar average_precision(const std::vector<std::pair<Scalar, int>>& scored);

enum class Population { Visible, Wearer, All };

struct ScoredNode {
  Scalar score = 0;
  int label = 0;
  bool wearer = false;
};

/// Perfect-detector mAP: pools the selected population's score/label pairs
/// across all videos and computes average_precision.
Scalar asd_map(const std::vector<std::vector<ScoredNode>>& per_video, Population pop);

struct ScoredDetection {
  std::int64_t frame = 0;
  BBox box;
  Scalar score = 0;
  std::string id;
};

struct GtFace {
  std::int64_t frame = 0;
  BBox box;
  int speaking = 0;
};

/// Detection-matched mAP: per frame, predictions (descending score) greedily
/// claim the unmatched GT box of highest IoU above iou_thr; matched
/// predictions inherit the GT speaking flag as their label, unmatched ones get
/// label 0; AP is then computed over all predictions. Throws when no speaking
/// GT exists anywhere or iou_thr is outside (0,1).
Scalar asd_map_at_iou(const std::vector<ScoredDetection>& preds, const std::vector<GtFace>& gt,
                      Scalar iou_thr = 0.5);

struct DERBreakdown {
  Scalar missed = 0;
  Scalar false_alarm = 0;
  Scalar confusion = 0;
  Scalar total_ref_speech = 0;

  Scalar der() const { return (missed + false_alarm + confusion) / total_ref_speech; }
  DERBreakdown& operator+=(const DERBreakdown& other);
};

/// Diarization error rate with an optimal one-to-one ref/hyp speaker mapping
/// (exhaustive search, <= 8 speakers per side). Scoring partitions time at all
/// segment endpoints; +-collar around every ref boundary is excluded. Throws
/// when total ref speech is zero.
DERBreakdown der(const Diarization& ref, const Diarization& hyp, Scalar collar = 0.0);

/// (substitutions + deletions + insertions) / |ref| by minimal edit distance.
/// Throws on empty ref.
Scalar wer(const std::vector<std::string>& ref_words, const std::vector<std::string>& hyp_words);

}  // namespace sthg
