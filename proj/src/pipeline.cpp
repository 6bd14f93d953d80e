#include "sthg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sthg {

const char* to_string(VadTarget t) {
  switch (t) {
    case VadTarget::None: return "NONE";
    case VadTarget::CwOnly: return "CW_ONLY";
    case VadTarget::OthersOnly: return "OTHERS_ONLY";
    default: return "ALL";
  }
}

const char* to_string(VadMode m) { return m == VadMode::Intersect ? "INTERSECT" : "UNION"; }

VadTarget vad_target_from_string(const std::string& s) {
  if (s == "NONE") return VadTarget::None;
  if (s == "CW_ONLY") return VadTarget::CwOnly;
  if (s == "OTHERS_ONLY") return VadTarget::OthersOnly;
  if (s == "ALL") return VadTarget::All;
  throw std::invalid_argument("unknown vad_target '" + s + "'");
}

VadMode vad_mode_from_string(const std::string& s) {
  if (s == "INTERSECT") return VadMode::Intersect;
  if (s == "UNION") return VadMode::Union;
  throw std::invalid_argument("unknown vad_mode '" + s + "'");
}

void PostConfig::validate() const {
  if (!(score_threshold > 0 && score_threshold < 1))
    throw std::invalid_argument("PostConfig: score_threshold must be in (0,1)");
  if (min_segment_dur < 0 || merge_gap < 0)
    throw std::invalid_argument("PostConfig: durations must be >= 0");
  if (!(voice_match_threshold >= -1 && voice_match_threshold <= 1))
    throw std::invalid_argument("PostConfig: voice_match_threshold must be in [-1,1]");
}

void VadSegments::normalize() {
  std::sort(spans.begin(), spans.end());
  std::vector<std::pair<Scalar, Scalar>> merged;
  for (const auto& [lo, hi] : spans) {
    if (!(hi > lo)) continue;
    if (!merged.empty() && lo <= merged.back().second)
      merged.back().second = std::max(merged.back().second, hi);
    else
      merged.emplace_back(lo, hi);
  }
  spans = std::move(merged);
}

Scalar VadSegments::total_duration() const {
  Scalar total = 0;
  for (const auto& [lo, hi] : spans) total += hi - lo;
  return total;
}

Diarization scores_to_segments(const FrameScores& scores, Scalar fps, const PostConfig& cfg) {
  cfg.validate();
  if (!(fps > 0)) throw std::invalid_argument("scores_to_segments: fps must be > 0");
  Diarization out;
  for (const auto& [person, frames] : scores) {
    // Maximal runs of consecutive positive frames.
    Diarization segs;
    std::int64_t run_first = -1, run_last = -1;
    auto flush = [&]() {
      if (run_first >= 0)
        segs.push_back({person, frame_to_time(run_first, fps), frame_to_time(run_last + 1, fps)});
      run_first = -1;
    };
    for (const auto& [frame, score] : frames) {
      if (score >= cfg.score_threshold) {
        if (run_first >= 0 && frame == run_last + 1) {
          run_last = frame;
        } else {
          flush();
          run_first = run_last = frame;
        }
      } else {
        flush();
      }
    }
    flush();

    // Merge close segments, then drop short ones.
    Diarization merged;
    for (const auto& s : segs) {
      if (!merged.empty() && s.t_start - merged.back().t_end < cfg.merge_gap)
        merged.back().t_end = s.t_end;
      else
        merged.push_back(s);
    }
    for (const auto& s : merged)
      if (s.duration() >= cfg.min_segment_dur) out.push_back(s);
  }
  sort_segments(out);
  return out;
}

namespace {

bool targeted(const Segment& s, VadTarget target) {
  switch (target) {
    case VadTarget::None: return false;
    case VadTarget::CwOnly: return s.speaker == kWearerId;
    case VadTarget::OthersOnly: return s.speaker != kWearerId;
    default: return true;
  }
}

/// Merge overlapping or touching same-speaker segments.
Diarization renormalize(Diarization d) {
  sort_segments(d);
  Diarization out;
  for (const auto& s : d) {
    if (!out.empty() && out.back().speaker == s.speaker && s.t_start <= out.back().t_end)
      out.back().t_end = std::max(out.back().t_end, s.t_end);
    else
      out.push_back(s);
  }
  return out;
}

}  // namespace

Diarization vad_fuse(const Diarization& diar, const VadSegments& vad, const PostConfig& cfg) {
  cfg.validate();
  VadSegments norm = vad;
  norm.normalize();

  Diarization out;
  for (const auto& seg : diar) {
    seg.validate();
    if (!targeted(seg, cfg.vad_target)) {
      out.push_back(seg);
      continue;
    }
    if (cfg.vad_mode == VadMode::Intersect) {
      for (const auto& [lo, hi] : norm.spans) {
        const Scalar a = std::max(seg.t_start, lo);
        const Scalar b = std::min(seg.t_end, hi);
        if (b > a) out.push_back({seg.speaker, a, b});
      }
    } else {  // Union: hull of the segment and all overlapping spans
      Scalar a = seg.t_start, b = seg.t_end;
      for (const auto& [lo, hi] : norm.spans)
        if (hi > seg.t_start && lo < seg.t_end) {
          a = std::min(a, lo);
          b = std::max(b, hi);
        }
      out.push_back({seg.speaker, a, b});
    }
  }
  return renormalize(std::move(out));
}

namespace {

/// Audio vector for (person, frame), or empty when uncovered.
Vector audio_at(const VideoBundle& bundle, const std::string& person, std::int64_t frame,
                int audio_dim) {
  if (person == kWearerId) {
    if (!bundle.wearer) return {};
    const auto& entries = bundle.wearer->entries;
    const auto it = std::lower_bound(entries.begin(), entries.end(), frame,
                                     [](const WearerEntry& e, std::int64_t f) { return e.frame < f; });
    if (it == entries.end() || it->frame != frame) return {};
    return it->feature;
  }
  for (const auto& track : bundle.tracks) {
    if (track.person_id != person) continue;
    const auto it = std::lower_bound(track.entries.begin(), track.entries.end(), frame,
                                     [](const TrackEntry& e, std::int64_t f) { return e.frame < f; });
    if (it == track.entries.end() || it->frame != frame) continue;
    if (it->feature.size() < audio_dim)
      throw std::invalid_argument("voice_match: track feature smaller than audio_dim");
    return it->feature.tail(audio_dim);
  }
  return {};
}

Scalar cosine(const Vector& a, const Vector& b) {
  const Scalar na = a.norm(), nb = b.norm();
  if (na == 0 || nb == 0) return 0;
  return a.dot(b) / (na * nb);
}

}  // namespace

VoiceMatchResult voice_match(const Diarization& diar, const VideoBundle& bundle,
                             const PostConfig& cfg, int audio_dim) {
  cfg.validate();
  if (!cfg.voice_match_enabled) return {diar, 0, 0};
  if (audio_dim < 0) {
    if (!bundle.wearer || bundle.wearer->entries.empty())
      throw std::invalid_argument("voice_match: audio_dim not given and no wearer stream to infer it");
    audio_dim = static_cast<int>(bundle.wearer->feature_dim());
  }

  struct SegmentAudio {
    std::size_t index;
    Vector mean;
    bool covered;
  };
  std::map<std::string, std::vector<SegmentAudio>> by_speaker;
  std::map<std::string, std::pair<Vector, std::int64_t>> centroid_acc;

  for (std::size_t i = 0; i < diar.size(); ++i) {
    const Segment& seg = diar[i];
    seg.validate();
    const auto first = static_cast<std::int64_t>(std::ceil(seg.t_start * bundle.fps - 1e-9));
    Vector sum;
    std::int64_t count = 0;
    for (std::int64_t f = std::max<std::int64_t>(first, 0); frame_to_time(f, bundle.fps) < seg.t_end; ++f) {
      const Vector a = audio_at(bundle, seg.speaker, f, audio_dim);
      if (a.size() == 0) continue;
      if (sum.size() == 0) sum = Vector::Zero(a.size());
      sum += a;
      ++count;
    }
    SegmentAudio sa{i, {}, count > 0};
    if (count > 0) {
      sa.mean = sum / static_cast<Scalar>(count);
      auto& [acc, n] = centroid_acc[seg.speaker];
      if (acc.size() == 0) acc = Vector::Zero(sum.size());
      acc += sum;
      n += count;
    }
    by_speaker[seg.speaker].push_back(std::move(sa));
  }

  VoiceMatchResult result;
  for (const auto& [speaker, segs] : by_speaker) {
    Vector centroid;
    if (const auto it = centroid_acc.find(speaker); it != centroid_acc.end())
      centroid = it->second.first / static_cast<Scalar>(it->second.second);
    for (const auto& sa : segs) {
      if (!sa.covered) {
        ++result.dropped_no_frames;
        continue;
      }
      if (cosine(sa.mean, centroid) < cfg.voice_match_threshold) {
        ++result.dropped_low_similarity;
        continue;
      }
      result.segments.push_back(diar[sa.index]);
    }
  }
  sort_segments(result.segments);
  return result;
}

Diarization labels_to_segments(const VideoBundle& bundle) {
  std::map<std::string, std::vector<std::int64_t>> positives;
  for (const auto& [key, value] : bundle.labels)
    if (value == 1) positives[key.first].push_back(key.second);
  Diarization out;
  for (auto& [person, frames] : positives) {
    std::sort(frames.begin(), frames.end());
    std::int64_t first = frames.front(), last = frames.front();
    for (std::size_t i = 1; i <= frames.size(); ++i) {
      if (i < frames.size() && frames[i] == last + 1) {
        last = frames[i];
        continue;
      }
      out.push_back({person, frame_to_time(first, bundle.fps), frame_to_time(last + 1, bundle.fps)});
      if (i < frames.size()) first = last = frames[i];
    }
  }
  sort_segments(out);
  return out;
}

FrameScores predict_frame_scores(const VideoBundle& bundle, const ModelParams& params,
                                 const GraphConfig& graph_cfg, const ModelConfig& model_cfg) {
  FrameScores scores;
  for (const HeteroGraph& g : build_graph(bundle, graph_cfg)) {
    const Vector s = predict(g, params, model_cfg);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      auto& slot = scores[g.nodes[i].person];
      const auto [it, inserted] = slot.emplace(g.nodes[i].frame, s(static_cast<Eigen::Index>(i)));
      if (!inserted) it->second = std::max(it->second, s(static_cast<Eigen::Index>(i)));
    }
  }
  return scores;
}

Diarization run_pipeline(const VideoBundle& bundle, const ModelParams& params,
                         const GraphConfig& graph_cfg, const ModelConfig& model_cfg,
                         const PostConfig& post_cfg, const VadSegments& vad) {
  post_cfg.validate();
  const FrameScores scores = predict_frame_scores(bundle, params, graph_cfg, model_cfg);
  Diarization diar = scores_to_segments(scores, bundle.fps, post_cfg);
  diar = vad_fuse(diar, vad, post_cfg);
  return voice_match(diar, bundle, post_cfg, model_cfg.d_a).segments;
}

}  // namespace sthg
