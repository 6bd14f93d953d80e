#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sthg/io.hpp"
#include "sthg/pipeline.hpp"
#include "sthg/types.hpp"

namespace sthg {

/// Seeded synthetic conversation scenario.
///
/// Feature recipe: every coordinate is Gaussian base noise; a speaker's
/// speaking frames add speaking_signal on a designated block. Visible
/// speakers get +signal on the first visual coordinates and signal times a
/// per-person unit voice direction on the trailing audio block; the wearer
/// (whose base noise is wider, making its solo detection harder) gets signal
/// times its own voice direction on its audio-only feature. Injected wearer
/// false positives add a background voice direction at globally silent
/// frames.
struct ScenarioConfig {
  int num_videos = 4;
  std::int64_t num_frames = 300;
  Scalar fps = 30.0;
  int num_visible_speakers = 3;
  int d_av = 16;
  int d_a = 8;
  /// Feature shift when speaking; 0 = uninformative features.
  Scalar speaking_signal_strength = 4.0;
  /// Per-frame probability that the wearer's state is the anti-correlation
  /// rule (speaking iff no visible speaker is active) instead of its own
  /// Markov chain.
  Scalar cross_speaker_coupling = 0.5;
  /// Probability that a globally silent frame gains a fake wearer voice.
  Scalar cw_false_positive_rate = 0.0;
  /// Per-frame probability that the VAD oracle keeps the true speech state.
  Scalar vad_accuracy = 0.95;
  std::uint64_t seed = 7;

  void validate() const;
};

struct Scenario {
  std::vector<VideoBundle> videos;            // labeled
  std::vector<VadSegments> vads;              // parallel to videos
  std::vector<TranscriptEntry> transcripts;   // all videos, segment-aligned
  /// Frames per video where a fake wearer voice was injected (labels stay 0).
  std::vector<std::vector<std::int64_t>> cw_false_positive_frames;
};

/// Markov turn-taking simulation, deterministic per seed; videos draw from
/// independent sub-streams so they can be generated in parallel.
Scenario generate_scenario(const ScenarioConfig& cfg);

/// DER oracle: discretized time sampling at the given step plus exhaustive
/// search over injective speaker mappings. Algorithmically independent of
/// metrics::der, which partitions time at segment boundaries.
Scalar oracle_der(const Diarization& ref, const Diarization& hyp, Scalar step = 1e-3);

/// AP oracle: explicit threshold sweep over all distinct scores with step
/// integration of the precision-recall staircase. Matches average_precision
/// exactly when scores are distinct.
Scalar oracle_ap(const std::vector<std::pair<Scalar, int>>& scored);

}  // namespace sthg
