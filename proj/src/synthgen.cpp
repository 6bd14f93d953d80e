#include "sthg/synthgen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <stdexcept>

#include "sthg/rng.hpp"

namespace sthg {

void ScenarioConfig::validate() const {
  if (num_videos <= 0 || num_frames <= 0 || num_visible_speakers <= 0)
    throw std::invalid_argument("ScenarioConfig: counts must be positive");
  if (!(fps > 0)) throw std::invalid_argument("ScenarioConfig: fps must be > 0");
  if (d_a <= 0 || d_av <= d_a)
    throw std::invalid_argument("ScenarioConfig: need d_av > d_a > 0 (audio block is the tail of d_av)");
  if (!(speaking_signal_strength >= 0))
    throw std::invalid_argument("ScenarioConfig: speaking_signal_strength must be >= 0");
  for (const Scalar rate : {cross_speaker_coupling, cw_false_positive_rate, vad_accuracy})
    if (!(rate >= 0 && rate <= 1)) throw std::invalid_argument("ScenarioConfig: rates must be in [0,1]");
}

namespace {

// Visible turn-taking chain: stationary speaking rate 1/3, mean turn ~1s at
// 30fps.
constexpr Scalar kStartProb = 0.015;
constexpr Scalar kStopProb = 0.03;

// Wider wearer base noise: the wearer's solo audio evidence is deliberately
// weaker than the visible speakers' audio-visual evidence, leaving headroom
// that only cross-speaker context can close.
constexpr Scalar kWearerNoiseScale = 1.2;

// Split of the wearer signature between the fixed pattern and the per-video
// voice direction (squares sum to 1).
constexpr Scalar kSignatureFixedWeight = 0.85;
constexpr Scalar kSignatureVoiceWeight = 0.527;

// The wearer's rule choice (anti-correlation vs own chain) is redrawn with
// this per-frame probability, so each frame follows the anti rule with
// probability cross_speaker_coupling marginally while keeping turn-scale
// persistence instead of frame-level flicker.
constexpr Scalar kRuleRedrawProb = 0.05;

constexpr Scalar kWordsPerSecond = 3.0;

const char* kVocabulary[] = {"alpha", "bravo", "charlie", "delta", "echo",  "foxtrot",
                             "golf",  "hotel", "india",   "juliet", "kilo", "lima"};

std::vector<int> markov_chain(Rng& rng, std::int64_t frames) {
  std::vector<int> state(static_cast<std::size_t>(frames));
  int cur = rng.bernoulli(1.0 / 3.0) ? 1 : 0;
  for (std::int64_t t = 0; t < frames; ++t) {
    if (cur == 0 && rng.bernoulli(kStartProb)) cur = 1;
    else if (cur == 1 && rng.bernoulli(kStopProb)) cur = 0;
    state[static_cast<std::size_t>(t)] = cur;
  }
  return state;
}

Vector unit_direction(Rng& rng, int dim) {
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.normal();
  const Scalar n = v.norm();
  return n > 0 ? Vector(v / n) : Vector::Unit(dim, 0);
}

/// Wearer speech signature: a mix of a fixed coordinate pattern (the part a
/// model can learn across videos) and the per-video voice direction (the part
/// voice matching keys on).
Vector wearer_signature(const Vector& voice) {
  const int dim = static_cast<int>(voice.size());
  const int block = std::min<int>(2, dim);
  Vector fixed = Vector::Zero(dim);
  for (int i = 0; i < block; ++i) fixed(i) = 1.0 / std::sqrt(static_cast<Scalar>(block));
  return kSignatureFixedWeight * fixed + kSignatureVoiceWeight * voice;
}

Vector quantized(Vector v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = quantize_sig9(v(i));
  return v;
}

std::string person_name(int k) { return "P" + std::to_string(k); }

}  // namespace

Scenario generate_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  Scenario scenario;
  const int visual_block = std::min(4, cfg.d_av - cfg.d_a);

  for (int v = 0; v < cfg.num_videos; ++v) {
    const std::uint64_t video_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(v));
    Rng rng_turns(derive_seed(video_seed, 1));
    Rng rng_voices(derive_seed(video_seed, 2));
    Rng rng_feat(derive_seed(video_seed, 3));
    Rng rng_boxes(derive_seed(video_seed, 4));
    Rng rng_vad(derive_seed(video_seed, 5));
    Rng rng_words(derive_seed(video_seed, 6));

    const std::int64_t frames = cfg.num_frames;
    const int n_vis = cfg.num_visible_speakers;

    // Turn-taking: independent chains for the visible speakers, then the
    // wearer follows either the anti-correlation rule or its own chain.
    std::vector<std::vector<int>> visible(static_cast<std::size_t>(n_vis));
    for (auto& chain : visible) chain = markov_chain(rng_turns, frames);
    const std::vector<int> cw_chain = markov_chain(rng_turns, frames);
    std::vector<int> cw(static_cast<std::size_t>(frames));
    bool use_anti = rng_turns.bernoulli(cfg.cross_speaker_coupling);
    for (std::int64_t t = 0; t < frames; ++t) {
      if (t > 0 && rng_turns.bernoulli(kRuleRedrawProb))
        use_anti = rng_turns.bernoulli(cfg.cross_speaker_coupling);
      int any_visible = 0;
      for (const auto& chain : visible) any_visible |= chain[static_cast<std::size_t>(t)];
      const int anti = any_visible ? 0 : 1;
      cw[static_cast<std::size_t>(t)] = use_anti ? anti : cw_chain[static_cast<std::size_t>(t)];
    }

    std::vector<Vector> voice(static_cast<std::size_t>(n_vis));
    for (auto& u : voice) u = unit_direction(rng_voices, cfg.d_a);
    const Vector voice_cw = unit_direction(rng_voices, cfg.d_a);
    const Vector voice_background = unit_direction(rng_voices, cfg.d_a);

    // Wearer false positives: a fake voice at globally silent frames.
    std::vector<std::int64_t> fp_frames;
    std::vector<char> fp_mask(static_cast<std::size_t>(frames), 0);
    for (std::int64_t t = 0; t < frames; ++t) {
      int anyone = cw[static_cast<std::size_t>(t)];
      for (const auto& chain : visible) anyone |= chain[static_cast<std::size_t>(t)];
      if (!anyone && rng_feat.bernoulli(cfg.cw_false_positive_rate)) {
        fp_mask[static_cast<std::size_t>(t)] = 1;
        fp_frames.push_back(t);
      }
    }

    VideoBundle bundle;
    bundle.video_id = "synth" + std::to_string(v);
    bundle.fps = cfg.fps;

    const Scalar s = cfg.speaking_signal_strength;
    for (int k = 0; k < n_vis; ++k) {
      FaceTrack track;
      track.track_id = k;
      track.person_id = person_name(k);
      track.entries.reserve(static_cast<std::size_t>(frames));
      for (std::int64_t t = 0; t < frames; ++t) {
        TrackEntry e;
        e.frame = t;
        const Scalar bx = 20.0 + 130.0 * k + rng_boxes.uniform(-3.0, 3.0);
        const Scalar by = 40.0 + rng_boxes.uniform(-3.0, 3.0);
        e.box = {quantize_sig9(bx), quantize_sig9(by), quantize_sig9(bx + 100.0),
                 quantize_sig9(by + 100.0)};
        Vector f(cfg.d_av);
        for (int i = 0; i < cfg.d_av; ++i) f(i) = rng_feat.normal();
        if (visible[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)]) {
          f.head(visual_block).array() += s;
          f.tail(cfg.d_a) += s * voice[static_cast<std::size_t>(k)];
        }
        e.feature = quantized(std::move(f));
        track.entries.push_back(std::move(e));
        bundle.labels[{track.person_id, t}] = visible[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)];
      }
      bundle.tracks.push_back(std::move(track));
    }

    WearerStream wearer;
    wearer.entries.reserve(static_cast<std::size_t>(frames));
    const Vector cw_signature = wearer_signature(voice_cw);
    const Vector background_signature = wearer_signature(voice_background);
    for (std::int64_t t = 0; t < frames; ++t) {
      WearerEntry e;
      e.frame = t;
      Vector f(cfg.d_a);
      for (int i = 0; i < cfg.d_a; ++i) f(i) = kWearerNoiseScale * rng_feat.normal();
      if (cw[static_cast<std::size_t>(t)]) f += s * cw_signature;
      if (fp_mask[static_cast<std::size_t>(t)]) f += s * background_signature;
      e.feature = quantized(std::move(f));
      wearer.entries.push_back(std::move(e));
      bundle.labels[{kWearerId, t}] = cw[static_cast<std::size_t>(t)];
    }
    bundle.wearer = std::move(wearer);
    bundle.validate();

    // VAD: union of true speech, corrupted per frame to the requested
    // accuracy.
    VadSegments vad;
    {
      std::int64_t run_first = -1;
      auto flush = [&](std::int64_t end_frame) {
        if (run_first >= 0)
          vad.spans.emplace_back(quantize_sig9(frame_to_time(run_first, cfg.fps)),
                                 quantize_sig9(frame_to_time(end_frame, cfg.fps)));
        run_first = -1;
      };
      for (std::int64_t t = 0; t < frames; ++t) {
        int speech = cw[static_cast<std::size_t>(t)];
        for (const auto& chain : visible) speech |= chain[static_cast<std::size_t>(t)];
        if (!rng_vad.bernoulli(cfg.vad_accuracy)) speech = 1 - speech;
        if (speech && run_first < 0) run_first = t;
        if (!speech) flush(t);
      }
      flush(frames);
      vad.normalize();
    }

    // Transcripts: one per ground-truth segment.
    for (const Segment& seg : labels_to_segments(bundle)) {
      TranscriptEntry t;
      t.video_id = bundle.video_id;
      t.speaker = seg.speaker;
      t.t_start = seg.t_start;
      t.t_end = seg.t_end;
      const int n_words = std::max<int>(1, static_cast<int>(std::lround(seg.duration() * kWordsPerSecond)));
      constexpr std::size_t vocab_size = sizeof(kVocabulary) / sizeof(kVocabulary[0]);
      for (int w = 0; w < n_words; ++w)
        t.words.emplace_back(kVocabulary[rng_words.uniform_index(vocab_size)]);
      scenario.transcripts.push_back(std::move(t));
    }

    scenario.videos.push_back(std::move(bundle));
    scenario.vads.push_back(std::move(vad));
    scenario.cw_false_positive_frames.push_back(std::move(fp_frames));
  }
  return scenario;
}

Scalar oracle_der(const Diarization& ref, const Diarization& hyp, Scalar step) {
  if (!(step > 0)) throw std::invalid_argument("oracle_der: step must be > 0");
  for (const auto& s : ref) s.validate();
  for (const auto& s : hyp) s.validate();

  std::map<std::string, int> ref_ids, hyp_ids;
  for (const auto& s : ref) ref_ids.emplace(s.speaker, static_cast<int>(ref_ids.size()));
  for (const auto& s : hyp) hyp_ids.emplace(s.speaker, static_cast<int>(hyp_ids.size()));
  const int nr = static_cast<int>(ref_ids.size());
  const int nh = static_cast<int>(hyp_ids.size());
  if (nr > 8 || nh > 8) throw std::invalid_argument("oracle_der: more than 8 speakers unsupported");

  Scalar t_max = 0;
  for (const auto& s : ref) t_max = std::max(t_max, s.t_end);
  for (const auto& s : hyp) t_max = std::max(t_max, s.t_end);

  // Sample midpoints, compress to (ref mask, hyp mask) signature counts.
  std::map<std::pair<unsigned, unsigned>, std::int64_t> signatures;
  const auto n_samples = static_cast<std::int64_t>(std::ceil(t_max / step));
  for (std::int64_t k = 0; k < n_samples; ++k) {
    const Scalar t = (static_cast<Scalar>(k) + 0.5) * step;
    unsigned rmask = 0, hmask = 0;
    for (const auto& s : ref)
      if (t >= s.t_start && t < s.t_end) rmask |= 1u << ref_ids.at(s.speaker);
    for (const auto& s : hyp)
      if (t >= s.t_start && t < s.t_end) hmask |= 1u << hyp_ids.at(s.speaker);
    if (rmask || hmask) ++signatures[{rmask, hmask}];
  }

  std::int64_t ref_samples = 0;
  for (const auto& [sig, count] : signatures)
    ref_samples += count * std::popcount(sig.first);
  if (ref_samples == 0) throw std::invalid_argument("oracle_der: no reference speech sampled");

  // Exhaustive search over injective ref->hyp mappings (mapping[r] = hyp id
  // or -1), counting errors per signature for each candidate.
  std::vector<int> mapping(static_cast<std::size_t>(std::max(nr, 1)), -1);
  std::vector<bool> used(static_cast<std::size_t>(std::max(nh, 1)), false);
  std::int64_t best_err = std::numeric_limits<std::int64_t>::max();

  auto evaluate = [&]() {
    std::int64_t err = 0;
    for (const auto& [sig, count] : signatures) {
      const auto [rmask, hmask] = sig;
      const int cr = std::popcount(rmask);
      const int ch = std::popcount(hmask);
      int correct = 0;
      for (int r = 0; r < nr; ++r)
        if ((rmask >> r & 1u) && mapping[static_cast<std::size_t>(r)] >= 0 &&
            (hmask >> mapping[static_cast<std::size_t>(r)] & 1u))
          ++correct;
      err += count * (std::max(cr, ch) - correct);
    }
    best_err = std::min(best_err, err);
  };

  auto search = [&](auto&& self, int r) -> void {
    if (r == nr) {
      evaluate();
      return;
    }
    self(self, r + 1);  // r unmapped
    for (int h = 0; h < nh; ++h) {
      if (used[static_cast<std::size_t>(h)]) continue;
      used[static_cast<std::size_t>(h)] = true;
      mapping[static_cast<std::size_t>(r)] = h;
      self(self, r + 1);
      mapping[static_cast<std::size_t>(r)] = -1;
      used[static_cast<std::size_t>(h)] = false;
    }
  };
  search(search, 0);

  return static_cast<Scalar>(best_err) / static_cast<Scalar>(ref_samples);
}

Scalar oracle_ap(const std::vector<std::pair<Scalar, int>>& scored) {
  std::int64_t total_pos = 0;
  for (const auto& [score, label] : scored) {
    if (label != 0 && label != 1) throw std::invalid_argument("oracle_ap: labels must be 0 or 1");
    total_pos += label;
  }
  if (total_pos == 0) throw std::invalid_argument("oracle_ap: undefined AP, no positive labels");

  std::set<Scalar, std::greater<>> thresholds;
  for (const auto& [score, label] : scored) thresholds.insert(score);

  Scalar ap = 0;
  Scalar prev_recall = 0;
  for (const Scalar theta : thresholds) {
    std::int64_t tp = 0, fp = 0;
    for (const auto& [score, label] : scored) {
      if (score >= theta) (label == 1 ? tp : fp) += 1;
    }
    const Scalar precision = static_cast<Scalar>(tp) / static_cast<Scalar>(tp + fp);
    const Scalar recall = static_cast<Scalar>(tp) / static_cast<Scalar>(total_pos);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

}  // namespace sthg
