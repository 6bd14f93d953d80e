#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "sthg/metrics.hpp"
#include "sthg/rng.hpp"
#include "sthg/synthgen.hpp"
#include "test_support.hpp"

using namespace sthg;

// --- average precision -----------------------------------------------------

TEST_CASE("average_precision hand-checked values") {
  CHECK(average_precision({{0.9, 1}, {0.8, 1}, {0.1, 0}}) == doctest::Approx(1.0));
  // precisions at the positives: 1/1 and 2/3
  CHECK(average_precision({{0.9, 1}, {0.8, 0}, {0.7, 1}}) == doctest::Approx(5.0 / 6.0));
  // single positive at rank 2
  CHECK(average_precision({{0.1, 1}, {0.9, 0}}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(average_precision({{0.5, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(average_precision({{0.5, 2}}), std::invalid_argument);
}

TEST_CASE("average_precision is invariant under strictly monotone score transforms") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::pair<Scalar, int>> scored;
    bool any_pos = false;
    for (int i = 0; i < 12; ++i) {
      const int label = rng.bernoulli(0.4);
      any_pos |= label == 1;
      scored.emplace_back(rng.uniform(), label);
    }
    if (!any_pos) scored.emplace_back(rng.uniform(), 1);
    auto transformed = scored;
    for (auto& [score, label] : transformed) score = std::exp(3.0 * score) - 0.5;
    CHECK(average_precision(scored) == doctest::Approx(average_precision(transformed)).epsilon(1e-12));
  }
}

TEST_CASE("average_precision equals the threshold-sweep oracle on distinct scores") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(8));
    std::vector<std::pair<Scalar, int>> scored;
    for (int i = 0; i < n; ++i) scored.emplace_back((i + 1) * 0.01 + rng.uniform() * 0.001, 0);
    Rng shuffle_rng(trial);
    shuffle_rng.shuffle(scored);
    bool any_pos = false;
    for (auto& [score, label] : scored) {
      label = rng.bernoulli(0.5);
      any_pos |= label == 1;
    }
    if (!any_pos) scored.front().second = 1;
    CHECK(average_precision(scored) == doctest::Approx(oracle_ap(scored)).epsilon(1e-12));
  }
}

// --- asd_map ------------------------------------------------------------------

namespace {

std::vector<std::vector<ScoredNode>> one_video(const std::vector<ScoredNode>& nodes) {
  return {nodes};
}

/// Minimal AP achievable by any ordering of the given label multiset.
Scalar worst_case_ap(std::vector<int> labels) {
  std::sort(labels.begin(), labels.end());
  Scalar best = 2.0;
  do {
    std::vector<std::pair<Scalar, int>> scored;
    Scalar s = 1.0;
    for (int label : labels) scored.emplace_back(s -= 0.01, label);
    best = std::min(best, average_precision(scored));
  } while (std::next_permutation(labels.begin(), labels.end()));
  return best;
}

}  // namespace

TEST_CASE("asd_map: perfect scores give 1.0 and populations filter") {
  std::vector<ScoredNode> nodes = {
      {1.0, 1, false}, {0.0, 0, false}, {1.0, 1, true}, {0.0, 0, true}};
  CHECK(asd_map(one_video(nodes), Population::All) == doctest::Approx(1.0));
  CHECK(asd_map(one_video(nodes), Population::Visible) == doctest::Approx(1.0));
  CHECK(asd_map(one_video(nodes), Population::Wearer) == doctest::Approx(1.0));
  // wearer-only pool must ignore visible nodes entirely
  nodes[0].score = 0.0;
  CHECK(asd_map(one_video(nodes), Population::Wearer) == doctest::Approx(1.0));
}

TEST_CASE("asd_map: anti-scores reach the brute-force worst ordering") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_index(6));
    std::vector<int> labels;
    std::vector<ScoredNode> nodes;
    bool any_pos = false;
    for (int i = 0; i < n; ++i) {
      const int label = rng.bernoulli(0.5);
      any_pos |= label == 1;
      labels.push_back(label);
      nodes.push_back({1.0 - label, label, false});
    }
    if (!any_pos) {
      labels.back() = 1;
      nodes.back() = {0.0, 1, false};
    }
    CHECK(asd_map(one_video(nodes), Population::All) ==
          doctest::Approx(worst_case_ap(labels)).epsilon(1e-12));
  }
}

// --- asd_map_at_iou --------------------------------------------------------------

TEST_CASE("asd_map_at_iou: predictions identical to GT give 1.0") {
  std::vector<GtFace> gt;
  std::vector<ScoredDetection> preds;
  for (int f = 0; f < 4; ++f) {
    const BBox box{10.0 * f, 0, 10.0 * f + 8, 8};
    const int speaking = f % 2;
    gt.push_back({f, box, speaking});
    preds.push_back({f, box, static_cast<Scalar>(speaking), "P0"});
  }
  CHECK(asd_map_at_iou(preds, gt) == doctest::Approx(1.0));
}

TEST_CASE("asd_map_at_iou: jitter below the IoU threshold keeps AP at 1.0") {
  Rng rng(23);
  std::vector<GtFace> gt;
  std::vector<ScoredDetection> preds;
  for (int f = 0; f < 16; ++f) {
    const BBox box{0, 0, 10, 10};
    const int speaking = rng.bernoulli(0.5);
    gt.push_back({f, box, speaking});
    // shift by < 1.5px: IoU >= (10-1.5)*10 / (10*10 + 1.5*10) > 0.7
    const Scalar dx = rng.uniform(-1.5, 1.5);
    preds.push_back({f, {dx, 0, 10 + dx, 10}, static_cast<Scalar>(speaking), "P0"});
  }
  bool any = std::any_of(gt.begin(), gt.end(), [](const GtFace& f) { return f.speaking == 1; });
  if (!any) {
    gt[0].speaking = 1;
    preds[0].score = 1.0;
  }
  CHECK(asd_map_at_iou(preds, gt) == doctest::Approx(1.0));
}

TEST_CASE("asd_map_at_iou: low-IoU prediction counts as a miss") {
  // frame 0: pred overlaps the speaking GT with IoU 1/3 only -> label 0.
  // frame 1: exact match on a speaking GT -> label 1 at rank 2.
  std::vector<GtFace> gt = {{0, {0, 0, 10, 10}, 1}, {1, {0, 0, 10, 10}, 1}};
  std::vector<ScoredDetection> preds = {{0, {5, 0, 15, 10}, 0.9, "a"},
                                        {1, {0, 0, 10, 10}, 0.8, "b"}};
  CHECK(iou(preds[0].box, gt[0].box) == doctest::Approx(1.0 / 3.0));
  CHECK(asd_map_at_iou(preds, gt) == doctest::Approx(0.5));
}

TEST_CASE("asd_map_at_iou: duplicate predictions, only the higher-scored one matches") {
  std::vector<GtFace> gt = {{0, {0, 0, 10, 10}, 1}};
  std::vector<ScoredDetection> preds = {{0, {0, 0, 10, 10}, 0.6, "a"},
                                        {0, {0.5, 0, 10.5, 10}, 0.9, "b"}};
  // higher-scored pred claims the GT (label 1 at rank 1), the duplicate gets 0
  CHECK(asd_map_at_iou(preds, gt) == doctest::Approx(1.0));
  // flip the scores: the overlap-0.9 pred now ranks second
  preds[0].score = 0.9;
  preds[1].score = 0.6;
  CHECK(asd_map_at_iou(preds, gt) == doctest::Approx(1.0));
}

TEST_CASE("asd_map_at_iou errors") {
  std::vector<GtFace> gt = {{0, {0, 0, 1, 1}, 0}};
  std::vector<ScoredDetection> preds = {{0, {0, 0, 1, 1}, 0.5, "a"}};
  CHECK_THROWS_AS(asd_map_at_iou(preds, gt), std::invalid_argument);  // no speaking GT
  gt[0].speaking = 1;
  CHECK_THROWS_AS(asd_map_at_iou(preds, gt, 1.5), std::invalid_argument);
}

// --- DER ----------------------------------------------------------------------------

TEST_CASE("der hand-checked values") {
  const Diarization ref = {{"A", 0, 10}};
  SUBCASE("identical") {
    const DERBreakdown d = der(ref, ref);
    CHECK(d.der() == doctest::Approx(0.0));
    CHECK(d.total_ref_speech == doctest::Approx(10.0));
  }
  SUBCASE("empty hypothesis is all missed") {
    const DERBreakdown d = der(ref, {});
    CHECK(d.missed == doctest::Approx(10.0));
    CHECK(d.der() == doctest::Approx(1.0));
  }
  SUBCASE("truncated hypothesis") {
    const DERBreakdown d = der(ref, {{"A", 0, 8}});
    CHECK(d.missed == doctest::Approx(2.0));
    CHECK(d.false_alarm == doctest::Approx(0.0));
    CHECK(d.confusion == doctest::Approx(0.0));
    CHECK(d.der() == doctest::Approx(0.2));
  }
  SUBCASE("optimal mapping absorbs a label swap") {
    const Diarization ref2 = {{"A", 0, 10}, {"B", 10, 20}};
    const Diarization hyp = {{"B", 0, 10}, {"A", 10, 20}};
    CHECK(der(ref2, hyp).der() == doctest::Approx(0.0));
  }
  SUBCASE("zero reference is an error") { CHECK_THROWS_AS(der({}, ref), std::invalid_argument); }
}

TEST_CASE("der confusion vs false alarm accounting") {
  // ref: A speaks 0-10. hyp: B speaks 0-10 and C speaks 0-5.
  // best mapping sends one hyp speaker to A (10s correct... whichever), the
  // other overlaps as false alarm time.
  const DERBreakdown d = der({{"A", 0, 10}}, {{"B", 0, 10}, {"C", 0, 5}});
  CHECK(d.missed == doctest::Approx(0.0));
  CHECK(d.false_alarm == doctest::Approx(5.0));  // second speaker where ref has one
  CHECK(d.confusion == doctest::Approx(0.0));    // mapping A->B leaves nothing misattributed
  CHECK(d.der() == doctest::Approx(0.5));
}

TEST_CASE("der collar excludes time around reference boundaries") {
  // off-by-0.2s boundaries inside the collar are forgiven
  const Diarization ref = {{"A", 1.0, 5.0}};
  const Diarization hyp = {{"A", 1.2, 4.8}};
  CHECK(der(ref, hyp).der() > 0.0);
  const DERBreakdown with_collar = der(ref, hyp, 0.25);
  CHECK(with_collar.der() == doctest::Approx(0.0));
  // 4s of reference minus the scored-out [0.75,1.25] and [4.75,5.25] zones
  CHECK(with_collar.total_ref_speech == doctest::Approx(3.5));
}

TEST_CASE("der is invariant to consistent hyp relabeling") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    Diarization ref, hyp;
    const char* names[] = {"s0", "s1", "s2"};
    for (int i = 0; i < 6; ++i) {
      const Scalar start = rng.uniform(0, 20);
      ref.push_back({names[rng.uniform_index(3)], start, start + rng.uniform(0.5, 5)});
      const Scalar hstart = rng.uniform(0, 20);
      hyp.push_back({names[rng.uniform_index(3)], hstart, hstart + rng.uniform(0.5, 5)});
    }
    Diarization relabeled = hyp;
    for (auto& s : relabeled) s.speaker = "x_" + s.speaker;  // bijective rename
    const DERBreakdown a = der(ref, hyp);
    const DERBreakdown b = der(ref, relabeled);
    CHECK(a.der() == doctest::Approx(b.der()).epsilon(1e-12));
  }
}

TEST_CASE("der components sum to the scored-time identity") {
  // missed + fa + confusion + correct == sum over slices of max(|R|,|H|)
  Rng rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    Diarization ref, hyp;
    const char* names[] = {"a", "b", "c", "d"};
    for (int i = 0; i < 5; ++i) {
      Scalar s1 = rng.uniform(0, 15), s2 = rng.uniform(0, 15);
      ref.push_back({names[rng.uniform_index(4)], s1, s1 + rng.uniform(0.2, 4)});
      hyp.push_back({names[rng.uniform_index(4)], s2, s2 + rng.uniform(0.2, 4)});
    }
    const DERBreakdown d = der(ref, hyp);
    // recompute scored time and correct time by fine sampling
    const Scalar step = 1e-3;
    Scalar scored = 0;
    for (Scalar t = step / 2; t < 25; t += step) {
      int nr = 0, nh = 0;
      std::set<std::string> rs, hs;
      for (const auto& s : ref)
        if (t >= s.t_start && t < s.t_end) rs.insert(s.speaker);
      for (const auto& s : hyp)
        if (t >= s.t_start && t < s.t_end) hs.insert(s.speaker);
      nr = static_cast<int>(rs.size());
      nh = static_cast<int>(hs.size());
      scored += step * std::max(nr, nh);
    }
    const Scalar correct = scored - d.missed - d.false_alarm - d.confusion;
    CHECK(correct >= -1e-6);
    CHECK(d.missed + d.false_alarm + d.confusion + correct == doctest::Approx(scored).epsilon(1e-6));
  }
}

TEST_CASE("der matches the sampling oracle on random segment sets") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    Diarization ref, hyp;
    const char* names[] = {"a", "b", "c"};
    const int nref = 1 + static_cast<int>(rng.uniform_index(5));
    const int nhyp = static_cast<int>(rng.uniform_index(6));
    for (int i = 0; i < nref; ++i) {
      const Scalar s = rng.uniform(0, 12);
      ref.push_back({names[rng.uniform_index(3)], s, s + rng.uniform(0.3, 4)});
    }
    for (int i = 0; i < nhyp; ++i) {
      const Scalar s = rng.uniform(0, 12);
      hyp.push_back({names[rng.uniform_index(3)], s, s + rng.uniform(0.3, 4)});
    }
    const Scalar step = 1e-3;
    const Scalar exact = der(ref, hyp).der();
    const Scalar sampled = oracle_der(ref, hyp, step);
    Scalar total_ref = 0;
    for (const auto& s : ref) total_ref += s.duration();  // upper bound is fine for tolerance
    const Scalar tol = step * static_cast<Scalar>(2 * (ref.size() + hyp.size()) + 2) /
                           der(ref, hyp).total_ref_speech +
                       1e-9;
    CHECK(std::abs(exact - sampled) <= tol);
  }
}

// --- WER ----------------------------------------------------------------------------

TEST_CASE("wer hand-checked values") {
  CHECK(wer({"a", "b", "c"}, {"a", "b", "c"}) == doctest::Approx(0.0));
  CHECK(wer({"a", "b", "c"}, {"a", "x", "c"}) == doctest::Approx(1.0 / 3.0));
  CHECK(wer({"a", "b"}, {"a", "b", "c", "d"}) == doctest::Approx(1.0));
  CHECK(wer({"a"}, {}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(wer({}, {"a"}), std::invalid_argument);
}

TEST_CASE("wer matches branch-and-bound alignment search on random pairs") {
  Rng rng(43);
  const char* vocab[] = {"x", "y", "z"};
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::string> ref, hyp;
    const int nr = 1 + static_cast<int>(rng.uniform_index(6));
    const int nh = static_cast<int>(rng.uniform_index(7));
    for (int i = 0; i < nr; ++i) ref.emplace_back(vocab[rng.uniform_index(3)]);
    for (int i = 0; i < nh; ++i) hyp.emplace_back(vocab[rng.uniform_index(3)]);
    CHECK(wer(ref, hyp) == doctest::Approx(sthg::testing::brute_force_wer(ref, hyp)));
  }
}
