#include "sthg/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace sthg {

Scalar average_precision(const std::vector<std::pair<Scalar, int>>& scored) {
  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&scored](std::size_t a, std::size_t b) {
    return scored[a].first > scored[b].first;
  });
  Scalar ap_sum = 0;
  int positives = 0;
  int rank = 0;
  for (std::size_t idx : order) {
    const int label = scored[idx].second;
    if (label != 0 && label != 1) throw std::invalid_argument("average_precision: labels must be 0 or 1");
    ++rank;
    if (label == 1) {
      ++positives;
      ap_sum += static_cast<Scalar>(positives) / static_cast<Scalar>(rank);
    }
  }
  if (positives == 0) throw std::invalid_argument("average_precision: undefined AP, no positive labels");
  return ap_sum / static_cast<Scalar>(positives);
}

Scalar asd_map(const std::vector<std::vector<ScoredNode>>& per_video, Population pop) {
  std::vector<std::pair<Scalar, int>> pooled;
  for (const auto& video : per_video)
    for (const auto& node : video) {
      if (pop == Population::Visible && node.wearer) continue;
      if (pop == Population::Wearer && !node.wearer) continue;
      pooled.emplace_back(node.score, node.label);
    }
  if (pooled.empty()) throw std::invalid_argument("asd_map: no nodes in the selected population");
  return average_precision(pooled);
}

Scalar asd_map_at_iou(const std::vector<ScoredDetection>& preds, const std::vector<GtFace>& gt,
                      Scalar iou_thr) {
  if (!(iou_thr > 0 && iou_thr < 1)) throw std::invalid_argument("asd_map_at_iou: iou_thr must be in (0,1)");
  if (std::none_of(gt.begin(), gt.end(), [](const GtFace& f) { return f.speaking == 1; }))
    throw std::invalid_argument("asd_map_at_iou: no speaking ground truth");

  std::map<std::int64_t, std::vector<std::size_t>> gt_by_frame;
  for (std::size_t i = 0; i < gt.size(); ++i) gt_by_frame[gt[i].frame].push_back(i);
  std::map<std::int64_t, std::vector<std::size_t>> preds_by_frame;
  for (std::size_t i = 0; i < preds.size(); ++i) preds_by_frame[preds[i].frame].push_back(i);

  std::vector<int> labels(preds.size(), 0);
  std::vector<bool> claimed(gt.size(), false);
  for (auto& [frame, pidx] : preds_by_frame) {
    std::stable_sort(pidx.begin(), pidx.end(),
                     [&preds](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
    const auto git = gt_by_frame.find(frame);
    if (git == gt_by_frame.end()) continue;
    for (std::size_t pi : pidx) {
      Scalar best_iou = iou_thr;  // must strictly exceed the threshold
      std::size_t best_gt = gt.size();
      for (std::size_t gi : git->second) {
        if (claimed[gi]) continue;
        const Scalar overlap = iou(preds[pi].box, gt[gi].box);
        if (overlap > best_iou) {
          best_iou = overlap;
          best_gt = gi;
        }
      }
      if (best_gt != gt.size()) {
        claimed[best_gt] = true;
        labels[pi] = gt[best_gt].speaking;
      }
    }
  }

  std::vector<std::pair<Scalar, int>> pooled;
  pooled.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) pooled.emplace_back(preds[i].score, labels[i]);
  return average_precision(pooled);
}

DERBreakdown& DERBreakdown::operator+=(const DERBreakdown& other) {
  missed += other.missed;
  false_alarm += other.false_alarm;
  confusion += other.confusion;
  total_ref_speech += other.total_ref_speech;
  return *this;
}

namespace {

using SpeakerIndex = std::map<std::string, int>;

SpeakerIndex index_speakers(const Diarization& d, const char* side) {
  SpeakerIndex idx;
  for (const auto& s : d)
    if (idx.emplace(s.speaker, static_cast<int>(idx.size())).second && idx.size() > 8)
      throw std::invalid_argument(std::string("der: more than 8 ") + side +
                                  " speakers (exhaustive mapping unsupported)");
  return idx;
}

struct Interval {
  Scalar lo, hi;
};

std::vector<Interval> merge_intervals(std::vector<Interval> v) {
  std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> out;
  for (const auto& iv : v) {
    if (iv.hi <= iv.lo) continue;
    if (!out.empty() && iv.lo <= out.back().hi)
      out.back().hi = std::max(out.back().hi, iv.hi);
    else
      out.push_back(iv);
  }
  return out;
}

bool contains(const std::vector<Interval>& merged, Scalar t) {
  for (const auto& iv : merged)
    if (t >= iv.lo && t < iv.hi) return true;
  return false;
}

/// Best injective ref->hyp assignment value for co-presence matrix c (r x h),
/// by exhaustive recursion over the smaller side.
Scalar best_assignment(const Matrix& c) {
  const int nr = static_cast<int>(c.rows());
  const int nh = static_cast<int>(c.cols());
  Scalar best = 0;
  std::vector<bool> used(static_cast<std::size_t>(std::max(nr, nh)), false);
  const bool rows_small = nr <= nh;
  const int outer = rows_small ? nr : nh;
  const int inner = rows_small ? nh : nr;
  auto recurse = [&](auto&& self, int i, Scalar acc) -> void {
    if (i == outer) {
      best = std::max(best, acc);
      return;
    }
    self(self, i + 1, acc);  // leave i unmapped
    for (int j = 0; j < inner; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      used[static_cast<std::size_t>(j)] = true;
      self(self, i + 1, acc + (rows_small ? c(i, j) : c(j, i)));
      used[static_cast<std::size_t>(j)] = false;
    }
  };
  recurse(recurse, 0, 0.0);
  return best;
}

}  // namespace

DERBreakdown der(const Diarization& ref, const Diarization& hyp, Scalar collar) {
  if (collar < 0) throw std::invalid_argument("der: collar must be >= 0");
  for (const auto& s : ref) s.validate();
  for (const auto& s : hyp) s.validate();
  const SpeakerIndex ref_idx = index_speakers(ref, "ref");
  const SpeakerIndex hyp_idx = index_speakers(hyp, "hyp");

  std::vector<Interval> exclusions;
  if (collar > 0)
    for (const auto& s : ref) {
      exclusions.push_back({s.t_start - collar, s.t_start + collar});
      exclusions.push_back({s.t_end - collar, s.t_end + collar});
    }
  const std::vector<Interval> excluded = merge_intervals(std::move(exclusions));

  std::vector<Scalar> cuts;
  for (const auto& s : ref) {
    cuts.push_back(s.t_start);
    cuts.push_back(s.t_end);
  }
  for (const auto& s : hyp) {
    cuts.push_back(s.t_start);
    cuts.push_back(s.t_end);
  }
  for (const auto& iv : excluded) {
    cuts.push_back(iv.lo);
    cuts.push_back(iv.hi);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const int nr = static_cast<int>(ref_idx.size());
  const int nh = static_cast<int>(hyp_idx.size());
  Matrix co_presence = Matrix::Zero(std::max(nr, 1), std::max(nh, 1));
  DERBreakdown out;
  Scalar min_overlap_total = 0;

  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const Scalar lo = cuts[i], hi = cuts[i + 1];
    const Scalar dur = hi - lo;
    if (dur <= 0) continue;
    const Scalar mid = 0.5 * (lo + hi);
    if (contains(excluded, mid)) continue;

    std::set<int> r_present, h_present;
    for (const auto& s : ref)
      if (mid >= s.t_start && mid < s.t_end) r_present.insert(ref_idx.at(s.speaker));
    for (const auto& s : hyp)
      if (mid >= s.t_start && mid < s.t_end) h_present.insert(hyp_idx.at(s.speaker));

    const int cr = static_cast<int>(r_present.size());
    const int ch = static_cast<int>(h_present.size());
    out.total_ref_speech += dur * cr;
    out.missed += dur * std::max(0, cr - ch);
    out.false_alarm += dur * std::max(0, ch - cr);
    min_overlap_total += dur * std::min(cr, ch);
    for (int r : r_present)
      for (int h : h_present) co_presence(r, h) += dur;
  }

  if (!(out.total_ref_speech > 0)) throw std::invalid_argument("der: total reference speech is zero");
  const Scalar correct = (nr > 0 && nh > 0) ? best_assignment(co_presence) : 0.0;
  out.confusion = min_overlap_total - correct;
  // Guard against negative rounding residue.
  out.confusion = std::max(out.confusion, 0.0);
  return out;
}

Scalar wer(const std::vector<std::string>& ref_words, const std::vector<std::string>& hyp_words) {
  if (ref_words.empty()) throw std::invalid_argument("wer: empty reference");
  const std::size_t nr = ref_words.size(), nh = hyp_words.size();
  std::vector<std::size_t> prev(nh + 1), curr(nh + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= nr; ++i) {
    curr[0] = i;
    for (std::size_t j = 1; j <= nh; ++j) {
      const std::size_t sub = prev[j - 1] + (ref_words[i - 1] == hyp_words[j - 1] ? 0 : 1);
      curr[j] = std::min({sub, prev[j] + 1, curr[j - 1] + 1});
    }
    std::swap(prev, curr);
  }
  return static_cast<Scalar>(prev[nh]) / static_cast<Scalar>(nr);
}

}  // namespace sthg
