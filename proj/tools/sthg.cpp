// Command-line front end: synth / train / diarize / eval / report.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "CLI11.hpp"

#include "sthg/graph_builder.hpp"
#include "sthg/hetgnn.hpp"
#include "sthg/io.hpp"
#include "sthg/metrics.hpp"
#include "sthg/pipeline.hpp"
#include "sthg/synthgen.hpp"

namespace fs = std::filesystem;
using namespace sthg;

namespace {

constexpr int kExitValidation = 2;

using Kv = std::map<std::string, std::string>;

double kv_number(const Kv& kv, const std::string& key, double fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  char* end = nullptr;
  const double v = std::strtod(it->second.c_str(), &end);
  if (end != it->second.c_str() + it->second.size())
    throw std::invalid_argument("config key " + key + ": not a number: '" + it->second + "'");
  return v;
}

std::int64_t kv_int(const Kv& kv, const std::string& key, std::int64_t fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  char* end = nullptr;
  const long long v = std::strtoll(it->second.c_str(), &end, 10);
  if (end != it->second.c_str() + it->second.size())
    throw std::invalid_argument("config key " + key + ": not an integer: '" + it->second + "'");
  return v;
}

Kv load_config(const std::string& path) { return path.empty() ? Kv{} : read_kv(path); }

ScenarioConfig scenario_from(const Kv& kv) {
  ScenarioConfig cfg;
  cfg.num_videos = static_cast<int>(kv_int(kv, "num_videos", cfg.num_videos));
  cfg.num_frames = kv_int(kv, "num_frames", cfg.num_frames);
  cfg.fps = kv_number(kv, "fps", cfg.fps);
  cfg.num_visible_speakers =
      static_cast<int>(kv_int(kv, "num_visible_speakers", cfg.num_visible_speakers));
  cfg.d_av = static_cast<int>(kv_int(kv, "d_av", cfg.d_av));
  cfg.d_a = static_cast<int>(kv_int(kv, "d_a", cfg.d_a));
  cfg.speaking_signal_strength =
      kv_number(kv, "speaking_signal_strength", cfg.speaking_signal_strength);
  cfg.cross_speaker_coupling = kv_number(kv, "cross_speaker_coupling", cfg.cross_speaker_coupling);
  cfg.cw_false_positive_rate = kv_number(kv, "cw_false_positive_rate", cfg.cw_false_positive_rate);
  cfg.vad_accuracy = kv_number(kv, "vad_accuracy", cfg.vad_accuracy);
  cfg.seed = static_cast<std::uint64_t>(kv_int(kv, "seed", static_cast<std::int64_t>(cfg.seed)));
  return cfg;
}

GraphConfig graph_from(const Kv& kv) {
  GraphConfig cfg;
  cfg.temporal_window = kv_int(kv, "temporal_window", cfg.temporal_window);
  cfg.clip_len = kv_int(kv, "clip_len", cfg.clip_len);
  cfg.node_stride = kv_int(kv, "node_stride", cfg.node_stride);
  return cfg;
}

ModelConfig model_from(const Kv& kv) {
  ModelConfig cfg;
  cfg.d_av = static_cast<int>(kv_int(kv, "d_av", cfg.d_av));
  cfg.d_a = static_cast<int>(kv_int(kv, "d_a", cfg.d_a));
  cfg.d_h = static_cast<int>(kv_int(kv, "d_h", cfg.d_h));
  if (const auto it = kv.find("agg_schedule"); it != kv.end()) {
    std::istringstream ss(it->second);
    std::string part;
    for (int i = 0; i < 3; ++i) {
      if (!std::getline(ss, part, ','))
        throw std::invalid_argument("config key agg_schedule: need 3 comma-separated entries");
      cfg.agg_schedule[static_cast<std::size_t>(i)] = aggregation_from_string(part);
    }
  }
  cfg.learning_rate = kv_number(kv, "learning_rate", cfg.learning_rate);
  cfg.epochs = static_cast<int>(kv_int(kv, "epochs", cfg.epochs));
  cfg.l2_weight = kv_number(kv, "l2_weight", cfg.l2_weight);
  cfg.seed = static_cast<std::uint64_t>(kv_int(kv, "seed", static_cast<std::int64_t>(cfg.seed)));
  return cfg;
}

PostConfig post_from(const Kv& kv) {
  PostConfig cfg;
  cfg.score_threshold = kv_number(kv, "score_threshold", cfg.score_threshold);
  cfg.min_segment_dur = kv_number(kv, "min_segment_dur", cfg.min_segment_dur);
  cfg.merge_gap = kv_number(kv, "merge_gap", cfg.merge_gap);
  if (const auto it = kv.find("vad_target"); it != kv.end())
    cfg.vad_target = vad_target_from_string(it->second);
  if (const auto it = kv.find("vad_mode"); it != kv.end()) cfg.vad_mode = vad_mode_from_string(it->second);
  cfg.voice_match_threshold = kv_number(kv, "voice_match_threshold", cfg.voice_match_threshold);
  cfg.voice_match_enabled = kv_int(kv, "voice_match_enabled", cfg.voice_match_enabled ? 1 : 0) != 0;
  return cfg;
}

int thread_budget(std::size_t jobs) {
  unsigned threads = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("STHG_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*env == '\0' || *end != '\0' || v < 1)
      throw std::invalid_argument("STHG_THREADS must be a positive integer, got '" + std::string(env) + "'");
    threads = static_cast<unsigned>(v);
  }
  return static_cast<int>(std::min<std::size_t>(threads, std::max<std::size_t>(jobs, 1)));
}

/// Deterministic map over videos: results land in input order regardless of
/// the worker count.
template <typename T, typename F>
std::vector<T> parallel_map(std::size_t n, F&& f) {
  const int workers = thread_budget(n);
  std::vector<T> results(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) results[i] = f(i);
    return results;
  }
  std::size_t next = 0;
  while (next < n) {
    std::vector<std::pair<std::size_t, std::future<T>>> batch;
    for (int w = 0; w < workers && next < n; ++w, ++next)
      batch.emplace_back(next, std::async(std::launch::async, f, next));
    for (auto& [idx, fut] : batch) results[idx] = fut.get();
  }
  return results;
}

// --- synth --------------------------------------------------------------------

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              std::optional<std::int64_t> seed) {
  Kv kv = load_config(config_path);
  ScenarioConfig cfg = scenario_from(kv);
  if (seed) cfg.seed = static_cast<std::uint64_t>(*seed);
  cfg.validate();

  const Scenario scenario = generate_scenario(cfg);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  write_manifest(dir / "manifest.txt", scenario.videos);

  std::vector<std::pair<std::string, VadSegments>> vads;
  std::map<std::string, Diarization> refs;
  for (std::size_t i = 0; i < scenario.videos.size(); ++i) {
    vads.emplace_back(scenario.videos[i].video_id, scenario.vads[i]);
    refs[scenario.videos[i].video_id] = labels_to_segments(scenario.videos[i]);
  }
  write_vad_file(dir / "vad.txt", vads);
  write_rttm(dir / "ref.rttm", refs);
  write_transcripts(dir / "transcripts.txt", scenario.transcripts);

  std::cout << "wrote " << scenario.videos.size() << " videos to " << out_dir << "\n";
  return 0;
}

// --- train --------------------------------------------------------------------

int cmd_train(const std::string& data_dir, const std::string& config_path,
              const std::string& ckpt_out, const std::string& history_out,
              std::optional<std::int64_t> seed) {
  const Kv kv = load_config(config_path);
  const GraphConfig gcfg = graph_from(kv);
  gcfg.validate();
  ModelConfig mcfg = model_from(kv);
  if (seed) mcfg.seed = static_cast<std::uint64_t>(*seed);

  const auto videos = read_manifest(fs::path(data_dir) / "manifest.txt");
  if (videos.empty()) throw std::invalid_argument("train: no videos in " + data_dir);

  // infer input dims from the data unless the config pinned them
  for (const auto& v : videos) {
    if (!kv.count("d_av") && !v.tracks.empty())
      mcfg.d_av = static_cast<int>(v.tracks.front().feature_dim());
    if (!kv.count("d_a") && v.wearer && !v.wearer->entries.empty())
      mcfg.d_a = static_cast<int>(v.wearer->feature_dim());
  }
  mcfg.validate();

  std::vector<HeteroGraph> graphs;
  for (const auto& v : videos)
    for (auto& g : build_graph(v, gcfg)) graphs.push_back(std::move(g));

  const auto [params, history] = train(graphs, mcfg);
  save_checkpoint(ckpt_out, mcfg, params);
  if (!history_out.empty()) write_history(history_out, history);

  std::cout << "trained on " << graphs.size() << " graphs from " << videos.size() << " videos; "
            << "final loss " << (history.loss.empty() ? 0.0 : history.loss.back()) << "\n";
  return 0;
}

// --- diarize --------------------------------------------------------------------

int cmd_diarize(const std::string& data_dir, const std::string& ckpt_path,
                const std::string& config_path, const std::string& vad_path,
                const std::string& rttm_out, const std::string& scores_out) {
  const Kv kv = load_config(config_path);
  const GraphConfig gcfg = graph_from(kv);
  gcfg.validate();
  const PostConfig pcfg = post_from(kv);
  pcfg.validate();

  const auto [mcfg, params] = load_checkpoint(ckpt_path);
  const auto videos = read_manifest(fs::path(data_dir) / "manifest.txt");
  std::map<std::string, VadSegments> vads;
  if (!vad_path.empty()) vads = read_vad_file(vad_path);

  struct VideoResult {
    std::string video_id;
    Diarization diar;
    FrameScores scores;
  };
  const auto& params_ref = params;
  const auto& mcfg_ref = mcfg;
  const auto results = parallel_map<VideoResult>(videos.size(), [&](std::size_t i) {
    const VideoBundle& v = videos[i];
    VadSegments vad;
    if (const auto it = vads.find(v.video_id); it != vads.end()) vad = it->second;
    VideoResult r;
    r.video_id = v.video_id;
    r.scores = predict_frame_scores(v, params_ref, gcfg, mcfg_ref);
    Diarization diar = scores_to_segments(r.scores, v.fps, pcfg);
    diar = vad_fuse(diar, vad, pcfg);
    r.diar = voice_match(diar, v, pcfg, mcfg_ref.d_a).segments;
    return r;
  });

  std::map<std::string, Diarization> by_video;
  std::map<std::string, FrameScores> all_scores;
  for (const auto& r : results) {
    by_video[r.video_id] = r.diar;
    all_scores[r.video_id] = r.scores;
  }
  write_rttm(rttm_out, by_video);
  if (!scores_out.empty()) write_scores(scores_out, all_scores);

  std::size_t total = 0;
  for (const auto& [video_id, diar] : by_video) total += diar.size();
  std::cout << "diarized " << videos.size() << " videos into " << total << " segments\n";
  return 0;
}

// --- eval --------------------------------------------------------------------------

int cmd_eval(const std::string& manifest_path, const std::string& scores_path,
             const std::string& ref_rttm, const std::string& hyp_rttm,
             const std::string& ref_transcripts, const std::string& hyp_transcripts,
             bool want_map, bool want_map_iou, bool want_der, bool want_wer, double collar,
             const std::string& out_path) {
  KeyValues report;

  if (want_map || want_map_iou) {
    if (manifest_path.empty() || scores_path.empty())
      throw std::invalid_argument("eval: --map/--map-iou need --manifest and --scores");
    const auto videos = read_manifest(manifest_path);
    const auto scores = read_scores(scores_path);

    std::vector<std::vector<ScoredNode>> pooled;
    std::vector<ScoredDetection> dets;
    std::vector<GtFace> gt_faces;
    for (const auto& v : videos) {
      const auto sit = scores.find(v.video_id);
      if (sit == scores.end()) continue;
      std::vector<ScoredNode> nodes;
      for (const auto& [person, frames] : sit->second) {
        for (const auto& [frame, score] : frames) {
          const auto lit = v.labels.find({person, frame});
          if (lit == v.labels.end())
            throw std::invalid_argument("eval: no label for scored node (" + v.video_id + ", " +
                                        person + ", frame " + std::to_string(frame) + ")");
          nodes.push_back({score, lit->second, person == kWearerId});
        }
      }
      pooled.push_back(std::move(nodes));

      for (const auto& t : v.tracks)
        for (const auto& e : t.entries) {
          const auto lit = v.labels.find({t.person_id, e.frame});
          const int speaking = lit == v.labels.end() ? 0 : lit->second;
          gt_faces.push_back({e.frame, e.box, speaking});
          const auto pit = sit->second.find(t.person_id);
          if (pit != sit->second.end())
            if (const auto fit = pit->second.find(e.frame); fit != pit->second.end())
              dets.push_back({e.frame, e.box, fit->second, t.person_id});
        }
    }
    if (want_map) {
      report.emplace_back("map_all", format_float(asd_map(pooled, Population::All), 9));
      report.emplace_back("map_visible", format_float(asd_map(pooled, Population::Visible), 9));
      report.emplace_back("map_cw", format_float(asd_map(pooled, Population::Wearer), 9));
    }
    if (want_map_iou)
      report.emplace_back("map_iou50", format_float(asd_map_at_iou(dets, gt_faces, 0.5), 9));
  }

  if (want_der) {
    if (ref_rttm.empty() || hyp_rttm.empty())
      throw std::invalid_argument("eval: --der needs --ref-rttm and --hyp-rttm");
    const auto refs = read_rttm(ref_rttm);
    const auto hyps = read_rttm(hyp_rttm);
    DERBreakdown total;
    for (const auto& [video_id, ref] : refs) {
      const auto hit = hyps.find(video_id);
      total += der(ref, hit == hyps.end() ? Diarization{} : hit->second, collar);
    }
    if (!(total.total_ref_speech > 0)) throw std::invalid_argument("eval: no reference speech");
    report.emplace_back("der", format_float(total.der(), 9));
    report.emplace_back("der_missed", format_float(total.missed, 9));
    report.emplace_back("der_false_alarm", format_float(total.false_alarm, 9));
    report.emplace_back("der_confusion", format_float(total.confusion, 9));
    report.emplace_back("der_total_ref_speech", format_float(total.total_ref_speech, 9));
  }

  if (want_wer) {
    if (ref_transcripts.empty() || hyp_transcripts.empty())
      throw std::invalid_argument("eval: --wer needs --ref-transcripts and --hyp-transcripts");
    auto pool_words = [](std::vector<TranscriptEntry> entries) {
      std::map<std::string, std::vector<std::string>> by_video;
      std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        return std::tie(a.video_id, a.t_start, a.t_end, a.speaker) <
               std::tie(b.video_id, b.t_start, b.t_end, b.speaker);
      });
      for (const auto& e : entries) {
        auto& words = by_video[e.video_id];
        words.insert(words.end(), e.words.begin(), e.words.end());
      }
      return by_video;
    };
    const auto ref_words = pool_words(read_transcripts(ref_transcripts));
    const auto hyp_words = pool_words(read_transcripts(hyp_transcripts));
    double edits = 0, ref_len = 0;
    for (const auto& [video_id, ref] : ref_words) {
      if (ref.empty()) continue;
      const auto hit = hyp_words.find(video_id);
      const std::vector<std::string> hyp =
          hit == hyp_words.end() ? std::vector<std::string>{} : hit->second;
      edits += wer(ref, hyp) * static_cast<double>(ref.size());
      ref_len += static_cast<double>(ref.size());
    }
    if (ref_len == 0) throw std::invalid_argument("eval: empty reference transcripts");
    report.emplace_back("wer", format_float(edits / ref_len, 9));
  }

  if (report.empty())
    throw std::invalid_argument("eval: nothing to do (pass --map, --map-iou, --der and/or --wer)");
  write_kv(out_path, report);
  for (const auto& [key, value] : report) std::cout << key << '=' << value << '\n';
  return 0;
}

// --- report -------------------------------------------------------------------------

int cmd_report(const std::string& history_path, const std::vector<std::string>& metrics_paths,
               const std::string& out_path) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);

  if (!history_path.empty()) {
    const auto rows = read_history(history_path);
    out << "== training ==\n";
    out << "epochs         " << rows.size() << '\n';
    if (!rows.empty()) {
      out << "first loss     " << rows.front().loss << '\n';
      out << "final loss     " << rows.back().loss << '\n';
      double best_ap = 0;
      for (const auto& r : rows) best_ap = std::max(best_ap, r.train_ap);
      out << "best train AP  " << best_ap << '\n';
    }
    out << '\n';
  }

  const std::vector<std::pair<std::string, const char*>> detection_keys = {
      {"map_all", "mAP (all)          "},
      {"map_visible", "mAP (visible)      "},
      {"map_cw", "mAP (camera wearer)"},
      {"map_iou50", "mAP@0.5            "},
  };
  const std::vector<std::pair<std::string, const char*>> diarization_keys = {
      {"der", "DER                "},
      {"der_missed", "missed speech (s)  "},
      {"der_false_alarm", "false alarm (s)    "},
      {"der_confusion", "confusion (s)      "},
      {"der_total_ref_speech", "ref speech (s)     "},
  };

  for (const auto& path : metrics_paths) {
    const Kv kv = read_kv(path);
    out << "== metrics: " << fs::path(path).filename().string() << " ==\n";
    auto print_block = [&](const char* title, const auto& keys) {
      bool any = false;
      for (const auto& [key, label] : keys) any = any || kv.count(key) > 0;
      if (!any) return;
      out << title << '\n';
      for (const auto& [key, label] : keys)
        if (const auto it = kv.find(key); it != kv.end())
          out << "  " << label << " = " << it->second << '\n';
    };
    print_block("detection", detection_keys);
    print_block("diarization", diarization_keys);
    if (const auto it = kv.find("wer"); it != kv.end())
      out << "transcription\n  WER                 = " << it->second << '\n';
    out << '\n';
  }

  std::ofstream file(out_path);
  if (!file) throw std::runtime_error("cannot open for writing: " + out_path);
  file << out.str();
  std::cout << out.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spatial-temporal heterogeneous graph diarization toolkit"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_path, ckpt_path, vad_path, history_path, scores_path;
  std::string manifest_path, ref_rttm, hyp_rttm, ref_transcripts, hyp_transcripts;
  std::vector<std::string> metrics_paths;
  std::optional<std::int64_t> seed;
  bool want_map = false, want_map_iou = false, want_der = false, want_wer = false;
  double collar = 0.0;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--config", config_path, "scenario config (key=value lines)");
  synth->add_option("--out", out_path, "output directory")->required();
  synth->add_option("--seed", seed, "override the scenario seed");

  auto* train_cmd = app.add_subcommand("train", "train a model on a dataset directory");
  train_cmd->add_option("--data", data_dir, "dataset directory (with manifest.txt)")->required();
  train_cmd->add_option("--config", config_path, "graph/model config (key=value lines)");
  train_cmd->add_option("--out", ckpt_path, "checkpoint output path")->required();
  train_cmd->add_option("--history", history_path, "training history output path");
  train_cmd->add_option("--seed", seed, "override the training seed");

  auto* diarize = app.add_subcommand("diarize", "run the full pipeline and emit RTTM");
  diarize->add_option("--data", data_dir, "dataset directory (with manifest.txt)")->required();
  diarize->add_option("--ckpt", ckpt_path, "model checkpoint")->required();
  diarize->add_option("--config", config_path, "graph/post-processing config");
  diarize->add_option("--vad", vad_path, "VAD segments file");
  diarize->add_option("--out", out_path, "output RTTM path")->required();
  diarize->add_option("--scores", scores_path, "also write per-frame scores here");

  auto* eval = app.add_subcommand("eval", "score hypotheses against references");
  eval->add_option("--manifest", manifest_path, "manifest with labels and boxes");
  eval->add_option("--scores", scores_path, "per-frame scores file");
  eval->add_option("--ref-rttm", ref_rttm, "reference RTTM");
  eval->add_option("--hyp-rttm", hyp_rttm, "hypothesis RTTM");
  eval->add_option("--ref-transcripts", ref_transcripts, "reference transcripts");
  eval->add_option("--hyp-transcripts", hyp_transcripts, "hypothesis transcripts");
  eval->add_flag("--map", want_map, "perfect-detector mAP (all/visible/CW)");
  eval->add_flag("--map-iou", want_map_iou, "IoU-matched mAP@0.5");
  eval->add_flag("--der", want_der, "diarization error rate");
  eval->add_flag("--wer", want_wer, "word error rate");
  eval->add_option("--collar", collar, "DER forgiveness collar in seconds");
  eval->add_option("--out", out_path, "report output path")->required();

  auto* report = app.add_subcommand("report", "summarize history and metrics files");
  report->add_option("--history", history_path, "training history file");
  report->add_option("--metrics", metrics_paths, "metrics report file(s)");
  report->add_option("--out", out_path, "summary output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (synth->parsed()) return cmd_synth(config_path, out_path, seed);
    if (train_cmd->parsed()) return cmd_train(data_dir, config_path, ckpt_path, history_path, seed);
    if (diarize->parsed())
      return cmd_diarize(data_dir, ckpt_path, config_path, vad_path, out_path, scores_path);
    if (eval->parsed())
      return cmd_eval(manifest_path, scores_path, ref_rttm, hyp_rttm, ref_transcripts,
                      hyp_transcripts, want_map, want_map_iou, want_der, want_wer, collar, out_path);
    if (report->parsed()) return cmd_report(history_path, metrics_paths, out_path);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
