#include "sthg/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string_view>

namespace sthg {

std::string format_float(Scalar v, int sig_digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", sig_digits, v);
  return buf;
}

Scalar quantize_sig9(Scalar v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return std::strtod(buf, nullptr);
}

namespace {

std::string fmt9(Scalar v) { return format_float(v, 9); }
std::string fmt17(Scalar v) { return format_float(v, 17); }

void check_token(const std::string& s, const char* what) {
  if (s.empty()) throw std::invalid_argument(std::string("write: empty ") + what);
  for (char c : s)
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r')
      throw std::invalid_argument(std::string("write: whitespace in ") + what + " '" + s + "'");
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

/// Whitespace-tokenized line reader carrying file/line context for errors.
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path) : path_(path.string()), in_(path) {
    if (!in_) throw ParseError("cannot open: " + path_);
  }

  bool next_line() {
    while (std::getline(in_, line_)) {
      ++line_no_;
      tokens_.clear();
      std::istringstream ss(line_);
      std::string tok;
      while (ss >> tok) tokens_.push_back(tok);
      if (!tokens_.empty()) return true;  // skip blank lines
    }
    return false;
  }

  const std::vector<std::string>& tokens() const { return tokens_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(path_ + ":" + std::to_string(line_no_) + ": " + what);
  }

  const std::string& token(std::size_t i, const char* field) const {
    if (i >= tokens_.size()) fail(std::string("missing field '") + field + "'");
    return tokens_[i];
  }

  Scalar number(std::size_t i, const char* field) const {
    const std::string& t = token(i, field);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || !std::isfinite(v))
      fail(std::string("field '") + field + "': not a finite number: '" + t + "'");
    return v;
  }

  std::int64_t integer(std::size_t i, const char* field) const {
    const std::string& t = token(i, field);
    char* end = nullptr;
    const long long v = std::strtoll(t.c_str(), &end, 10);
    if (end != t.c_str() + t.size())
      fail(std::string("field '") + field + "': not an integer: '" + t + "'");
    return v;
  }

  void expect_size(std::size_t n) const {
    if (tokens_.size() != n)
      fail("expected " + std::to_string(n) + " fields, got " + std::to_string(tokens_.size()));
  }

  std::string context() const { return path_ + ":" + std::to_string(line_no_); }

 private:
  std::string path_;
  std::ifstream in_;
  std::string line_;
  std::size_t line_no_ = 0;
  std::vector<std::string> tokens_;
};

void write_feature(std::ofstream& out, const Vector& f) {
  for (Eigen::Index i = 0; i < f.size(); ++i) out << ' ' << fmt9(f(i));
}

Vector read_feature(const LineReader& r, std::size_t from) {
  const auto& toks = r.tokens();
  if (from >= toks.size()) r.fail("missing feature values");
  Vector f(static_cast<Eigen::Index>(toks.size() - from));
  for (std::size_t i = from; i < toks.size(); ++i)
    f(static_cast<Eigen::Index>(i - from)) = r.number(i, "feature");
  return f;
}

}  // namespace

// --- manifest ----------------------------------------------------------------

void write_manifest(const std::filesystem::path& path, const std::vector<VideoBundle>& videos) {
  auto out = open_out(path);
  for (const auto& v : videos) {
    check_token(v.video_id, "video_id");
    out << "VIDEO " << v.video_id << ' ' << fmt9(v.fps) << '\n';
    for (const auto& t : v.tracks) {
      check_token(t.person_id, "person_id");
      for (const auto& e : t.entries) {
        out << "TRACK " << v.video_id << ' ' << t.track_id << ' ' << t.person_id << ' ' << e.frame
            << ' ' << fmt9(e.box.x1) << ' ' << fmt9(e.box.y1) << ' ' << fmt9(e.box.x2) << ' '
            << fmt9(e.box.y2);
        write_feature(out, e.feature);
        out << '\n';
      }
    }
    if (v.wearer)
      for (const auto& e : v.wearer->entries) {
        out << "WEARER " << v.video_id << ' ' << e.frame;
        write_feature(out, e.feature);
        out << '\n';
      }
    for (const auto& [key, label] : v.labels) {
      check_token(key.first, "person_id");
      out << "LABEL " << v.video_id << ' ' << key.first << ' ' << key.second << ' ' << label << '\n';
    }
  }
}

std::vector<VideoBundle> read_manifest(const std::filesystem::path& path) {
  LineReader r(path);
  std::vector<std::string> video_order;
  std::map<std::string, VideoBundle> bundles;
  struct TrackAcc {
    std::string person;
    std::vector<TrackEntry> entries;
    std::string first_context;
  };
  std::map<std::string, std::map<std::int64_t, TrackAcc>> tracks;  // video -> track_id -> acc

  auto bundle_of = [&](const std::string& video_id) -> VideoBundle& {
    auto it = bundles.find(video_id);
    if (it == bundles.end()) {
      video_order.push_back(video_id);
      it = bundles.emplace(video_id, VideoBundle{}).first;
      it->second.video_id = video_id;
    }
    return it->second;
  };

  while (r.next_line()) {
    const std::string& kind = r.token(0, "record kind");
    if (kind == "VIDEO") {
      r.expect_size(3);
      VideoBundle& b = bundle_of(r.token(1, "video_id"));
      const Scalar fps = r.number(2, "fps");
      if (!(fps > 0)) r.fail("field 'fps': must be > 0");
      b.fps = fps;
    } else if (kind == "TRACK") {
      if (r.tokens().size() < 10) r.fail("TRACK record needs at least 10 fields");
      const std::string video_id = r.token(1, "video_id");
      const std::int64_t track_id = r.integer(2, "track_id");
      const std::string person = r.token(3, "person_id");
      TrackEntry e;
      e.frame = r.integer(4, "frame");
      e.box = {r.number(5, "x1"), r.number(6, "y1"), r.number(7, "x2"), r.number(8, "y2")};
      if (!e.box.valid()) r.fail("invalid box (needs x1 < x2 and y1 < y2)");
      e.feature = read_feature(r, 9);
      auto& acc = tracks[video_id][track_id];
      if (acc.entries.empty()) {
        acc.person = person;
        acc.first_context = r.context();
      } else if (acc.person != person) {
        r.fail("track " + std::to_string(track_id) + " changes person_id (first seen at " +
               acc.first_context + ")");
      }
      acc.entries.push_back(std::move(e));
      bundle_of(video_id);
    } else if (kind == "WEARER") {
      if (r.tokens().size() < 4) r.fail("WEARER record needs at least 4 fields");
      VideoBundle& b = bundle_of(r.token(1, "video_id"));
      WearerEntry e;
      e.frame = r.integer(2, "frame");
      e.feature = read_feature(r, 3);
      if (!b.wearer) b.wearer.emplace();
      b.wearer->entries.push_back(std::move(e));
    } else if (kind == "LABEL") {
      r.expect_size(5);
      VideoBundle& b = bundle_of(r.token(1, "video_id"));
      const std::string person = r.token(2, "person_id");
      const std::int64_t frame = r.integer(3, "frame");
      const std::int64_t label = r.integer(4, "label");
      if (label != 0 && label != 1) r.fail("field 'label': must be 0 or 1");
      const auto [it, inserted] = b.labels.emplace(std::make_pair(person, frame), static_cast<int>(label));
      if (!inserted && it->second != label) r.fail("conflicting duplicate LABEL record");
    } else {
      r.fail("unknown record kind '" + kind + "'");
    }
  }

  std::vector<VideoBundle> out;
  out.reserve(video_order.size());
  for (const auto& video_id : video_order) {
    VideoBundle b = std::move(bundles.at(video_id));
    if (auto vt = tracks.find(video_id); vt != tracks.end())
      for (auto& [track_id, acc] : vt->second) {
        FaceTrack t;
        t.track_id = track_id;
        t.person_id = acc.person;
        t.entries = std::move(acc.entries);
        std::sort(t.entries.begin(), t.entries.end(),
                  [](const TrackEntry& a, const TrackEntry& b_) { return a.frame < b_.frame; });
        b.tracks.push_back(std::move(t));
      }
    if (b.wearer)
      std::sort(b.wearer->entries.begin(), b.wearer->entries.end(),
                [](const WearerEntry& a, const WearerEntry& b_) { return a.frame < b_.frame; });
    try {
      b.validate();
    } catch (const std::invalid_argument& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
    out.push_back(std::move(b));
  }
  return out;
}

// --- VAD ----------------------------------------------------------------------

void write_vad_file(const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, VadSegments>>& per_video) {
  auto out = open_out(path);
  for (const auto& [video_id, vad] : per_video) {
    check_token(video_id, "video_id");
    for (const auto& [lo, hi] : vad.spans)
      out << "VAD " << video_id << ' ' << fmt9(lo) << ' ' << fmt9(hi) << '\n';
  }
}

std::map<std::string, VadSegments> read_vad_file(const std::filesystem::path& path) {
  LineReader r(path);
  std::map<std::string, VadSegments> out;
  while (r.next_line()) {
    if (r.token(0, "record kind") != "VAD") r.fail("expected VAD record");
    r.expect_size(4);
    const std::string video_id = r.token(1, "video_id");
    const Scalar lo = r.number(2, "t_start");
    const Scalar hi = r.number(3, "t_end");
    if (!(lo < hi) || lo < 0) r.fail("VAD span requires 0 <= t_start < t_end");
    out[video_id].spans.emplace_back(lo, hi);
  }
  for (auto& [video_id, vad] : out) vad.normalize();
  return out;
}

// --- transcripts ----------------------------------------------------------------

void write_transcripts(const std::filesystem::path& path,
                       const std::vector<TranscriptEntry>& transcripts) {
  auto out = open_out(path);
  for (const auto& t : transcripts) {
    check_token(t.video_id, "video_id");
    check_token(t.speaker, "speaker");
    out << "TRANSCRIPT " << t.video_id << ' ' << t.speaker << ' ' << fmt9(t.t_start) << ' '
        << fmt9(t.t_end);
    for (const auto& w : t.words) {
      check_token(w, "word");
      out << ' ' << w;
    }
    out << '\n';
  }
}

std::vector<TranscriptEntry> read_transcripts(const std::filesystem::path& path) {
  LineReader r(path);
  std::vector<TranscriptEntry> out;
  while (r.next_line()) {
    if (r.token(0, "record kind") != "TRANSCRIPT") r.fail("expected TRANSCRIPT record");
    if (r.tokens().size() < 5) r.fail("TRANSCRIPT record needs at least 5 fields");
    TranscriptEntry t;
    t.video_id = r.token(1, "video_id");
    t.speaker = r.token(2, "speaker");
    t.t_start = r.number(3, "t_start");
    t.t_end = r.number(4, "t_end");
    if (!(t.t_start < t.t_end)) r.fail("transcript requires t_start < t_end");
    for (std::size_t i = 5; i < r.tokens().size(); ++i) t.words.push_back(r.tokens()[i]);
    out.push_back(std::move(t));
  }
  return out;
}

// --- RTTM -----------------------------------------------------------------------

void write_rttm(const std::filesystem::path& path, const std::map<std::string, Diarization>& by_video) {
  struct Row {
    std::string video;
    Scalar tbeg, tdur;
    std::string speaker;
  };
  std::vector<Row> rows;
  for (const auto& [video_id, diar] : by_video) {
    check_token(video_id, "video_id");
    for (const auto& s : diar) {
      s.validate();
      check_token(s.speaker, "speaker");
      rows.push_back({video_id, s.t_start, s.duration(), s.speaker});
    }
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.video, a.tbeg, a.speaker) < std::tie(b.video, b.tbeg, b.speaker);
  });
  auto out = open_out(path);
  char buf[64];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.3f %.3f", row.tbeg, row.tdur);
    // a duration that rounds to 0.000 is not representable in the format
    if (std::string_view(buf).ends_with(" 0.000")) continue;
    out << "SPEAKER " << row.video << " 1 " << buf << " <NA> <NA> " << row.speaker << " <NA> <NA>\n";
  }
}

std::map<std::string, Diarization> read_rttm(const std::filesystem::path& path) {
  LineReader r(path);
  std::map<std::string, Diarization> out;
  while (r.next_line()) {
    if (r.token(0, "record kind") != "SPEAKER") r.fail("expected SPEAKER record");
    r.expect_size(10);
    const std::string video_id = r.token(1, "file");
    const Scalar tbeg = r.number(3, "tbeg");
    const Scalar tdur = r.number(4, "tdur");
    const std::string speaker = r.token(7, "speaker");
    if (!(tdur > 0) || tbeg < 0) r.fail("RTTM requires tbeg >= 0 and tdur > 0");
    out[video_id].push_back({speaker, tbeg, tbeg + tdur});
  }
  for (auto& [video_id, diar] : out) sort_segments(diar);
  return out;
}

// --- scores -----------------------------------------------------------------------

void write_scores(const std::filesystem::path& path, const std::map<std::string, FrameScores>& by_video) {
  auto out = open_out(path);
  for (const auto& [video_id, scores] : by_video) {
    check_token(video_id, "video_id");
    for (const auto& [person, frames] : scores) {
      check_token(person, "person_id");
      for (const auto& [frame, score] : frames)
        out << "SCORE " << video_id << ' ' << person << ' ' << frame << ' ' << fmt9(score) << '\n';
    }
  }
}

std::map<std::string, FrameScores> read_scores(const std::filesystem::path& path) {
  LineReader r(path);
  std::map<std::string, FrameScores> out;
  while (r.next_line()) {
    if (r.token(0, "record kind") != "SCORE") r.fail("expected SCORE record");
    r.expect_size(5);
    const std::string video_id = r.token(1, "video_id");
    const std::string person = r.token(2, "person_id");
    const std::int64_t frame = r.integer(3, "frame");
    const Scalar score = r.number(4, "score");
    out[video_id][person][frame] = score;
  }
  return out;
}

// --- key=value ----------------------------------------------------------------------

void write_kv(const std::filesystem::path& path, const KeyValues& kv) {
  auto out = open_out(path);
  for (const auto& [key, value] : kv) {
    check_token(key, "key");
    out << key << '=' << value << '\n';
  }
}

std::map<std::string, std::string> read_kv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open: " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

// --- history -------------------------------------------------------------------------

void write_history(const std::filesystem::path& path, const TrainHistory& history) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < history.loss.size(); ++i)
    out << "EPOCH " << i << ' ' << fmt17(history.loss[i]) << ' ' << fmt17(history.train_ap[i]) << '\n';
}

std::vector<EpochRow> read_history(const std::filesystem::path& path) {
  LineReader r(path);
  std::vector<EpochRow> out;
  while (r.next_line()) {
    if (r.token(0, "record kind") != "EPOCH") r.fail("expected EPOCH record");
    r.expect_size(4);
    EpochRow row;
    row.epoch = static_cast<int>(r.integer(1, "epoch"));
    row.loss = r.number(2, "loss");
    row.train_ap = r.number(3, "train_ap");
    out.push_back(row);
  }
  return out;
}

// --- checkpoint -------------------------------------------------------------------------

namespace {
constexpr const char* kCheckpointHeader = "STHG-CKPT v1";
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const ModelParams& params) {
  auto out = open_out(path);
  out << kCheckpointHeader << '\n';
  out << "d_av=" << cfg.d_av << '\n';
  out << "d_a=" << cfg.d_a << '\n';
  out << "d_h=" << cfg.d_h << '\n';
  out << "agg_schedule=" << to_string(cfg.agg_schedule[0]) << ',' << to_string(cfg.agg_schedule[1])
      << ',' << to_string(cfg.agg_schedule[2]) << '\n';
  out << "learning_rate=" << fmt17(cfg.learning_rate) << '\n';
  out << "epochs=" << cfg.epochs << '\n';
  out << "l2_weight=" << fmt17(cfg.l2_weight) << '\n';
  out << "seed=" << cfg.seed << '\n';
  visit_params(params, [&out](const char* name, const auto& tensor) {
    using T = std::decay_t<decltype(tensor)>;
    if constexpr (std::is_same_v<T, Scalar>) {
      out << "tensor " << name << " 1 1\n" << fmt17(tensor) << '\n';
    } else if constexpr (std::is_same_v<T, Vector>) {
      out << "tensor " << name << ' ' << tensor.size() << " 1\n";
      for (Eigen::Index i = 0; i < tensor.size(); ++i)
        out << fmt17(tensor(i)) << (i + 1 == tensor.size() ? '\n' : ' ');
    } else {
      out << "tensor " << name << ' ' << tensor.rows() << ' ' << tensor.cols() << '\n';
      for (Eigen::Index i = 0; i < tensor.rows(); ++i)
        for (Eigen::Index j = 0; j < tensor.cols(); ++j)
          out << fmt17(tensor(i, j)) << (j + 1 == tensor.cols() ? '\n' : ' ');
    }
  });
}

std::pair<ModelConfig, ModelParams> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointHeader)
    throw ParseError(path.string() + ": bad checkpoint header (expected '" +
                     std::string(kCheckpointHeader) + "')");

  ModelConfig cfg;
  std::map<std::string, std::string> kv;
  std::size_t line_no = 1;
  for (int i = 0; i < 8; ++i) {
    if (!std::getline(in, line)) throw ParseError(path.string() + ": truncated config block");
    ++line_no;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const char* key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(path.string() + ": checkpoint missing config key " + key);
    return it->second;
  };
  cfg.d_av = std::stoi(need("d_av"));
  cfg.d_a = std::stoi(need("d_a"));
  cfg.d_h = std::stoi(need("d_h"));
  {
    std::istringstream ss(need("agg_schedule"));
    std::string part;
    for (int i = 0; i < 3; ++i) {
      if (!std::getline(ss, part, ','))
        throw ParseError(path.string() + ": agg_schedule needs 3 comma-separated entries");
      cfg.agg_schedule[static_cast<std::size_t>(i)] = aggregation_from_string(part);
    }
  }
  cfg.learning_rate = std::strtod(need("learning_rate").c_str(), nullptr);
  cfg.epochs = std::stoi(need("epochs"));
  cfg.l2_weight = std::strtod(need("l2_weight").c_str(), nullptr);
  cfg.seed = std::stoull(need("seed"));
  cfg.validate();

  ModelParams params;
  visit_params(params, [&](const char* name, auto& tensor) {
    if (!std::getline(in, line)) throw ParseError(path.string() + ": truncated at tensor " + name);
    std::istringstream header(line);
    std::string tag, got_name;
    Eigen::Index rows = 0, cols = 0;
    if (!(header >> tag >> got_name >> rows >> cols) || tag != "tensor")
      throw ParseError(path.string() + ": expected 'tensor " + std::string(name) + " <rows> <cols>'");
    if (got_name != name)
      throw ParseError(path.string() + ": expected tensor " + std::string(name) + ", got " + got_name);
    std::vector<Scalar> values;
    values.reserve(static_cast<std::size_t>(rows * cols));
    while (values.size() < static_cast<std::size_t>(rows * cols)) {
      Scalar v;
      if (!(in >> v)) throw ParseError(path.string() + ": truncated values in tensor " + name);
      if (!std::isfinite(v))
        throw ParseError(path.string() + ": non-finite value in tensor " + name);
      values.push_back(v);
    }
    in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
    using T = std::decay_t<decltype(tensor)>;
    if constexpr (std::is_same_v<T, Scalar>) {
      if (rows != 1 || cols != 1) throw ParseError(path.string() + ": tensor " + name + " must be 1x1");
      tensor = values[0];
    } else if constexpr (std::is_same_v<T, Vector>) {
      if (cols != 1) throw ParseError(path.string() + ": tensor " + name + " must be a column");
      tensor = Eigen::Map<const Vector>(values.data(), rows);
    } else {
      Matrix m(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = values[static_cast<std::size_t>(i * cols + j)];
      tensor = std::move(m);
    }
  });
  return {cfg, std::move(params)};
}

}  // namespace sthg
