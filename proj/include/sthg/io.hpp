#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sthg/hetgnn.hpp"
#include "sthg/pipeline.hpp"
#include "sthg/types.hpp"

namespace sthg {

/// Parse failure with file/line/field context in the message.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// %.{sig_digits}g formatting; the manifest uses 9 significant digits,
/// checkpoints 17 (exact double round-trip).
std::string format_float(Scalar v, int sig_digits);

/// v passed through the 9-significant-digit manifest representation, so
/// in-memory values equal their file round-trip bit for bit.
Scalar quantize_sig9(Scalar v);

struct TranscriptEntry {
  std::string video_id;
  std::string speaker;
  Scalar t_start = 0;
  Scalar t_end = 0;
  std::vector<std::string> words;
};

// --- manifest (TRACK / WEARER / LABEL records, plus a VIDEO header record
// carrying fps) -------------------------------------------------------------

void write_manifest(const std::filesystem::path& path, const std::vector<VideoBundle>& videos);
std::vector<VideoBundle> read_manifest(const std::filesystem::path& path);

// --- VAD file (VAD records) -------------------------------------------------

void write_vad_file(const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, VadSegments>>& per_video);
std::map<std::string, VadSegments> read_vad_file(const std::filesystem::path& path);

// --- transcripts (TRANSCRIPT records) ----------------------------------------

void write_transcripts(const std::filesystem::path& path,
                       const std::vector<TranscriptEntry>& transcripts);
std::vector<TranscriptEntry> read_transcripts(const std::filesystem::path& path);

// --- RTTM --------------------------------------------------------------------

/// Standard 10-field RTTM lines, times with 3 decimals, sorted by
/// (file, tbeg, speaker).
void write_rttm(const std::filesystem::path& path, const std::map<std::string, Diarization>& by_video);
std::map<std::string, Diarization> read_rttm(const std::filesystem::path& path);

// --- per-frame scores (SCORE records) -----------------------------------------

void write_scores(const std::filesystem::path& path,
                  const std::map<std::string, FrameScores>& by_video);
std::map<std::string, FrameScores> read_scores(const std::filesystem::path& path);

// --- line-delimited key=value (configs and reports) ---------------------------

using KeyValues = std::vector<std::pair<std::string, std::string>>;

void write_kv(const std::filesystem::path& path, const KeyValues& kv);
std::map<std::string, std::string> read_kv(const std::filesystem::path& path);

// --- training history (EPOCH records) ------------------------------------------

struct EpochRow {
  int epoch = 0;
  Scalar loss = 0;
  Scalar train_ap = 0;
};

void write_history(const std::filesystem::path& path, const TrainHistory& history);
std::vector<EpochRow> read_history(const std::filesystem::path& path);

// --- checkpoint ("STHG-CKPT v1") -------------------------------------------------

/// Versioned text checkpoint: header line, config key=value block, then named
/// tensors with explicit shapes in a fixed order. 17-digit floats make the
/// round-trip bit-exact.
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const ModelParams& params);
std::pair<ModelConfig, ModelParams> load_checkpoint(const std::filesystem::path& path);

}  // namespace sthg
