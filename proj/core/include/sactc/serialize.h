#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sactc/common.h"

namespace sactc {

// Per-speaker transcripts in first-in-first-out order.
struct SpeakerTranscripts {
  std::vector<TokenSeq> per_speaker;
  std::vector<double> start_times;  // optional; empty or one per speaker
};

// A serialized output training target: speakers joined by <sc>.
struct SerializedLabel {
  TokenSeq tokens;
  // 1-based speaker index per token; <sc> carries the speaker it terminates.
  std::vector<int> speaker_of_token;
  std::vector<std::size_t> per_speaker_counts;
  TokenId sc_id = -1;

  int speaker_count() const { return static_cast<int>(per_speaker_counts.size()); }
  bool is_sc(std::size_t u) const { return tokens[u] == sc_id; }
};

struct RiskSpec {
  double lambda = 0.0;
  double boundary_b = 0.5;
  int speaker_count = 2;
};

// Where a frame sits on the normalized time axis inside the risk sigmoid.
enum class FramePosition {
  kEnd,     // t / T
  kCenter,  // (t - 0.5) / T
};

// Joins the speakers' transcripts with single <sc> tokens. Speakers are
// stably reordered by start time when start times are given.
SerializedLabel serialize_sot(const SpeakerTranscripts& transcripts, TokenId sc_id);

// Splits tokens back into per-speaker sequences at <sc>.
std::vector<TokenSeq> deserialize_sot(const SerializedLabel& label);

// M / (M + N) from the non-<sc> token counts of a two-speaker label.
double boundary_ratio(const SerializedLabel& label);

// Builds a RiskSpec with b taken from the label.
RiskSpec make_risk_spec(const SerializedLabel& label, double lambda);

// Positive speaker-aware risk weight, the negation of the sigmoid risk:
//   speaker 1: 1 / (1 + exp( lambda (t/T - b)))
//   speaker 2: 1 / (1 + exp(-lambda (t/T - b)))
// `frame` is 1-based.
double risk_weight(const RiskSpec& spec, int speaker, std::size_t frame,
                   std::size_t frames, FramePosition position = FramePosition::kEnd);

// log of risk_weight, accurate where the weight underflows.
double log_risk_weight(const RiskSpec& spec, int speaker, std::size_t frame,
                       std::size_t frames,
                       FramePosition position = FramePosition::kEnd);

// Contents of a JSON label file.
struct LabelFile {
  std::vector<std::string> vocab;
  TokenId blank_id = 0;
  TokenId sc_id = -1;
  SpeakerTranscripts transcripts;
  SerializedLabel label;
};

// Parses and validates a JSON label file. Throws InvalidArgument.
LabelFile parse_label_file(std::string_view json_text);

}  // namespace sactc
