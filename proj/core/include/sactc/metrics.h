#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sactc/common.h"

namespace sactc::metrics {

using Words = std::vector<std::string>;

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t ref_len = 0;
  bool empty_reference = false;

  std::size_t errors() const { return substitutions + insertions + deletions; }
  // errors / max(ref_len, 1)
  double wer() const;
};

// Levenshtein alignment of hyp against ref.
EditCounts edit_distance_wer(std::span<const std::string> ref,
                             std::span<const std::string> hyp);

struct PiWerResult {
  std::size_t errors = 0;
  std::size_t ref_words = 0;
  // assignment[i] = hypothesis stream paired with reference stream i, after
  // both sides are padded with empty streams to equal length.
  std::vector<std::size_t> assignment;

  double wer() const;
};

inline constexpr std::size_t kDefaultMaxSpeakers = 6;

// Minimum total errors over speaker permutations, divided by total reference
// words. Throws BudgetExceeded if the padded stream count exceeds
// `max_speakers`.
PiWerResult pi_wer(std::span<const Words> refs, std::span<const Words> hyps,
                   std::size_t max_speakers = kDefaultMaxSpeakers);

struct Interval {
  double start = 0.0;
  double duration = 0.0;
};

// Time covered by >= 2 intervals over time covered by >= 1 interval.
double overlap_ratio(std::span<const Interval> intervals);

enum class OverlapBin { kSingle, kLow, kMid, kHigh };

std::string_view bin_name(OverlapBin bin);

// 0 -> single, (0, 0.2] -> low, (0.2, 0.5] -> mid, (0.5, 1] -> high.
OverlapBin bin_overlap(double ratio);

// Unweighted mean of the low, mid and high bin WERs. Throws InvalidArgument
// if one of them is missing.
double oa_wer(const std::map<OverlapBin, double>& per_bin_wers);

struct MixtureRecord {
  std::string id;
  std::vector<Words> refs;
  std::vector<Words> hyps;
  std::vector<Interval> timings;
};

struct BinScore {
  std::size_t mixtures = 0;
  std::size_t errors = 0;
  std::size_t ref_words = 0;
  double wer() const;
};

struct ScoreReport {
  std::map<OverlapBin, BinScore> bins;
  BinScore overall;                  // permutation-invariant, pooled
  BinScore identity;                 // speakers paired in listed order
  std::optional<double> oa_wer;      // set when low, mid and high are all present
};

// Scores every mixture with PI-WER and pools counts per overlap bin.
ScoreReport score_mixtures(std::span<const MixtureRecord> records,
                           std::size_t max_speakers = kDefaultMaxSpeakers);

}  // namespace sactc::metrics
