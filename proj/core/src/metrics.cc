#include "sactc/metrics.h"

#include <algorithm>
#include <numeric>

namespace sactc::metrics {

double EditCounts::wer() const {
  return static_cast<double>(errors()) / static_cast<double>(std::max<std::size_t>(ref_len, 1));
}

EditCounts edit_distance_wer(std::span<const std::string> ref,
                             std::span<const std::string> hyp) {
  struct Cell {
    std::size_t cost = 0;
    std::size_t sub = 0, ins = 0, del = 0;
  };
  const std::size_t m = ref.size();
  const std::size_t n = hyp.size();
  std::vector<Cell> prev(n + 1), cur(n + 1);
  for (std::size_t j = 0; j <= n; ++j) prev[j] = {j, 0, j, 0};
  for (std::size_t i = 1; i <= m; ++i) {
    cur[0] = {i, 0, 0, i};
    for (std::size_t j = 1; j <= n; ++j) {
      Cell diag = prev[j - 1];
      if (ref[i - 1] != hyp[j - 1]) {
        ++diag.cost;
        ++diag.sub;
      }
      Cell up = prev[j];  // deletion
      ++up.cost;
      ++up.del;
      Cell left = cur[j - 1];  // insertion
      ++left.cost;
      ++left.ins;
      Cell best = diag;
      if (up.cost < best.cost) best = up;
      if (left.cost < best.cost) best = left;
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  EditCounts counts;
  counts.substitutions = prev[n].sub;
  counts.insertions = prev[n].ins;
  counts.deletions = prev[n].del;
  counts.ref_len = m;
  counts.empty_reference = m == 0;
  return counts;
}

double PiWerResult::wer() const {
  return static_cast<double>(errors) /
         static_cast<double>(std::max<std::size_t>(ref_words, 1));
}

PiWerResult pi_wer(std::span<const Words> refs, std::span<const Words> hyps,
                   std::size_t max_speakers) {
  const std::size_t streams = std::max(refs.size(), hyps.size());
  if (streams > max_speakers) {
    throw BudgetExceeded("PI-WER over " + std::to_string(streams) +
                         " streams exceeds the permutation budget of " +
                         std::to_string(max_speakers));
  }
  const Words empty;
  auto ref_at = [&](std::size_t i) -> const Words& { return i < refs.size() ? refs[i] : empty; };
  auto hyp_at = [&](std::size_t i) -> const Words& { return i < hyps.size() ? hyps[i] : empty; };

  // Pairwise errors, computed once.
  std::vector<std::size_t> cost(streams * streams);
  for (std::size_t i = 0; i < streams; ++i) {
    for (std::size_t j = 0; j < streams; ++j) {
      cost[i * streams + j] = edit_distance_wer(ref_at(i), hyp_at(j)).errors();
    }
  }

  PiWerResult result;
  for (const auto& r : refs) result.ref_words += r.size();
  std::vector<std::size_t> perm(streams);
  std::iota(perm.begin(), perm.end(), 0);
  bool first = true;
  do {
    std::size_t total = 0;
    for (std::size_t i = 0; i < streams; ++i) total += cost[i * streams + perm[i]];
    if (first || total < result.errors) {
      result.errors = total;
      result.assignment = perm;
      first = false;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return result;
}

double overlap_ratio(std::span<const Interval> intervals) {
  std::vector<std::pair<double, int>> events;
  for (const auto& iv : intervals) {
    if (!(iv.duration > 0.0)) continue;
    events.emplace_back(iv.start, +1);
    events.emplace_back(iv.start + iv.duration, -1);
  }
  // Ends sort before starts at the same instant, so touching spans do not overlap.
  std::sort(events.begin(), events.end());
  double covered = 0.0;
  double overlapped = 0.0;
  int active = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (i > 0) {
      const double span = events[i].first - events[i - 1].first;
      if (active >= 1) covered += span;
      if (active >= 2) overlapped += span;
    }
    active += events[i].second;
  }
  return covered > 0.0 ? overlapped / covered : 0.0;
}

std::string_view bin_name(OverlapBin bin) {
  switch (bin) {
    case OverlapBin::kSingle: return "single";
    case OverlapBin::kLow: return "low";
    case OverlapBin::kMid: return "mid";
    case OverlapBin::kHigh: return "high";
  }
  return "unknown";
}

OverlapBin bin_overlap(double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw InvalidArgument("overlap ratio must lie in [0, 1]");
  }
  if (ratio == 0.0) return OverlapBin::kSingle;
  if (ratio <= 0.2) return OverlapBin::kLow;
  if (ratio <= 0.5) return OverlapBin::kMid;
  return OverlapBin::kHigh;
}

double oa_wer(const std::map<OverlapBin, double>& per_bin_wers) {
  double sum = 0.0;
  for (OverlapBin bin : {OverlapBin::kLow, OverlapBin::kMid, OverlapBin::kHigh}) {
    auto it = per_bin_wers.find(bin);
    if (it == per_bin_wers.end()) {
      throw InvalidArgument("OA-WER needs a WER for the '" + std::string(bin_name(bin)) +
                            "' bin");
    }
    sum += it->second;
  }
  return sum / 3.0;
}

double BinScore::wer() const {
  return static_cast<double>(errors) /
         static_cast<double>(std::max<std::size_t>(ref_words, 1));
}

ScoreReport score_mixtures(std::span<const MixtureRecord> records,
                           std::size_t max_speakers) {
  ScoreReport report;
  for (const auto& record : records) {
    const PiWerResult pi = pi_wer(record.refs, record.hyps, max_speakers);
    const OverlapBin bin = bin_overlap(overlap_ratio(record.timings));

    BinScore& b = report.bins[bin];
    ++b.mixtures;
    b.errors += pi.errors;
    b.ref_words += pi.ref_words;

    ++report.overall.mixtures;
    report.overall.errors += pi.errors;
    report.overall.ref_words += pi.ref_words;

    ++report.identity.mixtures;
    report.identity.ref_words += pi.ref_words;
    const std::size_t streams = std::max(record.refs.size(), record.hyps.size());
    const Words empty;
    for (std::size_t i = 0; i < streams; ++i) {
      const Words& r = i < record.refs.size() ? record.refs[i] : empty;
      const Words& h = i < record.hyps.size() ? record.hyps[i] : empty;
      report.identity.errors += edit_distance_wer(r, h).errors();
    }
  }
  std::map<OverlapBin, double> wers;
  for (const auto& [bin, score] : report.bins) wers[bin] = score.wer();
  if (wers.count(OverlapBin::kLow) && wers.count(OverlapBin::kMid) &&
      wers.count(OverlapBin::kHigh)) {
    report.oa_wer = oa_wer(wers);
  }
  return report;
}

}  // namespace sactc::metrics
