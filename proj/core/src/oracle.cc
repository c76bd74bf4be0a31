#include "sactc/oracle.h"

#include <cmath>
#include <map>
#include <string>

namespace sactc::oracle {
namespace {

// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

TokenSeq collapse_path(std::span<const TokenId> path, TokenId blank_id) {
  TokenSeq out;
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (path[t] == blank_id) continue;
    if (t > 0 && path[t] == path[t - 1]) continue;
    out.push_back(path[t]);
  }
  return out;
}

template <typename Visit>
void for_each_valid_path(std::span<const TokenId> labels, std::size_t frames,
                         std::size_t vocab, TokenId blank_id, std::uint64_t budget,
                         Visit&& visit) {
  if (frames == 0 || vocab == 0) throw InvalidArgument("need T >= 1 and V >= 1");
  long double total = 1.0L;
  for (std::size_t t = 0; t < frames; ++t) {
    total *= static_cast<long double>(vocab);
    if (total > static_cast<long double>(budget)) {
      throw BudgetExceeded("enumerating " + std::to_string(vocab) + "^" +
                           std::to_string(frames) + " paths exceeds budget " +
                           std::to_string(budget));
    }
  }
  const TokenSeq target(labels.begin(), labels.end());
  TokenSeq path(frames, 0);
  while (true) {
    if (collapse_path(path, blank_id) == target) visit(std::span<const TokenId>(path));
    std::size_t i = frames;
    while (i > 0) {
      --i;
      if (static_cast<std::size_t>(++path[i]) < vocab) break;
      path[i] = 0;
      if (i == 0) return;
    }
  }
}

double path_probability(const PosteriorGrid& post, std::span<const TokenId> path) {
  double p = 1.0;
  for (std::size_t t = 0; t < path.size(); ++t) {
    p *= std::exp(post.log_values(t, static_cast<std::size_t>(path[t])));
  }
  return p;
}

}  // namespace

std::vector<AlignmentPath> enumerate_paths(std::span<const TokenId> labels,
                                           std::size_t frames, std::size_t vocab,
                                           TokenId blank_id, std::uint64_t budget) {
  std::vector<AlignmentPath> paths;
  for_each_valid_path(labels, frames, vocab, blank_id, budget,
                      [&](std::span<const TokenId> p) { paths.emplace_back(p.begin(), p.end()); });
  return paths;
}

std::vector<std::size_t> label_end_frames(std::span<const TokenId> path,
                                          TokenId blank_id) {
  std::vector<std::size_t> ends;
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (path[t] == blank_id) continue;
    if (t > 0 && path[t] == path[t - 1]) {
      ends.back() = t;
    } else {
      ends.push_back(t);
    }
  }
  return ends;
}

double brute_force_ctc(const PosteriorGrid& post, std::span<const TokenId> labels,
                       TokenId blank_id, std::uint64_t budget) {
  CompensatedSum total;
  for_each_valid_path(labels, post.frames(), post.vocab(), blank_id, budget,
                      [&](std::span<const TokenId> path) {
                        total.add(path_probability(post, path));
                      });
  return total.value();
}

double brute_force_brctc(const PosteriorGrid& post, std::span<const TokenId> labels,
                         const LogRiskFunction& log_risk,
                         std::span<const double> coefficients, TokenId blank_id,
                         std::uint64_t budget) {
  const std::size_t n = labels.size();
  std::vector<double> coeff(coefficients.begin(), coefficients.end());
  if (coeff.empty()) coeff.assign(n, 1.0 / static_cast<double>(n));
  const std::size_t frames = post.frames();

  std::vector<CompensatedSum> objective(n);
  for_each_valid_path(labels, frames, post.vocab(), blank_id, budget,
                      [&](std::span<const TokenId> path) {
                        const double p = path_probability(post, path);
                        const auto ends = label_end_frames(path, blank_id);
                        for (std::size_t u = 0; u < n; ++u) {
                          if (coeff[u] == 0.0) continue;
                          objective[u].add(std::exp(log_risk(u, ends[u] + 1, frames)) * p);
                        }
                      });
  double loss = 0.0;
  for (std::size_t u = 0; u < n; ++u) {
    if (coeff[u] != 0.0) loss += coeff[u] * -std::log(objective[u].value());
  }
  return loss;
}

double brute_force_sactc(const PosteriorGrid& post, const SerializedLabel& label,
                         const RiskSpec& spec, TokenId blank_id,
                         const SactcOptions& options, std::uint64_t budget) {
  if (label.speaker_count() != 2) {
    throw UnsupportedSpeakerCount("oracle supports two speakers only");
  }
  const std::size_t n = label.tokens.size();
  const std::size_t frames = post.frames();

  std::vector<CompensatedSum> objective(n);
  for_each_valid_path(
      label.tokens, frames, post.vocab(), blank_id, budget,
      [&](std::span<const TokenId> path) {
        const double p = path_probability(post, path);
        const auto ends = label_end_frames(path, blank_id);
        for (std::size_t u = 0; u < n; ++u) {
          const double w = risk_weight(spec, label.speaker_of_token[u], ends[u] + 1,
                                       frames, options.frame_position);
          objective[u].add(w * p);
        }
      });

  // (1/S) sum_s (1/U_s) sum_{u in s} -log J_u
  std::map<int, std::pair<double, std::size_t>> per_speaker;
  for (std::size_t u = 0; u < n; ++u) {
    if (label.tokens[u] == label.sc_id && !options.constrain_sc) continue;
    auto& [sum, count] = per_speaker[label.speaker_of_token[u]];
    sum += -std::log(objective[u].value());
    ++count;
  }
  double loss = 0.0;
  for (const auto& [speaker, entry] : per_speaker) {
    const double norm = options.normalization == TokenNormalization::kPerSpeaker
                            ? static_cast<double>(entry.second)
                            : static_cast<double>(n);
    loss += entry.first / norm;
  }
  return loss / static_cast<double>(label.speaker_count());
}

Matrix finite_diff_grad(const std::function<double(const LogitGrid&)>& f,
                        const LogitGrid& logits, double h) {
  if (!(h > 0.0)) throw InvalidArgument("finite-difference step must be positive");
  LogitGrid probe = logits;
  Matrix grad(logits.frames(), logits.vocab());
  for (std::size_t t = 0; t < logits.frames(); ++t) {
    for (std::size_t k = 0; k < logits.vocab(); ++k) {
      const double x = logits.values(t, k);
      probe.values(t, k) = x + h;
      const double up = f(probe);
      probe.values(t, k) = x - h;
      const double down = f(probe);
      probe.values(t, k) = x;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericalError("function is not finite at a perturbed point");
      }
      grad(t, k) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

}  // namespace sactc::oracle
