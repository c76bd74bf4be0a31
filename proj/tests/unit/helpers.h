#pragma once

#include <cstddef>
#include <random>

#include "sactc/common.h"
#include "sactc/loss.h"

namespace sactc::testing {

inline LogitGrid uniform_logits(std::size_t frames, std::size_t vocab) {
  return LogitGrid(Matrix(frames, vocab, 0.0));
}

inline LogitGrid random_logits(std::mt19937_64& rng, std::size_t frames, std::size_t vocab,
                               double scale = 2.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  LogitGrid logits(Matrix(frames, vocab));
  for (double& x : logits.values.data()) x = gauss(rng);
  return logits;
}

// Random labels over 1..vocab-1 that fit in `frames`.
inline TokenSeq random_labels(std::mt19937_64& rng, std::size_t max_len, std::size_t vocab,
                              std::size_t frames) {
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  std::uniform_int_distribution<TokenId> tok(1, static_cast<TokenId>(vocab - 1));
  for (;;) {
    TokenSeq labels(len(rng));
    for (auto& x : labels) x = tok(rng);
    std::size_t needed = labels.size();
    for (std::size_t i = 1; i < labels.size(); ++i) needed += labels[i] == labels[i - 1];
    if (needed <= frames) return labels;
  }
}

}  // namespace sactc::testing
