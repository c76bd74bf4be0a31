#include "sactc/decode.h"

namespace sactc {

TokenSeq collapse(std::span<const TokenId> path, TokenId blank_id) {
  TokenSeq merged;
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (t == 0 || path[t] != path[t - 1]) merged.push_back(path[t]);
  }
  TokenSeq out;
  for (TokenId token : merged) {
    if (token != blank_id) out.push_back(token);
  }
  return out;
}

Hypothesis greedy_decode(const PosteriorGrid& post, TokenId blank_id) {
  Hypothesis hyp;
  hyp.trace.reserve(post.frames());
  for (std::size_t t = 0; t < post.frames(); ++t) {
    auto row = post.log_values.row(t);
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k) {
      if (row[k] > row[best]) best = k;
    }
    hyp.trace.push_back(static_cast<TokenId>(best));
  }
  hyp.tokens = collapse(hyp.trace, blank_id);
  return hyp;
}

std::vector<TokenSeq> split_by_sc(std::span<const TokenId> tokens, TokenId sc_id) {
  std::vector<TokenSeq> segments(1);
  for (TokenId token : tokens) {
    if (token == sc_id) {
      segments.emplace_back();
    } else {
      segments.back().push_back(token);
    }
  }
  return segments;
}

}  // namespace sactc
