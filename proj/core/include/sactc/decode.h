#pragma once

#include <span>
#include <vector>

#include "sactc/common.h"

namespace sactc {

struct Hypothesis {
  TokenSeq tokens;  // collapse(trace)
  TokenSeq trace;   // per-frame argmax
};

// Merges repeated runs, then drops blanks: (0,a,0,a,a,b,b) -> (a,a,b).
TokenSeq collapse(std::span<const TokenId> path, TokenId blank_id = 0);

// Best-path decoding; ties go to the lowest token id.
Hypothesis greedy_decode(const PosteriorGrid& post, TokenId blank_id = 0);

// Splits at every <sc>; empty segments are kept, so k delimiters always give
// k + 1 segments.
std::vector<TokenSeq> split_by_sc(std::span<const TokenId> tokens, TokenId sc_id);

}  // namespace sactc
