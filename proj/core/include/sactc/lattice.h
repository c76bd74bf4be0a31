#pragma once

#include <cstddef>
#include <span>

#include "sactc/common.h"

namespace sactc {

// Blank-interleaved label sequence [blank, l1, blank, ..., lU, blank].
struct ExtendedLabelSeq {
  TokenSeq tokens;
  TokenId blank = 0;

  std::size_t size() const { return tokens.size(); }
  std::size_t label_count() const { return tokens.size() / 2; }

  // Lattice position (0-based) holding label u (0-based).
  static constexpr std::size_t label_position(std::size_t u) { return 2 * u + 1; }

  // True when position v may be entered directly from v - 2.
  bool can_skip_into(std::size_t v) const {
    return v >= 2 && tokens[v] != blank && tokens[v] != tokens[v - 2];
  }
};

// Throws InvalidArgument for an empty sequence or a blank inside `labels`.
ExtendedLabelSeq extend_labels(std::span<const TokenId> labels, TokenId blank_id);

// Fewest frames admitting an alignment: U plus the number of adjacent repeats.
std::size_t min_alignment_length(std::span<const TokenId> labels);

// Forward, backward, and revised-backward tables, all log domain, T x (2U+1).
//
// beta includes the emission at its own frame. beta_hat is meaningful only at
// label positions (odd 0-based indices) and holds -inf elsewhere; it sums the
// suffixes in which the label at that position is emitted for the last time
// at frame t.
struct LatticeTables {
  Matrix alpha;
  Matrix beta;
  Matrix beta_hat;

  // log P(l|x) read off the last frame of the forward table.
  double log_likelihood() const;
};

// The three table builders throw InfeasibleAlignment when T is below
// min_alignment_length, and InvalidArgument when a token id is outside the
// posterior grid.
Matrix forward(const PosteriorGrid& post, const ExtendedLabelSeq& ext);
Matrix backward(const PosteriorGrid& post, const ExtendedLabelSeq& ext);

// beta_hat(t, 2u) = beta(t, 2u) - beta(t+1, 2u) * y^t_{l_u}, and beta(T, 2u)
// at the last frame. Throws NumericalError if the difference would be
// negative beyond a 1e-12 relative tolerance.
Matrix backward_revised(const Matrix& beta, const PosteriorGrid& post,
                        const ExtendedLabelSeq& ext);

LatticeTables compute_lattice(const PosteriorGrid& post, const ExtendedLabelSeq& ext);

}  // namespace sactc
