#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "sactc/common.h"
#include "sactc/lattice.h"
#include "sactc/serialize.h"

namespace sactc {

enum class LossStatus {
  kOk,
  kInfeasible,  // T too short for the labels; loss is +inf, grad is zero
};

struct LossResult {
  double loss = 0.0;
  Matrix grad;  // d loss / d logits, T x V
  LossStatus status = LossStatus::kOk;
  // Per-token objectives L_u for the risk-weighted losses; empty for CTC.
  std::vector<double> per_token_losses;

  bool feasible() const { return status == LossStatus::kOk; }
};

// Per-frame log-softmax.
PosteriorGrid softmax_log(const LogitGrid& logits);

// -log P(l|x) and its gradient.
LossResult ctc_loss(const LogitGrid& logits, std::span<const TokenId> labels,
                    TokenId blank_id = 0);

// Occupancy of each label position by end frame:
//   g_u(t) = alpha(t, 2u) * beta_hat(t, 2u) / y^t_{l_u},
// summing over t to P(l|x).
struct GroupedPosterior {
  Matrix log_occupancy;  // U x T
  double log_likelihood = kLogZero;
};

// Throws InfeasibleAlignment.
GroupedPosterior grouped_posteriors(const PosteriorGrid& post,
                                    std::span<const TokenId> labels,
                                    TokenId blank_id = 0);

// Log risk weight for label u (0-based) at frame t (1-based) out of T.
using LogRiskFunction =
    std::function<double(std::size_t u, std::size_t frame, std::size_t frames)>;

// Bayes-risk CTC over end-frame groups:
//   L_u = -log sum_t w_u(t) g_u(t),   loss = sum_u c_u L_u.
// `coefficients` has one entry per label; an empty span means the plain mean
// over all labels. Labels with a zero coefficient are not evaluated.
// Throws InvalidArgument if some evaluated label gets zero weight at every
// frame.
LossResult brctc_loss(const LogitGrid& logits, std::span<const TokenId> labels,
                      const LogRiskFunction& log_risk,
                      std::span<const double> coefficients, TokenId blank_id = 0);

// How per-speaker sums are normalized in the speaker-aware objective.
enum class TokenNormalization {
  kPerSpeaker,  // 1/U_s, the speaker's own token count
  kGlobal,      // 1/U, the full serialized length
};

struct SactcOptions {
  TokenNormalization normalization = TokenNormalization::kPerSpeaker;
  FramePosition frame_position = FramePosition::kEnd;
  // Constrain <sc> with the risk of the speaker it terminates.
  bool constrain_sc = false;
};

// Per-label coefficients c_u of the speaker-aware aggregation:
//   (1/S) sum_s (1/U_s) sum_{u in s} L_u
std::vector<double> sactc_coefficients(const SerializedLabel& label,
                                       const SactcOptions& options = {});

// Speaker-aware CTC. Throws UnsupportedSpeakerCount unless the label and
// spec both have two speakers.
LossResult sactc_loss(const LogitGrid& logits, const SerializedLabel& label,
                      const RiskSpec& spec, TokenId blank_id = 0,
                      const SactcOptions& options = {});

enum class LossMode { kCtc, kSactc };

// ctc_loss + aux_weight * (mode loss), gradients summed.
LossResult combined_loss(const LogitGrid& logits, const SerializedLabel& label,
                         const RiskSpec& spec, LossMode mode, double aux_weight,
                         TokenId blank_id = 0, const SactcOptions& options = {});

}  // namespace sactc
