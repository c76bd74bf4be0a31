#pragma once

// Exhaustive reference computations for tiny instances. Nothing here shares
// code with the lattice recursions; paths are enumerated one by one.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sactc/common.h"
#include "sactc/loss.h"
#include "sactc/serialize.h"

namespace sactc::oracle {

inline constexpr std::uint64_t kDefaultBudget = 10'000'000;

using AlignmentPath = TokenSeq;

// Every length-T path over [0, V) that collapses to `labels`. Throws
// BudgetExceeded when V^T > budget.
std::vector<AlignmentPath> enumerate_paths(std::span<const TokenId> labels,
                                           std::size_t frames, std::size_t vocab,
                                           TokenId blank_id = 0,
                                           std::uint64_t budget = kDefaultBudget);

// Frame (0-based) at which the u-th emitted label ends on `path`, for each u.
std::vector<std::size_t> label_end_frames(std::span<const TokenId> path,
                                          TokenId blank_id = 0);

// P(l|x) summed path by path in probability domain.
double brute_force_ctc(const PosteriorGrid& post, std::span<const TokenId> labels,
                       TokenId blank_id = 0, std::uint64_t budget = kDefaultBudget);

// sum_u c_u * -log(sum_paths w_u(end_u) p(path)); `log_risk` follows the
// brctc_loss convention (1-based frame).
double brute_force_brctc(const PosteriorGrid& post, std::span<const TokenId> labels,
                         const LogRiskFunction& log_risk,
                         std::span<const double> coefficients, TokenId blank_id = 0,
                         std::uint64_t budget = kDefaultBudget);

// Speaker-aware loss with per-path end-frame bookkeeping.
double brute_force_sactc(const PosteriorGrid& post, const SerializedLabel& label,
                         const RiskSpec& spec, TokenId blank_id = 0,
                         const SactcOptions& options = {},
                         std::uint64_t budget = kDefaultBudget);

// Central differences (f(x + h e) - f(x - h e)) / 2h for every logit.
// Throws NumericalError if f is not finite at a perturbed point.
Matrix finite_diff_grad(const std::function<double(const LogitGrid&)>& f,
                        const LogitGrid& logits, double h = 1e-5);

}  // namespace sactc::oracle
