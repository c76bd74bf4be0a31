#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sactc/common.h"
#include "sactc/lattice.h"
#include "sactc/serialize.h"

namespace sactc::cli {

struct InstanceLimits {
  std::size_t max_frames = 6;
  std::size_t max_labels = 3;  // serialized length, <sc> included
  std::size_t min_vocab = 3;
  std::size_t max_vocab = 5;
  double logit_scale = 2.0;
};

// A random feasible instance: blank 0, <sc> = V - 1, two speakers.
struct Instance {
  LogitGrid logits;
  SerializedLabel label;
};

Instance random_two_speaker_instance(std::mt19937_64& rng, const InstanceLimits& limits);

// Random labels of length 1..max_labels over 1..V-1 (single stream).
Instance random_ctc_instance(std::mt19937_64& rng, const InstanceLimits& limits);

// max_t |P_t / P - 1| where P_t = sum_v alpha beta / y at frame t.
double time_invariance_error(const LatticeTables& tables, const PosteriorGrid& post,
                             const ExtendedLabelSeq& ext);

// max_u |sum_t alpha(t,2u) beta_hat(t,2u) / y / P - 1|.
double partition_error(const LatticeTables& tables, const PosteriorGrid& post,
                       const ExtendedLabelSeq& ext);

// max |analytic - numeric| / max(max |numeric|, 1e-12).
double relative_grad_error(const Matrix& analytic, const Matrix& numeric);

// max_t |sum_k grad(t, k)|.
double max_row_sum(const Matrix& grad);

struct CheckResult {
  std::string name;
  std::size_t trials = 0;
  double max_error = 0.0;
  double threshold = 0.0;
  bool passed = true;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool passed() const;
};

VerifyReport run_oracle_suite(std::size_t trials, std::uint64_t seed);
VerifyReport run_grad_suite(std::size_t trials, std::uint64_t seed);
VerifyReport run_invariant_suite(std::size_t trials, std::uint64_t seed);

}  // namespace sactc::cli
