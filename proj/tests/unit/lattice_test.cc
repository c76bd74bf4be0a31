#include "sactc/lattice.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.h"
#include "sactc/loss.h"
#include "sactc/oracle.h"

namespace sactc {
namespace {

constexpr TokenId kA = 1;
constexpr TokenId kB = 2;

PosteriorGrid uniform_posterior(std::size_t frames, std::size_t vocab) {
  return softmax_log(testing::uniform_logits(frames, vocab));
}

TEST(ExtendLabels, SingleToken) {
  const ExtendedLabelSeq ext = extend_labels(TokenSeq{kA}, 0);
  EXPECT_EQ(ext.tokens, (TokenSeq{0, kA, 0}));
  EXPECT_EQ(ext.label_count(), 1u);
}

TEST(ExtendLabels, RepeatedAndDistinctTokens) {
  EXPECT_EQ(extend_labels(TokenSeq{kA, kA, kB}, 0).tokens,
            (TokenSeq{0, kA, 0, kA, 0, kB, 0}));
  EXPECT_EQ(extend_labels(TokenSeq{kA, kB}, 0).tokens, (TokenSeq{0, kA, 0, kB, 0}));
}

TEST(ExtendLabels, NonZeroBlank) {
  EXPECT_EQ(extend_labels(TokenSeq{0, 1}, 3).tokens, (TokenSeq{3, 0, 3, 1, 3}));
}

TEST(ExtendLabels, RejectsEmptyAndBlankInside) {
  EXPECT_THROW(extend_labels(TokenSeq{}, 0), InvalidArgument);
  EXPECT_THROW(extend_labels(TokenSeq{kA, 0}, 0), InvalidArgument);
}

TEST(ExtendLabels, SkipTransitions) {
  const ExtendedLabelSeq ext = extend_labels(TokenSeq{kA, kA, kB}, 0);
  EXPECT_FALSE(ext.can_skip_into(3));  // a after a
  EXPECT_TRUE(ext.can_skip_into(5));   // b after a
  EXPECT_FALSE(ext.can_skip_into(4));  // blank
}

TEST(MinAlignmentLength, CountsRepeats) {
  EXPECT_EQ(min_alignment_length(TokenSeq{kA}), 1u);
  EXPECT_EQ(min_alignment_length(TokenSeq{kA, kA, kB}), 4u);
  EXPECT_EQ(min_alignment_length(TokenSeq{kA, kB, kA}), 3u);
}

TEST(Forward, SingleFrame) {
  std::mt19937_64 rng(3);
  const PosteriorGrid post = softmax_log(testing::random_logits(rng, 1, 3));
  const Matrix alpha = forward(post, extend_labels(TokenSeq{kA}, 0));
  EXPECT_NEAR(alpha(0, 1), post.log_values(0, kA), 1e-15);
  EXPECT_EQ(alpha(0, 2), kLogZero);
}

TEST(Forward, TwoFramesUniform) {
  const PosteriorGrid post = uniform_posterior(2, 2);
  const LatticeTables tables = compute_lattice(post, extend_labels(TokenSeq{kA}, 0));
  EXPECT_NEAR(std::exp(tables.log_likelihood()), 0.75, 1e-15);
}

TEST(Forward, ThrowsWhenTooShort) {
  const PosteriorGrid post = uniform_posterior(2, 3);
  EXPECT_THROW(forward(post, extend_labels(TokenSeq{kA, kA}, 0)), InfeasibleAlignment);
  EXPECT_THROW(backward(post, extend_labels(TokenSeq{kA, kA}, 0)), InfeasibleAlignment);
}

TEST(Forward, ThrowsOnTokenOutsideGrid) {
  const PosteriorGrid post = uniform_posterior(3, 3);
  EXPECT_THROW(forward(post, extend_labels(TokenSeq{5}, 0)), InvalidArgument);
}

TEST(Backward, SingleFrame) {
  std::mt19937_64 rng(5);
  const PosteriorGrid post = softmax_log(testing::random_logits(rng, 1, 3));
  const ExtendedLabelSeq ext = extend_labels(TokenSeq{kA}, 0);
  const Matrix beta = backward(post, ext);
  EXPECT_NEAR(beta(0, 1), post.log_values(0, kA), 1e-15);
  const Matrix beta_hat = backward_revised(beta, post, ext);
  EXPECT_EQ(beta_hat(0, 1), beta(0, 1));
}

TEST(Backward, TwoFramesUniformLeadingBlank) {
  const PosteriorGrid post = uniform_posterior(2, 2);
  const Matrix beta = backward(post, extend_labels(TokenSeq{kA}, 0));
  EXPECT_NEAR(std::exp(beta(0, 0)), 0.25, 1e-15);
}

TEST(BackwardRevised, TwoFramesUniformGroupedPosteriors) {
  const PosteriorGrid post = uniform_posterior(2, 2);
  const GroupedPosterior g = grouped_posteriors(post, TokenSeq{kA}, 0);
  EXPECT_NEAR(std::exp(g.log_occupancy(0, 0)), 0.25, 1e-15);
  EXPECT_NEAR(std::exp(g.log_occupancy(0, 1)), 0.50, 1e-15);
}

TEST(BackwardRevised, NonLabelPositionsAreZero) {
  std::mt19937_64 rng(9);
  const PosteriorGrid post = softmax_log(testing::random_logits(rng, 5, 4));
  const ExtendedLabelSeq ext = extend_labels(TokenSeq{kA, kB}, 0);
  const LatticeTables tables = compute_lattice(post, ext);
  for (std::size_t t = 0; t < 5; ++t) {
    for (std::size_t v = 0; v < ext.size(); v += 2) EXPECT_EQ(tables.beta_hat(t, v), kLogZero);
  }
}

class LatticeProperties : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(LatticeProperties, MatchesEnumerationAndInvariants) {
  std::mt19937_64 rng(GetParam());
  std::uniform_int_distribution<std::size_t> frames_dist(1, 6);
  std::uniform_int_distribution<std::size_t> vocab_dist(2, 4);
  const std::size_t frames = frames_dist(rng);
  const std::size_t vocab = vocab_dist(rng);
  const TokenSeq labels = testing::random_labels(rng, 3, vocab, frames);
  const PosteriorGrid post = softmax_log(testing::random_logits(rng, frames, vocab));
  const ExtendedLabelSeq ext = extend_labels(labels, 0);
  const LatticeTables tables = compute_lattice(post, ext);
  const double log_p = tables.log_likelihood();

  EXPECT_NEAR(log_p, std::log(oracle::brute_force_ctc(post, labels, 0)), 1e-9);

  for (std::size_t t = 0; t < frames; ++t) {
    double at_t = kLogZero;
    for (std::size_t v = 0; v < ext.size(); ++v) {
      at_t = log_add(at_t, tables.alpha(t, v) + tables.beta(t, v) -
                               post.log_values(t, static_cast<std::size_t>(ext.tokens[v])));
    }
    EXPECT_NEAR(std::exp(at_t - log_p), 1.0, 1e-10) << "frame " << t;
  }
  for (std::size_t u = 0; u < ext.label_count(); ++u) {
    const std::size_t v = ExtendedLabelSeq::label_position(u);
    double grouped = kLogZero;
    for (std::size_t t = 0; t < frames; ++t) {
      grouped = log_add(grouped, tables.alpha(t, v) + tables.beta_hat(t, v) -
                                     post.log_values(t, static_cast<std::size_t>(ext.tokens[v])));
    }
    EXPECT_NEAR(std::exp(grouped - log_p), 1.0, 1e-10) << "label " << u;
  }
}

INSTANTIATE_TEST_SUITE_P(RandomInstances, LatticeProperties, ::testing::Range<std::uint64_t>(1, 41));

}  // namespace
}  // namespace sactc
