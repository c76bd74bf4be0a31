#include "cli/verify.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sactc/loss.h"
#include "sactc/oracle.h"

namespace sactc::cli {
namespace {

LogitGrid random_logits(std::mt19937_64& rng, std::size_t frames, std::size_t vocab,
                        double scale) {
  std::normal_distribution<double> gauss(0.0, scale);
  Matrix values(frames, vocab);
  for (double& x : values.data()) x = gauss(rng);
  return LogitGrid(std::move(values));
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Keeps NaN sticky so that a NaN error always fails its check.
void track(double& max_error, double e) {
  if (!(e <= max_error)) max_error = e;
}

CheckResult finish(std::string name, std::size_t trials, double max_error, double threshold) {
  return {std::move(name), trials, max_error, threshold, max_error <= threshold};
}

double ctc_log_error(const Instance& inst) {
  const double dp = ctc_loss(inst.logits, inst.label.tokens, 0).loss;
  const double brute = -std::log(oracle::brute_force_ctc(softmax_log(inst.logits),
                                                         inst.label.tokens, 0));
  return std::abs(dp - brute);
}

}  // namespace

Instance random_two_speaker_instance(std::mt19937_64& rng, const InstanceLimits& limits) {
  while (true) {
    const std::size_t vocab = pick(rng, std::max<std::size_t>(limits.min_vocab, 3),
                                   limits.max_vocab);
    const auto sc = static_cast<TokenId>(vocab - 1);
    const std::size_t content = limits.max_labels - 1;  // tokens besides <sc>
    const std::size_t first = pick(rng, 1, content - 1);
    const std::size_t second = pick(rng, 1, content - first);
    std::uniform_int_distribution<TokenId> token(1, static_cast<TokenId>(vocab - 2));
    SpeakerTranscripts tr;
    tr.per_speaker.resize(2);
    for (std::size_t i = 0; i < first; ++i) tr.per_speaker[0].push_back(token(rng));
    for (std::size_t i = 0; i < second; ++i) tr.per_speaker[1].push_back(token(rng));
    SerializedLabel label = serialize_sot(tr, sc);
    const std::size_t min_frames = min_alignment_length(label.tokens);
    if (min_frames > limits.max_frames) continue;
    const std::size_t frames = pick(rng, min_frames, limits.max_frames);
    return {random_logits(rng, frames, vocab, limits.logit_scale), std::move(label)};
  }
}

Instance random_ctc_instance(std::mt19937_64& rng, const InstanceLimits& limits) {
  while (true) {
    const std::size_t vocab = pick(rng, std::max<std::size_t>(limits.min_vocab, 2),
                                   limits.max_vocab);
    std::uniform_int_distribution<TokenId> token(1, static_cast<TokenId>(vocab - 1));
    SerializedLabel label;
    label.tokens.resize(pick(rng, 1, limits.max_labels));
    for (auto& t : label.tokens) t = token(rng);
    label.speaker_of_token.assign(label.tokens.size(), 1);
    label.per_speaker_counts = {label.tokens.size()};
    const std::size_t min_frames = min_alignment_length(label.tokens);
    if (min_frames > limits.max_frames) continue;
    const std::size_t frames = pick(rng, min_frames, limits.max_frames);
    return {random_logits(rng, frames, vocab, limits.logit_scale), std::move(label)};
  }
}

double time_invariance_error(const LatticeTables& tables, const PosteriorGrid& post,
                             const ExtendedLabelSeq& ext) {
  const double log_p = tables.log_likelihood();
  double worst = 0.0;
  for (std::size_t t = 0; t < post.frames(); ++t) {
    double sum = kLogZero;
    for (std::size_t v = 0; v < ext.size(); ++v) {
      const double y = post.log_values(t, static_cast<std::size_t>(ext.tokens[v]));
      if (y == kLogZero) continue;
      sum = log_add(sum, tables.alpha(t, v) + tables.beta(t, v) - y);
    }
    track(worst, std::abs(std::expm1(sum - log_p)));
  }
  return worst;
}

double partition_error(const LatticeTables& tables, const PosteriorGrid& post,
                       const ExtendedLabelSeq& ext) {
  const double log_p = tables.log_likelihood();
  double worst = 0.0;
  for (std::size_t u = 0; u < ext.label_count(); ++u) {
    const std::size_t v = ExtendedLabelSeq::label_position(u);
    double sum = kLogZero;
    for (std::size_t t = 0; t < post.frames(); ++t) {
      const double y = post.log_values(t, static_cast<std::size_t>(ext.tokens[v]));
      if (y == kLogZero) continue;
      sum = log_add(sum, tables.alpha(t, v) + tables.beta_hat(t, v) - y);
    }
    track(worst, std::abs(std::expm1(sum - log_p)));
  }
  return worst;
}

double relative_grad_error(const Matrix& analytic, const Matrix& numeric) {
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < numeric.data().size(); ++i) {
    track(diff, std::abs(analytic.data()[i] - numeric.data()[i]));
    scale = std::max(scale, std::abs(numeric.data()[i]));
  }
  return diff / std::max(scale, 1e-12);
}

double max_row_sum(const Matrix& grad) {
  double worst = 0.0;
  for (std::size_t t = 0; t < grad.rows(); ++t) {
    double sum = 0.0;
    for (double g : grad.row(t)) sum += g;
    track(worst, std::abs(sum));
  }
  return worst;
}

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

VerifyReport run_oracle_suite(std::size_t trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const InstanceLimits limits;  // T <= 6, U <= 3, V <= 5
  double ctc_err = 0.0;
  double sactc_err = 0.0;
  double degenerate_err = 0.0;
  for (std::size_t i = 0; i < trials; ++i) {
    track(ctc_err, ctc_log_error(random_ctc_instance(rng, limits)));

    const Instance inst = random_two_speaker_instance(rng, limits);
    track(ctc_err, ctc_log_error(inst));
    const PosteriorGrid post = softmax_log(inst.logits);
    for (double lambda : {0.0, 5.0, 15.0}) {
      const RiskSpec spec = make_risk_spec(inst.label, lambda);
      const double dp = sactc_loss(inst.logits, inst.label, spec, 0).loss;
      const double brute = oracle::brute_force_sactc(post, inst.label, spec, 0);
      track(sactc_err, std::abs(dp - brute));
    }
    const double ctc = ctc_loss(inst.logits, inst.label.tokens, 0).loss;
    const double flat = sactc_loss(inst.logits, inst.label, make_risk_spec(inst.label, 0.0), 0).loss;
    track(degenerate_err, std::abs(flat - ctc - std::numbers::ln2));
  }
  VerifyReport report;
  report.checks.push_back(finish("oracle.ctc_loss", trials, ctc_err, 1e-9));
  report.checks.push_back(finish("oracle.sactc_loss", trials, sactc_err, 1e-9));
  report.checks.push_back(finish("oracle.degeneration_log2", trials, degenerate_err, 1e-9));
  return report;
}

VerifyReport run_grad_suite(std::size_t trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  InstanceLimits limits;
  limits.max_frames = 8;
  limits.max_labels = 4;
  constexpr double kStep = 1e-5;
  double ctc_rel = 0.0;
  double sactc_rel = 0.0;
  double row_sum = 0.0;
  for (std::size_t i = 0; i < trials; ++i) {
    const Instance inst = random_two_speaker_instance(rng, limits);
    const auto& labels = inst.label.tokens;

    const LossResult ctc = ctc_loss(inst.logits, labels, 0);
    const Matrix ctc_fd = oracle::finite_diff_grad(
        [&](const LogitGrid& x) { return ctc_loss(x, labels, 0).loss; }, inst.logits, kStep);
    track(ctc_rel, relative_grad_error(ctc.grad, ctc_fd));
    track(row_sum, max_row_sum(ctc.grad));

    const RiskSpec spec = make_risk_spec(inst.label, i % 2 == 0 ? 15.0 : 5.0);
    const LossResult sa = sactc_loss(inst.logits, inst.label, spec, 0);
    const Matrix sa_fd = oracle::finite_diff_grad(
        [&](const LogitGrid& x) { return sactc_loss(x, inst.label, spec, 0).loss; },
        inst.logits, kStep);
    track(sactc_rel, relative_grad_error(sa.grad, sa_fd));
    track(row_sum, max_row_sum(sa.grad));
  }
  VerifyReport report;
  report.checks.push_back(finish("grad.ctc_vs_finite_diff", trials, ctc_rel, 1e-4));
  report.checks.push_back(finish("grad.sactc_vs_finite_diff", trials, sactc_rel, 1e-4));
  report.checks.push_back(finish("grad.row_sums", trials, row_sum, 1e-8));
  return report;
}

VerifyReport run_invariant_suite(std::size_t trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  InstanceLimits limits;
  limits.max_frames = 12;
  limits.max_labels = 5;
  limits.max_vocab = 6;
  double time_err = 0.0;
  double part_err = 0.0;
  for (std::size_t i = 0; i < trials; ++i) {
    const Instance inst = random_two_speaker_instance(rng, limits);
    const PosteriorGrid post = softmax_log(inst.logits);
    const ExtendedLabelSeq ext = extend_labels(inst.label.tokens, 0);
    const LatticeTables tables = compute_lattice(post, ext);
    track(time_err, time_invariance_error(tables, post, ext));
    track(part_err, partition_error(tables, post, ext));
  }
  VerifyReport report;
  report.checks.push_back(finish("invariants.time_invariance", trials, time_err, 1e-10));
  report.checks.push_back(finish("invariants.end_frame_partition", trials, part_err, 1e-10));
  return report;
}

}  // namespace sactc::cli
