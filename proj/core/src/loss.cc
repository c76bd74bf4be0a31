#include "sactc/loss.h"

#include <algorithm>
#include <limits>
#include <string>

namespace sactc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

LossResult infeasible_result(const LogitGrid& logits) {
  LossResult result;
  result.loss = kInf;
  result.grad = Matrix(logits.frames(), logits.vocab(), 0.0);
  result.status = LossStatus::kInfeasible;
  return result;
}

void check_logits(const LogitGrid& logits) {
  if (logits.frames() < 1 || logits.vocab() < 2) {
    throw InvalidArgument("logit grid needs T >= 1 and V >= 2");
  }
  for (double x : logits.values.data()) {
    if (!std::isfinite(x)) throw InvalidArgument("logits must be finite");
  }
}

// Converts d loss / d log-softmax into d loss / d logits, row by row.
Matrix through_softmax(const Matrix& d_logprob, const PosteriorGrid& post) {
  Matrix grad(d_logprob.rows(), d_logprob.cols());
  for (std::size_t t = 0; t < grad.rows(); ++t) {
    double row_sum = 0.0;
    for (double g : d_logprob.row(t)) row_sum += g;
    for (std::size_t k = 0; k < grad.cols(); ++k) {
      grad(t, k) = d_logprob(t, k) - std::exp(post.log_values(t, k)) * row_sum;
    }
  }
  return grad;
}

double emit(const PosteriorGrid& post, const ExtendedLabelSeq& ext, std::size_t t,
            std::size_t v) {
  return post.log_values(t, static_cast<std::size_t>(ext.tokens[v]));
}

// Log of the mass that leaves label position v right after frame t:
// sum of beta over the positions reachable from v other than v itself.
// At the last frame this is 1 for the final label and 0 otherwise.
double log_exit_mass(const Matrix& beta, const ExtendedLabelSeq& ext,
                     std::size_t t, std::size_t v) {
  const std::size_t frames = beta.rows();
  if (t + 1 == frames) return v + 2 == ext.size() ? 0.0 : kLogZero;
  double sum = beta(t + 1, v + 1);
  if (v + 2 < ext.size() && ext.can_skip_into(v + 2)) {
    sum = log_add(sum, beta(t + 1, v + 2));
  }
  return sum;
}

}  // namespace

PosteriorGrid softmax_log(const LogitGrid& logits) {
  PosteriorGrid post;
  post.log_values = Matrix(logits.frames(), logits.vocab());
  for (std::size_t t = 0; t < logits.frames(); ++t) {
    auto row = logits.values.row(t);
    const double peak = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double x : row) sum += std::exp(x - peak);
    const double lse = peak + std::log(sum);
    for (std::size_t k = 0; k < row.size(); ++k) post.log_values(t, k) = row[k] - lse;
  }
  return post;
}

LossResult ctc_loss(const LogitGrid& logits, std::span<const TokenId> labels,
                    TokenId blank_id) {
  check_logits(logits);
  const ExtendedLabelSeq ext = extend_labels(labels, blank_id);
  const PosteriorGrid post = softmax_log(logits);

  Matrix alpha;
  Matrix beta;
  try {
    alpha = forward(post, ext);
    beta = backward(post, ext);
  } catch (const InfeasibleAlignment&) {
    return infeasible_result(logits);
  }
  const std::size_t frames = post.frames();
  const double log_p = log_add(alpha(frames - 1, ext.size() - 1),
                               alpha(frames - 1, ext.size() - 2));
  if (log_p == kLogZero) return infeasible_result(logits);

  // d(-log P)/d log y^t_k = -sum_{v: l'_v = k} alpha beta / (y P)
  Matrix occupancy(frames, post.vocab(), kLogZero);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t v = 0; v < ext.size(); ++v) {
      const double a = alpha(t, v);
      const double b = beta(t, v);
      if (a == kLogZero || b == kLogZero) continue;
      auto& cell = occupancy(t, static_cast<std::size_t>(ext.tokens[v]));
      cell = log_add(cell, a + b - emit(post, ext, t, v) - log_p);
    }
  }
  Matrix d_logprob(frames, post.vocab());
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < post.vocab(); ++k) {
      d_logprob(t, k) = -std::exp(occupancy(t, k));
    }
  }

  LossResult result;
  result.loss = -log_p;
  result.grad = through_softmax(d_logprob, post);
  return result;
}

GroupedPosterior grouped_posteriors(const PosteriorGrid& post,
                                    std::span<const TokenId> labels,
                                    TokenId blank_id) {
  const ExtendedLabelSeq ext = extend_labels(labels, blank_id);
  const LatticeTables tables = compute_lattice(post, ext);
  const std::size_t frames = post.frames();

  GroupedPosterior grouped;
  grouped.log_likelihood = tables.log_likelihood();
  grouped.log_occupancy = Matrix(labels.size(), frames, kLogZero);
  for (std::size_t u = 0; u < labels.size(); ++u) {
    const std::size_t v = ExtendedLabelSeq::label_position(u);
    for (std::size_t t = 0; t < frames; ++t) {
      const double y = emit(post, ext, t, v);
      if (y == kLogZero) continue;
      grouped.log_occupancy(u, t) = tables.alpha(t, v) + tables.beta_hat(t, v) - y;
    }
  }
  return grouped;
}

LossResult brctc_loss(const LogitGrid& logits, std::span<const TokenId> labels,
                      const LogRiskFunction& log_risk,
                      std::span<const double> coefficients, TokenId blank_id) {
  check_logits(logits);
  const std::size_t label_count = labels.size();
  std::vector<double> coeff(coefficients.begin(), coefficients.end());
  if (coeff.empty()) coeff.assign(label_count, 1.0 / static_cast<double>(label_count));
  if (coeff.size() != label_count) {
    throw InvalidArgument("need one aggregation coefficient per label");
  }
  for (double c : coeff) {
    if (!(c >= 0.0) || !std::isfinite(c)) {
      throw InvalidArgument("aggregation coefficients must be finite and >= 0");
    }
  }

  const ExtendedLabelSeq ext = extend_labels(labels, blank_id);
  const PosteriorGrid post = softmax_log(logits);
  const std::size_t frames = post.frames();
  const std::size_t width = ext.size();

  Matrix log_weight(label_count, frames, kLogZero);
  for (std::size_t u = 0; u < label_count; ++u) {
    if (coeff[u] == 0.0) continue;
    bool any = false;
    for (std::size_t t = 0; t < frames; ++t) {
      const double lw = log_risk(u, t + 1, frames);
      if (std::isnan(lw) || lw > 1e-12) {
        throw InvalidArgument("risk weights must lie in [0, 1]");
      }
      log_weight(u, t) = std::min(lw, 0.0);
      any = any || lw != kLogZero;
    }
    if (!any) {
      throw InvalidArgument("risk weight is zero at every frame for label " +
                            std::to_string(u));
    }
  }

  LatticeTables tables;
  try {
    tables = compute_lattice(post, ext);
  } catch (const InfeasibleAlignment&) {
    return infeasible_result(logits);
  }
  if (tables.log_likelihood() == kLogZero) return infeasible_result(logits);

  // Per-label objective from the end-frame grouping.
  LossResult result;
  result.per_token_losses.assign(label_count, kNaN);
  std::vector<double> log_objective(label_count, kLogZero);
  double loss = 0.0;
  for (std::size_t u = 0; u < label_count; ++u) {
    if (coeff[u] == 0.0) continue;
    const std::size_t v = ExtendedLabelSeq::label_position(u);
    double sum = kLogZero;
    for (std::size_t t = 0; t < frames; ++t) {
      const double y = emit(post, ext, t, v);
      if (y == kLogZero || log_weight(u, t) == kLogZero) continue;
      sum = log_add(sum, log_weight(u, t) + tables.alpha(t, v) + tables.beta_hat(t, v) - y);
    }
    if (sum == kLogZero) return infeasible_result(logits);
    log_objective[u] = sum;
    result.per_token_losses[u] = -sum;
    loss += coeff[u] * -sum;
  }

  // Reverse accumulation through both recursions. Every objective is a
  // positive bilinear form in alpha and beta:
  //   J_u = sum_t w_u(t) alpha(t, 2u) exit(t, 2u),
  // so all adjoints of Q = sum_u (c_u / J_u) J_u are nonnegative and are
  // carried in log domain. d loss / d log y = -dQ / d log y.
  Matrix alpha_seed(frames, width, kLogZero);
  Matrix beta_seed(frames, width, kLogZero);
  for (std::size_t u = 0; u < label_count; ++u) {
    if (coeff[u] == 0.0) continue;
    const std::size_t v = ExtendedLabelSeq::label_position(u);
    const double scale = std::log(coeff[u]) - log_objective[u];
    for (std::size_t t = 0; t < frames; ++t) {
      const double lw = log_weight(u, t);
      if (lw == kLogZero) continue;
      const double exit = log_exit_mass(tables.beta, ext, t, v);
      if (exit != kLogZero) {
        alpha_seed(t, v) = log_add(alpha_seed(t, v), scale + lw + exit);
      }
      if (t + 1 < frames && tables.alpha(t, v) != kLogZero) {
        const double upstream = scale + lw + tables.alpha(t, v);
        beta_seed(t + 1, v + 1) = log_add(beta_seed(t + 1, v + 1), upstream);
        if (v + 2 < width && ext.can_skip_into(v + 2)) {
          beta_seed(t + 1, v + 2) = log_add(beta_seed(t + 1, v + 2), upstream);
        }
      }
    }
  }

  Matrix alpha_adj = alpha_seed;
  for (std::size_t t = frames - 1; t-- > 0;) {
    for (std::size_t v = 0; v < width; ++v) {
      double sum = alpha_adj(t, v);
      for (std::size_t next = v; next <= v + 2 && next < width; ++next) {
        if (next == v + 2 && !ext.can_skip_into(next)) continue;
        if (alpha_adj(t + 1, next) == kLogZero) continue;
        sum = log_add(sum, alpha_adj(t + 1, next) + emit(post, ext, t + 1, next));
      }
      alpha_adj(t, v) = sum;
    }
  }
  Matrix beta_adj = beta_seed;
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t v = 0; v < width; ++v) {
      double sum = beta_adj(t, v);
      for (std::size_t back = 0; back <= 2 && back <= v; ++back) {
        const std::size_t prev = v - back;
        if (back == 2 && !ext.can_skip_into(v)) continue;
        if (beta_adj(t - 1, prev) == kLogZero) continue;
        sum = log_add(sum, beta_adj(t - 1, prev) + emit(post, ext, t - 1, prev));
      }
      beta_adj(t, v) = sum;
    }
  }

  Matrix occupancy(frames, post.vocab(), kLogZero);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t v = 0; v < width; ++v) {
      auto& cell = occupancy(t, static_cast<std::size_t>(ext.tokens[v]));
      if (alpha_adj(t, v) != kLogZero && tables.alpha(t, v) != kLogZero) {
        cell = log_add(cell, alpha_adj(t, v) + tables.alpha(t, v));
      }
      if (beta_adj(t, v) != kLogZero && tables.beta(t, v) != kLogZero) {
        cell = log_add(cell, beta_adj(t, v) + tables.beta(t, v));
      }
    }
  }
  Matrix d_logprob(frames, post.vocab());
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < post.vocab(); ++k) {
      d_logprob(t, k) = -std::exp(occupancy(t, k));
    }
  }

  result.loss = loss;
  result.grad = through_softmax(d_logprob, post);
  return result;
}

std::vector<double> sactc_coefficients(const SerializedLabel& label,
                                       const SactcOptions& options) {
  const int speakers = label.speaker_count();
  if (speakers < 1) throw InvalidArgument("label has no speakers");
  const std::size_t n = label.tokens.size();
  std::vector<std::size_t> constrained(static_cast<std::size_t>(speakers), 0);
  for (std::size_t u = 0; u < n; ++u) {
    if (label.is_sc(u) && !options.constrain_sc) continue;
    ++constrained[static_cast<std::size_t>(label.speaker_of_token[u] - 1)];
  }
  std::vector<double> coeff(n, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    if (label.is_sc(u) && !options.constrain_sc) continue;
    const auto s = static_cast<std::size_t>(label.speaker_of_token[u] - 1);
    const double per_speaker = options.normalization == TokenNormalization::kPerSpeaker
                                   ? static_cast<double>(constrained[s])
                                   : static_cast<double>(n);
    coeff[u] = 1.0 / (static_cast<double>(speakers) * per_speaker);
  }
  return coeff;
}

LossResult sactc_loss(const LogitGrid& logits, const SerializedLabel& label,
                      const RiskSpec& spec, TokenId blank_id,
                      const SactcOptions& options) {
  if (label.speaker_count() != 2 || spec.speaker_count != 2) {
    throw UnsupportedSpeakerCount("speaker-aware CTC supports two speakers, label has " +
                                  std::to_string(label.speaker_count()));
  }
  if (label.speaker_of_token.size() != label.tokens.size()) {
    throw InvalidArgument("speaker_of_token must cover every token");
  }
  const std::vector<double> coeff = sactc_coefficients(label, options);
  auto log_risk = [&](std::size_t u, std::size_t frame, std::size_t frames) {
    return log_risk_weight(spec, label.speaker_of_token[u], frame, frames,
                           options.frame_position);
  };
  return brctc_loss(logits, label.tokens, log_risk, coeff, blank_id);
}

LossResult combined_loss(const LogitGrid& logits, const SerializedLabel& label,
                         const RiskSpec& spec, LossMode mode, double aux_weight,
                         TokenId blank_id, const SactcOptions& options) {
  if (!(aux_weight >= 0.0) || !std::isfinite(aux_weight)) {
    throw InvalidArgument("aux weight must be finite and >= 0");
  }
  LossResult main = ctc_loss(logits, label.tokens, blank_id);
  if (aux_weight == 0.0 || !main.feasible()) return main;
  LossResult aux = mode == LossMode::kCtc
                       ? ctc_loss(logits, label.tokens, blank_id)
                       : sactc_loss(logits, label, spec, blank_id, options);
  if (!aux.feasible()) return aux;
  main.loss += aux_weight * aux.loss;
  for (std::size_t i = 0; i < main.grad.data().size(); ++i) {
    main.grad.data()[i] += aux_weight * aux.grad.data()[i];
  }
  main.per_token_losses = std::move(aux.per_token_losses);
  return main;
}

}  // namespace sactc
