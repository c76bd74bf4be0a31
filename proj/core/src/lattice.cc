#include "sactc/lattice.h"

#include <algorithm>
#include <string>

namespace sactc {
namespace {

void check_instance(const PosteriorGrid& post, const ExtendedLabelSeq& ext) {
  if (ext.size() < 3 || ext.size() % 2 == 0) {
    throw InvalidArgument("extended label sequence must have length 2U+1, U >= 1");
  }
  const auto vocab = static_cast<TokenId>(post.vocab());
  for (TokenId token : ext.tokens) {
    if (token < 0 || token >= vocab) {
      throw InvalidArgument("token id " + std::to_string(token) +
                            " outside vocabulary of size " + std::to_string(vocab));
    }
  }
  std::size_t needed = ext.label_count();
  for (std::size_t u = 1; u < ext.label_count(); ++u) {
    if (ext.tokens[ExtendedLabelSeq::label_position(u)] ==
        ext.tokens[ExtendedLabelSeq::label_position(u - 1)]) {
      ++needed;
    }
  }
  if (post.frames() < needed) {
    throw InfeasibleAlignment("alignment needs " + std::to_string(needed) +
                              " frames, got " + std::to_string(post.frames()));
  }
}

// log y^t_{l'_v}
inline double emit(const PosteriorGrid& post, const ExtendedLabelSeq& ext,
                   std::size_t t, std::size_t v) {
  return post.log_values(t, static_cast<std::size_t>(ext.tokens[v]));
}

}  // namespace

ExtendedLabelSeq extend_labels(std::span<const TokenId> labels, TokenId blank_id) {
  if (labels.empty()) throw InvalidArgument("label sequence is empty");
  if (blank_id < 0) throw InvalidArgument("blank id must be nonnegative");
  ExtendedLabelSeq ext;
  ext.blank = blank_id;
  ext.tokens.reserve(2 * labels.size() + 1);
  ext.tokens.push_back(blank_id);
  for (TokenId token : labels) {
    if (token == blank_id) throw InvalidArgument("blank id appears in label sequence");
    if (token < 0) throw InvalidArgument("negative token id in label sequence");
    ext.tokens.push_back(token);
    ext.tokens.push_back(blank_id);
  }
  return ext;
}

std::size_t min_alignment_length(std::span<const TokenId> labels) {
  std::size_t n = labels.size();
  for (std::size_t u = 1; u < labels.size(); ++u) {
    if (labels[u] == labels[u - 1]) ++n;
  }
  return n;
}

double LatticeTables::log_likelihood() const {
  const std::size_t last = alpha.rows() - 1;
  const std::size_t width = alpha.cols();
  return log_add(alpha(last, width - 1), alpha(last, width - 2));
}

Matrix forward(const PosteriorGrid& post, const ExtendedLabelSeq& ext) {
  check_instance(post, ext);
  const std::size_t frames = post.frames();
  const std::size_t width = ext.size();
  Matrix alpha(frames, width, kLogZero);
  alpha(0, 0) = emit(post, ext, 0, 0);
  alpha(0, 1) = emit(post, ext, 0, 1);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t v = 0; v < width; ++v) {
      double sum = alpha(t - 1, v);
      if (v >= 1) sum = log_add(sum, alpha(t - 1, v - 1));
      if (ext.can_skip_into(v)) sum = log_add(sum, alpha(t - 1, v - 2));
      alpha(t, v) = sum == kLogZero ? kLogZero : sum + emit(post, ext, t, v);
    }
  }
  return alpha;
}

Matrix backward(const PosteriorGrid& post, const ExtendedLabelSeq& ext) {
  check_instance(post, ext);
  const std::size_t frames = post.frames();
  const std::size_t width = ext.size();
  Matrix beta(frames, width, kLogZero);
  beta(frames - 1, width - 1) = emit(post, ext, frames - 1, width - 1);
  beta(frames - 1, width - 2) = emit(post, ext, frames - 1, width - 2);
  for (std::size_t t = frames - 1; t-- > 0;) {
    for (std::size_t v = 0; v < width; ++v) {
      double sum = beta(t + 1, v);
      if (v + 1 < width) sum = log_add(sum, beta(t + 1, v + 1));
      if (v + 2 < width && ext.can_skip_into(v + 2)) {
        sum = log_add(sum, beta(t + 1, v + 2));
      }
      beta(t, v) = sum == kLogZero ? kLogZero : sum + emit(post, ext, t, v);
    }
  }
  return beta;
}

Matrix backward_revised(const Matrix& beta, const PosteriorGrid& post,
                        const ExtendedLabelSeq& ext) {
  check_instance(post, ext);
  const std::size_t frames = post.frames();
  const std::size_t width = ext.size();
  if (beta.rows() != frames || beta.cols() != width) {
    throw InvalidArgument("beta table shape does not match the instance");
  }
  constexpr double kRelTolerance = 1e-12;
  Matrix beta_hat(frames, width, kLogZero);
  for (std::size_t u = 0; u < ext.label_count(); ++u) {
    const std::size_t v = ExtendedLabelSeq::label_position(u);
    beta_hat(frames - 1, v) = beta(frames - 1, v);
    for (std::size_t t = 0; t + 1 < frames; ++t) {
      const double total = beta(t, v);
      const double staying = beta(t + 1, v) == kLogZero
                                 ? kLogZero
                                 : beta(t + 1, v) + emit(post, ext, t, v);
      if (staying > total &&
          staying - total > kRelTolerance * std::max(1.0, std::abs(total))) {
        throw NumericalError("revised backward variable is negative at frame " +
                             std::to_string(t));
      }
      beta_hat(t, v) = log_sub(total, staying);
    }
  }
  return beta_hat;
}

LatticeTables compute_lattice(const PosteriorGrid& post, const ExtendedLabelSeq& ext) {
  LatticeTables tables;
  tables.alpha = forward(post, ext);
  tables.beta = backward(post, ext);
  tables.beta_hat = backward_revised(tables.beta, post, ext);
  return tables;
}

}  // namespace sactc
