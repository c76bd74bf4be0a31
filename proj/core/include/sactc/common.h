#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sactc {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// The frame count is too short for any alignment of the label sequence.
class InfeasibleAlignment : public Error {
 public:
  using Error::Error;
};

// Risk weights are only defined for two speakers.
class UnsupportedSpeakerCount : public Error {
 public:
  using Error::Error;
};

// A brute-force enumeration would exceed its configured size limit.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

// An internal consistency check failed (e.g. a negative probability).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// log(exp(a) + exp(b)), exact for -inf operands.
inline double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == kLogZero) return a;
  return a + std::log1p(std::exp(b - a));
}

// log(exp(a) - exp(b)) for b <= a. Returns kLogZero when b == a.
inline double log_sub(double a, double b) {
  if (b == kLogZero) return a;
  if (b >= a) return kLogZero;
  return a + std::log1p(-std::exp(b - a));
}

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Unnormalized per-frame scores, T frames x V tokens (blank included).
struct LogitGrid {
  Matrix values;

  LogitGrid() = default;
  explicit LogitGrid(Matrix m) : values(std::move(m)) {}

  std::size_t frames() const { return values.rows(); }
  std::size_t vocab() const { return values.cols(); }
};

// Per-frame log-probabilities; each row log-sums to zero.
struct PosteriorGrid {
  Matrix log_values;

  std::size_t frames() const { return log_values.rows(); }
  std::size_t vocab() const { return log_values.cols(); }

  // Builds a grid from probabilities; rows must sum to one within 1e-9.
  static PosteriorGrid from_probabilities(const Matrix& probs);
};

}  // namespace sactc
