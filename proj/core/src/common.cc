#include "sactc/common.h"

#include <string>

namespace sactc {

PosteriorGrid PosteriorGrid::from_probabilities(const Matrix& probs) {
  PosteriorGrid grid;
  grid.log_values = Matrix(probs.rows(), probs.cols());
  for (std::size_t t = 0; t < probs.rows(); ++t) {
    double sum = 0.0;
    for (std::size_t k = 0; k < probs.cols(); ++k) {
      const double p = probs(t, k);
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw InvalidArgument("posterior probabilities must be finite and >= 0");
      }
      sum += p;
      grid.log_values(t, k) = p > 0.0 ? std::log(p) : kLogZero;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw InvalidArgument("posterior row " + std::to_string(t) +
                            " does not sum to 1");
    }
  }
  return grid;
}

}  // namespace sactc
