#pragma once

#include "vforge/net.hpp"

namespace vforge {

/// Cumulative confidence decision boundary score.
struct CcddScore {
  double value = 0.0;
  std::size_t sample_count = 0;
  bool operator==(const CcddScore&) const = default;
};

/// Mean over samples of prob[desired] - prob[predicted], with the predicted
/// class taken as the lowest-index argmax. Lies in [-1, 0]; 0 exactly when
/// every prediction is correct. Throws DomainError on an empty batch.
CcddScore c_cdd(const Matrix& probs, const Labels& desired);
CcddScore c_cdd(const Parameters& model, const Matrix& inputs, const Labels& desired);

/// Fraction of rows whose lowest-index argmax equals the desired class.
double accuracy(const Matrix& probs, const Labels& desired);
double accuracy(const Parameters& model, const Matrix& inputs, const Labels& desired);

}  // namespace vforge
