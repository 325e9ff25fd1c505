#include "vforge/metrics.hpp"

namespace vforge {

namespace {

void check(const Matrix& probs, const Labels& desired, const char* who) {
  if (probs.rows() == 0) throw DomainError(std::string(who) + ": expectation over an empty set");
  detail::check_labels<double>(desired, probs.rows(), probs.cols());
}

}  // namespace

CcddScore c_cdd(const Matrix& probs, const Labels& desired) {
  check(probs, desired, "c_cdd");
  const Labels predicted = argmax_rows(probs);
  double total = 0.0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const auto i = static_cast<std::size_t>(r);
    total += probs(r, desired[i]) - probs(r, predicted[i]);
  }
  return {total / static_cast<double>(probs.rows()), static_cast<std::size_t>(probs.rows())};
}

CcddScore c_cdd(const Parameters& model, const Matrix& inputs, const Labels& desired) {
  return c_cdd(forward(model, inputs), desired);
}

double accuracy(const Matrix& probs, const Labels& desired) {
  check(probs, desired, "accuracy");
  const Labels predicted = argmax_rows(probs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < desired.size(); ++i) correct += predicted[i] == desired[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(desired.size());
}

double accuracy(const Parameters& model, const Matrix& inputs, const Labels& desired) {
  return accuracy(forward(model, inputs), desired);
}

}  // namespace vforge
