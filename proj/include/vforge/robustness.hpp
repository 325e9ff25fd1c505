#pragma once

#include "vforge/net.hpp"

#include <optional>
#include <vector>

namespace vforge {

/// Inputs to the three robustness implications. All checks are diagnostic.
struct RobustnessProbe {
  const Parameters* base = nullptr;       // f_theta
  const Parameters* perturbed = nullptr;  // f_theta_hat
  const Matrix* inputs = nullptr;         // x
  const Matrix* perturbed_inputs = nullptr;  // x_hat; defaults to x
  const Labels* desired = nullptr;        // y
  const Labels* noisy_labels = nullptr;   // y_hat, optional
  double sigma = 0.0;
  std::optional<double> delta;            // output-condition bound; skipped when empty
  double eta = 0.0;
  double p_norm = std::numeric_limits<double>::infinity();
};

struct SampleVerdict {
  double input_distance = 0.0;
  bool input_premise = false;       // ||x - x_hat|| <= sigma
  bool input_conclusion = false;    // f(x_hat) == f(x)
  bool input_robust = false;        // premise implies conclusion

  std::optional<double> output_distance;  // ||f_hat(x) - onehot(y_hat)||
  bool output_premise = false;
  bool output_conclusion = false;   // f_hat(x) == y
  bool output_robust = true;

  bool config_conclusion = false;   // f(x) == f_hat(x)
};

struct RobustnessVerdict {
  std::vector<SampleVerdict> samples;
  bool input_robust = true;
  std::size_t input_violations = 0;
  bool output_robust = true;
  std::size_t output_violations = 0;
  /// Infinite when the two parameter sets have different shapes.
  double config_distance = 0.0;
  bool config_premise = false;
  bool config_robust = true;
  std::size_t config_disagreements = 0;
};

/// p-norm of a vector; p = inf gives the max norm.
double p_norm_of(const Eigen::Ref<const Eigen::VectorXd>& v, double p);

/// p-norm of the flattened parameter difference.
double parameter_distance(const Parameters& a, const Parameters& b, double p);

RobustnessVerdict check_robustness_conditions(const RobustnessProbe& probe);

}  // namespace vforge
