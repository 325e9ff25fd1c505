#include "vforge/robustness.hpp"

#include <cmath>

namespace vforge {

double p_norm_of(const Eigen::Ref<const Eigen::VectorXd>& v, double p) {
  if (!(p >= 1.0)) throw ConfigError("p-norm requires p >= 1");
  if (v.size() == 0) return 0.0;
  if (std::isinf(p)) return v.cwiseAbs().maxCoeff();
  if (p == 1.0) return v.cwiseAbs().sum();
  if (p == 2.0) return v.norm();
  return std::pow(v.cwiseAbs().array().pow(p).sum(), 1.0 / p);
}

double parameter_distance(const Parameters& a, const Parameters& b, double p) {
  if (a.layers.size() != b.layers.size()) return std::numeric_limits<double>::infinity();
  std::vector<double> diff;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const auto& la = a.layers[l];
    const auto& lb = b.layers[l];
    if (la.weight.rows() != lb.weight.rows() || la.weight.cols() != lb.weight.cols()) {
      return std::numeric_limits<double>::infinity();
    }
    for (Eigen::Index i = 0; i < la.weight.size(); ++i) {
      diff.push_back(la.weight.data()[i] - lb.weight.data()[i]);
    }
    for (Eigen::Index i = 0; i < la.bias.size(); ++i) diff.push_back(la.bias(i) - lb.bias(i));
  }
  return p_norm_of(Eigen::Map<const Eigen::VectorXd>(diff.data(), static_cast<Eigen::Index>(diff.size())), p);
}

RobustnessVerdict check_robustness_conditions(const RobustnessProbe& probe) {
  if (!probe.base || !probe.inputs || !probe.desired) {
    throw ConfigError("robustness probe needs a base model, inputs and desired labels");
  }
  const Parameters& base = *probe.base;
  const Parameters& pert = probe.perturbed ? *probe.perturbed : base;
  const Matrix& x = *probe.inputs;
  const Matrix& x_hat = probe.perturbed_inputs ? *probe.perturbed_inputs : x;
  const Labels& y = *probe.desired;
  if (x_hat.rows() != x.rows() || x_hat.cols() != x.cols()) {
    throw ShapeError("robustness: perturbed inputs differ in shape from inputs");
  }
  if (static_cast<Eigen::Index>(y.size()) != x.rows()) {
    throw ShapeError("robustness: desired label count differs from sample count");
  }
  if (probe.noisy_labels && probe.noisy_labels->size() != y.size()) {
    throw ShapeError("robustness: noisy label count differs from sample count");
  }

  const Labels pred_base = predict(base, x);
  const Labels pred_base_hat = predict(base, x_hat);
  const Matrix probs_pert = forward(pert, x);
  const Labels pred_pert = argmax_rows(probs_pert);

  RobustnessVerdict v;
  v.config_distance = parameter_distance(base, pert, probe.p_norm);
  v.config_premise = v.config_distance <= probe.eta;

  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const auto i = static_cast<std::size_t>(r);
    SampleVerdict s;
    s.input_distance = p_norm_of((x.row(r) - x_hat.row(r)).transpose(), probe.p_norm);
    s.input_premise = s.input_distance <= probe.sigma;
    s.input_conclusion = pred_base_hat[i] == pred_base[i];
    s.input_robust = !s.input_premise || s.input_conclusion;

    if (probe.delta) {
      const int target = probe.noisy_labels ? (*probe.noisy_labels)[i] : y[i];
      Eigen::VectorXd d = probs_pert.row(r).transpose();
      d(target) -= 1.0;
      s.output_distance = p_norm_of(d, probe.p_norm);
      s.output_premise = *s.output_distance < *probe.delta;
      s.output_conclusion = pred_pert[i] == y[i];
      s.output_robust = !s.output_premise || s.output_conclusion;
    }

    s.config_conclusion = pred_pert[i] == pred_base[i];

    if (!s.input_robust) ++v.input_violations;
    if (!s.output_robust) ++v.output_violations;
    if (!s.config_conclusion) ++v.config_disagreements;
    v.samples.push_back(s);
  }
  v.input_robust = v.input_violations == 0;
  v.output_robust = v.output_violations == 0;
  v.config_robust = !v.config_premise || v.config_disagreements == 0;
  return v;
}

}  // namespace vforge
