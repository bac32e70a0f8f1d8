#include "xlnbt/optimizer.hpp"

#include <cmath>

namespace xlnbt {

void Optimizer::step(ParameterSet& params, const GradientMap& grads) {
  for (const auto& [name, grad] : grads) {
    if (!params.contains(name)) throw Error("gradient for unknown parameter: " + name);
    if (!params.trainable(name)) throw Error("gradient for frozen parameter: " + name);
    if (params.get(name).shape() != grad.shape()) {
      throw ShapeError("gradient shape " + shape_string(grad.shape()) + " for parameter " + name +
                       " of shape " + shape_string(params.get(name).shape()));
    }
    grad.check_finite("gradient of " + name);
  }
  ++steps_;
  const double lr = config_.learning_rate;
  const double wd = config_.weight_decay;
  for (const auto& [name, grad] : grads) {
    auto values = params.get_mutable(name).data();
    const auto g = grad.data();
    if (config_.method == OptimizerMethod::Sgd) {
      for (std::size_t i = 0; i < values.size(); ++i) values[i] -= lr * (g[i] + wd * values[i]);
      continue;
    }
    Moments& m = moments_[name];
    if (m.first.empty()) {
      m.first.assign(values.size(), 0.0);
      m.second.assign(values.size(), 0.0);
    }
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < values.size(); ++i) {
      m.first[i] = b1 * m.first[i] + (1.0 - b1) * g[i];
      m.second[i] = b2 * m.second[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m.first[i] / c1;
      const double vhat = m.second[i] / c2;
      values[i] -= lr * (mhat / (std::sqrt(vhat) + config_.epsilon) + wd * values[i]);
    }
  }
}

void optimizer_step(ParameterSet& params, const GradientMap& grads, const OptimizerConfig& config) {
  Optimizer(config).step(params, grads);
}

}  // namespace xlnbt
