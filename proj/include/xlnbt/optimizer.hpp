#pragma once

#include <map>
#include <string>
#include <vector>

#include "xlnbt/tensor.hpp"

namespace xlnbt {

enum class OptimizerMethod { Sgd, Adam };

struct OptimizerConfig {
  OptimizerMethod method = OptimizerMethod::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled: applied to the weights, not the moments
};

// Applies gradient updates to the trainable entries of a ParameterSet.
// Frozen entries are never written. Adam keeps per-entry moment estimates,
// so one Optimizer instance belongs to one training loop.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config = {}) : config_(config) {}

  // Throws if a gradient names an unknown or frozen entry, or has the wrong
  // shape, or contains non-finite values.
  void step(ParameterSet& params, const GradientMap& grads);

  const OptimizerConfig& config() const { return config_; }
  long steps() const { return steps_; }

 private:
  struct Moments {
    std::vector<double> first;
    std::vector<double> second;
  };

  OptimizerConfig config_;
  std::map<std::string, Moments> moments_;
  long steps_ = 0;
};

// Single update with a fresh optimizer state.
void optimizer_step(ParameterSet& params, const GradientMap& grads, const OptimizerConfig& config);

}  // namespace xlnbt
