#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "xlnbt/tensor.hpp"

namespace xlnbt {

struct Evaluation {
  double value = 0.0;
  GradientMap gradients;  // absent entries count as zero gradient
};

using DifferentiableFunction = std::function<Evaluation(const ParameterSet&)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_entry;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  std::size_t kinks = 0;  // components skipped as non-differentiable at this step
};

// Compares the analytic gradient of `f` at `params` against central
// differences with step `eps`, over every component of every trainable entry.
// Per component the error is |a - n| / max(|a|, |n|, floor). A mismatching
// component whose forward/backward slope gap explains the mismatch and does
// not halve with the step straddles a ReLU or max-pool kink; it is
// counted in `kinks` instead of the error.
GradCheckReport grad_check(const DifferentiableFunction& f, const ParameterSet& params,
                           double eps = 1e-6, double floor = 1e-8);

}  // namespace xlnbt
