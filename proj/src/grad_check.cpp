#include "xlnbt/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace xlnbt {

namespace {

double checked_value(const DifferentiableFunction& f, const ParameterSet& params) {
  const double v = f(params).value;
  if (!std::isfinite(v)) throw NumericError("grad_check: function value is not finite");
  return v;
}

constexpr double kKinkProbeThreshold = 1e-6;

}  // namespace

GradCheckReport grad_check(const DifferentiableFunction& f, const ParameterSet& params,
                           double eps, double floor) {
  const Evaluation base = f(params);
  if (!std::isfinite(base.value)) throw NumericError("grad_check: function value is not finite");

  GradCheckReport report;
  ParameterSet probe = params;
  for (const auto& [name, entry] : params) {
    if (!entry.trainable) continue;
    const Tensor* analytic = nullptr;
    if (auto it = base.gradients.find(name); it != base.gradients.end()) analytic = &it->second;
    auto values = probe.get_mutable(name).data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + eps;
      const double plus = checked_value(f, probe);
      values[i] = original - eps;
      const double minus = checked_value(f, probe);
      values[i] = original;

      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic ? (*analytic)[i] : 0.0;
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      const double err = std::abs(a - numeric) / denom;
      if (err > kKinkProbeThreshold) {
        values[i] = original + 0.5 * eps;
        const double half_plus = checked_value(f, probe);
        values[i] = original - 0.5 * eps;
        const double half_minus = checked_value(f, probe);
        values[i] = original;
        // Gap between forward and backward slopes: halves with the step on a
        // smooth function and departs from that ratio across a kink.
        const double gap = (plus + minus - 2.0 * base.value) / eps;
        const double half_gap = (half_plus + half_minus - 2.0 * base.value) / (0.5 * eps);
        if (std::abs(gap) > 0.1 * std::abs(a - numeric) && std::abs(half_gap - 0.5 * gap) > 0.1 * std::abs(gap)) {
          ++report.kinks;
          continue;
        }
      }
      ++report.checked;
      if (err > report.max_relative_error || report.worst_entry.empty()) {
        report.max_relative_error = std::max(err, report.max_relative_error);
        report.worst_entry = name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace xlnbt
