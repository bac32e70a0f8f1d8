#pragma once

#include <cstddef>
#include <vector>

namespace xlnbt {

enum class Mode { Train, Infer };

// Per-dimension running statistics used at inference time. No affine
// scale/shift is learned: the encoder output is kept at unit scale.
struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.9;
  double epsilon = 1e-5;

  BatchNormState() = default;
  explicit BatchNormState(std::size_t dim, double momentum = 0.9, double epsilon = 1e-5);

  std::size_t dim() const { return running_mean.size(); }
  // Throws if the state violates var >= 0, epsilon > 0, or momentum in [0, 1].
  void validate() const;
};

struct BatchStats {
  std::vector<double> mean;
  std::vector<double> var;  // biased (divides by batch size)
};

BatchStats batch_statistics(const std::vector<std::vector<double>>& batch);

// Train mode normalizes with the batch statistics and folds them into the
// running averages; infer mode uses the running averages and leaves `state`
// untouched. Train mode needs at least two rows.
std::vector<std::vector<double>> batch_norm(const std::vector<std::vector<double>>& batch,
                                            BatchNormState& state, Mode mode);

void update_running_stats(BatchNormState& state, const BatchStats& stats);

}  // namespace xlnbt
