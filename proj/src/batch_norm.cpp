#include "xlnbt/batch_norm.hpp"

#include <cmath>
#include <string>

#include "xlnbt/error.hpp"

namespace xlnbt {

BatchNormState::BatchNormState(std::size_t dim, double momentum_, double epsilon_)
    : running_mean(dim, 0.0), running_var(dim, 1.0), momentum(momentum_), epsilon(epsilon_) {
  validate();
}

void BatchNormState::validate() const {
  if (running_mean.size() != running_var.size()) {
    throw ShapeError("batch norm: running mean/var length mismatch");
  }
  if (!(epsilon > 0.0)) throw Error("batch norm: epsilon must be positive");
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw Error("batch norm: momentum outside [0, 1]");
  for (double v : running_var) {
    if (!(v >= 0.0)) throw NumericError("batch norm: negative running variance");
  }
}

BatchStats batch_statistics(const std::vector<std::vector<double>>& batch) {
  if (batch.empty()) throw Error("batch norm: empty batch");
  const std::size_t dim = batch.front().size();
  const double n = static_cast<double>(batch.size());
  BatchStats stats{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
  for (const auto& row : batch) {
    if (row.size() != dim) throw ShapeError("batch norm: ragged batch");
    for (std::size_t j = 0; j < dim; ++j) stats.mean[j] += row[j];
  }
  for (double& m : stats.mean) m /= n;
  for (const auto& row : batch) {
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = row[j] - stats.mean[j];
      stats.var[j] += d * d;
    }
  }
  for (double& v : stats.var) v /= n;
  return stats;
}

void update_running_stats(BatchNormState& state, const BatchStats& stats) {
  const double m = state.momentum;
  for (std::size_t j = 0; j < state.dim(); ++j) {
    state.running_mean[j] = m * state.running_mean[j] + (1.0 - m) * stats.mean[j];
    state.running_var[j] = m * state.running_var[j] + (1.0 - m) * stats.var[j];
  }
}

std::vector<std::vector<double>> batch_norm(const std::vector<std::vector<double>>& batch,
                                            BatchNormState& state, Mode mode) {
  state.validate();
  for (const auto& row : batch) {
    if (row.size() != state.dim()) {
      throw ShapeError("batch norm: row of length " + std::to_string(row.size()) +
                       ", expected " + std::to_string(state.dim()));
    }
  }
  std::vector<std::vector<double>> out(batch.size(), std::vector<double>(state.dim()));
  if (mode == Mode::Train) {
    if (batch.size() < 2) throw Error("batch norm: train mode needs a batch of at least 2");
    const BatchStats stats = batch_statistics(batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      for (std::size_t j = 0; j < state.dim(); ++j) {
        out[i][j] = (batch[i][j] - stats.mean[j]) / std::sqrt(stats.var[j] + state.epsilon);
      }
    }
    update_running_stats(state, stats);
  } else {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      for (std::size_t j = 0; j < state.dim(); ++j) {
        out[i][j] = (batch[i][j] - state.running_mean[j]) /
                    std::sqrt(state.running_var[j] + state.epsilon);
      }
    }
  }
  return out;
}

}  // namespace xlnbt
