#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "xlnbt/evaluation.hpp"
#include "xlnbt/nbt.hpp"
#include "xlnbt/optimizer.hpp"

namespace xlnbt {

// One supervised turn. `prev_scores` carries the gold previous state as
// logits (+S on gold pairs, -S elsewhere); `labels` holds 0/1 targets in the
// same layout.
struct TurnExample {
  SystemActs acts;
  Utterance utterance;
  ScoreTable prev_scores;
  ScoreTable labels;
};

std::vector<TurnExample> make_turn_examples(const std::vector<Dialog>& dialogs,
                                            const Ontology& ontology, double prior_logit);

struct LossOptions {
  Mode mode = Mode::Train;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;  // dropout masks
  bool gradients = true;
};

struct BatchLoss {
  double value = 0.0;
  GradientMap gradients;
  std::optional<BatchStats> stats;  // train mode only
};

// Mean binary cross-entropy over every informable pair and requestable slot
// of every example. Train mode normalizes with the batch statistics and needs
// at least two examples. Throws NumericError on a non-finite loss.
BatchLoss turn_loss(const NbtModel& model, const TermSpace& terms,
                    std::span<const TurnExample> examples, const LossOptions& options = {});

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  OptimizerConfig optimizer;
  std::uint64_t seed = 1;
  std::size_t patience = 5;            // evaluations without improvement
  double validation_fraction = 0.2;    // used when no validation dialogs are given
  std::size_t eval_every = 0;          // iterations; 0 means once per epoch

  void validate() const;
};

struct TrainResult {
  NbtModel model;
  Curve curve;  // iteration,train_loss,valid_goal,valid_request
  std::size_t best_iteration = 0;
  double best_valid_goal = 0.0;
  bool stopped_early = false;
};

// Trains a tracker from scratch and returns the parameters with the best
// validation goal accuracy (rollout tracking).
TrainResult train_teacher(const NbtConfig& model_config, const std::string& language,
                          const Ontology& ontology, const EmbeddingTable& table,
                          const std::vector<Dialog>& train, std::vector<Dialog> valid,
                          const TrainConfig& config);

}  // namespace xlnbt
