#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "xlnbt/autodiff.hpp"
#include "xlnbt/batch_norm.hpp"
#include "xlnbt/checkpoint.hpp"
#include "xlnbt/dialog.hpp"
#include "xlnbt/embeddings.hpp"
#include "xlnbt/tensor.hpp"

namespace xlnbt {

// Hyperparameters of one tracker. `dim` is both the word-vector size and the
// convolution feature size.
// What a rollout carries into the next turn's score recursion: +S / -S from
// the predicted state (the same form as teacher-forced training input), or
// the raw cumulative scores.
enum class Feedback { State, Scores };

std::string feedback_name(Feedback feedback);
Feedback parse_feedback(const std::string& name);  // "state" | "scores"

struct NbtConfig {
  std::size_t dim = 300;
  double lambda = 0.5;             // weight of the current turn in the score recursion
  double inform_threshold = 0.5;   // on sigmoid(score)
  double request_threshold = 0.5;  // on sigmoid(score)
  double dropout = 0.5;            // on the summed gate, train mode only
  double prior_logit = 6.0;        // S: teacher-forced previous scores are +S / -S
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;
  Feedback feedback = Feedback::State;

  void validate() const;
};

inline constexpr std::size_t kFilterWidths = 3;

namespace param {
inline const std::string kConvWeight[kFilterWidths] = {"encoder.conv1.weight", "encoder.conv2.weight",
                                                       "encoder.conv3.weight"};
inline const std::string kConvBias[kFilterWidths] = {"encoder.conv1.bias", "encoder.conv2.bias",
                                                     "encoder.conv3.bias"};
inline const std::string kGateSlotValue = "gate.slot_value.weight";
inline const std::string kGateSlotValueBias = "gate.slot_value.bias";
inline const std::string kGateRequest = "gate.request.weight";
inline const std::string kGateConfirmSlot = "gate.confirm_slot.weight";
inline const std::string kGateConfirmValue = "gate.confirm_value.weight";
inline const std::string kDecoder = "decoder.weight";
inline const std::string kBnMean = "encoder.bn.running_mean";
inline const std::string kBnVar = "encoder.bn.running_var";

bool is_encoder(const std::string& name);
bool is_gate(const std::string& name);
}  // namespace param

// All weights of one language's tracker. Encoder and gate entries are
// language specific; the decoder weight is the part shared during transfer.
struct NbtModel {
  NbtConfig config;
  std::string language;
  std::string ontology_fingerprint;
  ParameterSet params;
  BatchNormState bn;

  NbtModel() = default;
  // Xavier-uniform weights, zero biases, identity running statistics.
  NbtModel(NbtConfig config, std::string language, std::uint64_t seed);

  std::size_t dim() const { return config.dim; }

  Checkpoint to_checkpoint() const;
  static NbtModel from_checkpoint(const Checkpoint& checkpoint);
};

struct ActVectors {
  std::vector<double> request;
  std::vector<double> confirm_slot;
  std::vector<double> confirm_value;
  bool has_request = false;
  bool has_confirm = false;
};

// Absent acts become zero vectors; a confirmation needs both slot and value.
ActVectors embed_acts(const SystemActs& acts, const EmbeddingTable& table);

// An ontology embedded through one table: the vectors the gate consumes.
class TermSpace {
 public:
  TermSpace(const Ontology& ontology, const EmbeddingTable& table);

  const Ontology& ontology() const { return *ontology_; }
  const EmbeddingTable& table() const { return *table_; }
  const std::vector<double>& slot(std::size_t s) const { return slots_[s]; }
  const std::vector<double>& value(std::size_t s, std::size_t v) const { return values_[s][v]; }
  const std::vector<double>& request(std::size_t r) const { return requests_[r]; }
  // Absent acts become zero vectors.
  ActVectors embed_acts(const SystemActs& acts) const;
  std::size_t oov_terms() const { return oov_terms_; }

 private:
  const Ontology* ontology_;
  const EmbeddingTable* table_;
  std::vector<std::vector<double>> slots_;
  std::vector<std::vector<std::vector<double>>> values_;
  std::vector<std::vector<double>> requests_;
  std::size_t oov_terms_ = 0;
};

// Raw scores aligned with ontology order: informable[slot][value] and one
// entry per requestable slot.
struct ScoreTable {
  std::vector<std::vector<double>> informable;
  std::vector<double> requests;

  static ScoreTable filled(const Ontology& ontology, double value);
  // +logit for the goal pairs of `state`, -logit everywhere else. Requests
  // are never carried between turns and stay at -logit.
  static ScoreTable from_state(const Ontology& ontology, const BeliefState& state, double logit);
  friend bool operator==(const ScoreTable&, const ScoreTable&) = default;
};

// ---- tape-level forward pass ----------------------------------------------

// Binds a model's parameters to a tape; `track` makes them differentiation
// targets (skipping frozen entries).
class ModelBinding {
 public:
  ModelBinding(Tape& tape, const NbtModel& model, bool track);
  Tape& tape() const { return *tape_; }
  const NbtModel& model() const { return *model_; }
  Var operator()(const std::string& name) const;

 private:
  Tape* tape_;
  const NbtModel* model_;
  bool track_;
};

struct EncodeResult {
  std::vector<Var> encodings;       // one H-vector per utterance
  std::optional<BatchStats> stats;  // batch statistics in train mode
};

// Convolutional utterance encoding before normalization: per width, ReLU of
// every window response, max over positions; the widths are summed. Widths
// longer than the utterance contribute nothing.
Var encode_raw(const ModelBinding& binding, const Utterance& utterance,
               const EmbeddingTable& table);

// encode_raw followed by batch normalization (batch statistics in train mode,
// running statistics in infer mode). The model's running statistics are not
// modified; callers fold `stats` in after the step.
EncodeResult encode_utterances(const ModelBinding& binding,
                               std::span<const Utterance* const> utterances,
                               const EmbeddingTable& table, Mode mode);

struct ActProjections {
  Var request;        // W_tq t_q
  Var confirm_slot;   // W_ts t_s
  Var confirm_value;  // W_tv t_v
  bool has_request = false;
  bool has_confirm = false;
};

ActProjections project_acts(const ModelBinding& binding, const ActVectors& acts);

// g = sigmoid(W_cs (c_s + c_v) + b_cs) + (c_s . W_tq t_q) 1 + (c_s . W_ts t_s)(c_v . W_tv t_v) 1
Var context_gate(const ModelBinding& binding, Var slot, Var value, const ActProjections& acts);

// y = W_y . (r * g)
Var turn_score(const ModelBinding& binding, Var encoding, Var gate);

struct DropoutContext {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;
};

struct TurnScoreVars {
  std::vector<std::vector<Var>> informable;  // cumulative scores
  std::vector<Var> requests;
};

// Scores every ontology pair and requestable slot for one turn.
// Informable entries combine with `previous` through the score recursion;
// request entries use c_v = 0 and no recursion.
TurnScoreVars score_turn(const ModelBinding& binding, const TermSpace& terms, Var encoding,
                         const ActVectors& acts, const ScoreTable& previous,
                         const DropoutContext& dropout = {});

// ---- plain-value helpers ----------------------------------------------------

std::vector<double> context_gate(const NbtModel& model, std::span<const double> slot,
                                 std::span<const double> value, const ActVectors& acts);
double turn_score(std::span<const double> encoding, std::span<const double> gate,
                  std::span<const double> decoder);
// lambda * y_now + (1 - lambda) * y_prev; throws when lambda is outside [0, 1].
double cumulative_score(double y_now, double y_prev, double lambda);

double sigmoid(double x);

// Argmax per informable slot (ties -> ontology order), assigned when its
// sigmoid reaches the inform threshold; requests above the request threshold.
BeliefState predict_state(const ScoreTable& scores, const Ontology& ontology,
                          double inform_threshold, double request_threshold);

// Infer-mode scoring of single turns with a fixed model and term space.
class Tracker {
 public:
  Tracker(const NbtModel& model, const TermSpace& terms);

  ScoreTable prior() const;  // every informable pair at -S
  ScoreTable score(const SystemActs& acts, const Utterance& utterance,
                   const ScoreTable& previous) const;
  BeliefState predict(const ScoreTable& scores) const;
  // The previous-turn input for the next turn under the configured feedback.
  ScoreTable carry(const ScoreTable& scores, const BeliefState& predicted) const;
  const NbtModel& model() const { return *model_; }
  const TermSpace& terms() const { return *terms_; }

 private:
  const NbtModel* model_;
  const TermSpace* terms_;
};

}  // namespace xlnbt
