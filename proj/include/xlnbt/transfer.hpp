#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xlnbt/dialog.hpp"
#include "xlnbt/embeddings.hpp"
#include "xlnbt/evaluation.hpp"
#include "xlnbt/lexicon.hpp"
#include "xlnbt/nbt.hpp"
#include "xlnbt/optimizer.hpp"
#include "xlnbt/trainer.hpp"

namespace xlnbt {

enum class TransferMode { Corpus, Dictionary };
enum class StudentInit { CopyTeacher, Random };

std::string transfer_mode_name(TransferMode mode);      // "c" | "d"
TransferMode parse_transfer_mode(const std::string& name);  // c, corpus, d, dictionary
std::string student_init_name(StudentInit init);        // "copy-teacher" | "random"
StudentInit parse_student_init(const std::string& name);

struct TransferConfig {
  double alpha = 1.0;  // weight of the gate matching cost
  double tau = 0.1;    // replacement temperature (dictionary mode)
  TransferMode mode = TransferMode::Corpus;
  std::size_t batch_size = 32;
  std::size_t iterations = 1000;
  std::uint64_t seed = 1;
  StudentInit student_init = StudentInit::CopyTeacher;
  OptimizerConfig optimizer;
  std::size_t eval_every = 0;  // iterations between curve rows; 0 means only at the end

  void validate() const;
};

// A gate input: system acts, a slot term and a value term. Requestable slots
// have no value (c_v = 0).
struct GateTuple {
  SystemActs acts;
  std::string slot;
  std::optional<std::string> value;

  friend bool operator==(const GateTuple&, const GateTuple&) = default;
  friend auto operator<=>(const GateTuple&, const GateTuple&) = default;
};

struct GateConfigSample {
  GateTuple source;
  GateTuple target;
};

// Maps every term of a source tuple into `to`; absent acts stay absent.
// Throws naming the first unmapped term.
GateConfigSample map_config(const GateTuple& source, const OntologyMapping& mapping,
                            const std::string& from, const std::string& to);

// Distinct source tuples: the acts of every training turn paired with each
// ontology entry of the slots those acts mention, plus every informable pair
// and requestable slot under absent acts.
std::vector<GateTuple> gate_tuples(const std::vector<Dialog>& dialogs, const Ontology& ontology);

// A student-side gate input with the teacher's gate output as the target.
struct GateTarget {
  std::vector<double> slot;
  std::vector<double> value;
  ActVectors acts;
  std::vector<double> teacher_gate;
};

std::vector<GateTarget> gate_targets(std::span<const GateConfigSample> samples,
                                     const NbtModel& teacher, const EmbeddingTable& teacher_table,
                                     const EmbeddingTable& student_table);

// Sum over targets of |g_teacher - g_student|^2; gradients reach the
// student's gate entries only.
BatchLoss gate_cost(const NbtModel& student, std::span<const GateTarget> targets,
                    bool gradients = true);
BatchLoss gate_cost(std::span<const GateConfigSample> samples, const NbtModel& teacher,
                    const EmbeddingTable& teacher_table, const NbtModel& student,
                    const EmbeddingTable& student_table, bool gradients = true);

struct EncoderSide {
  const NbtModel* model;
  const EmbeddingTable* table;
};

// Mean over pairs of |r_teacher(first) - r_student(second)|^2. The teacher
// encodes with its running statistics, the student with batch statistics
// (returned in `stats`). Needs at least two pairs.
BatchLoss encoder_cost(std::span<const std::pair<Utterance, Utterance>> pairs, EncoderSide teacher,
                       EncoderSide student, bool gradients = true);
BatchLoss encoder_cost_corpus(std::span<const std::pair<Utterance, Utterance>> pairs,
                              EncoderSide teacher, EncoderSide student, bool gradients = true);

// p(i) proportional to exp(-i / tau) for i in [0, n).
std::vector<double> replacement_count_distribution(std::size_t n, double tau);
double replacement_count_mean(std::size_t n, double tau);
std::size_t sample_replacement_count(std::size_t n, double tau, std::mt19937_64& rng);

// Sum of the context vectors at offsets -2..2 (excluding 0), clipped at the
// utterance edges; absent words contribute nothing.
std::vector<double> context_vector(const Utterance& utterance, std::size_t position,
                                   const EmbeddingTable& table);

// Softmax over candidates of candidate . context.
std::vector<double> candidate_probabilities(const std::vector<std::string>& candidates,
                                            std::span<const double> context,
                                            const EmbeddingTable& candidate_table);

struct Replacement {
  Utterance utterance;
  std::size_t requested = 0;
  std::size_t replaced = 0;  // smaller than requested when too few tokens have entries
  std::vector<std::size_t> positions;
};

// Replaces `count` distinct positions, drawn uniformly among the tokens with
// dictionary entries, by a candidate sampled from candidate_probabilities.
// Context vectors come from the original source tokens.
Replacement replace_words(const Utterance& utterance, std::size_t count,
                          const BilingualDictionary& dictionary,
                          const EmbeddingTable& context_table,
                          const EmbeddingTable& candidate_table, std::mt19937_64& rng);

// Samples a replacement count and a mixed utterance per source utterance, then
// the encoder cost between the teacher on the source and the student on the
// mixed text.
BatchLoss encoder_cost_dict(std::span<const Utterance> utterances, EncoderSide teacher,
                            EncoderSide student, const BilingualDictionary& dictionary,
                            const EmbeddingTable& candidate_table, double tau,
                            std::mt19937_64& rng, bool gradients = true);

// Student lookup table: target vectors, plus source vectors for words the
// target table lacks (mixed utterances contain both).
EmbeddingTable student_table(const EmbeddingTable& target, const EmbeddingTable& source);

struct TransferResources {
  std::string source_language;
  std::string target_language;
  const Ontology* source_ontology = nullptr;
  const Ontology* target_ontology = nullptr;
  const EmbeddingTable* source_embeddings = nullptr;
  const EmbeddingTable* target_embeddings = nullptr;
  const OntologyMapping* mapping = nullptr;
  const std::vector<Dialog>* source_dialogs = nullptr;  // gate tuples, dictionary-mode utterances
  const ParallelCorpus* parallel = nullptr;             // corpus mode
  const BilingualDictionary* dictionary = nullptr;      // dictionary mode
  const std::vector<Dialog>* eval_dialogs = nullptr;    // optional target dialogs for the curve
};

struct TransferResult {
  NbtModel student;
  EmbeddingTable table;  // the student's lookup table
  Curve curve;  // iteration,encoder_cost,gate_cost[,test_goal,test_request]
};

// Minimizes encoder cost + alpha * gate cost over the student's encoder and
// gate. The decoder is copied from the teacher and frozen.
TransferResult transfer_train(const NbtModel& teacher, const TransferResources& resources,
                              const TransferConfig& config);

// Squared-error bound between teacher and student turn scores:
// sum (y_e - y_f)^2 <= 2 |W_y|^2 sum(|g_e|^2 |r_e - r_f|^2 + |r_f|^2 |g_e - g_f|^2).
struct BoundInstance {
  std::vector<double> r_e, g_e, r_f, g_f;
};
struct BoundSides {
  double lhs = 0.0;
  double rhs = 0.0;
};
BoundSides surrogate_bound(std::span<const double> decoder, std::span<const BoundInstance> items);

}  // namespace xlnbt
