#include "xlnbt/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "xlnbt/error.hpp"

namespace xlnbt {

std::string transfer_mode_name(TransferMode mode) {
  return mode == TransferMode::Corpus ? "c" : "d";
}

TransferMode parse_transfer_mode(const std::string& name) {
  if (name == "c" || name == "corpus") return TransferMode::Corpus;
  if (name == "d" || name == "dictionary") return TransferMode::Dictionary;
  throw Error("unknown transfer mode '" + name + "' (expected c or d)");
}

std::string student_init_name(StudentInit init) {
  return init == StudentInit::CopyTeacher ? "copy-teacher" : "random";
}

StudentInit parse_student_init(const std::string& name) {
  if (name == "copy-teacher") return StudentInit::CopyTeacher;
  if (name == "random") return StudentInit::Random;
  throw Error("unknown student init '" + name + "' (expected copy-teacher or random)");
}

void TransferConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error("transfer config: alpha must be >= 0");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error("transfer config: tau must be > 0");
  if (batch_size < 2) throw Error("transfer config: batch size must be at least 2");
  if (iterations == 0) throw Error("transfer config: iterations must be positive");
  if (!(optimizer.learning_rate >= 0.0)) {
    throw Error("transfer config: learning rate must be non-negative");
  }
}

// ---- gate matching ----------------------------------------------------------

GateConfigSample map_config(const GateTuple& source, const OntologyMapping& mapping,
                            const std::string& from, const std::string& to) {
  GateConfigSample out{source, {}};
  out.target.acts = mapping.map_acts(source.acts, from, to);
  out.target.slot = mapping.translate(source.slot, from, to);
  if (source.value) out.target.value = mapping.translate(*source.value, from, to);
  return out;
}

std::vector<GateTuple> gate_tuples(const std::vector<Dialog>& dialogs, const Ontology& ontology) {
  std::set<GateTuple> tuples;
  auto add_slot = [&](const SystemActs& acts, const std::string& slot) {
    if (auto s = ontology.slot_index(slot)) {
      for (const auto& v : ontology.informable[*s].values) tuples.insert({acts, slot, v});
    }
    if (ontology.request_index(slot)) tuples.insert({acts, slot, std::nullopt});
  };
  for (const auto& slot : ontology.informable) add_slot({}, slot.name);
  for (const auto& r : ontology.requestable) add_slot({}, r);
  for (const auto& dialog : dialogs) {
    for (const auto& turn : dialog.turns) {
      const SystemActs& acts = turn.system_acts;
      if (acts.empty()) continue;
      if (acts.request) add_slot(acts, *acts.request);
      if (acts.confirm_slot) add_slot(acts, *acts.confirm_slot);
    }
  }
  return {tuples.begin(), tuples.end()};
}

namespace {

std::vector<double> term_vector(const std::optional<std::string>& term, const EmbeddingTable& table) {
  if (!term) return std::vector<double>(table.dim(), 0.0);
  return embed_term(*term, table).vector;
}

void accumulate(GradientMap& into, const GradientMap& from, double weight) {
  for (const auto& [name, grad] : from) {
    auto it = into.find(name);
    if (it == into.end()) {
      Tensor scaled = grad;
      for (double& x : scaled.data()) x *= weight;
      into.emplace(name, std::move(scaled));
      continue;
    }
    auto dst = it->second.data();
    const auto src = grad.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += weight * src[i];
  }
}

}  // namespace

std::vector<GateTarget> gate_targets(std::span<const GateConfigSample> samples,
                                     const NbtModel& teacher, const EmbeddingTable& teacher_table,
                                     const EmbeddingTable& student_table) {
  if (teacher_table.dim() != teacher.dim() || student_table.dim() != teacher.dim()) {
    throw ShapeError("gate targets: embedding dimension does not match the model");
  }
  std::vector<GateTarget> out;
  out.reserve(samples.size());
  for (const auto& sample : samples) {
    const auto slot_e = term_vector(sample.source.slot, teacher_table);
    const auto value_e = term_vector(sample.source.value, teacher_table);
    GateTarget t;
    t.teacher_gate = context_gate(teacher, slot_e, value_e, embed_acts(sample.source.acts, teacher_table));
    t.slot = term_vector(sample.target.slot, student_table);
    t.value = term_vector(sample.target.value, student_table);
    t.acts = embed_acts(sample.target.acts, student_table);
    out.push_back(std::move(t));
  }
  return out;
}

BatchLoss gate_cost(const NbtModel& student, std::span<const GateTarget> targets, bool gradients) {
  BatchLoss out;
  if (targets.empty()) return out;
  Tape tape;
  ModelBinding binding(tape, student, true);
  std::vector<Var> terms;
  terms.reserve(targets.size());
  for (const auto& t : targets) {
    const Var g = context_gate(binding, tape.constant(t.slot), tape.constant(t.value),
                               project_acts(binding, t.acts));
    terms.push_back(tape.squared_norm(tape.sub(g, tape.constant(t.teacher_gate))));
  }
  const Var total = tape.add_n(terms);
  out.value = tape.scalar_value(total);
  if (!std::isfinite(out.value)) throw NumericError("gate cost: non-finite value");
  if (gradients) {
    tape.backward(total);
    out.gradients = tape.gradients();
  }
  return out;
}

BatchLoss gate_cost(std::span<const GateConfigSample> samples, const NbtModel& teacher,
                    const EmbeddingTable& teacher_table, const NbtModel& student,
                    const EmbeddingTable& student_table, bool gradients) {
  const auto targets = gate_targets(samples, teacher, teacher_table, student_table);
  return gate_cost(student, targets, gradients);
}

// ---- encoder matching -------------------------------------------------------

BatchLoss encoder_cost(std::span<const std::pair<Utterance, Utterance>> pairs, EncoderSide teacher,
                       EncoderSide student, bool gradients) {
  if (pairs.size() < 2) throw Error("encoder cost: batch needs at least two utterances");
  std::vector<const Utterance*> sources;
  std::vector<const Utterance*> targets;
  for (const auto& [e, f] : pairs) {
    sources.push_back(&e);
    targets.push_back(&f);
  }

  std::vector<std::vector<double>> reference;
  {
    Tape tape;
    ModelBinding binding(tape, *teacher.model, false);
    const EncodeResult enc = encode_utterances(binding, sources, *teacher.table, Mode::Infer);
    for (Var r : enc.encodings) {
      const auto v = tape.value(r);
      reference.emplace_back(v.begin(), v.end());
    }
  }

  Tape tape;
  ModelBinding binding(tape, *student.model, true);
  EncodeResult enc = encode_utterances(binding, targets, *student.table, Mode::Train);
  std::vector<Var> terms;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    terms.push_back(tape.squared_norm(tape.sub(enc.encodings[i], tape.constant(reference[i]))));
  }
  const Var cost = tape.mean(terms);
  BatchLoss out;
  out.value = tape.scalar_value(cost);
  if (!std::isfinite(out.value)) throw NumericError("encoder cost: non-finite value");
  if (gradients) {
    tape.backward(cost);
    out.gradients = tape.gradients();
  }
  out.stats = std::move(enc.stats);
  return out;
}

BatchLoss encoder_cost_corpus(std::span<const std::pair<Utterance, Utterance>> pairs,
                              EncoderSide teacher, EncoderSide student, bool gradients) {
  return encoder_cost(pairs, teacher, student, gradients);
}

// ---- word replacement -------------------------------------------------------

std::vector<double> replacement_count_distribution(std::size_t n, double tau) {
  if (n == 0) throw Error("replacement count: utterance length must be positive");
  if (!(tau > 0.0)) throw Error("replacement count: tau must be positive");
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = std::exp(-static_cast<double>(i) / tau);
  const double z = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& x : p) x /= z;
  return p;
}

double replacement_count_mean(std::size_t n, double tau) {
  const auto p = replacement_count_distribution(n, tau);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += static_cast<double>(i) * p[i];
  return mean;
}

std::size_t sample_replacement_count(std::size_t n, double tau, std::mt19937_64& rng) {
  const auto p = replacement_count_distribution(n, tau);
  std::discrete_distribution<std::size_t> pick(p.begin(), p.end());
  return pick(rng);
}

std::vector<double> context_vector(const Utterance& utterance, std::size_t position,
                                   const EmbeddingTable& table) {
  std::vector<double> h(table.dim(), 0.0);
  const std::size_t n = utterance.size();
  const std::size_t lo = position >= 2 ? position - 2 : 0;
  const std::size_t hi = std::min(n, position + 3);
  for (std::size_t k = lo; k < hi; ++k) {
    if (k == position) continue;
    if (const auto* v = table.find(utterance.tokens[k])) {
      for (std::size_t d = 0; d < h.size(); ++d) h[d] += (*v)[d];
    }
  }
  return h;
}

std::vector<double> candidate_probabilities(const std::vector<std::string>& candidates,
                                            std::span<const double> context,
                                            const EmbeddingTable& candidate_table) {
  if (candidates.empty()) throw Error("candidate probabilities: no candidates");
  std::vector<double> logits;
  for (const auto& c : candidates) {
    double dot = 0.0;
    if (const auto* v = candidate_table.find(c)) {
      for (std::size_t d = 0; d < context.size(); ++d) dot += (*v)[d] * context[d];
    }
    logits.push_back(dot);
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& l : logits) z += (l = std::exp(l - top));
  for (double& l : logits) l /= z;
  return logits;
}

Replacement replace_words(const Utterance& utterance, std::size_t count,
                          const BilingualDictionary& dictionary,
                          const EmbeddingTable& context_table,
                          const EmbeddingTable& candidate_table, std::mt19937_64& rng) {
  Replacement out{utterance, count, 0, {}};
  if (count == 0) return out;
  std::vector<std::size_t> replaceable;
  for (std::size_t i = 0; i < utterance.size(); ++i) {
    if (dictionary.contains(utterance.tokens[i])) replaceable.push_back(i);
  }
  std::shuffle(replaceable.begin(), replaceable.end(), rng);
  replaceable.resize(std::min(count, replaceable.size()));
  std::sort(replaceable.begin(), replaceable.end());
  for (std::size_t i : replaceable) {
    const auto& candidates = *dictionary.candidates(utterance.tokens[i]);
    const auto p = candidate_probabilities(candidates, context_vector(utterance, i, context_table),
                                           candidate_table);
    std::discrete_distribution<std::size_t> pick(p.begin(), p.end());
    out.utterance.tokens[i] = candidates[pick(rng)];
  }
  out.positions = std::move(replaceable);
  out.replaced = out.positions.size();
  return out;
}

BatchLoss encoder_cost_dict(std::span<const Utterance> utterances, EncoderSide teacher,
                            EncoderSide student, const BilingualDictionary& dictionary,
                            const EmbeddingTable& candidate_table, double tau,
                            std::mt19937_64& rng, bool gradients) {
  if (utterances.size() < 2) throw Error("encoder cost: batch needs at least two utterances");
  std::vector<std::pair<Utterance, Utterance>> pairs;
  pairs.reserve(utterances.size());
  for (const auto& u : utterances) {
    const std::size_t n = sample_replacement_count(u.size(), tau, rng);
    pairs.emplace_back(u, replace_words(u, n, dictionary, *teacher.table, candidate_table, rng).utterance);
  }
  return encoder_cost(pairs, teacher, student, gradients);
}

EmbeddingTable student_table(const EmbeddingTable& target, const EmbeddingTable& source) {
  if (target.dim() != source.dim()) throw ShapeError("student table: embedding dimensions differ");
  EmbeddingTable out = target;
  out.merge_missing(source);
  return out;
}

// ---- training loop ----------------------------------------------------------

namespace {

void require(const void* p, const char* what) {
  if (!p) throw Error(std::string("transfer: missing ") + what);
}

// Cycles through a shuffled index order, reshuffling after each pass.
class BatchCursor {
 public:
  BatchCursor(std::size_t n, std::mt19937_64& rng) : order_(n), rng_(&rng) {
    std::iota(order_.begin(), order_.end(), 0);
    std::shuffle(order_.begin(), order_.end(), *rng_);
  }

  std::vector<std::size_t> next(std::size_t size) {
    std::vector<std::size_t> out;
    while (out.size() < size) {
      if (pos_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), *rng_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::mt19937_64* rng_;
  std::size_t pos_ = 0;
};

}  // namespace

TransferResult transfer_train(const NbtModel& teacher, const TransferResources& res,
                              const TransferConfig& config) {
  config.validate();
  require(res.source_ontology, "source ontology");
  require(res.target_ontology, "target ontology");
  require(res.source_embeddings, "source embeddings");
  require(res.target_embeddings, "target embeddings");
  require(res.mapping, "ontology mapping");
  require(res.source_dialogs, "source dialogs");
  if (config.mode == TransferMode::Corpus) require(res.parallel, "parallel corpus");
  if (config.mode == TransferMode::Dictionary) require(res.dictionary, "bilingual dictionary");
  if (res.source_embeddings->dim() != teacher.dim()) {
    throw ShapeError("transfer: source embedding dimension does not match the teacher");
  }
  res.mapping->check_covers(*res.source_ontology, res.source_language);

  TransferResult result;
  result.table = student_table(*res.target_embeddings, *res.source_embeddings);

  NbtModel& student = result.student;
  if (config.student_init == StudentInit::CopyTeacher) {
    student = teacher;
  } else {
    student = NbtModel(teacher.config, res.target_language, config.seed);
    student.params.get_mutable(param::kDecoder) = teacher.params.get(param::kDecoder);
  }
  student.language = res.target_language;
  student.ontology_fingerprint = res.target_ontology->fingerprint();
  student.params.set_trainable(param::kDecoder, false);

  std::vector<GateConfigSample> samples;
  for (const auto& t : gate_tuples(*res.source_dialogs, *res.source_ontology)) {
    samples.push_back(map_config(t, *res.mapping, res.source_language, res.target_language));
  }
  const auto targets = gate_targets(samples, teacher, *res.source_embeddings, result.table);

  std::vector<Utterance> source_utterances;
  if (config.mode == TransferMode::Dictionary) {
    for (const auto& d : *res.source_dialogs) {
      for (const auto& turn : d.turns) source_utterances.push_back(turn.utterance);
    }
  }
  const std::size_t pool = config.mode == TransferMode::Corpus ? res.parallel->pairs.size()
                                                               : source_utterances.size();
  if (pool < 2) throw Error("transfer: need at least two training utterances");

  const bool evaluate = res.eval_dialogs != nullptr;
  result.curve.columns = {"iteration", "encoder_cost", "gate_cost"};
  if (evaluate) {
    result.curve.columns.push_back("test_goal");
    result.curve.columns.push_back("test_request");
  }
  const TermSpace terms(*res.target_ontology, result.table);

  std::mt19937_64 rng(config.seed);
  BatchCursor cursor(pool, rng);
  Optimizer optimizer(config.optimizer);
  const EncoderSide teacher_side{&teacher, res.source_embeddings};
  const EncoderSide student_side{&student, &result.table};

  for (std::size_t it = 1; it <= config.iterations; ++it) {
    const auto batch = cursor.next(std::min(config.batch_size, pool));
    BatchLoss enc;
    BatchLoss gate;
    try {
      if (config.mode == TransferMode::Corpus) {
        std::vector<std::pair<Utterance, Utterance>> pairs;
        for (std::size_t i : batch) pairs.push_back(res.parallel->pairs[i]);
        enc = encoder_cost_corpus(pairs, teacher_side, student_side);
      } else {
        std::vector<Utterance> utterances;
        for (std::size_t i : batch) utterances.push_back(source_utterances[i]);
        enc = encoder_cost_dict(utterances, teacher_side, student_side, *res.dictionary,
                                *res.target_embeddings, config.tau, rng);
      }
      gate = gate_cost(student, targets, config.alpha > 0.0);
    } catch (const NumericError& e) {
      throw NumericError("transfer diverged at iteration " + std::to_string(it) + ": " + e.what());
    }
    GradientMap grads = std::move(enc.gradients);
    if (config.alpha > 0.0) accumulate(grads, gate.gradients, config.alpha);
    try {
      optimizer.step(student.params, grads);
    } catch (const NumericError& e) {
      throw NumericError("transfer diverged at iteration " + std::to_string(it) + ": " + e.what());
    }
    update_running_stats(student.bn, *enc.stats);

    const bool last = it == config.iterations;
    if (last || (config.eval_every != 0 && it % config.eval_every == 0)) {
      std::vector<double> row{static_cast<double>(it), enc.value, gate.value};
      if (evaluate) {
        const Metrics m = evaluate_dialogs(Tracker(student, terms), *res.eval_dialogs).metrics;
        row.push_back(m.goal);
        row.push_back(m.request);
      }
      result.curve.add(row);
    }
  }
  return result;
}

BoundSides surrogate_bound(std::span<const double> decoder, std::span<const BoundInstance> items) {
  auto sq = [](std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
  };
  auto sq_diff = [](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
  };
  BoundSides out;
  double inner = 0.0;
  for (const auto& it : items) {
    const std::size_t h = decoder.size();
    if (it.r_e.size() != h || it.g_e.size() != h || it.r_f.size() != h || it.g_f.size() != h) {
      throw ShapeError("surrogate bound: vector lengths differ");
    }
    const double diff = turn_score(it.r_e, it.g_e, decoder) - turn_score(it.r_f, it.g_f, decoder);
    out.lhs += diff * diff;
    inner += sq(it.g_e) * sq_diff(it.r_e, it.r_f) + sq(it.r_f) * sq_diff(it.g_e, it.g_f);
  }
  out.rhs = 2.0 * sq(decoder) * inner;
  return out;
}

}  // namespace xlnbt
