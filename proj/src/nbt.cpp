#include "xlnbt/nbt.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "xlnbt/error.hpp"

namespace xlnbt {

namespace {

Tensor xavier(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-a, a);
  std::vector<double> values(rows * cols);
  for (double& v : values) v = dist(rng);
  return cols == 1 ? Tensor::vector(std::move(values)) : Tensor::matrix(rows, cols, std::move(values));
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_meta_double(const Checkpoint& c, const std::string& key) {
  auto it = c.meta.find(key);
  if (it == c.meta.end()) throw FormatError("checkpoint: missing meta " + key);
  return std::stod(it->second);
}

}  // namespace

std::string feedback_name(Feedback feedback) {
  return feedback == Feedback::State ? "state" : "scores";
}

Feedback parse_feedback(const std::string& name) {
  if (name == "state") return Feedback::State;
  if (name == "scores") return Feedback::Scores;
  throw Error("unknown feedback mode '" + name + "' (expected state or scores)");
}

void NbtConfig::validate() const {
  if (dim == 0) throw Error("nbt: dimension must be positive");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("nbt: lambda outside [0, 1]");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("nbt: dropout outside [0, 1)");
  if (!(inform_threshold > 0.0 && inform_threshold < 1.0)) throw Error("nbt: bad inform threshold");
  if (!(request_threshold > 0.0 && request_threshold < 1.0)) {
    throw Error("nbt: bad request threshold");
  }
}

namespace param {

bool is_encoder(const std::string& name) { return name.rfind("encoder.", 0) == 0; }
bool is_gate(const std::string& name) { return name.rfind("gate.", 0) == 0; }

}  // namespace param

NbtModel::NbtModel(NbtConfig config_, std::string language_, std::uint64_t seed)
    : config(config_), language(std::move(language_)) {
  config.validate();
  const std::size_t h = config.dim;
  std::mt19937_64 rng(seed);
  for (std::size_t w = 0; w < kFilterWidths; ++w) {
    params.add(param::kConvWeight[w], xavier(h, (w + 1) * h, rng));
    params.add(param::kConvBias[w], Tensor({h}));
  }
  params.add(param::kGateSlotValue, xavier(h, h, rng));
  params.add(param::kGateSlotValueBias, Tensor({h}));
  params.add(param::kGateRequest, xavier(h, h, rng));
  params.add(param::kGateConfirmSlot, xavier(h, h, rng));
  params.add(param::kGateConfirmValue, xavier(h, h, rng));
  params.add(param::kDecoder, xavier(h, 1, rng));
  bn = BatchNormState(h, config.bn_momentum, config.bn_epsilon);
}

Checkpoint NbtModel::to_checkpoint() const {
  Checkpoint c;
  c.meta["model.language"] = language.empty() ? "-" : language;
  c.meta["model.ontology_fingerprint"] = ontology_fingerprint.empty() ? "-" : ontology_fingerprint;
  c.meta["model.dim"] = std::to_string(config.dim);
  c.meta["model.lambda"] = format_double(config.lambda);
  c.meta["model.inform_threshold"] = format_double(config.inform_threshold);
  c.meta["model.request_threshold"] = format_double(config.request_threshold);
  c.meta["model.dropout"] = format_double(config.dropout);
  c.meta["model.prior_logit"] = format_double(config.prior_logit);
  c.meta["model.bn_momentum"] = format_double(bn.momentum);
  c.meta["model.bn_epsilon"] = format_double(bn.epsilon);
  c.meta["model.feedback"] = feedback_name(config.feedback);
  c.params = params;
  c.params.add(param::kBnMean, Tensor::vector(bn.running_mean), false);
  c.params.add(param::kBnVar, Tensor::vector(bn.running_var), false);
  return c;
}

NbtModel NbtModel::from_checkpoint(const Checkpoint& c) {
  NbtModel m;
  m.language = c.meta.count("model.language") ? c.meta.at("model.language") : "-";
  if (m.language == "-") m.language.clear();
  m.ontology_fingerprint =
      c.meta.count("model.ontology_fingerprint") ? c.meta.at("model.ontology_fingerprint") : "-";
  if (m.ontology_fingerprint == "-") m.ontology_fingerprint.clear();
  m.config.dim = static_cast<std::size_t>(parse_meta_double(c, "model.dim"));
  m.config.lambda = parse_meta_double(c, "model.lambda");
  m.config.inform_threshold = parse_meta_double(c, "model.inform_threshold");
  m.config.request_threshold = parse_meta_double(c, "model.request_threshold");
  m.config.dropout = parse_meta_double(c, "model.dropout");
  m.config.prior_logit = parse_meta_double(c, "model.prior_logit");
  m.config.bn_momentum = parse_meta_double(c, "model.bn_momentum");
  m.config.bn_epsilon = parse_meta_double(c, "model.bn_epsilon");
  if (auto it = c.meta.find("model.feedback"); it != c.meta.end()) {
    m.config.feedback = parse_feedback(it->second);
  }
  m.config.validate();
  for (const auto& [name, entry] : c.params) {
    if (name == param::kBnMean || name == param::kBnVar) continue;
    m.params.add(name, entry.value, entry.trainable);
  }
  m.bn = BatchNormState(m.config.dim, m.config.bn_momentum, m.config.bn_epsilon);
  m.bn.running_mean = c.params.get(param::kBnMean).values();
  m.bn.running_var = c.params.get(param::kBnVar).values();
  m.bn.validate();
  const std::size_t h = m.config.dim;
  for (std::size_t w = 0; w < kFilterWidths; ++w) {
    if (m.params.get(param::kConvWeight[w]).shape() != std::vector<std::size_t>{h, (w + 1) * h}) {
      throw FormatError("checkpoint: bad shape for " + param::kConvWeight[w]);
    }
  }
  if (m.params.get(param::kDecoder).size() != h) throw FormatError("checkpoint: bad decoder shape");
  return m;
}

TermSpace::TermSpace(const Ontology& ontology, const EmbeddingTable& table)
    : ontology_(&ontology), table_(&table) {
  auto embed = [&](const std::string& term) {
    TermEmbedding e = embed_term(term, table);
    if (e.oov) ++oov_terms_;
    return std::move(e.vector);
  };
  for (const auto& slot : ontology.informable) {
    slots_.push_back(embed(slot.name));
    std::vector<std::vector<double>> values;
    for (const auto& v : slot.values) values.push_back(embed(v));
    values_.push_back(std::move(values));
  }
  for (const auto& r : ontology.requestable) requests_.push_back(embed(r));
}

ActVectors embed_acts(const SystemActs& acts, const EmbeddingTable& table) {
  const std::size_t h = table.dim();
  ActVectors out{std::vector<double>(h, 0.0), std::vector<double>(h, 0.0),
                 std::vector<double>(h, 0.0), false, false};
  if (acts.request) {
    out.request = embed_term(*acts.request, table).vector;
    out.has_request = true;
  }
  if (acts.confirm_slot && acts.confirm_value) {
    out.confirm_slot = embed_term(*acts.confirm_slot, table).vector;
    out.confirm_value = embed_term(*acts.confirm_value, table).vector;
    out.has_confirm = true;
  }
  return out;
}

ActVectors TermSpace::embed_acts(const SystemActs& acts) const {
  return xlnbt::embed_acts(acts, *table_);
}

ScoreTable ScoreTable::filled(const Ontology& ontology, double value) {
  ScoreTable t;
  for (const auto& slot : ontology.informable) t.informable.emplace_back(slot.values.size(), value);
  t.requests.assign(ontology.requestable.size(), value);
  return t;
}

ScoreTable ScoreTable::from_state(const Ontology& ontology, const BeliefState& state,
                                  double logit) {
  ScoreTable t = filled(ontology, -logit);
  for (std::size_t s = 0; s < ontology.informable.size(); ++s) {
    const auto& slot = ontology.informable[s];
    if (auto v = state.goal(slot.name)) {
      const auto index = ontology.value_index(s, *v);
      if (!index) throw FormatError("value '" + *v + "' not in ontology slot " + slot.name);
      t.informable[s][*index] = logit;
    }
  }
  return t;
}

ModelBinding::ModelBinding(Tape& tape, const NbtModel& model, bool track)
    : tape_(&tape), model_(&model), track_(track) {}

Var ModelBinding::operator()(const std::string& name) const {
  const bool track = track_ && model_->params.trainable(name);
  return tape_->leaf(model_->params.get(name), name, track);
}

Var encode_raw(const ModelBinding& binding, const Utterance& utterance,
               const EmbeddingTable& table) {
  if (utterance.empty()) throw Error("encode: empty utterance");
  Tape& tape = binding.tape();
  const std::size_t h = binding.model().dim();
  if (table.dim() != h) {
    throw ShapeError("encode: embedding dimension " + std::to_string(table.dim()) +
                     " does not match model dimension " + std::to_string(h));
  }
  std::vector<Var> words;
  words.reserve(utterance.size());
  for (const auto& token : utterance.tokens) words.push_back(tape.constant(table.lookup(token).vector));

  std::vector<Var> per_width;
  for (std::size_t w = 0; w < kFilterWidths; ++w) {
    const std::size_t width = w + 1;
    if (words.size() < width) continue;
    const Var weight = binding(param::kConvWeight[w]);
    const Var bias = binding(param::kConvBias[w]);
    std::vector<Var> responses;
    for (std::size_t start = 0; start + width <= words.size(); ++start) {
      const Var window =
          width == 1 ? words[start]
                     : tape.concat(std::span<const Var>(words.data() + start, width));
      responses.push_back(tape.relu(tape.add(tape.matvec(weight, window), bias)));
    }
    per_width.push_back(responses.size() == 1 ? responses[0] : tape.max_pool(responses));
  }
  return per_width.size() == 1 ? per_width[0] : tape.add_n(per_width);
}

EncodeResult encode_utterances(const ModelBinding& binding,
                               std::span<const Utterance* const> utterances,
                               const EmbeddingTable& table, Mode mode) {
  Tape& tape = binding.tape();
  const NbtModel& model = binding.model();
  std::vector<Var> raw;
  raw.reserve(utterances.size());
  for (const Utterance* u : utterances) raw.push_back(encode_raw(binding, *u, table));
  EncodeResult out;
  if (mode == Mode::Train) {
    BatchStats stats;
    out.encodings = tape.batch_norm(raw, model.bn.epsilon, &stats);
    out.stats = std::move(stats);
  } else {
    for (Var r : raw) {
      out.encodings.push_back(
          tape.normalize(r, model.bn.running_mean, model.bn.running_var, model.bn.epsilon));
    }
  }
  return out;
}

ActProjections project_acts(const ModelBinding& binding, const ActVectors& acts) {
  Tape& tape = binding.tape();
  ActProjections p;
  if (acts.has_request) {
    p.request = tape.matvec(binding(param::kGateRequest), tape.constant(acts.request));
    p.has_request = true;
  }
  if (acts.has_confirm) {
    p.confirm_slot = tape.matvec(binding(param::kGateConfirmSlot), tape.constant(acts.confirm_slot));
    p.confirm_value =
        tape.matvec(binding(param::kGateConfirmValue), tape.constant(acts.confirm_value));
    p.has_confirm = true;
  }
  return p;
}

Var context_gate(const ModelBinding& binding, Var slot, Var value, const ActProjections& acts) {
  Tape& tape = binding.tape();
  const std::size_t h = binding.model().dim();
  const Var g1 = tape.sigmoid(tape.add(
      tape.matvec(binding(param::kGateSlotValue), tape.add(slot, value)),
      binding(param::kGateSlotValueBias)));
  std::vector<Var> terms{g1};
  if (acts.has_request) terms.push_back(tape.broadcast(tape.dot(slot, acts.request), h));
  if (acts.has_confirm) {
    const Var s = tape.dot(slot, acts.confirm_slot);
    const Var v = tape.dot(value, acts.confirm_value);
    terms.push_back(tape.broadcast(tape.scale_by(s, v), h));
  }
  return terms.size() == 1 ? g1 : tape.add_n(terms);
}

Var turn_score(const ModelBinding& binding, Var encoding, Var gate) {
  Tape& tape = binding.tape();
  return tape.dot(binding(param::kDecoder), tape.mul(encoding, gate));
}

TurnScoreVars score_turn(const ModelBinding& binding, const TermSpace& terms, Var encoding,
                         const ActVectors& acts, const ScoreTable& previous,
                         const DropoutContext& dropout) {
  Tape& tape = binding.tape();
  const NbtModel& model = binding.model();
  const Ontology& ontology = terms.ontology();
  const std::size_t h = model.dim();
  const double lambda = model.config.lambda;
  const ActProjections projections = project_acts(binding, acts);

  auto apply_dropout = [&](Var gate) {
    if (dropout.rate <= 0.0 || dropout.rng == nullptr) return gate;
    std::bernoulli_distribution keep(1.0 - dropout.rate);
    std::vector<double> mask(h);
    const double scale = 1.0 / (1.0 - dropout.rate);
    for (double& m : mask) m = keep(*dropout.rng) ? scale : 0.0;
    return tape.mul_const(gate, mask);
  };

  TurnScoreVars out;
  for (std::size_t s = 0; s < ontology.informable.size(); ++s) {
    const Var slot = tape.constant(terms.slot(s));
    std::vector<Var> row;
    for (std::size_t v = 0; v < ontology.informable[s].values.size(); ++v) {
      const Var value = tape.constant(terms.value(s, v));
      const Var gate = apply_dropout(context_gate(binding, slot, value, projections));
      const Var y = turn_score(binding, encoding, gate);
      row.push_back(tape.add_scalar(tape.scale(y, lambda),
                                    (1.0 - lambda) * previous.informable[s][v]));
    }
    out.informable.push_back(std::move(row));
  }
  const Var zero = tape.zeros(h);
  for (std::size_t r = 0; r < ontology.requestable.size(); ++r) {
    const Var slot = tape.constant(terms.request(r));
    const Var gate = apply_dropout(context_gate(binding, slot, zero, projections));
    out.requests.push_back(turn_score(binding, encoding, gate));
  }
  return out;
}

std::vector<double> context_gate(const NbtModel& model, std::span<const double> slot,
                                 std::span<const double> value, const ActVectors& acts) {
  Tape tape;
  ModelBinding binding(tape, model, false);
  const Var g = context_gate(binding, tape.constant(slot), tape.constant(value),
                             project_acts(binding, acts));
  const auto v = tape.value(g);
  return {v.begin(), v.end()};
}

double turn_score(std::span<const double> encoding, std::span<const double> gate,
                  std::span<const double> decoder) {
  if (encoding.size() != gate.size() || gate.size() != decoder.size()) {
    throw ShapeError("turn_score: vector lengths differ");
  }
  double y = 0.0;
  for (std::size_t i = 0; i < encoding.size(); ++i) y += decoder[i] * encoding[i] * gate[i];
  return y;
}

double cumulative_score(double y_now, double y_prev, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("cumulative_score: lambda outside [0, 1]");
  return lambda * y_now + (1.0 - lambda) * y_prev;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

BeliefState predict_state(const ScoreTable& scores, const Ontology& ontology,
                          double inform_threshold, double request_threshold) {
  BeliefState state;
  for (std::size_t s = 0; s < ontology.informable.size(); ++s) {
    const auto& row = scores.informable.at(s);
    std::size_t best = 0;
    for (std::size_t v = 1; v < row.size(); ++v) {
      if (row[v] > row[best]) best = v;
    }
    if (!row.empty() && sigmoid(row[best]) >= inform_threshold) {
      state.goals[ontology.informable[s].name] = ontology.informable[s].values[best];
    }
  }
  for (std::size_t r = 0; r < ontology.requestable.size(); ++r) {
    if (sigmoid(scores.requests.at(r)) >= request_threshold) {
      state.requests.insert(ontology.requestable[r]);
    }
  }
  return state;
}

Tracker::Tracker(const NbtModel& model, const TermSpace& terms) : model_(&model), terms_(&terms) {
  if (terms.table().dim() != model.dim()) {
    throw ShapeError("tracker: embedding dimension does not match the model");
  }
}

ScoreTable Tracker::prior() const {
  return ScoreTable::filled(terms_->ontology(), -model_->config.prior_logit);
}

ScoreTable Tracker::carry(const ScoreTable& scores, const BeliefState& predicted) const {
  if (model_->config.feedback == Feedback::Scores) return scores;
  return ScoreTable::from_state(terms_->ontology(), predicted, model_->config.prior_logit);
}

ScoreTable Tracker::score(const SystemActs& acts, const Utterance& utterance,
                          const ScoreTable& previous) const {
  Tape tape;
  ModelBinding binding(tape, *model_, false);
  const Utterance* batch[] = {&utterance};
  const EncodeResult enc = encode_utterances(binding, batch, terms_->table(), Mode::Infer);
  const TurnScoreVars vars =
      score_turn(binding, *terms_, enc.encodings[0], terms_->embed_acts(acts), previous);
  ScoreTable out;
  for (const auto& row : vars.informable) {
    std::vector<double> values;
    for (Var v : row) values.push_back(tape.scalar_value(v));
    out.informable.push_back(std::move(values));
  }
  for (Var v : vars.requests) out.requests.push_back(tape.scalar_value(v));
  return out;
}

BeliefState Tracker::predict(const ScoreTable& scores) const {
  return predict_state(scores, terms_->ontology(), model_->config.inform_threshold,
                       model_->config.request_threshold);
}

}  // namespace xlnbt
