#include "xlnbt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xlnbt/error.hpp"

namespace xlnbt {

std::vector<TurnExample> make_turn_examples(const std::vector<Dialog>& dialogs,
                                            const Ontology& ontology, double prior_logit) {
  std::vector<TurnExample> out;
  for (const auto& dialog : dialogs) {
    const BeliefState empty;
    const BeliefState* previous = &empty;
    for (const auto& turn : dialog.turns) {
      TurnExample ex;
      ex.acts = turn.system_acts;
      ex.utterance = turn.utterance;
      ex.prev_scores = ScoreTable::from_state(ontology, *previous, prior_logit);
      ex.labels = ScoreTable::filled(ontology, 0.0);
      for (std::size_t s = 0; s < ontology.informable.size(); ++s) {
        const auto& slot = ontology.informable[s];
        if (auto v = turn.gold.goal(slot.name)) {
          const auto index = ontology.value_index(s, *v);
          if (!index) throw FormatError("value '" + *v + "' not in ontology slot " + slot.name);
          ex.labels.informable[s][*index] = 1.0;
        }
      }
      for (std::size_t r = 0; r < ontology.requestable.size(); ++r) {
        if (turn.gold.requests.contains(ontology.requestable[r])) ex.labels.requests[r] = 1.0;
      }
      out.push_back(std::move(ex));
      previous = &turn.gold;
    }
  }
  return out;
}

BatchLoss turn_loss(const NbtModel& model, const TermSpace& terms,
                    std::span<const TurnExample> examples, const LossOptions& options) {
  if (examples.empty()) throw Error("turn_loss: no examples");
  if (options.mode == Mode::Train && examples.size() < 2) {
    throw ShapeError("turn_loss: train-mode batch normalization needs at least two examples");
  }
  Tape tape;
  ModelBinding binding(tape, model, options.gradients);
  std::vector<const Utterance*> utterances;
  for (const auto& ex : examples) utterances.push_back(&ex.utterance);
  EncodeResult enc = encode_utterances(binding, utterances, terms.table(), options.mode);

  DropoutContext dropout;
  if (options.mode == Mode::Train) dropout = {options.dropout, options.rng};

  std::vector<Var> losses;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const TurnExample& ex = examples[i];
    const TurnScoreVars vars = score_turn(binding, terms, enc.encodings[i],
                                          terms.embed_acts(ex.acts), ex.prev_scores, dropout);
    for (std::size_t s = 0; s < vars.informable.size(); ++s) {
      for (std::size_t v = 0; v < vars.informable[s].size(); ++v) {
        losses.push_back(tape.bce_with_logits(vars.informable[s][v], ex.labels.informable[s][v]));
      }
    }
    for (std::size_t r = 0; r < vars.requests.size(); ++r) {
      losses.push_back(tape.bce_with_logits(vars.requests[r], ex.labels.requests[r]));
    }
  }
  const Var loss = tape.mean(losses);
  BatchLoss out;
  out.value = tape.scalar_value(loss);
  if (!std::isfinite(out.value)) throw NumericError("turn_loss: non-finite loss");
  if (options.gradients) {
    tape.backward(loss);
    out.gradients = tape.gradients();
  }
  out.stats = std::move(enc.stats);
  return out;
}

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0 || patience == 0) {
    throw Error("train config: epochs, batch size and patience must be positive");
  }
  if (!(optimizer.learning_rate > 0.0)) throw Error("train config: learning rate must be positive");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw Error("train config: validation fraction outside (0, 1)");
  }
}

TrainResult train_teacher(const NbtConfig& model_config, const std::string& language,
                          const Ontology& ontology, const EmbeddingTable& table,
                          const std::vector<Dialog>& train, std::vector<Dialog> valid,
                          const TrainConfig& config) {
  config.validate();
  std::vector<Dialog> train_dialogs = train;
  if (valid.empty()) {
    if (train_dialogs.size() < 2) throw Error("train: need at least two dialogs to hold out validation");
    const auto held = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(config.validation_fraction *
                                                static_cast<double>(train_dialogs.size()))));
    valid.assign(train_dialogs.end() - static_cast<std::ptrdiff_t>(held), train_dialogs.end());
    train_dialogs.resize(train_dialogs.size() - held);
  }
  const std::vector<TurnExample> examples =
      make_turn_examples(train_dialogs, ontology, model_config.prior_logit);
  if (examples.size() < 2) throw Error("train: need at least two training turns");

  TrainResult result;
  result.model = NbtModel(model_config, language, config.seed);
  result.model.ontology_fingerprint = ontology.fingerprint();
  NbtModel& model = result.model;
  const TermSpace terms(ontology, table);
  result.curve.columns = {"iteration", "train_loss", "valid_goal", "valid_request"};

  std::mt19937_64 rng(config.seed);
  Optimizer optimizer(config.optimizer);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);

  NbtModel best = model;
  double best_goal = -1.0;
  std::size_t since_best = 0;
  std::size_t iteration = 0;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  bool stop = false;

  auto evaluate = [&] {
    const Tracker tracker(model, terms);
    const Metrics m = evaluate_dialogs(tracker, valid).metrics;
    const double mean_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    result.curve.add({static_cast<double>(iteration), mean_loss, m.goal, m.request});
    loss_sum = 0.0;
    loss_count = 0;
    if (m.goal > best_goal) {
      best_goal = m.goal;
      best = model;
      result.best_iteration = iteration;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      stop = true;
    }
  };

  for (std::size_t epoch = 0; epoch < config.epochs && !stop; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size() && !stop; start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      if (end - start < 2) continue;
      std::vector<TurnExample> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(examples[order[i]]);
      BatchLoss loss;
      try {
        loss = turn_loss(model, terms, batch, {Mode::Train, model.config.dropout, &rng, true});
      } catch (const NumericError& e) {
        throw NumericError("training diverged at iteration " + std::to_string(iteration) + ": " +
                           e.what());
      }
      optimizer.step(model.params, loss.gradients);
      update_running_stats(model.bn, *loss.stats);
      ++iteration;
      loss_sum += loss.value;
      ++loss_count;
      if (config.eval_every != 0 && iteration % config.eval_every == 0) evaluate();
    }
    if (config.eval_every == 0 && !stop) evaluate();
  }
  if (loss_count > 0 && !stop) evaluate();

  result.stopped_early = stop;
  result.best_valid_goal = best_goal;
  result.model = std::move(best);
  return result;
}

}  // namespace xlnbt
