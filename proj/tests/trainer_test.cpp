#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"

namespace xlnbt {
namespace {

using testing::goals;
using testing::make_turn;

Dialog two_turn_dialog() {
  Dialog d;
  d.turns.push_back(make_turn("i want chinese food", goals({{"food", "chinese"}})));
  d.turns.push_back(make_turn("in the south . what is the phone ?",
                              goals({{"food", "chinese"}, {"area", "south"}}, {"phone"}),
                              SystemActs{"area", std::nullopt, std::nullopt}));
  return d;
}

TEST(TurnExamples, OnePerTurnWithTeacherForcedPrevious) {
  const Ontology o = testing::small_ontology();
  const auto ex = make_turn_examples({two_turn_dialog()}, o, 6.0);
  ASSERT_EQ(ex.size(), 2u);
  for (const auto& row : ex[0].prev_scores.informable) {
    for (double x : row) EXPECT_EQ(x, -6.0);
  }
  EXPECT_EQ(ex[1].prev_scores.informable[0], (std::vector<double>{6.0, -6.0, -6.0, -6.0, -6.0}));
  EXPECT_EQ(ex[1].prev_scores.informable[1], (std::vector<double>{-6.0, -6.0}));
  EXPECT_EQ(ex[1].labels.informable[1], (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(ex[1].labels.requests, (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(ex[0].labels.requests, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(ex[1].acts.request, "area");
}

struct LossFixture {
  Ontology ontology = testing::small_ontology();
  EmbeddingTable table = testing::random_table(testing::small_vocabulary(), 4, 21);
  TermSpace terms{ontology, table};
  NbtModel model;

  explicit LossFixture(double lambda = 0.5, Ontology o = testing::small_ontology()) : ontology(std::move(o)) {
    NbtConfig c;
    c.dim = 4;
    c.lambda = lambda;
    model = NbtModel(c, "en", 3);
  }
};

TEST(TurnLoss, HalfProbabilityEverywhereIsLn2) {
  LossFixture f;
  for (double& x : f.model.params.get_mutable(param::kDecoder).data()) x = 0.0;
  auto ex = make_turn_examples({two_turn_dialog()}, f.ontology, 6.0);
  for (auto& e : ex) e.prev_scores = ScoreTable::filled(f.ontology, 0.0);
  const auto loss = turn_loss(f.model, f.terms, ex, {Mode::Infer, 0.0, nullptr, false});
  EXPECT_NEAR(loss.value, std::log(2.0), 1e-12);
}

TEST(TurnLoss, ConfidentCorrectScoresGiveNearZero) {
  Ontology no_requests = testing::small_ontology();
  no_requests.requestable.clear();
  LossFixture f(0.0, no_requests);
  auto ex = make_turn_examples({two_turn_dialog()}, f.ontology, 6.0);
  for (auto& e : ex) {
    for (std::size_t s = 0; s < e.labels.informable.size(); ++s) {
      for (std::size_t v = 0; v < e.labels.informable[s].size(); ++v) {
        e.prev_scores.informable[s][v] = e.labels.informable[s][v] > 0.5 ? 40.0 : -40.0;
      }
    }
  }
  // lambda = 0 makes the score the previous score.
  EXPECT_LT(turn_loss(f.model, f.terms, ex, {Mode::Infer, 0.0, nullptr, false}).value, 1e-15);
}

TEST(TurnLoss, GradientMatchesFiniteDifferences) {
  LossFixture f;
  const Dialog d = two_turn_dialog();
  auto ex = make_turn_examples({d, d}, f.ontology, 6.0);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    NbtConfig c = f.model.config;
    const NbtModel base(c, "en", seed);
    auto fn = [&](const ParameterSet& p) {
      std::mt19937_64 rng(seed);
      return testing::to_evaluation(
          turn_loss(testing::with_params(base, p), f.terms, ex, {Mode::Train, 0.5, &rng, true}));
    };
    const auto r = grad_check(fn, base.params, 1e-5, 1e-6);
    EXPECT_LT(r.max_relative_error, 1e-4) << "seed " << seed << " " << r.worst_entry;
  }
}

TEST(TurnLoss, TrainModeNeedsTwoExamples) {
  LossFixture f;
  auto ex = make_turn_examples({two_turn_dialog()}, f.ontology, 6.0);
  ex.resize(1);
  EXPECT_THROW(turn_loss(f.model, f.terms, ex, {Mode::Train, 0.0, nullptr, true}), Error);
}

SynthTask small_task() {
  SynthConfig sc;
  sc.train_dialogs = 40;
  sc.valid_dialogs = 10;
  sc.test_dialogs = 10;
  sc.parallel_pairs = 20;
  return generate_toy_task(sc);
}

TrainResult train(const SynthTask& task, TrainConfig tc, NbtConfig nc = {}) {
  nc.dim = task.config.dim;
  return train_teacher(nc, "src", task.source_ontology, task.source_embeddings, task.source[0],
                       task.source[1], tc);
}

TEST(TrainTeacher, SameSeedGivesIdenticalRuns) {
  const SynthTask task = small_task();
  TrainConfig tc;
  tc.epochs = 3;
  const auto a = train(task, tc);
  const auto b = train(task, tc);
  EXPECT_EQ(a.curve.rows, b.curve.rows);
  EXPECT_EQ(a.model.params, b.model.params);
  EXPECT_EQ(a.curve.columns, (std::vector<std::string>{"iteration", "train_loss", "valid_goal", "valid_request"}));
  tc.seed = 2;
  EXPECT_NE(train(task, tc).curve.rows, a.curve.rows);
}

TEST(TrainTeacher, PatienceStopsBeforeBudget) {
  const SynthTask task = small_task();
  TrainConfig tc;
  tc.epochs = 50;
  tc.patience = 2;
  tc.optimizer.method = OptimizerMethod::Sgd;
  tc.optimizer.learning_rate = 1e-12;  // validation accuracy cannot move
  const auto r = train(task, tc);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_LT(r.curve.rows.size(), 50u);
}

TEST(TrainTeacher, EmbeddingsUntouchedAndLossFallsEarly) {
  const SynthTask task = small_task();
  const EmbeddingTable before = task.source_embeddings;
  TrainConfig tc;
  tc.epochs = 4;
  tc.patience = 10;
  NbtConfig nc;
  nc.dropout = 0.0;
  const auto r = train(task, tc, nc);
  for (const auto& w : before.words()) EXPECT_EQ(*task.source_embeddings.find(w), *before.find(w));
  ASSERT_GE(r.curve.rows.size(), 4u);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_LT(r.curve.rows[i][1], r.curve.rows[i - 1][1]);
}

TEST(TrainTeacher, DivergenceAborts) {
  const SynthTask task = small_task();
  TrainConfig tc;
  tc.epochs = 5;
  tc.optimizer.method = OptimizerMethod::Sgd;
  tc.optimizer.learning_rate = 1e300;
  EXPECT_THROW(train(task, tc), NumericError);
}

TEST(TrainTeacher, InvalidConfigRejected) {
  TrainConfig tc;
  tc.batch_size = 0;
  EXPECT_THROW(tc.validate(), Error);
}

TEST(TrainTeacher, ToyTaskReachesValidationGoalAccuracy) {
  const SynthConfig sc;
  const SynthTask task = generate_toy_task(sc);
  const RunConfig rc = toy_run_config(sc);
  const auto r = train_tracker(rc, "src", task.source_ontology, task.source_embeddings, task.source[0],
                               task.source[1], sc.seed);
  EXPECT_GE(r.best_valid_goal, 0.95);
}

}  // namespace
}  // namespace xlnbt
