#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"

namespace xlnbt {
namespace {

OntologyMapping en_de() {
  OntologyMapping m;
  for (const auto& [id, en, de] : std::vector<std::tuple<std::string, std::string, std::string>>{
           {"FOOD", "food", "essen"}, {"CHINESE", "chinese", "chinesisch"}, {"INDIAN", "indian", "indisch"},
           {"AREA", "area", "gegend"}, {"NORTH", "north", "norden"}, {"PHONE", "phone", "telefon"}}) {
    m.add(id, "en", en);
    m.add(id, "de", de);
  }
  return m;
}

TEST(MapConfig, RequestActIsMapped) {
  const GateTuple t{SystemActs{"food", std::nullopt, std::nullopt}, "food", "chinese"};
  const auto s = map_config(t, en_de(), "en", "de");
  EXPECT_EQ(s.source, t);
  EXPECT_EQ(s.target.acts.request, "essen");
  EXPECT_EQ(s.target.slot, "essen");
  EXPECT_EQ(s.target.value, "chinesisch");
}

TEST(MapConfig, AbsentActsStayAbsent) {
  const auto s = map_config({SystemActs{}, "area", "north"}, en_de(), "en", "de");
  EXPECT_TRUE(s.target.acts.empty());
  const auto r = map_config({SystemActs{}, "phone", std::nullopt}, en_de(), "en", "de");
  EXPECT_FALSE(r.target.value.has_value());
  EXPECT_EQ(r.target.slot, "telefon");
}

TEST(MapConfig, UnmappedValueNamed) {
  try {
    map_config({SystemActs{}, "food", "turkish"}, en_de(), "en", "de");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("turkish"), std::string::npos);
  }
}

TEST(GateTuples, CoverAbsentActsAndObservedActs) {
  const Ontology o = testing::small_ontology();
  Dialog d;
  d.turns.push_back(testing::make_turn("south", testing::goals({{"area", "south"}}),
                                       SystemActs{std::nullopt, "area", "north"}));
  d.turns.push_back(testing::make_turn("south", testing::goals({{"area", "south"}}),
                                       SystemActs{std::nullopt, "area", "north"}));
  const auto tuples = gate_tuples({d}, o);
  // 7 pairs + 2 requestables under absent acts, plus the 2 area values under
  // the confirm act (counted once although it occurs twice).
  EXPECT_EQ(tuples.size(), 7u + 2u + 2u);
  const GateTuple observed{SystemActs{std::nullopt, "area", "north"}, "area", "south"};
  EXPECT_NE(std::find(tuples.begin(), tuples.end(), observed), tuples.end());
}

struct GateFixture {
  Ontology ontology = testing::small_ontology();
  EmbeddingTable table = testing::random_table(testing::small_vocabulary(), 4, 5);
  NbtModel teacher;
  std::vector<GateConfigSample> samples;

  GateFixture() {
    NbtConfig c;
    c.dim = 4;
    teacher = NbtModel(c, "en", 1);
    OntologyMapping identity;
    for (const auto& w : testing::small_vocabulary()) {
      identity.add(w, "en", w);
      identity.add(w, "xx", w);
    }
    identity.add("NA", "en", "north american");
    identity.add("NA", "xx", "north american");
    Dialog d;
    d.turns.push_back(testing::make_turn("phone", testing::goals({}, {"phone"}), SystemActs{"food", std::nullopt, std::nullopt}));
    d.turns.push_back(testing::make_turn("yes", testing::goals({{"food", "indian"}}), SystemActs{std::nullopt, "food", "indian"}));
    for (const auto& t : gate_tuples({d}, ontology)) samples.push_back(map_config(t, identity, "en", "xx"));
  }
};

TEST(GateCost, IdenticalGatesAndEmbeddingsGiveZero) {
  GateFixture f;
  NbtModel student = f.teacher;
  EXPECT_EQ(gate_cost(f.samples, f.teacher, f.table, student, f.table).value, 0.0);
}

TEST(GateCost, NonNegativeAndTouchesOnlyStudentGate) {
  GateFixture f;
  for (std::uint64_t seed = 2; seed < 12; ++seed) {
    NbtModel student(f.teacher.config, "xx", seed);
    const auto r = gate_cost(f.samples, f.teacher, f.table, student, f.table);
    EXPECT_GE(r.value, 0.0);
    for (const auto& [name, g] : r.gradients) EXPECT_TRUE(param::is_gate(name)) << name;
  }
}

TEST(GateCost, SingleSampleMatchesHandEvaluation) {
  NbtConfig c;
  c.dim = 2;
  NbtModel teacher(c, "en", 1);
  NbtModel student(c, "de", 2);
  for (NbtModel* m : {&teacher, &student}) {
    for (const auto& name : m->params.names()) {
      if (param::is_gate(name)) {
        for (double& x : m->params.get_mutable(name).data()) x = 0.0;
      }
    }
  }
  auto& w = teacher.params.get_mutable(param::kGateSlotValue);
  w.at(0, 0) = 1.0;
  w.at(1, 1) = 1.0;
  teacher.params.get_mutable(param::kGateRequest).at(0, 0) = 2.0;
  student.params.get_mutable(param::kGateSlotValueBias)[0] = 1.0;
  student.params.get_mutable(param::kGateSlotValueBias)[1] = -1.0;
  EmbeddingTable en(2);
  en.insert("food", {1, 0});
  en.insert("chinese", {0, 1});
  EmbeddingTable de(2);
  de.insert("essen", {1, 0});
  de.insert("chinesisch", {0, 1});
  const GateConfigSample s = map_config({SystemActs{"food", std::nullopt, std::nullopt}, "food", "chinese"},
                                        en_de(), "en", "de");
  const std::vector<GateConfigSample> samples = {s};
  // Teacher: g1 = sigma(I (c_s + c_v)) = sigma(1, 1); g2 = c_s . (W_tq t_q) = 2.
  // Student: g1 = sigma(b) = (sigma(1), sigma(-1)); g2 = 0.
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  const double d0 = sig(1) + 2.0 - sig(1);
  const double d1 = sig(1) + 2.0 - sig(-1);
  EXPECT_NEAR(gate_cost(samples, teacher, en, student, de).value, d0 * d0 + d1 * d1, 1e-12);
}

TEST(GateCost, GradientMatchesFiniteDifferences) {
  GateFixture f;
  const auto targets = gate_targets(f.samples, f.teacher, f.table, f.table);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const NbtModel student(f.teacher.config, "xx", seed + 40);
    auto fn = [&](const ParameterSet& p) {
      return testing::to_evaluation(gate_cost(testing::with_params(student, p), targets));
    };
    EXPECT_LT(grad_check(fn, student.params, 1e-4, 1e-6).max_relative_error, 1e-4);
  }
}

struct EncoderFixture {
  EmbeddingTable table = testing::random_table(testing::small_vocabulary(), 4, 9);
  std::vector<std::pair<Utterance, Utterance>> pairs;
  NbtModel teacher;

  EncoderFixture() {
    NbtConfig c;
    c.dim = 4;
    teacher = NbtModel(c, "en", 3);
    for (const char* text : {"i want chinese food", "what is the phone ?", "north american food in the south",
                             "persian please"}) {
      pairs.emplace_back(tokenize(text), tokenize(text));
    }
  }
};

TEST(EncoderCostCorpus, IdenticalEncodersGiveZero) {
  EncoderFixture f;
  const NbtModel student = f.teacher;
  // The teacher normalizes with running statistics, the student with batch
  // statistics; once they agree the encodings coincide.
  const auto first = encoder_cost_corpus(f.pairs, {&f.teacher, &f.table}, {&student, &f.table});
  ASSERT_TRUE(first.stats.has_value());
  f.teacher.bn.running_mean = first.stats->mean;
  f.teacher.bn.running_var = first.stats->var;
  EXPECT_LT(encoder_cost_corpus(f.pairs, {&f.teacher, &f.table}, {&student, &f.table}).value, 1e-20);
}

TEST(EncoderCostCorpus, NonNegativeGradientOnEncoderOnly) {
  EncoderFixture f;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const NbtModel student(f.teacher.config, "xx", seed + 10);
    const auto r = encoder_cost_corpus(f.pairs, {&f.teacher, &f.table}, {&student, &f.table});
    EXPECT_GE(r.value, 0.0);
    for (const auto& [name, g] : r.gradients) EXPECT_TRUE(param::is_encoder(name)) << name;
    auto fn = [&](const ParameterSet& p) {
      const NbtModel m = testing::with_params(student, p);
      return testing::to_evaluation(encoder_cost_corpus(f.pairs, {&f.teacher, &f.table}, {&m, &f.table}));
    };
    EXPECT_LT(grad_check(fn, student.params, 1e-4, 1e-6).max_relative_error, 1e-4);
  }
}

TEST(EncoderCostCorpus, UndersizedBatchRejected) {
  EncoderFixture f;
  f.pairs.resize(1);
  EXPECT_THROW(encoder_cost_corpus(f.pairs, {&f.teacher, &f.table}, {&f.teacher, &f.table}), Error);
}

TEST(ReplacementCount, LowTemperatureAlmostNeverReplaces) {
  EXPECT_GT(replacement_count_distribution(5, 0.1)[0], 0.9999);
}

TEST(ReplacementCount, HighTemperatureIsNearlyUniform) {
  for (double p : replacement_count_distribution(4, 1e6)) EXPECT_NEAR(p, 0.25, 1e-6);
}

TEST(ReplacementCount, NormalizedAndNonIncreasing) {
  for (std::size_t n : {1u, 2u, 7u, 40u}) {
    for (double tau : {0.01, 0.1, 1.0, 10.0, 1e4}) {
      const auto p = replacement_count_distribution(n, tau);
      ASSERT_EQ(p.size(), n);
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        sum += p[i];
        if (i > 0) EXPECT_LE(p[i], p[i - 1]);
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(ReplacementCount, EmpiricalMeanMatchesAnalytic) {
  std::mt19937_64 rng(17);
  for (double tau : {1.0, 10.0}) {
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) sum += static_cast<double>(sample_replacement_count(10, tau, rng));
    const double analytic = replacement_count_mean(10, tau);
    EXPECT_NEAR(sum / 1e5, analytic, 0.02 * analytic);
  }
  EXPECT_EQ(sample_replacement_count(1, 5.0, rng), 0u);
}

struct ReplaceFixture {
  BilingualDictionary dict;
  EmbeddingTable context{2};
  EmbeddingTable candidates{2};

  ReplaceFixture() {
    dict.add("food", {"aa", "bb"});
    dict.add("want", {"wollen"});
    context.insert("x", {1, 0});
    context.insert("y", {1, 0});
    candidates.insert("aa", {0.5, 0});  // aligned with the context
    candidates.insert("bb", {0, 1});    // orthogonal
    candidates.insert("wollen", {3, 3});
  }
};

TEST(ContextVector, SumsClippedWindow) {
  EmbeddingTable t(2);
  t.insert("a", {1, 0});
  t.insert("b", {0, 1});
  t.insert("c", {1, 1});
  const Utterance u = tokenize("a b c zz a");
  EXPECT_EQ(context_vector(u, 0, t), (std::vector<double>{1, 2}));  // b + c
  EXPECT_EQ(context_vector(u, 2, t), (std::vector<double>{2, 1}));  // a + b + (zz) + a
}

TEST(ReplaceWords, ZeroCountKeepsUtterance) {
  ReplaceFixture f;
  std::mt19937_64 rng(1);
  const Utterance u = tokenize("x food y");
  const auto r = replace_words(u, 0, f.dict, f.context, f.candidates, rng);
  EXPECT_EQ(r.utterance, u);
  EXPECT_EQ(r.replaced, 0u);
}

TEST(ReplaceWords, SingleCandidateAlwaysChosen) {
  ReplaceFixture f;
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const auto r = replace_words(tokenize("i want"), 1, f.dict, f.context, f.candidates, rng);
    EXPECT_EQ(r.utterance.tokens, (std::vector<std::string>{"i", "wollen"}));
  }
}

TEST(ReplaceWords, PickRateMatchesSoftmax) {
  ReplaceFixture f;
  std::mt19937_64 rng(3);
  const Utterance u = tokenize("x food y");
  // h = x + y = (2, 0): scores aa . h = 1 and bb . h = 0.
  const double expected = std::exp(1.0) / (std::exp(1.0) + std::exp(0.0));
  const auto probs = candidate_probabilities({"aa", "bb"}, context_vector(u, 1, f.context), f.candidates);
  EXPECT_NEAR(probs[0], expected, 1e-12);
  int picks = 0;
  for (int i = 0; i < 100000; ++i) {
    const auto r = replace_words(u, 1, f.dict, f.context, f.candidates, rng);
    picks += r.utterance.tokens[1] == "aa";
    EXPECT_EQ(r.utterance.tokens[0], "x");
    EXPECT_EQ(r.utterance.tokens[2], "y");
  }
  EXPECT_NEAR(picks / 1e5, expected, 0.02 * expected);
}

TEST(ReplaceWords, TooFewReplaceablePositionsReported) {
  ReplaceFixture f;
  std::mt19937_64 rng(4);
  const auto r = replace_words(tokenize("x food y"), 2, f.dict, f.context, f.candidates, rng);
  EXPECT_EQ(r.requested, 2u);
  EXPECT_EQ(r.replaced, 1u);
  EXPECT_EQ(r.positions, (std::vector<std::size_t>{1}));
}

TEST(EncoderCostDict, NoReplacementAndIdenticalEncodersGiveZero) {
  EncoderFixture f;
  std::vector<Utterance> us;
  for (const auto& p : f.pairs) us.push_back(p.first);
  BilingualDictionary dict;
  dict.add("food", {"chinese"});
  const NbtModel student = f.teacher;
  std::mt19937_64 rng(1);
  const auto first = encoder_cost_dict(us, {&f.teacher, &f.table}, {&student, &f.table}, dict, f.table, 1e-9, rng);
  f.teacher.bn.running_mean = first.stats->mean;
  f.teacher.bn.running_var = first.stats->var;
  EXPECT_LT(encoder_cost_dict(us, {&f.teacher, &f.table}, {&student, &f.table}, dict, f.table, 1e-9, rng).value, 1e-20);
}

TEST(EncoderCostDict, ReproducibleNonNegativeAndDifferentiable) {
  const SynthTask task = [] {
    SynthConfig sc;
    sc.dim = 4;
    sc.train_dialogs = 3;
    sc.valid_dialogs = 1;
    sc.test_dialogs = 1;
    sc.parallel_pairs = 4;
    return generate_toy_task(sc);
  }();
  const EmbeddingTable student_tab = student_table(task.target_bilingual, task.source_embeddings);
  std::vector<Utterance> us;
  for (const auto& d : task.source[0]) us.push_back(d.turns[0].utterance);
  NbtConfig c;
  c.dim = 4;
  const NbtModel teacher(c, "src", 1);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const NbtModel student(c, "tgt", seed + 20);
    auto eval = [&](const NbtModel& m) {
      std::mt19937_64 rng(seed);
      return encoder_cost_dict(us, {&teacher, &task.source_embeddings}, {&m, &student_tab}, task.dictionary,
                               task.target_bilingual, 1.0, rng);
    };
    const auto a = eval(student);
    EXPECT_EQ(a.value, eval(student).value);
    EXPECT_GE(a.value, 0.0);
    auto fn = [&](const ParameterSet& p) { return testing::to_evaluation(eval(testing::with_params(student, p))); };
    EXPECT_LT(grad_check(fn, student.params, 1e-4, 1e-6).max_relative_error, 1e-4);
  }
  std::mt19937_64 rng(1);
  EXPECT_THROW(encoder_cost_dict(std::span(us).first(1), {&teacher, &task.source_embeddings},
                                 {&teacher, &student_tab}, task.dictionary, task.target_bilingual, 1.0, rng),
               Error);
}

TEST(StudentTable, TargetEntriesWinSourceFillsGaps) {
  EmbeddingTable target(2);
  target.insert("shared", {1, 1});
  target.insert("essen", {2, 2});
  EmbeddingTable source(2);
  source.insert("shared", {9, 9});
  source.insert("food", {3, 3});
  const auto t = student_table(target, source);
  EXPECT_EQ(*t.find("shared"), (std::vector<double>{1, 1}));
  EXPECT_EQ(*t.find("food"), (std::vector<double>{3, 3}));
  EXPECT_EQ(t.size(), 3u);
}

TEST(TransferConfig, RejectsInvalidKnobs) {
  TransferConfig c;
  c.alpha = -1.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.tau = 0.0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_EQ(parse_transfer_mode("dictionary"), TransferMode::Dictionary);
  EXPECT_EQ(parse_transfer_mode("c"), TransferMode::Corpus);
  EXPECT_THROW(parse_transfer_mode("x"), Error);
  EXPECT_EQ(parse_student_init("random"), StudentInit::Random);
}

struct TransferFixture {
  SynthTask task;
  Resources resources;
  RunConfig config;
  NbtModel teacher;

  TransferFixture() {
    SynthConfig sc;
    sc.train_dialogs = 30;
    sc.valid_dialogs = 5;
    sc.test_dialogs = 10;
    sc.parallel_pairs = 40;
    task = generate_toy_task(sc);
    resources = resources_from_task(task, task.target_bilingual);
    config = toy_run_config(sc);
    config.train.epochs = 2;
    config.transfer.iterations = 20;
    config.transfer.batch_size = 8;
    teacher = train_tracker(config, "src", task.source_ontology, task.source_embeddings, task.source[0],
                            task.source[1], 1)
                  .model;
  }
};

TEST(TransferTrain, DecoderFrozenAndTeacherUntouched) {
  TransferFixture f;
  const NbtModel before = f.teacher;
  for (TransferMode mode : {TransferMode::Corpus, TransferMode::Dictionary}) {
    const auto r = run_transfer(f.teacher, f.resources, f.config, mode, 3);
    EXPECT_TRUE(bitwise_equal(r.student.params.get(param::kDecoder), f.teacher.params.get(param::kDecoder)));
    EXPECT_FALSE(r.student.params.trainable(param::kDecoder));
    EXPECT_EQ(r.student.language, "tgt");
    EXPECT_EQ(r.curve.columns, (std::vector<std::string>{"iteration", "encoder_cost", "gate_cost"}));
    EXPECT_EQ(r.curve.rows.size(), 1u);
  }
  EXPECT_EQ(f.teacher.params, before.params);
  EXPECT_EQ(f.teacher.bn.running_mean, before.bn.running_mean);
}

TEST(TransferTrain, ZeroLearningRateLeavesCopiedWeights) {
  TransferFixture f;
  f.config.transfer.student_init = StudentInit::CopyTeacher;
  f.config.transfer.optimizer.learning_rate = 0.0;
  const auto r = run_transfer(f.teacher, f.resources, f.config, TransferMode::Corpus, 3);
  for (const auto& name : f.teacher.params.names()) {
    EXPECT_TRUE(bitwise_equal(r.student.params.get(name), f.teacher.params.get(name))) << name;
  }
}

TEST(TransferTrain, CurveRowsAtEvalInterval) {
  TransferFixture f;
  f.config.transfer.eval_every = 5;
  const auto r = run_transfer(f.teacher, f.resources, f.config, TransferMode::Corpus, 3);
  EXPECT_EQ(r.curve.columns.size(), 5u);
  ASSERT_EQ(r.curve.rows.size(), 4u);
  EXPECT_EQ(r.curve.rows.back()[0], 20.0);
  for (const auto& row : r.curve.rows) {
    EXPECT_GE(row[3], 0.0);
    EXPECT_LE(row[3], 1.0);
  }
}

TEST(TransferTrain, MissingResourcesRejected) {
  TransferFixture f;
  f.resources.parallel.reset();
  EXPECT_THROW(run_transfer(f.teacher, f.resources, f.config, TransferMode::Corpus, 3), Error);
}

TEST(SurrogateBound, HandInstance) {
  // H = 1, W = 2: y_e = 2 * 1 * 3 = 6, y_f = 2 * 2 * 1 = 4, lhs = 4.
  const BoundInstance b{{1.0}, {3.0}, {2.0}, {1.0}};
  const auto s = surrogate_bound(std::vector<double>{2.0}, std::span(&b, 1));
  EXPECT_DOUBLE_EQ(s.lhs, 4.0);
  // rhs = 2 * 4 * (9 * 1 + 4 * 4) = 200
  EXPECT_DOUBLE_EQ(s.rhs, 200.0);
}

TEST(SurrogateBound, HoldsOnRandomInstances) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t h = 1 + rng() % 8;
    const auto w = testing::random_vector(h, rng);
    std::vector<BoundInstance> items;
    for (std::size_t k = 1 + rng() % 4; k > 0; --k) {
      items.push_back({testing::random_vector(h, rng), testing::random_vector(h, rng),
                       testing::random_vector(h, rng), testing::random_vector(h, rng)});
    }
    const auto s = surrogate_bound(w, items);
    EXPECT_LE(s.lhs, s.rhs * (1 + 1e-12));
  }
}

}  // namespace
}  // namespace xlnbt
