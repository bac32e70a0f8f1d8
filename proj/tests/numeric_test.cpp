#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "xlnbt/autodiff.hpp"
#include "xlnbt/checkpoint.hpp"
#include "xlnbt/grad_check.hpp"
#include "xlnbt/optimizer.hpp"

namespace xlnbt {
namespace {

TEST(Affine, IdentityMatrixReturnsInput) {
  const auto y = affine(Tensor::matrix(2, 2, {1, 0, 0, 1}), std::vector<double>{1, 2},
                        std::vector<double>{0, 0});
  EXPECT_EQ(y, (std::vector<double>{1, 2}));
}

TEST(Affine, ZeroMatrixReturnsBias) {
  const auto y = affine(Tensor::matrix(2, 2, {0, 0, 0, 0}), std::vector<double>{7, -9},
                        std::vector<double>{3, 4});
  EXPECT_EQ(y, (std::vector<double>{3, 4}));
}

TEST(Affine, HandMultiplication) {
  const auto y = affine(Tensor::matrix(2, 2, {1, 2, 3, 4}), std::vector<double>{1, 1},
                        std::vector<double>{0, 0});
  EXPECT_EQ(y, (std::vector<double>{3, 7}));
}

TEST(Affine, ShapeMismatchThrows) {
  EXPECT_THROW(affine(Tensor::matrix(2, 2, {1, 2, 3, 4}), std::vector<double>{1, 1, 1},
                      std::vector<double>{0, 0}),
               ShapeError);
}

TEST(BatchNorm, IdenticalRowsNormalizeToZero) {
  BatchNormState s(2);
  const auto out = batch_norm({{3, -1}, {3, -1}, {3, -1}}, s, Mode::Train);
  for (const auto& row : out) {
    for (double x : row) EXPECT_NEAR(x, 0.0, 1e-12);
  }
}

TEST(BatchNorm, PlusMinusOneIsUnchangedUpToEpsilon) {
  BatchNormState s(1);
  const auto out = batch_norm({{-1}, {1}}, s, Mode::Train);
  const double expected = 1.0 / std::sqrt(1.0 + s.epsilon);
  EXPECT_NEAR(out[0][0], -expected, 1e-15);
  EXPECT_NEAR(out[1][0], expected, 1e-15);
  EXPECT_NEAR(out[1][0], 1.0, 1e-5);
}

TEST(BatchNorm, InferWithIdentityStatsLeavesInputAndState) {
  BatchNormState s(3);
  const BatchNormState before = s;
  const auto out = batch_norm({{0.5, -2, 7}}, s, Mode::Infer);
  EXPECT_NEAR(out[0][0], 0.5, 1e-5);
  EXPECT_NEAR(out[0][1], -2.0, 1e-5);
  EXPECT_NEAR(out[0][2], 7.0, 1e-4);
  EXPECT_EQ(s.running_mean, before.running_mean);
  EXPECT_EQ(s.running_var, before.running_var);
}

TEST(BatchNorm, TrainNeedsTwoRows) {
  BatchNormState s(2);
  EXPECT_THROW(batch_norm({{1, 2}}, s, Mode::Train), Error);
}

TEST(BatchNorm, TrainUpdatesRunningStats) {
  BatchNormState s(1, 0.9);
  batch_norm({{1}, {3}}, s, Mode::Train);
  EXPECT_NEAR(s.running_mean[0], 0.9 * 0.0 + 0.1 * 2.0, 1e-15);
  EXPECT_NEAR(s.running_var[0], 0.9 * 1.0 + 0.1 * 1.0, 1e-15);
}

TEST(BatchNorm, TrainOutputHasZeroMeanUnitVariance) {
  std::mt19937_64 rng(5);
  for (std::size_t batch : {8u, 17u, 64u}) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < batch; ++i) rows.push_back(testing::random_vector(6, rng, 4.0));
    BatchNormState s(6);
    const auto out = batch_norm(rows, s, Mode::Train);
    for (std::size_t d = 0; d < 6; ++d) {
      double mean = 0.0;
      double sq = 0.0;
      for (const auto& r : out) mean += r[d];
      mean /= static_cast<double>(batch);
      for (const auto& r : out) sq += (r[d] - mean) * (r[d] - mean);
      EXPECT_LT(std::abs(mean), 1e-6);
      EXPECT_LT(std::abs(sq / static_cast<double>(batch) - 1.0), 1e-3);
    }
  }
}

TEST(BatchNorm, InvalidStateRejected) {
  BatchNormState s(2);
  s.running_var[1] = -1.0;
  EXPECT_THROW(s.validate(), Error);
  BatchNormState t(2);
  t.epsilon = 0.0;
  EXPECT_THROW(t.validate(), Error);
}

TEST(GradCheck, LinearFunctionIsExact) {
  const std::vector<double> w = {0.3, -1.7, 2.5};
  ParameterSet p;
  p.add("x", Tensor::vector({1.0, 2.0, -0.5}));
  auto f = [&](const ParameterSet& ps) {
    const auto& x = ps.get("x");
    double v = 0.0;
    for (std::size_t i = 0; i < 3; ++i) v += w[i] * x[i];
    return Evaluation{v, {{"x", Tensor::vector(w)}}};
  };
  EXPECT_LT(grad_check(f, p).max_relative_error, 1e-9);
}

TEST(GradCheck, SigmoidSlopeAtZero) {
  ParameterSet p;
  p.add("x", Tensor::vector({0.0}));
  auto f = [](const ParameterSet& ps) {
    const double x = ps.get("x")[0];
    const double s = sigmoid(x);
    return Evaluation{s, {{"x", Tensor::vector({s * (1.0 - s)})}}};
  };
  const auto r = grad_check(f, p);
  EXPECT_DOUBLE_EQ(r.worst_analytic, 0.25);
  EXPECT_NEAR(r.worst_numeric, 0.25, 1e-6);
}

TEST(GradCheck, DetectsWrongGradient) {
  ParameterSet p;
  p.add("x", Tensor::vector({1.5}));
  auto f = [](const ParameterSet& ps) {
    const double x = ps.get("x")[0];
    return Evaluation{x * x, {{"x", Tensor::vector({x})}}};  // should be 2x
  };
  EXPECT_GT(grad_check(f, p).max_relative_error, 0.4);
}

TEST(GradCheck, SkipsFrozenEntriesAndRejectsNonFinite) {
  ParameterSet p;
  p.add("frozen", Tensor::vector({1.0}), false);
  auto f = [](const ParameterSet&) { return Evaluation{1.0, {}}; };
  EXPECT_EQ(grad_check(f, p).checked, 0u);
  auto bad = [](const ParameterSet&) { return Evaluation{std::nan(""), {}}; };
  EXPECT_THROW(grad_check(bad, p), NumericError);
}

TEST(GradCheck, KinkIsReportedNotCountedAsError) {
  ParameterSet p;
  p.add("x", Tensor::vector({1e-7}));
  auto f = [](const ParameterSet& ps) {
    const double x = ps.get("x")[0];
    return Evaluation{std::abs(x), {{"x", Tensor::vector({x >= 0 ? 1.0 : -1.0})}}};
  };
  const auto r = grad_check(f, p, 1e-4);
  EXPECT_EQ(r.kinks, 1u);
  EXPECT_EQ(r.max_relative_error, 0.0);
  // Kink inside the step but outside half of it.
  p.get_mutable("x")[0] = 0.7e-4;
  EXPECT_EQ(grad_check(f, p, 1e-4).kinks, 1u);
  // Away from the kink the component is checked normally.
  p.get_mutable("x")[0] = 0.3;
  const auto smooth = grad_check(f, p, 1e-4);
  EXPECT_EQ(smooth.kinks, 0u);
  EXPECT_EQ(smooth.checked, 1u);
}

TEST(GradCheck, WrongGradientOnCurvedFunctionIsNotMistakenForKink) {
  ParameterSet p;
  p.add("x", Tensor::vector({0.2, -1.3, 2.0}));
  auto f = [](const ParameterSet& ps) {
    const auto& x = ps.get("x");
    double v = 0.0;
    std::vector<double> g(3);
    for (std::size_t i = 0; i < 3; ++i) {
      v += std::exp(x[i]);
      g[i] = 1.01 * std::exp(x[i]);
    }
    return Evaluation{v, {{"x", Tensor::vector(g)}}};
  };
  const auto r = grad_check(f, p, 1e-4);
  EXPECT_EQ(r.kinks, 0u);
  EXPECT_GT(r.max_relative_error, 5e-3);
}

// Every tape operation composed into a cost, checked against central differences.
TEST(Tape, OperationGradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    ParameterSet p;
    p.add("w", Tensor::matrix(4, 4, testing::random_vector(16, rng)));
    p.add("a", Tensor::vector(testing::random_vector(4, rng)));
    p.add("b", Tensor::vector(testing::random_vector(4, rng)));
    const auto rows = std::vector<std::vector<double>>{testing::random_vector(4, rng),
                                                       testing::random_vector(4, rng),
                                                       testing::random_vector(4, rng)};
    auto f = [&](const ParameterSet& ps) {
      Tape t;
      const Var w = t.leaf(ps.get("w"), "w", true);
      const Var a = t.leaf(ps.get("a"), "a", true);
      const Var b = t.leaf(ps.get("b"), "b", true);
      std::vector<Var> xs;
      for (const auto& r : rows) xs.push_back(t.relu(t.add(t.matvec(w, t.constant(r)), a)));
      const auto normed = t.batch_norm(xs, 1e-5);
      const Var pooled = t.max_pool(normed);
      const Var gate = t.sigmoid(t.add(b, t.broadcast(t.dot(a, b), 4)));
      const Var mixed = t.mul(pooled, gate);
      const Var terms[] = {t.bce_with_logits(t.sum(mixed), 1.0), t.squared_norm(t.sub(a, b)),
                           t.scale(t.dot(t.concat(std::vector<Var>{a, b}), t.concat(std::vector<Var>{b, a})), 0.1),
                           t.sum(t.scale_by(t.slice(mixed, 1, 2), t.dot(a, a)))};
      const Var loss = t.mean(terms);
      t.backward(loss);
      return Evaluation{t.scalar_value(loss), t.gradients()};
    };
    const auto r = grad_check(f, p, 1e-5, 1e-6);
    EXPECT_LT(r.max_relative_error, 1e-4) << "seed " << seed << " at " << r.worst_entry;
  }
}

TEST(Optimizer, SgdStepOnHalfSquare) {
  ParameterSet p;
  p.add("x", Tensor::vector({1.0}));
  OptimizerConfig c;
  c.method = OptimizerMethod::Sgd;
  c.learning_rate = 0.1;
  optimizer_step(p, {{"x", Tensor::vector({1.0})}}, c);  // d/dx x^2/2 = x
  EXPECT_DOUBLE_EQ(p.get("x")[0], 0.9);
}

TEST(Optimizer, ZeroGradientLeavesParams) {
  ParameterSet p;
  p.add("x", Tensor::vector({1.0, -2.0}));
  const ParameterSet before = p;
  for (auto method : {OptimizerMethod::Sgd, OptimizerMethod::Adam}) {
    OptimizerConfig c;
    c.method = method;
    optimizer_step(p, {{"x", Tensor::vector({0.0, 0.0})}}, c);
    EXPECT_EQ(p, before);
  }
}

TEST(Optimizer, AdamFirstStepHasMagnitudeLr) {
  ParameterSet p;
  p.add("x", Tensor::vector({0.0}));
  OptimizerConfig c;
  c.learning_rate = 0.01;
  optimizer_step(p, {{"x", Tensor::vector({1.0})}}, c);
  // m_hat = 1, v_hat = 1: step = lr / (1 + eps)
  EXPECT_NEAR(p.get("x")[0], -0.01 / (1.0 + 1e-8), 1e-15);
}

TEST(Optimizer, RejectsFrozenOrUnknownGradient) {
  ParameterSet p;
  p.add("x", Tensor::vector({0.0}));
  p.add("frozen", Tensor::vector({0.0}), false);
  Optimizer opt;
  EXPECT_THROW(opt.step(p, {{"frozen", Tensor::vector({1.0})}}), Error);
  EXPECT_THROW(opt.step(p, {{"missing", Tensor::vector({1.0})}}), Error);
}

TEST(Optimizer, FrozenEntryByteIdenticalAfterThousandSteps) {
  std::mt19937_64 rng(9);
  ParameterSet p;
  p.add("w", Tensor::vector(testing::random_vector(8, rng)));
  p.add("frozen", Tensor::vector(testing::random_vector(8, rng)), false);
  const Tensor frozen_before = p.get("frozen");
  Optimizer opt;
  for (int i = 0; i < 1000; ++i) opt.step(p, {{"w", Tensor::vector(testing::random_vector(8, rng))}});
  EXPECT_TRUE(bitwise_equal(p.get("frozen"), frozen_before));
  EXPECT_EQ(opt.steps(), 1000);
}

TEST(Checkpoint, LoadThenSaveIsByteIdentical) {
  std::mt19937_64 rng(2);
  Checkpoint c;
  c.meta["model.language"] = "en";
  c.params.add("a.weight", Tensor::matrix(2, 3, testing::random_vector(6, rng)));
  c.params.add("b.frozen", Tensor::vector({-0.0, 1e-300, 3.5}), false);
  std::ostringstream first;
  write_checkpoint(first, c);
  std::istringstream in(first.str());
  const Checkpoint loaded = read_checkpoint(in);
  std::ostringstream second;
  write_checkpoint(second, loaded);
  EXPECT_EQ(first.str(), second.str());
  EXPECT_EQ(loaded.params, c.params);
  EXPECT_FALSE(loaded.params.trainable("b.frozen"));
  EXPECT_TRUE(bitwise_equal(loaded.params.get("b.frozen"), c.params.get("b.frozen")));
}

TEST(Checkpoint, CorruptInputRejected) {
  std::istringstream in("not-a-checkpoint\n");
  EXPECT_THROW(read_checkpoint(in), Error);
}

TEST(Tensor, NonFiniteValuesDetected) {
  Tensor t = Tensor::vector({1.0, std::numeric_limits<double>::infinity()});
  EXPECT_FALSE(t.all_finite());
  EXPECT_THROW(t.check_finite("t"), NumericError);
}

}  // namespace
}  // namespace xlnbt
