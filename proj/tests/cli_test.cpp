#include <sys/wait.h>

#include <cstdlib>

#include <gtest/gtest.h>

#include "fixtures.hpp"

namespace xlnbt {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(const testing::TempDir& dir, const std::string& args, const std::string& input = "") {
  const auto in = dir.write("stdin.txt", input);
  const std::string cmd = std::string(XLNBT_CLI) + " " + args + " < " + in.string() + " > " +
                          (dir / "stdout.txt").string() + " 2> " + (dir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testing::read_file(dir / "stdout.txt"),
          testing::read_file(dir / "stderr.txt")};
}

// A small generated task plus a trained teacher, shared by the tests below.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir("cli");
    const auto config = dir_->write("synth.json", R"({"train_dialogs": 20, "valid_dialogs": 4,
      "test_dialogs": 6, "parallel_pairs": 30, "dim": 8})");
    gen_ = run_cli(*dir_, "gen --config " + config.string() + " --out " + (*dir_ / "task").string() + " --seed 3");
    train_ = run_cli(*dir_, "train --config " + run_json() + " --out " + (*dir_ / "teacher").string() + " --epochs 3");
  }
  static void TearDownTestSuite() { delete dir_; }

  static std::string run_json() { return (*dir_ / "task" / "run.json").string(); }
  static std::string teacher() { return (*dir_ / "teacher" / "teacher.ckpt").string(); }

  static testing::TempDir* dir_;
  static Outcome gen_;
  static Outcome train_;
};

testing::TempDir* CliTest::dir_ = nullptr;
Outcome CliTest::gen_;
Outcome CliTest::train_;

TEST_F(CliTest, GenWritesManifest) {
  EXPECT_EQ(gen_.code, 0) << gen_.err;
  EXPECT_TRUE(fs::exists(*dir_ / "task" / "manifest.json"));
  EXPECT_NE(gen_.err.find("event=gen_done"), std::string::npos);
}

TEST_F(CliTest, TrainWritesCheckpointAndCurve) {
  EXPECT_EQ(train_.code, 0) << train_.err;
  EXPECT_TRUE(fs::exists(teacher()));
  EXPECT_TRUE(fs::exists(*dir_ / "teacher" / "train_curve.csv"));
}

TEST_F(CliTest, UnknownFlagExitsWithUsage) {
  const Outcome r = run_cli(*dir_, "gen --out x --bogus 1");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run_cli(*dir_, "").code, 2);
}

TEST_F(CliTest, DictionaryTransferWritesStudent) {
  const auto out = *dir_ / "student";
  const Outcome r = run_cli(*dir_, "transfer --config " + run_json() + " --checkpoint " + teacher() +
                                       " --out " + out.string() + " --mode d --alpha 1 --tau 0.1 --iterations 5");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out / "student.ckpt"));
  const std::string curve = testing::read_file(out / "transfer_curve.csv");
  EXPECT_EQ(curve.rfind("iteration,encoder_cost,gate_cost", 0), 0u);
}

TEST_F(CliTest, MissingInputFileFails) {
  const Outcome r = run_cli(*dir_, "train --out " + (*dir_ / "x").string() + " --dialogs /nonexistent.json");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("level=error"), std::string::npos);
}

TEST_F(CliTest, TrackEmptyInputThenQuit) {
  const Outcome r = run_cli(*dir_, "track --config " + run_json() + " --checkpoint " + teacher(), "\n:quit\n");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
}

TEST_F(CliTest, TrackResetMatchesFreshSession) {
  const std::string args = "track --config " + run_json() + " --checkpoint " + teacher();
  const Ontology o = load_ontology(*dir_ / "task" / "ontology.src.json");
  const std::string value = o.informable[0].values[0];
  const Outcome fresh = run_cli(*dir_, args, value + "\n");
  const Outcome reset = run_cli(*dir_, args, o.informable[1].values[1] + "\n:reset\n" + value + "\n");
  ASSERT_EQ(fresh.code, 0) << fresh.err;
  ASSERT_EQ(reset.code, 0) << reset.err;
  EXPECT_EQ(reset.out.substr(reset.out.find('\n') + 1), fresh.out);
}

TEST_F(CliTest, OntologyMatchTrackFindsValue) {
  const auto ontology = *dir_ / "task" / "ontology.tgt.json";
  const Ontology o = load_ontology(ontology);
  const std::string value = o.informable[0].values[2];
  const Outcome r = run_cli(*dir_, "track --system ontology-match --ontology " + ontology.string(),
                            "the " + value + " one\n");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["goals"][o.informable[0].name], value);
}

TEST_F(CliTest, EvalWritesValidMetrics) {
  const auto out = *dir_ / "eval";
  const Outcome r = run_cli(*dir_, "eval --config " + run_json() + " --system ontology-match --runs 2 --out " +
                                       out.string());
  EXPECT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::ordered_json::parse(testing::read_file(out / "metrics.json"));
  EXPECT_NO_THROW(validate_metrics_report(j));
  EXPECT_EQ(j["goal_per_seed"].size(), 2u);
}

}  // namespace
}  // namespace xlnbt
