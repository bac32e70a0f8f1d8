#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "xlnbt/checkpoint.hpp"
#include "xlnbt/error.hpp"
#include "xlnbt/pipeline.hpp"
#include "xlnbt/repl.hpp"

namespace fs = std::filesystem;
using namespace xlnbt;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t runs = 1;
  std::optional<std::string> mode;
  std::optional<double> alpha;
  std::optional<double> tau;
  std::optional<double> lambda;
  std::optional<double> lr;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> iterations;
  std::optional<std::size_t> batch_size;
  std::optional<std::string> system;
  std::optional<std::string> embeddings_src;
  std::optional<std::string> embeddings_tgt;
  std::optional<std::string> dialogs;
  std::optional<std::string> ontology;
  std::optional<std::string> mapping;
  std::optional<std::string> dictionary;
  std::optional<std::string> parallel_src;
  std::optional<std::string> parallel_tgt;
  std::optional<std::string> checkpoint;
  std::optional<std::string> student_init;
};

std::shared_ptr<spdlog::logger> make_logger() {
  auto log = spdlog::stderr_logger_st("xlnbt");
  log->set_pattern("%Y-%m-%dT%H:%M:%S.%e level=%l %v");
  return log;
}

spdlog::logger& log() {
  static auto logger = make_logger();
  return *logger;
}

RunConfig base_config(const Options& o) {
  return o.config.empty() ? RunConfig{} : RunConfig::load(o.config);
}

void set_path(RunConfig& c, const char* key, const std::optional<std::string>& value) {
  if (value) c.paths[key] = *value;
}

// Flag overrides; `loop` selects which optimizer --lr and --batch-size address.
enum class Loop { Train, Transfer };

void apply_common(RunConfig& c, const Options& o, Loop loop) {
  if (o.seed) c.seed = *o.seed;
  if (o.lambda) c.model.lambda = *o.lambda;
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.iterations) c.transfer.iterations = *o.iterations;
  if (o.mode) c.transfer.mode = parse_transfer_mode(*o.mode);
  if (o.alpha) c.transfer.alpha = *o.alpha;
  if (o.tau) c.transfer.tau = *o.tau;
  if (o.student_init) c.transfer.student_init = parse_student_init(*o.student_init);
  if (o.lr) {
    (loop == Loop::Train ? c.train.optimizer : c.transfer.optimizer).learning_rate = *o.lr;
  }
  if (o.batch_size) {
    (loop == Loop::Train ? c.train.batch_size : c.transfer.batch_size) = *o.batch_size;
  }
  set_path(c, "source.embeddings", o.embeddings_src);
  set_path(c, "target.embeddings", o.embeddings_tgt);
  set_path(c, "mapping", o.mapping);
  set_path(c, "dictionary", o.dictionary);
  set_path(c, "parallel.src", o.parallel_src);
  set_path(c, "parallel.tgt", o.parallel_tgt);
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

NbtModel load_model(const std::string& path) {
  return NbtModel::from_checkpoint(load_checkpoint(path));
}

void check_fingerprint(const NbtModel& model, const Ontology& ontology, const char* what) {
  if (!model.ontology_fingerprint.empty() && model.ontology_fingerprint != ontology.fingerprint()) {
    throw Error(std::string("checkpoint was trained on a different ") + what + " ontology");
  }
}

// Lookup table for a model in the target language: target vectors plus
// source vectors for words the target table lacks.
EmbeddingTable target_side_table(const Resources& r) {
  if (r.source_embeddings.dim() == 0) return r.target_embeddings;
  return student_table(r.target_embeddings, r.source_embeddings);
}

int cmd_gen(const Options& o) {
  SynthConfig sc;
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw IoError("cannot open synth config " + o.config);
    sc = SynthConfig::from_json(nlohmann::ordered_json::parse(in));
  }
  if (o.seed) sc.seed = *o.seed;
  sc.validate();
  log().info("event=gen_start seed={} dim={} out={}", sc.seed, sc.dim, o.out);
  const SynthTask task = generate_toy_task(sc);
  nlohmann::ordered_json settings = toy_run_config(sc).to_json();
  write_toy_task(task, o.out, settings);
  log().info("event=gen_done train={} valid={} test={} parallel={}", task.source[0].size(),
             task.source[1].size(), task.source[2].size(), task.parallel.size());
  return 0;
}

int cmd_train(const Options& o) {
  RunConfig c = base_config(o);
  apply_common(c, o, Loop::Train);
  set_path(c, "source.train", o.dialogs);
  set_path(c, "source.ontology", o.ontology);
  const Resources r = load_resources(c);
  log().info("event=train_start language={} dialogs={} seed={}", r.source_language,
             r.source[0].size(), c.seed);
  const TrainResult result = train_tracker(c, r.source_language, r.source_ontology,
                                           r.source_embeddings, r.source[0], r.source[1], c.seed);
  fs::create_directories(o.out);
  save_checkpoint(fs::path(o.out) / "teacher.ckpt", result.model.to_checkpoint());
  export_curve(fs::path(o.out) / "train_curve.csv", result.curve);
  write_json(fs::path(o.out) / "run.json", c.to_json());
  log().info("event=train_done best_iteration={} valid_goal={:.4f} stopped_early={}",
             result.best_iteration, result.best_valid_goal, result.stopped_early);
  return 0;
}

int cmd_transfer(const Options& o) {
  RunConfig c = base_config(o);
  apply_common(c, o, Loop::Transfer);
  set_path(c, "source.ontology", o.ontology);
  const Resources r = load_resources(c);
  const NbtModel teacher = load_model(*o.checkpoint);
  check_fingerprint(teacher, r.source_ontology, "source");
  log().info("event=transfer_start mode={} alpha={} tau={} iterations={} seed={}",
             transfer_mode_name(c.transfer.mode), c.transfer.alpha, c.transfer.tau,
             c.transfer.iterations, c.seed);
  const TransferResult result = run_transfer(teacher, r, c, c.transfer.mode, c.seed);
  fs::create_directories(o.out);
  save_checkpoint(fs::path(o.out) / "student.ckpt", result.student.to_checkpoint());
  export_curve(fs::path(o.out) / "transfer_curve.csv", result.curve);
  write_json(fs::path(o.out) / "run.json", c.to_json());
  const auto& last = result.curve.rows.back();
  log().info("event=transfer_done encoder_cost={:.6g} gate_cost={:.6g}", last[1], last[2]);
  return 0;
}

int cmd_eval(const Options& o) {
  RunConfig c = base_config(o);
  const System system = parse_system(*o.system);
  const bool transfer = system == System::XlnbtC || system == System::XlnbtD;
  apply_common(c, o, transfer ? Loop::Transfer : Loop::Train);
  set_path(c, "target.test", o.dialogs);
  set_path(c, "target.ontology", o.ontology);
  if (o.runs == 0) throw Error("--runs must be positive");
  const Resources r = load_resources(c);

  std::optional<NbtModel> loaded;
  if (o.checkpoint) loaded = load_model(*o.checkpoint);
  const bool direct = loaded && system != System::OntologyMatch && system != System::NoTransfer &&
                      loaded->language == r.target_language;
  if (loaded && !direct && needs_teacher(system)) check_fingerprint(*loaded, r.source_ontology, "source");
  if (direct) check_fingerprint(*loaded, r.target_ontology, "target");

  MetricsReport report;
  report.system = system_name(system);
  report.language = r.target_language;
  const EmbeddingTable table = direct ? target_side_table(r) : EmbeddingTable{};
  for (std::size_t i = 0; i < o.runs; ++i) {
    const std::uint64_t seed = c.seed + i;
    DatasetReport test;
    if (direct) {
      test = no_transfer_eval(*loaded, r.target[2], r.target_ontology, table);
    } else {
      const NbtModel* teacher = loaded && needs_teacher(system) ? &*loaded : nullptr;
      test = run_system(system, r, c, seed, teacher).test;
    }
    report.goal_per_seed.push_back(test.metrics.goal);
    report.request_per_seed.push_back(test.metrics.request);
    report.errors += test.errors;
    log().info("event=eval_run system={} seed={} goal={:.4f} request={:.4f}", report.system, seed,
               test.metrics.goal, test.metrics.request);
  }
  const auto j = report.to_json();
  validate_metrics_report(j);
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_json(fs::path(o.out) / "metrics.json", j);
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_track(const Options& o) {
  RunConfig c = base_config(o);
  apply_common(c, o, Loop::Train);
  set_path(c, "target.ontology", o.ontology);
  const Resources r = load_resources(c);
  const bool match = o.system && parse_system(*o.system) == System::OntologyMatch;
  if (!match && !o.checkpoint) throw Error("track: --checkpoint is required unless --system ontology-match");

  if (match) {
    const Ontology& ontology =
        r.target_ontology.informable.empty() ? r.source_ontology : r.target_ontology;
    if (ontology.informable.empty()) throw Error("track: no ontology configured");
    OntologyMatchSession session(ontology, c.ontology_match);
    run_repl(std::cin, std::cout, std::cerr, session, ontology);
    return 0;
  }
  const NbtModel model = load_model(*o.checkpoint);
  const bool target = model.language == r.target_language && !r.target_ontology.informable.empty();
  const Ontology& ontology = target ? r.target_ontology : r.source_ontology;
  check_fingerprint(model, ontology, target ? "target" : "source");
  const EmbeddingTable table = target ? target_side_table(r) : r.source_embeddings;
  const TermSpace terms(ontology, table);
  const Tracker tracker(model, terms);
  NbtSession session(tracker);
  run_repl(std::cin, std::cout, std::cerr, session, ontology);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-lingual neural belief tracking toolkit"};
  app.require_subcommand(1);
  Options o;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Run config (flat dotted-key JSON)")->check(CLI::ExistingFile);
  };
  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "Random seed"); };
  auto add_paths = [&](CLI::App* sub) {
    sub->add_option("--embeddings-src", o.embeddings_src, "Source embeddings");
    sub->add_option("--embeddings-tgt", o.embeddings_tgt, "Target embeddings");
    sub->add_option("--mapping", o.mapping, "Ontology mapping TSV");
    sub->add_option("--dictionary", o.dictionary, "Bilingual dictionary TSV");
    sub->add_option("--parallel-src", o.parallel_src, "Parallel corpus, source side");
    sub->add_option("--parallel-tgt", o.parallel_tgt, "Parallel corpus, target side");
  };
  auto add_transfer = [&](CLI::App* sub) {
    sub->add_option("--mode", o.mode, "Transfer mode: c (corpus) or d (dictionary)")
        ->check(CLI::IsMember({"c", "d", "corpus", "dictionary"}));
    sub->add_option("--alpha", o.alpha, "Gate matching weight");
    sub->add_option("--tau", o.tau, "Replacement temperature");
    sub->add_option("--iterations", o.iterations, "Transfer iterations");
    sub->add_option("--student-init", o.student_init, "copy-teacher or random")
        ->check(CLI::IsMember({"copy-teacher", "random"}));
  };
  auto add_training = [&](CLI::App* sub) {
    sub->add_option("--lambda", o.lambda, "Weight of the current turn in the score recursion");
    sub->add_option("--lr", o.lr, "Learning rate");
    sub->add_option("--epochs", o.epochs, "Training epochs");
    sub->add_option("--batch-size", o.batch_size, "Minibatch size");
  };

  auto* gen = app.add_subcommand("gen", "Generate the synthetic bilingual task");
  add_config(gen);
  gen->add_option("--out", o.out, "Output directory")->required();
  add_seed(gen);

  auto* train = app.add_subcommand("train", "Train a teacher tracker");
  add_config(train);
  train->add_option("--out", o.out, "Output directory")->required();
  add_seed(train);
  add_training(train);
  add_paths(train);
  train->add_option("--dialogs", o.dialogs, "Training dialogs");
  train->add_option("--ontology", o.ontology, "Source ontology");

  auto* transfer = app.add_subcommand("transfer", "Distil a teacher into a target-language student");
  add_config(transfer);
  transfer->add_option("--out", o.out, "Output directory")->required();
  transfer->add_option("--checkpoint", o.checkpoint, "Teacher checkpoint")->required()->check(CLI::ExistingFile);
  add_seed(transfer);
  add_transfer(transfer);
  add_training(transfer);
  add_paths(transfer);
  transfer->add_option("--ontology", o.ontology, "Source ontology");

  auto* eval = app.add_subcommand("eval", "Evaluate a system on the target test split");
  add_config(eval);
  eval->add_option("--system", o.system, "ontology-match, wbw, no-transfer, xlnbt-c, xlnbt-d, supervised")
      ->required()
      ->check(CLI::IsMember({"ontology-match", "wbw", "no-transfer", "xlnbt-c", "xlnbt-d", "supervised"}));
  eval->add_option("--out", o.out, "Output directory for metrics.json");
  eval->add_option("--checkpoint", o.checkpoint, "Teacher, or a target-language model to score directly")
      ->check(CLI::ExistingFile);
  eval->add_option("--runs", o.runs, "Seeds to run, starting at --seed");
  add_seed(eval);
  add_transfer(eval);
  add_training(eval);
  add_paths(eval);
  eval->add_option("--dialogs", o.dialogs, "Target test dialogs");
  eval->add_option("--ontology", o.ontology, "Target ontology");

  auto* track = app.add_subcommand("track", "Interactive tracking on standard input");
  add_config(track);
  track->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->check(CLI::ExistingFile);
  track->add_option("--system", o.system, "Set to ontology-match to track without a model")
      ->check(CLI::IsMember({"ontology-match"}));
  track->add_option("--ontology", o.ontology, "Ontology of the tracked language");
  add_seed(track);
  add_paths(track);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return 0;
    std::cerr << app.help();
    return 2;
  }

  try {
    if (*gen) return cmd_gen(o);
    if (*train) return cmd_train(o);
    if (*transfer) return cmd_transfer(o);
    if (*eval) return cmd_eval(o);
    if (*track) return cmd_track(o);
  } catch (const std::exception& e) {
    log().error("event=failure message=\"{}\"", e.what());
    return 1;
  }
  return 2;
}
