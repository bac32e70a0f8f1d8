#include "xlnbt/pipeline.hpp"

#include <fstream>
#include <functional>

#include "xlnbt/error.hpp"

namespace xlnbt {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string optimizer_name(OptimizerMethod m) { return m == OptimizerMethod::Sgd ? "sgd" : "adam"; }

OptimizerMethod parse_optimizer(const std::string& name) {
  if (name == "sgd") return OptimizerMethod::Sgd;
  if (name == "adam") return OptimizerMethod::Adam;
  throw Error("unknown optimizer '" + name + "' (expected sgd or adam)");
}

using Setter = std::function<void(RunConfig&, const json&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["source.language"] = [](RunConfig& c, const json& v) { c.source_language = v.get<std::string>(); };
    t["target.language"] = [](RunConfig& c, const json& v) { c.target_language = v.get<std::string>(); };
    t["seed"] = [](RunConfig& c, const json& v) { c.seed = v.get<std::uint64_t>(); };
    t["model.dim"] = [](RunConfig& c, const json& v) { c.model.dim = v.get<std::size_t>(); };
    t["model.lambda"] = [](RunConfig& c, const json& v) { c.model.lambda = v.get<double>(); };
    t["model.dropout"] = [](RunConfig& c, const json& v) { c.model.dropout = v.get<double>(); };
    t["model.prior_logit"] = [](RunConfig& c, const json& v) { c.model.prior_logit = v.get<double>(); };
    t["model.inform_threshold"] = [](RunConfig& c, const json& v) {
      c.model.inform_threshold = v.get<double>();
    };
    t["model.request_threshold"] = [](RunConfig& c, const json& v) {
      c.model.request_threshold = v.get<double>();
    };
    t["model.feedback"] = [](RunConfig& c, const json& v) {
      c.model.feedback = parse_feedback(v.get<std::string>());
    };
    t["train.epochs"] = [](RunConfig& c, const json& v) { c.train.epochs = v.get<std::size_t>(); };
    t["train.batch_size"] = [](RunConfig& c, const json& v) { c.train.batch_size = v.get<std::size_t>(); };
    t["train.optimizer"] = [](RunConfig& c, const json& v) {
      c.train.optimizer.method = parse_optimizer(v.get<std::string>());
    };
    t["train.lr"] = [](RunConfig& c, const json& v) { c.train.optimizer.learning_rate = v.get<double>(); };
    t["train.weight_decay"] = [](RunConfig& c, const json& v) {
      c.train.optimizer.weight_decay = v.get<double>();
    };
    t["train.patience"] = [](RunConfig& c, const json& v) { c.train.patience = v.get<std::size_t>(); };
    t["train.eval_every"] = [](RunConfig& c, const json& v) { c.train.eval_every = v.get<std::size_t>(); };
    t["transfer.mode"] = [](RunConfig& c, const json& v) {
      c.transfer.mode = parse_transfer_mode(v.get<std::string>());
    };
    t["transfer.alpha"] = [](RunConfig& c, const json& v) { c.transfer.alpha = v.get<double>(); };
    t["transfer.tau"] = [](RunConfig& c, const json& v) { c.transfer.tau = v.get<double>(); };
    t["transfer.batch_size"] = [](RunConfig& c, const json& v) {
      c.transfer.batch_size = v.get<std::size_t>();
    };
    t["transfer.iterations"] = [](RunConfig& c, const json& v) {
      c.transfer.iterations = v.get<std::size_t>();
    };
    t["transfer.optimizer"] = [](RunConfig& c, const json& v) {
      c.transfer.optimizer.method = parse_optimizer(v.get<std::string>());
    };
    t["transfer.lr"] = [](RunConfig& c, const json& v) {
      c.transfer.optimizer.learning_rate = v.get<double>();
    };
    t["transfer.student_init"] = [](RunConfig& c, const json& v) {
      c.transfer.student_init = parse_student_init(v.get<std::string>());
    };
    t["transfer.eval_every"] = [](RunConfig& c, const json& v) {
      c.transfer.eval_every = v.get<std::size_t>();
    };
    t["ontology_match.request_synonyms"] = [](RunConfig& c, const json& v) {
      c.ontology_match.request_synonyms = v.get<std::map<std::string, std::vector<std::string>>>();
    };
    return t;
  }();
  return table;
}

}  // namespace

const std::vector<std::string>& RunConfig::path_keys() {
  static const std::vector<std::string> keys = {
      "source.ontology", "target.ontology", "source.train",      "source.valid",
      "source.test",     "target.train",    "target.valid",      "target.test",
      "source.embeddings", "target.embeddings", "mapping",       "dictionary",
      "parallel.src",    "parallel.tgt"};
  return keys;
}

RunConfig RunConfig::from_json(const json& j, const std::filesystem::path& base) {
  if (!j.is_object()) throw FormatError("run config: expected a JSON object");
  RunConfig c;
  const auto& keys = path_keys();
  for (const auto& [key, value] : j.items()) {
    try {
      if (std::find(keys.begin(), keys.end(), key) != keys.end()) {
        std::filesystem::path p = value.get<std::string>();
        c.paths[key] = p.is_absolute() || base.empty() ? p : base / p;
        continue;
      }
      auto it = setters().find(key);
      if (it == setters().end()) throw FormatError("unknown key");
      it->second(c, value);
    } catch (const json::exception& e) {
      throw FormatError("run config key '" + key + "': " + e.what());
    } catch (const Error& e) {
      throw FormatError("run config key '" + key + "': " + e.what());
    }
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open run config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

ordered_json RunConfig::to_json() const {
  ordered_json j;
  j["source.language"] = source_language;
  j["target.language"] = target_language;
  for (const auto& key : path_keys()) {
    if (auto it = paths.find(key); it != paths.end()) j[key] = it->second.string();
  }
  j["seed"] = seed;
  j["model.dim"] = model.dim;
  j["model.lambda"] = model.lambda;
  j["model.dropout"] = model.dropout;
  j["model.prior_logit"] = model.prior_logit;
  j["model.inform_threshold"] = model.inform_threshold;
  j["model.request_threshold"] = model.request_threshold;
  j["model.feedback"] = feedback_name(model.feedback);
  j["train.epochs"] = train.epochs;
  j["train.batch_size"] = train.batch_size;
  j["train.optimizer"] = optimizer_name(train.optimizer.method);
  j["train.lr"] = train.optimizer.learning_rate;
  j["train.weight_decay"] = train.optimizer.weight_decay;
  j["train.patience"] = train.patience;
  j["train.eval_every"] = train.eval_every;
  j["transfer.mode"] = transfer_mode_name(transfer.mode);
  j["transfer.alpha"] = transfer.alpha;
  j["transfer.tau"] = transfer.tau;
  j["transfer.batch_size"] = transfer.batch_size;
  j["transfer.iterations"] = transfer.iterations;
  j["transfer.optimizer"] = optimizer_name(transfer.optimizer.method);
  j["transfer.lr"] = transfer.optimizer.learning_rate;
  j["transfer.student_init"] = student_init_name(transfer.student_init);
  j["transfer.eval_every"] = transfer.eval_every;
  j["ontology_match.request_synonyms"] = ontology_match.request_synonyms;
  return j;
}

std::optional<std::filesystem::path> RunConfig::path(const std::string& key) const {
  auto it = paths.find(key);
  if (it == paths.end()) return std::nullopt;
  return it->second;
}

std::filesystem::path RunConfig::require_path(const std::string& key) const {
  auto p = path(key);
  if (!p) throw Error("run config: missing path '" + key + "'");
  return *p;
}

Resources load_resources(const RunConfig& config) {
  Resources r;
  r.source_language = config.source_language;
  r.target_language = config.target_language;
  if (auto p = config.path("mapping")) r.mapping = load_mapping(*p);
  if (auto p = config.path("source.ontology")) r.source_ontology = load_ontology(*p);
  if (auto p = config.path("target.ontology")) {
    r.target_ontology = load_ontology(*p);
  } else if (r.mapping && !r.source_ontology.informable.empty()) {
    r.target_ontology =
        r.mapping->map_ontology(r.source_ontology, config.source_language, config.target_language);
  }
  for (std::size_t s = 0; s < 3; ++s) {
    if (auto p = config.path(std::string("source.") + kSplits[s])) {
      r.source[s] = load_dialogs(*p, r.source_ontology);
    }
    if (auto p = config.path(std::string("target.") + kSplits[s])) {
      r.target[s] = load_dialogs(*p, r.target_ontology);
    }
  }
  const std::optional<std::size_t> dim =
      config.model.dim ? std::optional<std::size_t>(config.model.dim) : std::nullopt;
  if (auto p = config.path("source.embeddings")) r.source_embeddings = load_embeddings(*p, dim).table;
  if (auto p = config.path("target.embeddings")) r.target_embeddings = load_embeddings(*p, dim).table;
  if (auto p = config.path("dictionary")) r.dictionary = load_dictionary(*p);
  auto src = config.path("parallel.src");
  auto tgt = config.path("parallel.tgt");
  if (src && tgt) {
    r.parallel = load_parallel(*src, *tgt);
  } else if (src || tgt) {
    throw Error("run config: parallel.src and parallel.tgt must be given together");
  }
  return r;
}

Resources resources_from_task(const SynthTask& task, const EmbeddingTable& target_embeddings) {
  Resources r;
  r.source_language = task.config.source_language;
  r.target_language = task.config.target_language;
  r.source_ontology = task.source_ontology;
  r.target_ontology = task.target_ontology;
  for (std::size_t s = 0; s < 3; ++s) {
    r.source[s] = task.source[s];
    r.target[s] = task.target[s];
  }
  r.source_embeddings = task.source_embeddings;
  r.target_embeddings = target_embeddings;
  r.mapping = task.mapping;
  r.dictionary = task.dictionary;
  ParallelCorpus corpus;
  for (const auto& [e, f] : task.parallel) corpus.pairs.emplace_back(tokenize(e), tokenize(f));
  r.parallel = std::move(corpus);
  return r;
}

std::string system_name(System system) {
  switch (system) {
    case System::OntologyMatch: return "ontology-match";
    case System::WordByWord: return "wbw";
    case System::NoTransfer: return "no-transfer";
    case System::XlnbtC: return "xlnbt-c";
    case System::XlnbtD: return "xlnbt-d";
    case System::Supervised: return "supervised";
  }
  return "";
}

const std::vector<System>& all_systems() {
  static const std::vector<System> systems = {System::OntologyMatch, System::WordByWord,
                                              System::NoTransfer,    System::XlnbtC,
                                              System::XlnbtD,        System::Supervised};
  return systems;
}

System parse_system(const std::string& name) {
  for (System s : all_systems()) {
    if (system_name(s) == name) return s;
  }
  throw Error("unknown system '" + name +
              "' (expected ontology-match, wbw, no-transfer, xlnbt-c, xlnbt-d or supervised)");
}

bool needs_teacher(System system) {
  return system == System::NoTransfer || system == System::XlnbtC || system == System::XlnbtD;
}

TrainResult train_tracker(const RunConfig& config, const std::string& language,
                          const Ontology& ontology, const EmbeddingTable& table,
                          const std::vector<Dialog>& train, const std::vector<Dialog>& valid,
                          std::uint64_t seed) {
  if (train.empty()) throw Error("train: no training dialogs for language '" + language + "'");
  NbtConfig model = config.model;
  model.dim = table.dim();
  TrainConfig tc = config.train;
  tc.seed = seed;
  return train_teacher(model, language, ontology, table, train, valid, tc);
}

TransferResult run_transfer(const NbtModel& teacher, const Resources& r, const RunConfig& config,
                            TransferMode mode, std::uint64_t seed) {
  if (!r.mapping) throw Error("transfer: no ontology mapping configured");
  TransferConfig tc = config.transfer;
  tc.mode = mode;
  tc.seed = seed;
  TransferResources res;
  res.source_language = r.source_language;
  res.target_language = r.target_language;
  res.source_ontology = &r.source_ontology;
  res.target_ontology = &r.target_ontology;
  res.source_embeddings = &r.source_embeddings;
  res.target_embeddings = &r.target_embeddings;
  res.mapping = &*r.mapping;
  res.source_dialogs = &r.source[0];
  if (r.parallel) res.parallel = &*r.parallel;
  if (r.dictionary) res.dictionary = &*r.dictionary;
  if (!r.target[2].empty() && tc.eval_every != 0) res.eval_dialogs = &r.target[2];
  return transfer_train(teacher, res, tc);
}

SystemRun run_system(System system, const Resources& r, const RunConfig& config,
                     std::uint64_t seed, const NbtModel* teacher) {
  const auto& test = r.target[2];
  if (test.empty()) throw Error("eval: no target test dialogs configured");
  SystemRun out;
  std::optional<NbtModel> own_teacher;
  if (needs_teacher(system) && !teacher) {
    own_teacher = train_tracker(config, r.source_language, r.source_ontology, r.source_embeddings,
                                r.source[0], r.source[1], seed)
                      .model;
    teacher = &*own_teacher;
  }
  switch (system) {
    case System::OntologyMatch:
      out.test = ontology_match_eval(test, r.target_ontology, config.ontology_match);
      break;
    case System::WordByWord: {
      if (!r.dictionary || !r.mapping) throw Error("wbw: needs a dictionary and a mapping");
      auto translate = [&](const std::vector<Dialog>& d) {
        return word_by_word_translate(d, *r.dictionary, r.source_embeddings, r.target_embeddings,
                                      *r.mapping, r.source_language, r.target_language);
      };
      auto trained = train_tracker(config, r.target_language, r.target_ontology, r.target_embeddings,
                                   translate(r.source[0]), translate(r.source[1]), seed);
      out.test = no_transfer_eval(trained.model, test, r.target_ontology, r.target_embeddings);
      out.curve = std::move(trained.curve);
      out.model = std::move(trained.model);
      break;
    }
    case System::NoTransfer:
      out.test = no_transfer_eval(*teacher, test, r.target_ontology, r.target_embeddings);
      break;
    case System::XlnbtC:
    case System::XlnbtD: {
      const TransferMode mode =
          system == System::XlnbtC ? TransferMode::Corpus : TransferMode::Dictionary;
      TransferResult t = run_transfer(*teacher, r, config, mode, seed);
      out.test = no_transfer_eval(t.student, test, r.target_ontology, t.table);
      out.model = std::move(t.student);
      out.table = std::move(t.table);
      out.curve = std::move(t.curve);
      break;
    }
    case System::Supervised: {
      auto trained = train_tracker(config, r.target_language, r.target_ontology, r.target_embeddings,
                                   r.target[0], r.target[1], seed);
      out.test = no_transfer_eval(trained.model, test, r.target_ontology, r.target_embeddings);
      out.curve = std::move(trained.curve);
      out.model = std::move(trained.model);
      break;
    }
  }
  return out;
}

RunConfig toy_run_config(const SynthConfig& synth) {
  RunConfig c;
  c.source_language = synth.source_language;
  c.target_language = synth.target_language;
  c.seed = synth.seed;
  c.model.dim = synth.dim;
  c.model.dropout = 0.0;
  c.train.epochs = 200;
  c.train.optimizer.method = OptimizerMethod::Sgd;
  c.train.optimizer.learning_rate = 10.0;
  c.train.patience = 200;
  c.transfer.iterations = 3000;
  c.transfer.optimizer.learning_rate = 3e-3;
  c.transfer.student_init = StudentInit::Random;
  return c;
}

}  // namespace xlnbt
