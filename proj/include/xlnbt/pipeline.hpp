#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "xlnbt/baselines.hpp"
#include "xlnbt/dialog.hpp"
#include "xlnbt/embeddings.hpp"
#include "xlnbt/evaluation.hpp"
#include "xlnbt/lexicon.hpp"
#include "xlnbt/nbt.hpp"
#include "xlnbt/synth.hpp"
#include "xlnbt/trainer.hpp"
#include "xlnbt/transfer.hpp"

namespace xlnbt {

// Every knob of a run. Serialized as a flat JSON object with dotted keys;
// relative paths resolve against the config file's directory.
struct RunConfig {
  std::string source_language = "src";
  std::string target_language = "tgt";
  // Keys: source.ontology, target.ontology, source.{train,valid,test},
  // target.{train,valid,test}, source.embeddings, target.embeddings, mapping,
  // dictionary, parallel.src, parallel.tgt.
  std::map<std::string, std::filesystem::path> paths;
  NbtConfig model;
  TrainConfig train;
  TransferConfig transfer;
  std::uint64_t seed = 1;
  OntologyMatchOptions ontology_match;

  static const std::vector<std::string>& path_keys();
  // Unknown keys are rejected; missing keys keep their defaults.
  static RunConfig from_json(const nlohmann::json& json, const std::filesystem::path& base = {});
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;

  std::optional<std::filesystem::path> path(const std::string& key) const;
  std::filesystem::path require_path(const std::string& key) const;
};

inline constexpr const char* kSplits[3] = {"train", "valid", "test"};

struct Resources {
  std::string source_language;
  std::string target_language;
  Ontology source_ontology;
  Ontology target_ontology;
  std::array<std::vector<Dialog>, 3> source;  // train, valid, test
  std::array<std::vector<Dialog>, 3> target;
  EmbeddingTable source_embeddings;
  EmbeddingTable target_embeddings;
  std::optional<OntologyMapping> mapping;
  std::optional<BilingualDictionary> dictionary;
  std::optional<ParallelCorpus> parallel;
};

// Loads every configured file. The target ontology defaults to the source
// ontology mapped through the mapping.
Resources load_resources(const RunConfig& config);
Resources resources_from_task(const SynthTask& task, const EmbeddingTable& target_embeddings);

enum class System { OntologyMatch, WordByWord, NoTransfer, XlnbtC, XlnbtD, Supervised };

std::string system_name(System system);
System parse_system(const std::string& name);
const std::vector<System>& all_systems();
bool needs_teacher(System system);

struct SystemRun {
  DatasetReport test;            // on the target test split
  std::optional<NbtModel> model;
  std::optional<EmbeddingTable> table;  // lookup table of a transferred student
  Curve curve;
};

// Trains a tracker for one language. Uses the config's train settings with
// `seed` for initialization and shuffling.
TrainResult train_tracker(const RunConfig& config, const std::string& language,
                          const Ontology& ontology, const EmbeddingTable& table,
                          const std::vector<Dialog>& train, const std::vector<Dialog>& valid,
                          std::uint64_t seed);

TransferResult run_transfer(const NbtModel& teacher, const Resources& resources,
                            const RunConfig& config, TransferMode mode, std::uint64_t seed);

// Runs one system end to end and evaluates it on the target test split.
// Systems that need a teacher train one when `teacher` is null.
SystemRun run_system(System system, const Resources& resources, const RunConfig& config,
                     std::uint64_t seed, const NbtModel* teacher = nullptr);

// Toy run config written next to generated data: every path plus the
// hyperparameters used for the toy acceptance runs.
RunConfig toy_run_config(const SynthConfig& synth);

}  // namespace xlnbt
