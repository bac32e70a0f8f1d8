#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "xlnbt/dialog.hpp"
#include "xlnbt/embeddings.hpp"
#include "xlnbt/lexicon.hpp"

namespace xlnbt {

enum class EmbeddingRegime {
  Bilingual,    // target vector = source vector of its translation plus noise
  Monolingual,  // independent random target vectors
};

struct SynthConfig {
  std::size_t vocab_size = 50;  // per language
  std::size_t informable_slots = 2;
  std::size_t values_per_slot = 5;
  std::size_t requestable_slots = 3;
  std::size_t train_dialogs = 200;
  std::size_t valid_dialogs = 50;
  std::size_t test_dialogs = 100;
  std::size_t turns = 3;
  std::size_t parallel_pairs = 500;
  std::size_t ambiguity = 2;  // dictionary candidates per source word
  std::size_t dim = 16;
  double target_noise = 0.4;  // norm scale of the bilingual perturbation
  double filler_norm = 0.1;   // vector norm of non-ontology words
  double restate_prob = 0.0;  // chance a held goal is mentioned again in a later turn
  EmbeddingRegime regime = EmbeddingRegime::Bilingual;
  std::uint64_t seed = 7;
  std::string source_language = "src";
  std::string target_language = "tgt";

  // Throws when a count is zero, the ambiguity exceeds the vocabulary, or
  // the vocabulary cannot hold the ontology plus filler words.
  void validate() const;
  nlohmann::ordered_json to_json() const;
  // Missing keys keep their defaults; unknown keys are rejected.
  static SynthConfig from_json(const nlohmann::ordered_json& json);
};

struct SynthTask {
  SynthConfig config;
  Ontology source_ontology;
  Ontology target_ontology;
  std::vector<Dialog> source[3];  // train, valid, test
  std::vector<Dialog> target[3];
  OntologyMapping mapping;
  BilingualDictionary dictionary;
  std::vector<std::pair<std::string, std::string>> parallel;
  EmbeddingTable source_embeddings;
  EmbeddingTable target_bilingual;
  EmbeddingTable target_monolingual;
  std::map<std::string, std::string> translation;  // source word -> target word

  const EmbeddingTable& target_embeddings() const {
    return config.regime == EmbeddingRegime::Bilingual ? target_bilingual : target_monolingual;
  }
};

inline constexpr const char* kSplitNames[3] = {"train", "valid", "test"};

SynthTask generate_toy_task(const SynthConfig& config);

// Writes every corpus file, manifest.json (config and file list) and
// run.json (a pipeline config pointing at the files, plus `run_settings`
// entries for keys it does not set itself). Returns the manifest.
nlohmann::ordered_json write_toy_task(const SynthTask& task, const std::filesystem::path& dir,
                                      const nlohmann::ordered_json& run_settings = {});

}  // namespace xlnbt
