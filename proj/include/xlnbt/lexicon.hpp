#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xlnbt/dialog.hpp"
#include "xlnbt/text.hpp"

namespace xlnbt {

// Source word -> ordered, duplicate-free list of target candidates.
class BilingualDictionary {
 public:
  void add(const std::string& source, std::vector<std::string> candidates);
  const std::vector<std::string>* candidates(const std::string& source) const;
  bool contains(const std::string& source) const { return entries_.contains(source); }
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, std::vector<std::string>>& entries() const { return entries_; }

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

// "source<TAB>cand1|cand2|..." per line.
BilingualDictionary load_dictionary(const std::filesystem::path& path);
void save_dictionary(const std::filesystem::path& path, const BilingualDictionary& dictionary);

struct ParallelCorpus {
  std::vector<std::pair<Utterance, Utterance>> pairs;
  std::size_t filtered = 0;  // pairs dropped by the length window
};

struct ParallelLoadOptions {
  std::size_t min_tokens = 4;
  std::size_t max_tokens = 40;
};

// Line-aligned source/target files; a pair is kept when both sides tokenize
// to a length inside the window. Throws when the line counts differ.
ParallelCorpus load_parallel(const std::filesystem::path& source_path,
                             const std::filesystem::path& target_path,
                             const ParallelLoadOptions& options = {});

// Concept-level bijection between surface terms of different languages.
class OntologyMapping {
 public:
  // Throws if (language, term) is already bound to a different concept or
  // the concept already has a different term in that language.
  void add(const std::string& concept_id, const std::string& language, const std::string& term);

  std::optional<std::string> concept_of(const std::string& language,
                                        const std::string& term) const;
  std::optional<std::string> term_for(const std::string& concept_id,
                                      const std::string& language) const;
  // Throws Error naming the term when it has no realization in `to`.
  std::string translate(const std::string& term, const std::string& from,
                        const std::string& to) const;

  // Throws unless every slot, value and requestable term of `ontology` is
  // mapped from `language`.
  void check_covers(const Ontology& ontology, const std::string& language) const;

  // Image of a source ontology in the target language, keeping order.
  Ontology map_ontology(const Ontology& ontology, const std::string& from,
                        const std::string& to) const;
  BeliefState map_state(const BeliefState& state, const std::string& from,
                        const std::string& to) const;
  SystemActs map_acts(const SystemActs& acts, const std::string& from,
                      const std::string& to) const;

  const std::map<std::string, std::map<std::string, std::string>>& concepts() const {
    return concepts_;
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> concepts_;  // concept -> lang -> term
  std::map<std::pair<std::string, std::string>, std::string> reverse_;  // (lang, term) -> concept
};

// "concept_id<TAB>lang<TAB>surface term" per line.
OntologyMapping load_mapping(const std::filesystem::path& path);
void save_mapping(const std::filesystem::path& path, const OntologyMapping& mapping);

}  // namespace xlnbt
