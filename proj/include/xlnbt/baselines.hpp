#pragma once

#include <map>
#include <string>
#include <vector>

#include "xlnbt/dialog.hpp"
#include "xlnbt/embeddings.hpp"
#include "xlnbt/evaluation.hpp"
#include "xlnbt/lexicon.hpp"
#include "xlnbt/nbt.hpp"

namespace xlnbt {

struct OntologyMatchOptions {
  // Requestable slot -> extra surface forms that also trigger the request.
  std::map<std::string, std::vector<std::string>> request_synonyms;
};

// Exact string matching. Overlapping value matches are resolved longest
// first, then by ontology order; a detected value overwrites its slot and
// undetected slots persist. Requests are per turn.
std::vector<BeliefState> ontology_match_track(const Dialog& dialog, const Ontology& ontology,
                                              const OntologyMatchOptions& options = {});
DatasetReport ontology_match_eval(const std::vector<Dialog>& dialogs, const Ontology& ontology,
                                  const OntologyMatchOptions& options = {});

// Replaces every token with a dictionary entry by the candidate with the
// largest dot product with its context vector; other tokens are kept.
Utterance translate_word_by_word(const Utterance& utterance, const BilingualDictionary& dictionary,
                                 const EmbeddingTable& context_table,
                                 const EmbeddingTable& candidate_table);

// Translates utterances and system text word by word and maps acts and gold
// states through the ontology mapping.
std::vector<Dialog> word_by_word_translate(const std::vector<Dialog>& dialogs,
                                           const BilingualDictionary& dictionary,
                                           const EmbeddingTable& context_table,
                                           const EmbeddingTable& candidate_table,
                                           const OntologyMapping& mapping,
                                           const std::string& from, const std::string& to);

// The source tracker applied unchanged to target text, target embeddings and
// target ontology terms.
DatasetReport no_transfer_eval(const NbtModel& teacher, const std::vector<Dialog>& dialogs,
                               const Ontology& target_ontology, const EmbeddingTable& target_table);

}  // namespace xlnbt
