#include "xlnbt/baselines.hpp"

#include <algorithm>
#include <tuple>

#include "xlnbt/error.hpp"
#include "xlnbt/transfer.hpp"

namespace xlnbt {

namespace {

bool contains_span(const std::vector<std::string>& tokens, const std::vector<std::string>& term,
                   std::size_t start) {
  if (term.empty() || start + term.size() > tokens.size()) return false;
  return std::equal(term.begin(), term.end(), tokens.begin() + static_cast<std::ptrdiff_t>(start));
}

bool mentions(const std::vector<std::string>& tokens, const std::vector<std::string>& term) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (contains_span(tokens, term, i)) return true;
  }
  return false;
}

struct Match {
  std::size_t start;
  std::size_t length;
  std::size_t slot;
  std::size_t value;
};

}  // namespace

std::vector<BeliefState> ontology_match_track(const Dialog& dialog, const Ontology& ontology,
                                              const OntologyMatchOptions& options) {
  std::vector<std::vector<std::vector<std::string>>> values;
  for (const auto& slot : ontology.informable) {
    std::vector<std::vector<std::string>> forms;
    for (const auto& v : slot.values) forms.push_back(tokenize(v).tokens);
    values.push_back(std::move(forms));
  }
  std::vector<std::vector<std::vector<std::string>>> requests;
  for (const auto& r : ontology.requestable) {
    std::vector<std::vector<std::string>> forms{tokenize(r).tokens};
    if (auto it = options.request_synonyms.find(r); it != options.request_synonyms.end()) {
      for (const auto& s : it->second) forms.push_back(tokenize(s).tokens);
    }
    requests.push_back(std::move(forms));
  }

  std::vector<BeliefState> out;
  BeliefState state;
  for (const auto& turn : dialog.turns) {
    const auto& tokens = turn.utterance.tokens;
    std::vector<Match> matches;
    for (std::size_t s = 0; s < values.size(); ++s) {
      for (std::size_t v = 0; v < values[s].size(); ++v) {
        for (std::size_t i = 0; i < tokens.size(); ++i) {
          if (contains_span(tokens, values[s][v], i)) matches.push_back({i, values[s][v].size(), s, v});
        }
      }
    }
    std::sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
      return std::tuple(b.length, a.slot, a.value, a.start) <
             std::tuple(a.length, b.slot, b.value, b.start);
    });
    std::vector<bool> used(tokens.size(), false);
    std::vector<bool> detected(values.size(), false);
    for (const auto& m : matches) {
      const auto first = used.begin() + static_cast<std::ptrdiff_t>(m.start);
      if (std::any_of(first, first + static_cast<std::ptrdiff_t>(m.length), [](bool b) { return b; })) {
        continue;
      }
      std::fill(first, first + static_cast<std::ptrdiff_t>(m.length), true);
      if (detected[m.slot]) continue;
      detected[m.slot] = true;
      state.goals[ontology.informable[m.slot].name] = ontology.informable[m.slot].values[m.value];
    }
    state.requests.clear();
    for (std::size_t r = 0; r < requests.size(); ++r) {
      for (const auto& form : requests[r]) {
        if (mentions(tokens, form)) {
          state.requests.insert(ontology.requestable[r]);
          break;
        }
      }
    }
    out.push_back(state);
  }
  return out;
}

DatasetReport ontology_match_eval(const std::vector<Dialog>& dialogs, const Ontology& ontology,
                                  const OntologyMatchOptions& options) {
  std::vector<std::vector<BeliefState>> predictions;
  for (const auto& d : dialogs) predictions.push_back(ontology_match_track(d, ontology, options));
  return score_predictions(predictions, dialogs);
}

Utterance translate_word_by_word(const Utterance& utterance, const BilingualDictionary& dictionary,
                                 const EmbeddingTable& context_table,
                                 const EmbeddingTable& candidate_table) {
  Utterance out = utterance;
  for (std::size_t i = 0; i < utterance.size(); ++i) {
    const auto* candidates = dictionary.candidates(utterance.tokens[i]);
    if (!candidates) continue;
    const auto p = candidate_probabilities(*candidates, context_vector(utterance, i, context_table),
                                           candidate_table);
    const auto best = std::max_element(p.begin(), p.end()) - p.begin();
    out.tokens[i] = (*candidates)[static_cast<std::size_t>(best)];
  }
  return out;
}

std::vector<Dialog> word_by_word_translate(const std::vector<Dialog>& dialogs,
                                           const BilingualDictionary& dictionary,
                                           const EmbeddingTable& context_table,
                                           const EmbeddingTable& candidate_table,
                                           const OntologyMapping& mapping,
                                           const std::string& from, const std::string& to) {
  std::vector<Dialog> out;
  out.reserve(dialogs.size());
  for (const auto& dialog : dialogs) {
    Dialog d{dialog.id, {}};
    for (const auto& turn : dialog.turns) {
      DialogTurn t;
      t.system_acts = mapping.map_acts(turn.system_acts, from, to);
      if (!turn.system_text.empty() &&
          turn.system_text.find_first_not_of(" \t") != std::string::npos) {
        t.system_text =
            translate_word_by_word(tokenize(turn.system_text), dictionary, context_table,
                                   candidate_table)
                .text();
      }
      t.utterance = translate_word_by_word(turn.utterance, dictionary, context_table, candidate_table);
      t.transcript = t.utterance.text();
      t.gold = mapping.map_state(turn.gold, from, to);
      d.turns.push_back(std::move(t));
    }
    out.push_back(std::move(d));
  }
  return out;
}

DatasetReport no_transfer_eval(const NbtModel& teacher, const std::vector<Dialog>& dialogs,
                               const Ontology& target_ontology, const EmbeddingTable& target_table) {
  const TermSpace terms(target_ontology, target_table);
  return evaluate_dialogs(Tracker(teacher, terms), dialogs);
}

}  // namespace xlnbt
