#include "xlnbt/lexicon.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "xlnbt/error.hpp"

namespace xlnbt {

namespace {

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(s);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

void BilingualDictionary::add(const std::string& source, std::vector<std::string> candidates) {
  std::vector<std::string> unique;
  for (auto& c : candidates) {
    if (c.empty()) continue;
    if (std::find(unique.begin(), unique.end(), c) == unique.end()) unique.push_back(std::move(c));
  }
  if (unique.empty()) throw FormatError("dictionary entry '" + source + "' has no candidates");
  auto& slot = entries_[source];
  for (auto& c : unique) {
    if (std::find(slot.begin(), slot.end(), c) == slot.end()) slot.push_back(std::move(c));
  }
}

const std::vector<std::string>* BilingualDictionary::candidates(const std::string& source) const {
  auto it = entries_.find(source);
  return it == entries_.end() ? nullptr : &it->second;
}

BilingualDictionary load_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dictionary " + path.string());
  BilingualDictionary dict;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'source<TAB>cand1|cand2|...'");
    }
    try {
      dict.add(line.substr(0, tab), split(line.substr(tab + 1), '|'));
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return dict;
}

void save_dictionary(const std::filesystem::path& path, const BilingualDictionary& dictionary) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& [source, candidates] : dictionary.entries()) {
    out << source << '\t';
    for (std::size_t i = 0; i < candidates.size(); ++i) out << (i ? "|" : "") << candidates[i];
    out << '\n';
  }
}

ParallelCorpus load_parallel(const std::filesystem::path& source_path,
                             const std::filesystem::path& target_path,
                             const ParallelLoadOptions& options) {
  std::ifstream src(source_path);
  if (!src) throw IoError("cannot open " + source_path.string());
  std::ifstream tgt(target_path);
  if (!tgt) throw IoError("cannot open " + target_path.string());

  std::vector<std::string> src_lines;
  std::vector<std::string> tgt_lines;
  for (std::string line; std::getline(src, line);) src_lines.push_back(strip_cr(line));
  for (std::string line; std::getline(tgt, line);) tgt_lines.push_back(strip_cr(line));
  if (src_lines.size() != tgt_lines.size()) {
    throw FormatError("parallel corpus line counts differ: " + std::to_string(src_lines.size()) +
                      " vs " + std::to_string(tgt_lines.size()));
  }

  ParallelCorpus corpus;
  auto in_window = [&](const std::string& text) -> std::optional<Utterance> {
    if (text.find_first_not_of(" \t") == std::string::npos) return std::nullopt;
    Utterance u = tokenize(text);
    if (u.size() < options.min_tokens || u.size() > options.max_tokens) return std::nullopt;
    return u;
  };
  for (std::size_t i = 0; i < src_lines.size(); ++i) {
    auto e = in_window(src_lines[i]);
    auto f = in_window(tgt_lines[i]);
    if (!e || !f) {
      ++corpus.filtered;
      continue;
    }
    corpus.pairs.emplace_back(std::move(*e), std::move(*f));
  }
  return corpus;
}

void OntologyMapping::add(const std::string& concept_id, const std::string& language,
                          const std::string& term) {
  const auto key = std::make_pair(language, term);
  if (auto it = reverse_.find(key); it != reverse_.end() && it->second != concept_id) {
    throw FormatError("mapping: term '" + term + "' (" + language + ") bound to both " +
                      it->second + " and " + concept_id);
  }
  auto& terms = concepts_[concept_id];
  if (auto it = terms.find(language); it != terms.end() && it->second != term) {
    throw FormatError("mapping: concept " + concept_id + " has two " + language + " terms: '" +
                      it->second + "' and '" + term + "'");
  }
  terms[language] = term;
  reverse_[key] = concept_id;
}

std::optional<std::string> OntologyMapping::concept_of(const std::string& language,
                                                       const std::string& term) const {
  auto it = reverse_.find({language, term});
  if (it == reverse_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> OntologyMapping::term_for(const std::string& concept_id,
                                                     const std::string& language) const {
  auto it = concepts_.find(concept_id);
  if (it == concepts_.end()) return std::nullopt;
  auto jt = it->second.find(language);
  if (jt == it->second.end()) return std::nullopt;
  return jt->second;
}

std::string OntologyMapping::translate(const std::string& term, const std::string& from,
                                       const std::string& to) const {
  const auto concept_id = concept_of(from, term);
  if (!concept_id) throw Error("unmapped term '" + term + "' (" + from + ")");
  const auto out = term_for(*concept_id, to);
  if (!out) throw Error("term '" + term + "' has no " + to + " realization");
  return *out;
}

void OntologyMapping::check_covers(const Ontology& ontology, const std::string& language) const {
  auto need = [&](const std::string& term) {
    if (!concept_of(language, term)) {
      throw Error("unmapped ontology term '" + term + "' (" + language + ")");
    }
  };
  for (const auto& slot : ontology.informable) {
    need(slot.name);
    for (const auto& v : slot.values) need(v);
  }
  for (const auto& r : ontology.requestable) need(r);
}

Ontology OntologyMapping::map_ontology(const Ontology& ontology, const std::string& from,
                                       const std::string& to) const {
  Ontology out;
  for (const auto& slot : ontology.informable) {
    InformableSlot s{translate(slot.name, from, to), {}};
    for (const auto& v : slot.values) s.values.push_back(translate(v, from, to));
    out.informable.push_back(std::move(s));
  }
  for (const auto& r : ontology.requestable) out.requestable.push_back(translate(r, from, to));
  out.validate();
  return out;
}

BeliefState OntologyMapping::map_state(const BeliefState& state, const std::string& from,
                                       const std::string& to) const {
  BeliefState out;
  for (const auto& [slot, value] : state.goals) {
    out.goals[translate(slot, from, to)] = translate(value, from, to);
  }
  for (const auto& r : state.requests) out.requests.insert(translate(r, from, to));
  return out;
}

SystemActs OntologyMapping::map_acts(const SystemActs& acts, const std::string& from,
                                     const std::string& to) const {
  SystemActs out;
  if (acts.request) out.request = translate(*acts.request, from, to);
  if (acts.confirm_slot) out.confirm_slot = translate(*acts.confirm_slot, from, to);
  if (acts.confirm_value) out.confirm_value = translate(*acts.confirm_value, from, to);
  return out;
}

OntologyMapping load_mapping(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mapping " + path.string());
  OntologyMapping mapping;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'concept<TAB>lang<TAB>term'");
    }
    try {
      mapping.add(fields[0], fields[1], fields[2]);
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return mapping;
}

void save_mapping(const std::filesystem::path& path, const OntologyMapping& mapping) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& [concept_id, terms] : mapping.concepts()) {
    for (const auto& [language, term] : terms) out << concept_id << '\t' << language << '\t' << term << '\n';
  }
}

}  // namespace xlnbt
