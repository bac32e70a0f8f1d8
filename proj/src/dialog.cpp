#include "xlnbt/dialog.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "xlnbt/error.hpp"

namespace xlnbt {

using nlohmann::ordered_json;

void Ontology::validate() const {
  if (informable.empty()) throw FormatError("ontology: no informable slots");
  std::set<std::string> names;
  for (const auto& slot : informable) {
    if (!names.insert(slot.name).second) throw FormatError("ontology: duplicate slot " + slot.name);
    if (slot.values.empty()) throw FormatError("ontology: slot " + slot.name + " has no values");
    std::set<std::string> seen;
    for (const auto& v : slot.values) {
      if (!seen.insert(v).second) {
        throw FormatError("ontology: duplicate value '" + v + "' in slot " + slot.name);
      }
    }
  }
  std::set<std::string> requests;
  for (const auto& r : requestable) {
    if (!requests.insert(r).second) throw FormatError("ontology: duplicate requestable slot " + r);
  }
}

std::optional<std::size_t> Ontology::slot_index(const std::string& slot) const {
  for (std::size_t i = 0; i < informable.size(); ++i) {
    if (informable[i].name == slot) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> Ontology::value_index(std::size_t slot, const std::string& value) const {
  const auto& values = informable.at(slot).values;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == value) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> Ontology::request_index(const std::string& slot) const {
  for (std::size_t i = 0; i < requestable.size(); ++i) {
    if (requestable[i] == slot) return i;
  }
  return std::nullopt;
}

bool Ontology::is_slot(const std::string& name) const {
  return slot_index(name).has_value() || request_index(name).has_value();
}

std::size_t Ontology::pair_count() const {
  std::size_t n = 0;
  for (const auto& slot : informable) n += slot.values.size();
  return n;
}

std::string Ontology::fingerprint() const {
  const std::string canonical = ontology_to_json(*this).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

std::optional<std::string> BeliefState::goal(const std::string& slot) const {
  auto it = goals.find(slot);
  if (it == goals.end()) return std::nullopt;
  return it->second;
}

std::map<std::string, std::optional<std::string>> goal_changes(const BeliefState& previous,
                                                               const BeliefState& current) {
  std::map<std::string, std::optional<std::string>> out;
  for (const auto& [slot, value] : current.goals) {
    auto it = previous.goals.find(slot);
    if (it == previous.goals.end() || it->second != value) out[slot] = value;
  }
  for (const auto& [slot, value] : previous.goals) {
    if (!current.goals.contains(slot)) out[slot] = std::nullopt;
  }
  return out;
}

Ontology parse_ontology(const ordered_json& j) {
  if (!j.is_object() || !j.contains("informable") || !j.contains("requestable")) {
    throw FormatError("ontology: expected an object with 'informable' and 'requestable'");
  }
  Ontology o;
  for (const auto& [slot, values] : j.at("informable").items()) {
    InformableSlot s{slot, {}};
    for (const auto& v : values) s.values.push_back(v.get<std::string>());
    o.informable.push_back(std::move(s));
  }
  for (const auto& r : j.at("requestable")) o.requestable.push_back(r.get<std::string>());
  o.validate();
  return o;
}

ordered_json ontology_to_json(const Ontology& ontology) {
  ordered_json j;
  j["informable"] = ordered_json::object();
  for (const auto& slot : ontology.informable) j["informable"][slot.name] = slot.values;
  j["requestable"] = ontology.requestable;
  return j;
}

namespace {

ordered_json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(1) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

std::optional<std::string> optional_string(const ordered_json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

const ordered_json& required(const ordered_json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw FormatError(where + ": missing required field '" + key + "'");
  }
  return j.at(key);
}

}  // namespace

void validate_acts(const SystemActs& acts, const Ontology& ontology) {
  if (acts.confirm_slot.has_value() != acts.confirm_value.has_value()) {
    throw FormatError("system acts: confirm_slot and confirm_value must be given together");
  }
  if (acts.request && !ontology.is_slot(*acts.request)) {
    throw FormatError("system acts: unknown request slot '" + *acts.request + "'");
  }
  if (acts.confirm_slot) {
    const auto slot = ontology.slot_index(*acts.confirm_slot);
    if (!slot) throw FormatError("system acts: unknown confirm slot '" + *acts.confirm_slot + "'");
    if (!ontology.value_index(*slot, *acts.confirm_value)) {
      throw FormatError("system acts: value '" + *acts.confirm_value + "' not in slot " +
                        *acts.confirm_slot);
    }
  }
}

void validate_state(const BeliefState& state, const Ontology& ontology) {
  for (const auto& [slot, value] : state.goals) {
    const auto s = ontology.slot_index(slot);
    if (!s) throw FormatError("unknown informable slot '" + slot + "'");
    if (!ontology.value_index(*s, value)) {
      throw FormatError("value '" + value + "' not in ontology slot " + slot);
    }
  }
  for (const auto& r : state.requests) {
    if (!ontology.request_index(r)) throw FormatError("unknown requestable slot '" + r + "'");
  }
}

std::vector<Dialog> parse_dialogs(const ordered_json& j, const Ontology& ontology,
                                  const DialogLoadOptions& options) {
  if (!j.is_array()) throw FormatError("dialog file: top level must be a list of dialogs");
  std::vector<Dialog> dialogs;
  dialogs.reserve(j.size());
  for (std::size_t d = 0; d < j.size(); ++d) {
    const auto& dj = j[d];
    const std::string where = "dialog " + std::to_string(d);
    Dialog dialog;
    dialog.id = required(dj, "dialogue_idx", where).get<std::int64_t>();
    const auto& turns = required(dj, "turns", where);
    for (std::size_t t = 0; t < turns.size(); ++t) {
      const auto& tj = turns[t];
      const std::string turn_where = where + " (idx " + std::to_string(dialog.id) + "), turn " +
                                     std::to_string(t);
      try {
        DialogTurn turn;
        const auto& acts = required(tj, "system_acts", turn_where);
        turn.system_acts.request = optional_string(acts, "request");
        turn.system_acts.confirm_slot = optional_string(acts, "confirm_slot");
        turn.system_acts.confirm_value = optional_string(acts, "confirm_value");
        turn.system_text = required(tj, "system_text", turn_where).get<std::string>();
        turn.transcript = required(tj, "transcript", turn_where).get<std::string>();
        auto utterance =
            tokenize_bounded(turn.transcript, options.max_tokens, options.long_utterances);
        if (!utterance) throw FormatError("utterance exceeds the token limit");
        turn.utterance = std::move(*utterance);
        for (const auto& [slot, value] : required(tj, "belief_state", turn_where).items()) {
          turn.gold.goals[slot] = value.get<std::string>();
        }
        for (const auto& r : required(tj, "requests", turn_where)) {
          turn.gold.requests.insert(r.get<std::string>());
        }
        validate_acts(turn.system_acts, ontology);
        validate_state(turn.gold, ontology);
        dialog.turns.push_back(std::move(turn));
      } catch (const FormatError& e) {
        throw FormatError(turn_where + ": " + e.what());
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(turn_where + ": " + e.what());
      } catch (const Error& e) {
        throw FormatError(turn_where + ": " + e.what());
      }
    }
    dialogs.push_back(std::move(dialog));
  }
  return dialogs;
}

ordered_json dialogs_to_json(const std::vector<Dialog>& dialogs) {
  ordered_json out = ordered_json::array();
  auto nullable = [](const std::optional<std::string>& s) -> ordered_json {
    return s ? ordered_json(*s) : ordered_json(nullptr);
  };
  for (const auto& dialog : dialogs) {
    ordered_json dj;
    dj["dialogue_idx"] = dialog.id;
    dj["turns"] = ordered_json::array();
    for (const auto& turn : dialog.turns) {
      ordered_json tj;
      tj["system_acts"] = {{"request", nullable(turn.system_acts.request)},
                           {"confirm_slot", nullable(turn.system_acts.confirm_slot)},
                           {"confirm_value", nullable(turn.system_acts.confirm_value)}};
      tj["system_text"] = turn.system_text;
      tj["transcript"] = turn.transcript;
      tj["belief_state"] = ordered_json::object();
      for (const auto& [slot, value] : turn.gold.goals) tj["belief_state"][slot] = value;
      tj["requests"] = ordered_json::array();
      for (const auto& r : turn.gold.requests) tj["requests"].push_back(r);
      dj["turns"].push_back(std::move(tj));
    }
    out.push_back(std::move(dj));
  }
  return out;
}

Ontology load_ontology(const std::filesystem::path& path) {
  try {
    return parse_ontology(read_json_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_ontology(const std::filesystem::path& path, const Ontology& ontology) {
  write_json_file(path, ontology_to_json(ontology));
}

std::vector<Dialog> load_dialogs(const std::filesystem::path& path, const Ontology& ontology,
                                 const DialogLoadOptions& options) {
  const ordered_json j = read_json_file(path);
  try {
    return parse_dialogs(j, ontology, options);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_dialogs(const std::filesystem::path& path, const std::vector<Dialog>& dialogs) {
  write_json_file(path, dialogs_to_json(dialogs));
}

}  // namespace xlnbt
