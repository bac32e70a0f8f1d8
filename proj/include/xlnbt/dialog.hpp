#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "xlnbt/text.hpp"

namespace xlnbt {

struct InformableSlot {
  std::string name;
  std::vector<std::string> values;

  friend bool operator==(const InformableSlot&, const InformableSlot&) = default;
};

// Slots keep file order; argmax ties and request ordering follow it.
struct Ontology {
  std::vector<InformableSlot> informable;
  std::vector<std::string> requestable;

  // Throws on empty slot lists, empty value lists, or duplicate names/values.
  void validate() const;
  std::optional<std::size_t> slot_index(const std::string& slot) const;
  std::optional<std::size_t> value_index(std::size_t slot, const std::string& value) const;
  std::optional<std::size_t> request_index(const std::string& slot) const;
  bool is_slot(const std::string& name) const;  // informable or requestable
  std::size_t pair_count() const;
  // FNV-1a over the canonical JSON form; identifies the ontology in checkpoints.
  std::string fingerprint() const;

  friend bool operator==(const Ontology&, const Ontology&) = default;
};

struct SystemActs {
  std::optional<std::string> request;        // t_q
  std::optional<std::string> confirm_slot;   // t_s
  std::optional<std::string> confirm_value;  // t_v

  bool empty() const { return !request && !confirm_slot && !confirm_value; }
  friend bool operator==(const SystemActs&, const SystemActs&) = default;
  friend auto operator<=>(const SystemActs&, const SystemActs&) = default;
};

struct BeliefState {
  std::map<std::string, std::string> goals;  // assigned slots only
  std::set<std::string> requests;

  std::optional<std::string> goal(const std::string& slot) const;
  friend bool operator==(const BeliefState&, const BeliefState&) = default;
};

struct DialogTurn {
  SystemActs system_acts;
  std::string system_text;
  std::string transcript;
  Utterance utterance;
  BeliefState gold;  // cumulative goals plus this turn's requests

  friend bool operator==(const DialogTurn&, const DialogTurn&) = default;
};

struct Dialog {
  std::int64_t id = 0;
  std::vector<DialogTurn> turns;

  friend bool operator==(const Dialog&, const Dialog&) = default;
};

// Slot -> new value for goals that differ from the previous turn. A value of
// nullopt means the slot was cleared.
std::map<std::string, std::optional<std::string>> goal_changes(const BeliefState& previous,
                                                               const BeliefState& current);

Ontology parse_ontology(const nlohmann::ordered_json& json);
nlohmann::ordered_json ontology_to_json(const Ontology& ontology);
Ontology load_ontology(const std::filesystem::path& path);
void save_ontology(const std::filesystem::path& path, const Ontology& ontology);

struct DialogLoadOptions {
  std::size_t max_tokens = kMaxUtteranceTokens;
  LengthPolicy long_utterances = LengthPolicy::Truncate;
};

// Validates acts, goals and requests against the ontology; errors name the
// dialog and turn index.
std::vector<Dialog> parse_dialogs(const nlohmann::ordered_json& json, const Ontology& ontology,
                                  const DialogLoadOptions& options = {});
nlohmann::ordered_json dialogs_to_json(const std::vector<Dialog>& dialogs);
std::vector<Dialog> load_dialogs(const std::filesystem::path& path, const Ontology& ontology,
                                 const DialogLoadOptions& options = {});
void save_dialogs(const std::filesystem::path& path, const std::vector<Dialog>& dialogs);

void validate_acts(const SystemActs& acts, const Ontology& ontology);
void validate_state(const BeliefState& state, const Ontology& ontology);

}  // namespace xlnbt
