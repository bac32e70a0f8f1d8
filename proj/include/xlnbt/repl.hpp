#pragma once

#include <iosfwd>
#include <memory>
#include <string>

#include <json.hpp>

#include "xlnbt/baselines.hpp"
#include "xlnbt/dialog.hpp"
#include "xlnbt/nbt.hpp"

namespace xlnbt {

// Turn-by-turn tracking with internal history.
class DialogSession {
 public:
  virtual ~DialogSession() = default;
  virtual BeliefState step(const SystemActs& acts, const Utterance& utterance) = 0;
  virtual void reset() = 0;
};

class NbtSession : public DialogSession {
 public:
  explicit NbtSession(const Tracker& tracker);
  BeliefState step(const SystemActs& acts, const Utterance& utterance) override;
  void reset() override;

 private:
  const Tracker* tracker_;
  ScoreTable previous_;
};

class OntologyMatchSession : public DialogSession {
 public:
  OntologyMatchSession(const Ontology& ontology, OntologyMatchOptions options = {});
  BeliefState step(const SystemActs& acts, const Utterance& utterance) override;
  void reset() override;

 private:
  const Ontology* ontology_;
  OntologyMatchOptions options_;
  Dialog history_;
};

// "none", or ';'-separated "request=<slot>" and "confirm=<slot>=<value>"
// items. Throws FormatError on malformed input or terms outside the ontology.
SystemActs parse_act_annotation(const std::string& text, const Ontology& ontology);

nlohmann::ordered_json state_to_json(const BeliefState& state);

// Line protocol: "act: <annotation>" sets the system acts of the next turn;
// any other non-empty line is a user utterance and is tracked, printing the
// belief state as one JSON line. ":reset" clears the history, ":quit" ends.
// A malformed act line is reported on `err` and its turn is skipped.
void run_repl(std::istream& in, std::ostream& out, std::ostream& err, DialogSession& session,
              const Ontology& ontology);

}  // namespace xlnbt
