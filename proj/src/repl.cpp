#include "xlnbt/repl.hpp"

#include <istream>
#include <ostream>

#include "xlnbt/error.hpp"

namespace xlnbt {

NbtSession::NbtSession(const Tracker& tracker) : tracker_(&tracker), previous_(tracker.prior()) {}

BeliefState NbtSession::step(const SystemActs& acts, const Utterance& utterance) {
  const ScoreTable scores = tracker_->score(acts, utterance, previous_);
  BeliefState state = tracker_->predict(scores);
  previous_ = tracker_->carry(scores, state);
  return state;
}

void NbtSession::reset() { previous_ = tracker_->prior(); }

OntologyMatchSession::OntologyMatchSession(const Ontology& ontology, OntologyMatchOptions options)
    : ontology_(&ontology), options_(std::move(options)) {}

BeliefState OntologyMatchSession::step(const SystemActs& acts, const Utterance& utterance) {
  DialogTurn turn;
  turn.system_acts = acts;
  turn.utterance = utterance;
  turn.transcript = utterance.text();
  history_.turns.push_back(std::move(turn));
  return ontology_match_track(history_, *ontology_, options_).back();
}

void OntologyMatchSession::reset() { history_.turns.clear(); }

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

SystemActs parse_act_annotation(const std::string& text, const Ontology& ontology) {
  SystemActs acts;
  const std::string body = trim(text);
  if (body.empty() || body == "none") return acts;
  std::size_t start = 0;
  while (start <= body.size()) {
    const auto end = std::min(body.find(';', start), body.size());
    const std::string item = trim(body.substr(start, end - start));
    start = end + 1;
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw FormatError("act item '" + item + "' lacks '='");
    const std::string kind = trim(item.substr(0, eq));
    const std::string rest = trim(item.substr(eq + 1));
    if (kind == "request") {
      if (acts.request) throw FormatError("two request acts");
      acts.request = rest;
    } else if (kind == "confirm") {
      const auto eq2 = rest.find('=');
      if (eq2 == std::string::npos) throw FormatError("confirm needs slot=value");
      if (acts.confirm_slot) throw FormatError("two confirm acts");
      acts.confirm_slot = trim(rest.substr(0, eq2));
      acts.confirm_value = trim(rest.substr(eq2 + 1));
    } else {
      throw FormatError("unknown act '" + kind + "' (expected request or confirm)");
    }
  }
  try {
    validate_acts(acts, ontology);
  } catch (const Error& e) {
    throw FormatError(e.what());
  }
  return acts;
}

nlohmann::ordered_json state_to_json(const BeliefState& state) {
  nlohmann::ordered_json j;
  j["goals"] = nlohmann::ordered_json::object();
  for (const auto& [slot, value] : state.goals) j["goals"][slot] = value;
  j["requests"] = nlohmann::ordered_json::array();
  for (const auto& r : state.requests) j["requests"].push_back(r);
  return j;
}

void run_repl(std::istream& in, std::ostream& out, std::ostream& err, DialogSession& session,
              const Ontology& ontology) {
  SystemActs pending;
  bool skip_turn = false;
  for (std::string raw; std::getline(in, raw);) {
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line == ":quit") return;
    if (line == ":reset") {
      session.reset();
      pending = {};
      skip_turn = false;
      continue;
    }
    if (line.rfind("act:", 0) == 0) {
      try {
        pending = parse_act_annotation(line.substr(4), ontology);
        skip_turn = false;
      } catch (const Error& e) {
        err << "malformed act annotation: " << e.what() << "; turn skipped\n";
        pending = {};
        skip_turn = true;
      }
      continue;
    }
    if (skip_turn) {
      skip_turn = false;
      continue;
    }
    try {
      const BeliefState state = session.step(pending, tokenize(line));
      out << state_to_json(state).dump() << '\n';
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
    }
    pending = {};
    out.flush();
  }
}

}  // namespace xlnbt
