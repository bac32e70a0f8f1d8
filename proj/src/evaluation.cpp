#include "xlnbt/evaluation.hpp"

#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "xlnbt/error.hpp"

namespace xlnbt {

using nlohmann::ordered_json;

Rollout rollout_dialog(const Tracker& tracker, const Dialog& dialog) {
  Rollout out;
  ScoreTable previous = tracker.prior();
  for (const auto& turn : dialog.turns) {
    ScoreTable scores = tracker.score(turn.system_acts, turn.utterance, previous);
    out.states.push_back(tracker.predict(scores));
    previous = tracker.carry(scores, out.states.back());
    out.scores.push_back(std::move(scores));
  }
  return out;
}

std::vector<BeliefState> track_dialog(const Tracker& tracker, const Dialog& dialog) {
  return rollout_dialog(tracker, dialog).states;
}

Metrics compute_metrics(const std::vector<BeliefState>& predicted,
                        const std::vector<BeliefState>& gold) {
  if (predicted.size() != gold.size()) {
    throw Error("compute_metrics: " + std::to_string(predicted.size()) + " predicted turns vs " +
                std::to_string(gold.size()) + " gold turns");
  }
  Metrics m;
  m.turns = gold.size();
  if (gold.empty()) return m;
  std::size_t goal_hits = 0;
  std::size_t request_hits = 0;
  for (std::size_t t = 0; t < gold.size(); ++t) {
    if (predicted[t].goals == gold[t].goals) ++goal_hits;
    if (predicted[t].requests == gold[t].requests) ++request_hits;
  }
  m.goal = static_cast<double>(goal_hits) / static_cast<double>(gold.size());
  m.request = static_cast<double>(request_hits) / static_cast<double>(gold.size());
  return m;
}

double request_micro_accuracy(const std::vector<BeliefState>& predicted,
                              const std::vector<BeliefState>& gold,
                              const std::vector<std::string>& requestable) {
  if (predicted.size() != gold.size()) throw Error("request_micro_accuracy: length mismatch");
  if (gold.empty() || requestable.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t t = 0; t < gold.size(); ++t) {
    for (const auto& r : requestable) {
      if (predicted[t].requests.contains(r) == gold[t].requests.contains(r)) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(gold.size() * requestable.size());
}

ErrorCounts& ErrorCounts::operator+=(const ErrorCounts& other) {
  modify += other.modify;
  maintain += other.maintain;
  history += other.history;
  return *this;
}

ErrorCounts classify_errors(const std::vector<BeliefState>& predicted,
                            const std::vector<BeliefState>& gold) {
  if (predicted.size() != gold.size()) throw Error("classify_errors: length mismatch");
  std::set<std::string> slots;
  for (const auto& states : {&predicted, &gold}) {
    for (const auto& s : *states) {
      for (const auto& [slot, value] : s.goals) slots.insert(slot);
    }
  }
  ErrorCounts counts;
  const BeliefState empty;
  for (std::size_t t = 0; t < gold.size(); ++t) {
    const BeliefState& gold_prev = t == 0 ? empty : gold[t - 1];
    for (const auto& slot : slots) {
      const auto g = gold[t].goal(slot);
      if (predicted[t].goal(slot) == g) continue;
      if (g != gold_prev.goal(slot)) {
        ++counts.modify;
      } else if (t > 0 && predicted[t - 1].goal(slot) != gold[t - 1].goal(slot)) {
        ++counts.history;
      } else {
        ++counts.maintain;
      }
    }
  }
  return counts;
}

DatasetReport score_predictions(const std::vector<std::vector<BeliefState>>& predictions,
                                const std::vector<Dialog>& dialogs) {
  if (predictions.size() != dialogs.size()) throw Error("score_predictions: dialog count mismatch");
  DatasetReport report;
  std::vector<BeliefState> all_pred;
  std::vector<BeliefState> all_gold;
  for (std::size_t d = 0; d < dialogs.size(); ++d) {
    std::vector<BeliefState> gold;
    for (const auto& turn : dialogs[d].turns) gold.push_back(turn.gold);
    report.errors += classify_errors(predictions[d], gold);
    all_pred.insert(all_pred.end(), predictions[d].begin(), predictions[d].end());
    all_gold.insert(all_gold.end(), gold.begin(), gold.end());
  }
  report.metrics = compute_metrics(all_pred, all_gold);
  report.predictions = predictions;
  return report;
}

DatasetReport evaluate_dialogs(const Tracker& tracker, const std::vector<Dialog>& dialogs) {
  std::vector<std::vector<BeliefState>> predictions;
  predictions.reserve(dialogs.size());
  for (const auto& dialog : dialogs) predictions.push_back(track_dialog(tracker, dialog));
  return score_predictions(predictions, dialogs);
}

void Curve::add(std::vector<double> row) {
  if (row.size() != columns.size()) throw ShapeError("curve: row width does not match columns");
  rows.push_back(std::move(row));
}

std::string curve_csv(const Curve& curve) {
  std::string out;
  for (std::size_t c = 0; c < curve.columns.size(); ++c) out += (c ? "," : "") + curve.columns[c];
  out += '\n';
  char buf[64];
  for (const auto& row : curve.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == 0) {
        std::snprintf(buf, sizeof(buf), "%.0f", row[c]);
      } else {
        std::snprintf(buf, sizeof(buf), ",%.10g", row[c]);
      }
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void export_curve(const std::filesystem::path& path, const Curve& curve) {
  if (curve.rows.empty()) throw Error("export_curve: empty history");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << curve_csv(curve);
  if (!out) throw IoError("write failed for " + path.string());
}

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double MetricsReport::goal_mean() const { return mean_of(goal_per_seed); }
double MetricsReport::request_mean() const { return mean_of(request_per_seed); }

ordered_json MetricsReport::to_json() const {
  ordered_json j;
  j["system"] = system;
  j["language"] = language;
  j["seed_count"] = goal_per_seed.size();
  j["goal_mean"] = goal_mean();
  j["request_mean"] = request_mean();
  j["goal_per_seed"] = goal_per_seed;
  j["request_per_seed"] = request_per_seed;
  j["error_counts"] = {{"modify_failure", errors.modify},
                       {"maintain_failure", errors.maintain},
                       {"history_failure", errors.history}};
  return j;
}

void validate_metrics_report(const ordered_json& j) {
  auto fail = [](const std::string& msg) { throw FormatError("metrics report: " + msg); };
  if (!j.is_object()) fail("not an object");
  for (const char* key : {"system", "language"}) {
    if (!j.contains(key) || !j.at(key).is_string()) fail(std::string("missing string '") + key + "'");
  }
  if (!j.contains("seed_count") || !j.at("seed_count").is_number_unsigned()) {
    fail("missing unsigned 'seed_count'");
  }
  const auto seeds = j.at("seed_count").get<std::size_t>();
  for (const char* key : {"goal_mean", "request_mean"}) {
    if (!j.contains(key) || !j.at(key).is_number()) fail(std::string("missing number '") + key + "'");
    const double v = j.at(key).get<double>();
    if (!(v >= 0.0 && v <= 1.0)) fail(std::string(key) + " outside [0, 1]");
  }
  for (const char* key : {"goal_per_seed", "request_per_seed"}) {
    if (!j.contains(key) || !j.at(key).is_array()) fail(std::string("missing array '") + key + "'");
    if (j.at(key).size() != seeds) fail(std::string(key) + " length differs from seed_count");
    for (const auto& v : j.at(key)) {
      if (!v.is_number() || v.get<double>() < 0.0 || v.get<double>() > 1.0) {
        fail(std::string(key) + " holds a value outside [0, 1]");
      }
    }
  }
  if (!j.contains("error_counts") || !j.at("error_counts").is_object()) {
    fail("missing object 'error_counts'");
  }
  for (const char* key : {"modify_failure", "maintain_failure", "history_failure"}) {
    if (!j.at("error_counts").contains(key) || !j.at("error_counts").at(key).is_number_unsigned()) {
      fail(std::string("error_counts lacks '") + key + "'");
    }
  }
}

}  // namespace xlnbt
