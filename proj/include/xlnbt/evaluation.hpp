#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "xlnbt/dialog.hpp"
#include "xlnbt/nbt.hpp"

namespace xlnbt {

struct Metrics {
  double goal = 0.0;
  double request = 0.0;
  std::size_t turns = 0;
};

struct Rollout {
  std::vector<ScoreTable> scores;
  std::vector<BeliefState> states;
};

// Turn 1 starts from the all-negative prior; later turns feed the previous
// turn's prediction back into the score recursion (see Feedback).
Rollout rollout_dialog(const Tracker& tracker, const Dialog& dialog);
std::vector<BeliefState> track_dialog(const Tracker& tracker, const Dialog& dialog);

// Goal: every informable slot matches (unassigned matches unassigned).
// Request: the predicted request set equals the gold set. Throws on a length
// mismatch.
Metrics compute_metrics(const std::vector<BeliefState>& predicted,
                        const std::vector<BeliefState>& gold);

// Per (turn, requestable slot) decision accuracy, for diagnostics.
double request_micro_accuracy(const std::vector<BeliefState>& predicted,
                              const std::vector<BeliefState>& gold,
                              const std::vector<std::string>& requestable);

struct ErrorCounts {
  std::size_t modify = 0;
  std::size_t maintain = 0;
  std::size_t history = 0;

  std::size_t total() const { return modify + maintain + history; }
  ErrorCounts& operator+=(const ErrorCounts& other);
  friend bool operator==(const ErrorCounts&, const ErrorCounts&) = default;
};

// Labels every erroneous (turn, slot) goal decision of one dialog exactly once:
// modify when gold changed at this turn, history when gold is unchanged and
// the previous prediction was already wrong, maintain otherwise.
ErrorCounts classify_errors(const std::vector<BeliefState>& predicted,
                            const std::vector<BeliefState>& gold);

struct DatasetReport {
  Metrics metrics;
  ErrorCounts errors;
  std::vector<std::vector<BeliefState>> predictions;  // per dialog, per turn
};

// Pools turns of all dialogs.
DatasetReport score_predictions(const std::vector<std::vector<BeliefState>>& predictions,
                                const std::vector<Dialog>& dialogs);
DatasetReport evaluate_dialogs(const Tracker& tracker, const std::vector<Dialog>& dialogs);

// A learning curve with a fixed column order.
struct Curve {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row);
};

std::string curve_csv(const Curve& curve);
// Throws on an empty history or when the file cannot be written.
void export_curve(const std::filesystem::path& path, const Curve& curve);

struct MetricsReport {
  std::string system;
  std::string language;
  std::vector<double> goal_per_seed;
  std::vector<double> request_per_seed;
  ErrorCounts errors;

  double goal_mean() const;
  double request_mean() const;
  nlohmann::ordered_json to_json() const;
};

// Throws FormatError unless `json` has every report field with the right type.
void validate_metrics_report(const nlohmann::ordered_json& json);

}  // namespace xlnbt
