#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "xlnbt/grad_check.hpp"
#include "xlnbt/pipeline.hpp"

namespace xlnbt::testing {

// food {chinese, indian, turkish, persian, north american}, area {north,
// south}; requests {phone, address}.
inline Ontology small_ontology() {
  Ontology o;
  o.informable = {{"food", {"chinese", "indian", "turkish", "persian", "north american"}},
                  {"area", {"north", "south"}}};
  o.requestable = {"phone", "address"};
  return o;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// Random vectors for every given word.
inline EmbeddingTable random_table(const std::vector<std::string>& words, std::size_t dim,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  EmbeddingTable t(dim);
  for (const auto& w : words) t.insert(w, random_vector(dim, rng));
  return t;
}

inline std::vector<std::string> small_vocabulary() {
  return {"i", "want", "chinese", "indian", "turkish", "persian", "north", "american", "south",
          "food", "in", "the", "phone", "address", "what", "is", "please", "area", "?", "."};
}

inline DialogTurn make_turn(const std::string& text, BeliefState gold, SystemActs acts = {}) {
  DialogTurn t;
  t.system_acts = std::move(acts);
  t.transcript = text;
  t.utterance = tokenize(text);
  t.gold = std::move(gold);
  return t;
}

inline BeliefState goals(std::map<std::string, std::string> g, std::set<std::string> requests = {}) {
  return {std::move(g), std::move(requests)};
}

// Removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("xlnbt-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& content) const {
    std::ofstream(path_ / name, std::ios::binary) << content;
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Evaluation to_evaluation(BatchLoss loss) { return {loss.value, std::move(loss.gradients)}; }

inline NbtModel with_params(const NbtModel& base, const ParameterSet& p) {
  NbtModel m = base;
  m.params = p;
  return m;
}

}  // namespace xlnbt::testing
