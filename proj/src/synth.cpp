#include "xlnbt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "xlnbt/error.hpp"

namespace xlnbt {

using nlohmann::ordered_json;

namespace {

constexpr std::size_t kMinFillers = 6;

std::string regime_name(EmbeddingRegime r) {
  return r == EmbeddingRegime::Bilingual ? "bilingual" : "monolingual";
}

EmbeddingRegime parse_regime(const std::string& s) {
  if (s == "bilingual") return EmbeddingRegime::Bilingual;
  if (s == "monolingual") return EmbeddingRegime::Monolingual;
  throw FormatError("synth config: regime must be 'bilingual' or 'monolingual', got '" + s + "'");
}

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

bool coin(std::mt19937_64& rng, double p) { return std::bernoulli_distribution(p)(rng); }

std::vector<std::string> make_words(std::size_t n, const std::string& consonants,
                                    const std::string& vowels, std::mt19937_64& rng) {
  std::set<std::string> seen;
  std::vector<std::string> out;
  while (out.size() < n) {
    const std::size_t syllables = 2 + pick(rng, 2);
    std::string w;
    for (std::size_t s = 0; s < syllables; ++s) {
      w += consonants[pick(rng, consonants.size())];
      w += vowels[pick(rng, vowels.size())];
    }
    if (seen.insert(w).second) out.push_back(w);
  }
  return out;
}

// Rows of a random orthonormal frame (Gram-Schmidt on Gaussian draws); at
// most `dim` rows.
std::vector<std::vector<double>> orthonormal_rows(std::size_t count, std::size_t dim,
                                                  std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> rows;
  while (rows.size() < std::min(count, dim)) {
    std::vector<double> v(dim);
    for (double& x : v) x = normal(rng);
    for (const auto& r : rows) {
      double d = 0.0;
      for (std::size_t i = 0; i < dim; ++i) d += v[i] * r[i];
      for (std::size_t i = 0; i < dim; ++i) v[i] -= d * r[i];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (double& x : v) x /= norm;
    rows.push_back(std::move(v));
  }
  return rows;
}

std::vector<double> unit_gaussian(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  for (double& x : v) {
    x = normal(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

// Source-language vocabulary laid out by role.
struct Lexicon {
  std::vector<std::string> slots;
  std::vector<std::vector<std::string>> values;
  std::vector<std::string> requests;
  std::vector<std::string> fillers;
};

class DialogWriter {
 public:
  DialogWriter(const SynthConfig& config, const Lexicon& lex, std::mt19937_64& rng)
      : config_(config), lex_(lex), rng_(rng) {}

  Dialog dialog(std::int64_t id) {
    Dialog d;
    d.id = id;
    std::map<std::size_t, std::size_t> state;  // slot -> value index
    for (std::size_t t = 0; t < config_.turns; ++t) {
      DialogTurn turn;
      std::optional<std::size_t> asked_slot;
      const std::size_t kind = t == 0 ? pick(rng_, 2) : pick(rng_, 3);
      if (kind == 1) {
        const std::size_t s = pick(rng_, lex_.slots.size() + lex_.requests.size());
        if (s < lex_.slots.size()) {
          turn.system_acts.request = lex_.slots[s];
          asked_slot = s;
        } else {
          turn.system_acts.request = lex_.requests[s - lex_.slots.size()];
        }
      } else if (kind == 2 && !state.empty()) {
        auto it = state.begin();
        std::advance(it, static_cast<std::ptrdiff_t>(pick(rng_, state.size())));
        turn.system_acts.confirm_slot = lex_.slots[it->first];
        turn.system_acts.confirm_value = lex_.values[it->first][it->second];
      }

      std::set<std::size_t> inform;
      if (t == 0) {
        inform.insert(asked_slot ? *asked_slot : pick(rng_, lex_.slots.size()));
        if (coin(rng_, 0.5)) inform.insert(pick(rng_, lex_.slots.size()));
      } else if (asked_slot || coin(rng_, 0.5)) {
        inform.insert(asked_slot ? *asked_slot : pick(rng_, lex_.slots.size()));
      }
      std::set<std::size_t> restate;
      if (t > 0) {
        for (const auto& [s, v] : state) {
          if (!inform.contains(s) && coin(rng_, config_.restate_prob)) restate.insert(s);
        }
      }
      std::optional<std::size_t> requested;
      if (coin(rng_, t == 0 ? 0.3 : 0.5)) requested = pick(rng_, lex_.requests.size());

      std::vector<std::vector<std::string>> segments;
      for (std::size_t s : inform) {
        std::size_t v = pick(rng_, lex_.values[s].size());
        if (auto it = state.find(s); it != state.end() && lex_.values[s].size() > 1) {
          while (v == it->second) v = pick(rng_, lex_.values[s].size());
        }
        state[s] = v;
        std::vector<std::string> seg;
        if (coin(rng_, 0.5)) seg.push_back(filler());
        seg.push_back(lex_.values[s][v]);
        if (coin(rng_, 0.5)) seg.push_back(lex_.slots[s]);
        segments.push_back(std::move(seg));
      }
      for (std::size_t s : restate) {
        std::vector<std::string> seg{lex_.values[s][state.at(s)]};
        if (coin(rng_, 0.5)) seg.push_back(lex_.slots[s]);
        segments.push_back(std::move(seg));
      }
      if (requested) segments.push_back({filler(), lex_.requests[*requested]});
      std::shuffle(segments.begin(), segments.end(), rng_);

      std::vector<std::string> tokens;
      for (std::size_t i = pick(rng_, 3); i > 0; --i) tokens.push_back(filler());
      for (const auto& seg : segments) tokens.insert(tokens.end(), seg.begin(), seg.end());
      for (std::size_t i = pick(rng_, 3); i > 0; --i) tokens.push_back(filler());
      if (tokens.empty()) tokens.push_back(filler());

      turn.transcript = join(tokens);
      turn.utterance = tokenize(turn.transcript);
      turn.system_text = system_text(turn.system_acts);
      for (const auto& [s, v] : state) turn.gold.goals[lex_.slots[s]] = lex_.values[s][v];
      if (requested) turn.gold.requests.insert(lex_.requests[*requested]);
      d.turns.push_back(std::move(turn));
    }
    return d;
  }

  std::string sentence() {
    std::vector<std::string> tokens;
    const std::size_t parts = 1 + pick(rng_, 3);
    for (std::size_t p = 0; p < parts; ++p) {
      const std::size_t kind = pick(rng_, 3);
      if (kind == 0) {
        const std::size_t s = pick(rng_, lex_.slots.size());
        tokens.push_back(lex_.values[s][pick(rng_, lex_.values[s].size())]);
        if (coin(rng_, 0.5)) tokens.push_back(lex_.slots[s]);
      } else if (kind == 1) {
        tokens.push_back(lex_.requests[pick(rng_, lex_.requests.size())]);
      }
      tokens.push_back(filler());
    }
    while (tokens.size() < 4) tokens.insert(tokens.begin(), filler());
    return join(tokens);
  }

 private:
  std::string filler() { return lex_.fillers[pick(rng_, lex_.fillers.size())]; }

  static std::string join(const std::vector<std::string>& tokens) {
    std::string out;
    for (const auto& t : tokens) out += (out.empty() ? "" : " ") + t;
    return out;
  }

  static std::string system_text(const SystemActs& acts) {
    std::vector<std::string> parts;
    if (acts.request) parts.push_back(*acts.request);
    if (acts.confirm_slot) parts.push_back(*acts.confirm_slot + " " + *acts.confirm_value);
    return join(parts);
  }

  const SynthConfig& config_;
  const Lexicon& lex_;
  std::mt19937_64& rng_;
};

std::string translate_text(const std::string& text, const std::map<std::string, std::string>& t) {
  std::string out;
  for (const auto& token : tokenize(text).tokens) out += (out.empty() ? "" : " ") + t.at(token);
  return out;
}

Dialog translate_dialog(const Dialog& d, const std::map<std::string, std::string>& t,
                        const OntologyMapping& mapping, const std::string& from,
                        const std::string& to) {
  Dialog out;
  out.id = d.id;
  for (const auto& turn : d.turns) {
    DialogTurn tt;
    tt.system_acts = mapping.map_acts(turn.system_acts, from, to);
    tt.system_text = turn.system_text.empty() ? "" : translate_text(turn.system_text, t);
    tt.transcript = translate_text(turn.transcript, t);
    tt.utterance = tokenize(tt.transcript);
    tt.gold = mapping.map_state(turn.gold, from, to);
    out.turns.push_back(std::move(tt));
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

void SynthConfig::validate() const {
  if (vocab_size == 0 || informable_slots == 0 || values_per_slot == 0 || train_dialogs == 0 ||
      valid_dialogs == 0 || test_dialogs == 0 || turns == 0 || parallel_pairs == 0 || dim == 0) {
    throw Error("synth config: counts must be positive");
  }
  if (requestable_slots == 0) throw Error("synth config: need at least one requestable slot");
  if (ambiguity == 0) throw Error("synth config: ambiguity must be at least 1");
  const std::size_t needed =
      informable_slots * (1 + values_per_slot) + requestable_slots + kMinFillers;
  if (vocab_size < needed) {
    throw Error("synth config: infeasible, " + std::to_string(vocab_size) +
                " words cannot hold the ontology plus fillers (need " + std::to_string(needed) +
                ")");
  }
  if (ambiguity > vocab_size) throw Error("synth config: ambiguity exceeds the vocabulary");
  if (!(target_noise >= 0.0)) throw Error("synth config: target noise must be non-negative");
  if (!(filler_norm > 0.0)) throw Error("synth config: filler norm must be positive");
  if (!(restate_prob >= 0.0 && restate_prob <= 1.0)) {
    throw Error("synth config: restate probability outside [0, 1]");
  }
  if (source_language == target_language) throw Error("synth config: language tags must differ");
}

ordered_json SynthConfig::to_json() const {
  return {{"vocab_size", vocab_size},
          {"informable_slots", informable_slots},
          {"values_per_slot", values_per_slot},
          {"requestable_slots", requestable_slots},
          {"train_dialogs", train_dialogs},
          {"valid_dialogs", valid_dialogs},
          {"test_dialogs", test_dialogs},
          {"turns", turns},
          {"parallel_pairs", parallel_pairs},
          {"ambiguity", ambiguity},
          {"dim", dim},
          {"target_noise", target_noise},
          {"filler_norm", filler_norm},
          {"restate_prob", restate_prob},
          {"regime", regime_name(regime)},
          {"seed", seed},
          {"source_language", source_language},
          {"target_language", target_language}};
}

SynthConfig SynthConfig::from_json(const ordered_json& j) {
  if (!j.is_object()) throw FormatError("synth config: expected an object");
  SynthConfig c;
  const ordered_json defaults = c.to_json();
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw FormatError("synth config: unknown key '" + key + "'");
  }
  auto get_size = [&](const char* key, std::size_t& out) {
    if (j.contains(key)) out = j.at(key).get<std::size_t>();
  };
  try {
    get_size("vocab_size", c.vocab_size);
    get_size("informable_slots", c.informable_slots);
    get_size("values_per_slot", c.values_per_slot);
    get_size("requestable_slots", c.requestable_slots);
    get_size("train_dialogs", c.train_dialogs);
    get_size("valid_dialogs", c.valid_dialogs);
    get_size("test_dialogs", c.test_dialogs);
    get_size("turns", c.turns);
    get_size("parallel_pairs", c.parallel_pairs);
    get_size("ambiguity", c.ambiguity);
    get_size("dim", c.dim);
    if (j.contains("target_noise")) c.target_noise = j.at("target_noise").get<double>();
    if (j.contains("filler_norm")) c.filler_norm = j.at("filler_norm").get<double>();
    if (j.contains("restate_prob")) c.restate_prob = j.at("restate_prob").get<double>();
    if (j.contains("regime")) c.regime = parse_regime(j.at("regime").get<std::string>());
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("source_language")) c.source_language = j.at("source_language").get<std::string>();
    if (j.contains("target_language")) c.target_language = j.at("target_language").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

SynthTask generate_toy_task(const SynthConfig& config) {
  config.validate();
  SynthTask task;
  task.config = config;
  std::mt19937_64 rng(config.seed);

  const auto src_words = make_words(config.vocab_size, "bdgklrsv", "aeo", rng);
  const auto tgt_words = make_words(config.vocab_size, "fhjmnptz", "iuy", rng);
  for (std::size_t i = 0; i < src_words.size(); ++i) task.translation[src_words[i]] = tgt_words[i];

  Lexicon lex;
  std::size_t next = 0;
  for (std::size_t s = 0; s < config.informable_slots; ++s) lex.slots.push_back(src_words[next++]);
  for (std::size_t s = 0; s < config.informable_slots; ++s) {
    lex.values.emplace_back();
    for (std::size_t v = 0; v < config.values_per_slot; ++v) lex.values[s].push_back(src_words[next++]);
  }
  for (std::size_t r = 0; r < config.requestable_slots; ++r) lex.requests.push_back(src_words[next++]);
  while (next < src_words.size()) lex.fillers.push_back(src_words[next++]);

  const std::string& from = config.source_language;
  const std::string& to = config.target_language;
  for (std::size_t s = 0; s < lex.slots.size(); ++s) {
    task.source_ontology.informable.push_back({lex.slots[s], lex.values[s]});
    task.mapping.add("slot." + std::to_string(s), from, lex.slots[s]);
    task.mapping.add("slot." + std::to_string(s), to, task.translation.at(lex.slots[s]));
    for (std::size_t v = 0; v < lex.values[s].size(); ++v) {
      const std::string id = "value." + std::to_string(s) + "." + std::to_string(v);
      task.mapping.add(id, from, lex.values[s][v]);
      task.mapping.add(id, to, task.translation.at(lex.values[s][v]));
    }
  }
  for (std::size_t r = 0; r < lex.requests.size(); ++r) {
    task.source_ontology.requestable.push_back(lex.requests[r]);
    task.mapping.add("request." + std::to_string(r), from, lex.requests[r]);
    task.mapping.add("request." + std::to_string(r), to, task.translation.at(lex.requests[r]));
  }
  task.source_ontology.validate();
  task.target_ontology = task.mapping.map_ontology(task.source_ontology, from, to);

  DialogWriter writer(config, lex, rng);
  const std::size_t counts[3] = {config.train_dialogs, config.valid_dialogs, config.test_dialogs};
  std::int64_t id = 0;
  for (std::size_t split = 0; split < 3; ++split) {
    for (std::size_t i = 0; i < counts[split]; ++i) {
      Dialog d = writer.dialog(id++);
      task.target[split].push_back(translate_dialog(d, task.translation, task.mapping, from, to));
      task.source[split].push_back(std::move(d));
    }
  }
  for (std::size_t i = 0; i < config.parallel_pairs; ++i) {
    const std::string e = writer.sentence();
    task.parallel.emplace_back(e, translate_text(e, task.translation));
  }

  for (const auto& w : src_words) {
    std::vector<std::string> candidates{task.translation.at(w)};
    while (candidates.size() < config.ambiguity) {
      const auto& other = tgt_words[pick(rng, tgt_words.size())];
      if (std::find(candidates.begin(), candidates.end(), other) == candidates.end()) {
        candidates.push_back(other);
      }
    }
    std::shuffle(candidates.begin(), candidates.end(), rng);
    task.dictionary.add(w, candidates);
  }

  task.source_embeddings = EmbeddingTable(config.dim);
  task.target_bilingual = EmbeddingTable(config.dim);
  task.target_monolingual = EmbeddingTable(config.dim);
  // Ontology words get mutually orthogonal vectors while the frame lasts;
  // fillers are random unit vectors.
  const std::size_t ontology_words = src_words.size() - lex.fillers.size();
  const auto frame = orthonormal_rows(ontology_words, config.dim, rng);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(config.dim)));
  for (std::size_t i = 0; i < src_words.size(); ++i) {
    const std::string& w = src_words[i];
    std::vector<double> v = i < frame.size() ? frame[i] : unit_gaussian(config.dim, rng);
    if (i >= ontology_words) {
      for (double& x : v) x *= config.filler_norm;
    }
    std::vector<double> t = v;
    for (double& x : t) x += config.target_noise * normal(rng);
    task.source_embeddings.insert(w, std::move(v));
    task.target_bilingual.insert(task.translation.at(w), std::move(t));
  }
  for (const auto& w : tgt_words) task.target_monolingual.insert(w, unit_gaussian(config.dim, rng));
  return task;
}

ordered_json write_toy_task(const SynthTask& task, const std::filesystem::path& dir,
                            const ordered_json& run_settings) {
  std::filesystem::create_directories(dir);
  const auto& c = task.config;
  ordered_json files;
  auto put = [&](const std::string& key, const std::string& name) {
    files[key] = name;
    return dir / name;
  };

  save_ontology(put("source.ontology", "ontology." + c.source_language + ".json"),
                task.source_ontology);
  save_ontology(put("target.ontology", "ontology." + c.target_language + ".json"),
                task.target_ontology);
  for (std::size_t split = 0; split < 3; ++split) {
    const std::string name = kSplitNames[split];
    save_dialogs(put("source." + name, c.source_language + "." + name + ".json"), task.source[split]);
    save_dialogs(put("target." + name, c.target_language + "." + name + ".json"), task.target[split]);
  }
  save_mapping(put("mapping", "mapping.tsv"), task.mapping);
  save_dictionary(put("dictionary", "dictionary.tsv"), task.dictionary);
  std::string src_text;
  std::string tgt_text;
  for (const auto& [e, f] : task.parallel) {
    src_text += e + '\n';
    tgt_text += f + '\n';
  }
  write_text(put("parallel.src", "parallel." + c.source_language + ".txt"), src_text);
  write_text(put("parallel.tgt", "parallel." + c.target_language + ".txt"), tgt_text);
  save_embeddings(put("source.embeddings", "embeddings." + c.source_language + ".txt"),
                  task.source_embeddings);
  save_embeddings(put("target.embeddings.bilingual",
                      "embeddings." + c.target_language + ".bilingual.txt"),
                  task.target_bilingual);
  save_embeddings(put("target.embeddings.monolingual",
                      "embeddings." + c.target_language + ".monolingual.txt"),
                  task.target_monolingual);

  ordered_json manifest;
  manifest["generator"] = "xlnbt synth";
  manifest["config"] = c.to_json();
  manifest["seed"] = c.seed;
  manifest["files"] = files;
  write_text(dir / "manifest.json", manifest.dump(1) + "\n");

  ordered_json run;
  run["source.language"] = c.source_language;
  run["target.language"] = c.target_language;
  for (const char* key : {"source.ontology", "target.ontology", "source.train", "source.valid",
                          "source.test", "target.train", "target.valid", "target.test", "mapping",
                          "dictionary", "parallel.src", "parallel.tgt", "source.embeddings"}) {
    run[key] = files[key];
  }
  run["target.embeddings"] = c.regime == EmbeddingRegime::Bilingual
                                 ? files["target.embeddings.bilingual"]
                                 : files["target.embeddings.monolingual"];
  run["model.dim"] = c.dim;
  run["seed"] = c.seed;
  for (const auto& [key, value] : run_settings.items()) {
    if (!run.contains(key)) run[key] = value;
  }
  write_text(dir / "run.json", run.dump(1) + "\n");
  return manifest;
}

}  // namespace xlnbt
