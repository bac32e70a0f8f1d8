#include "xlnbt/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "xlnbt/error.hpp"
#include "xlnbt/text.hpp"

namespace xlnbt {

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ull ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

bool is_unsigned(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::size_t dim, OovPolicy policy, std::uint64_t oov_seed)
    : dim_(dim), policy_(policy), oov_seed_(oov_seed) {
  if (dim == 0) throw Error("embedding dimension must be positive");
}

void EmbeddingTable::set_oov_policy(OovPolicy policy, std::uint64_t seed) {
  policy_ = policy;
  oov_seed_ = seed;
}

void EmbeddingTable::insert(const std::string& word, std::vector<double> vector) {
  if (vector.size() != dim_) {
    throw ShapeError("embedding for '" + word + "' has " + std::to_string(vector.size()) +
                     " values, expected " + std::to_string(dim_));
  }
  for (double v : vector) {
    if (!std::isfinite(v)) throw NumericError("non-finite embedding value for '" + word + "'");
  }
  vectors_[word] = std::move(vector);
}

bool EmbeddingTable::contains(std::string_view word) const {
  return vectors_.find(std::string(word)) != vectors_.end();
}

const std::vector<double>* EmbeddingTable::find(std::string_view word) const {
  auto it = vectors_.find(std::string(word));
  return it == vectors_.end() ? nullptr : &it->second;
}

Lookup EmbeddingTable::lookup(std::string_view word) const {
  if (const auto* v = find(word)) return {*v, false};
  Lookup out{std::vector<double>(dim_, 0.0), true};
  if (policy_ == OovPolicy::Random) {
    std::mt19937_64 rng(fnv1a(word, oov_seed_));
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(dim_)));
    for (double& x : out.vector) x = normal(rng);
  }
  return out;
}

std::vector<std::string> EmbeddingTable::words() const {
  std::vector<std::string> out;
  out.reserve(vectors_.size());
  for (const auto& [w, _] : vectors_) out.push_back(w);
  std::sort(out.begin(), out.end());
  return out;
}

void EmbeddingTable::merge_missing(const EmbeddingTable& other) {
  if (other.dim_ != dim_) throw ShapeError("cannot merge embedding tables of different dimension");
  for (const auto& [w, v] : other.vectors_) vectors_.try_emplace(w, v);
}

EmbeddingLoadResult load_embeddings(const std::filesystem::path& path,
                                    std::optional<std::size_t> expected_dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embeddings file " + path.string());

  std::optional<std::size_t> dim = expected_dim;
  std::vector<std::pair<std::string, std::vector<double>>> entries;
  std::size_t malformed = 0;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_spaces(line);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2 && is_unsigned(fields[0]) && is_unsigned(fields[1])) {
      continue;  // word2vec header
    }
    if (fields.size() < 2) {
      ++malformed;
      continue;
    }
    const std::size_t n = fields.size() - 1;
    if (!dim) dim = n;
    if (n != *dim) {
      ++malformed;
      continue;
    }
    std::vector<double> v(n);
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) ok = parse_double(fields[i + 1], v[i]);
    if (!ok) {
      ++malformed;
      continue;
    }
    entries.emplace_back(std::string(fields[0]), std::move(v));
  }
  if (in.bad()) throw IoError("error reading embeddings file " + path.string());
  if (entries.empty()) {
    if (expected_dim && malformed > 0) {
      throw FormatError("embeddings file " + path.string() + " has no line of dimension " +
                        std::to_string(*expected_dim));
    }
    throw FormatError("embeddings file " + path.string() + " contains no entries");
  }
  EmbeddingLoadResult result{EmbeddingTable(*dim), malformed};
  for (auto& [w, v] : entries) result.table.insert(w, std::move(v));
  return result;
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  for (const auto& w : table.words()) {
    out << w;
    for (double x : *table.find(w)) out << ' ' << x;
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

TermEmbedding embed_term(std::string_view term, const EmbeddingTable& table) {
  TermEmbedding out{std::vector<double>(table.dim(), 0.0), false, 0};
  const Utterance tokens = tokenize(term);
  for (const auto& token : tokens.tokens) {
    const Lookup l = table.lookup(token);
    if (l.oov) ++out.oov_tokens;
    for (std::size_t i = 0; i < out.vector.size(); ++i) out.vector[i] += l.vector[i];
  }
  out.oov = out.oov_tokens == tokens.size();
  return out;
}

}  // namespace xlnbt
