#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace xlnbt {

enum class OovPolicy {
  Zero,    // absent words embed as the zero vector
  Random,  // absent words get a fixed pseudo-random vector derived from the word
};

struct Lookup {
  std::vector<double> vector;
  bool oov = false;
};

// Word -> fixed vector. Immutable once loaded; lookups are const and safe to
// run concurrently.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim, OovPolicy policy = OovPolicy::Zero,
                          std::uint64_t oov_seed = 0);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  OovPolicy oov_policy() const { return policy_; }
  void set_oov_policy(OovPolicy policy, std::uint64_t seed = 0);

  // Adds or replaces an entry. Throws on dimension mismatch or non-finite values.
  void insert(const std::string& word, std::vector<double> vector);
  bool contains(std::string_view word) const;
  Lookup lookup(std::string_view word) const;
  // Returns the stored vector, or nullptr when absent.
  const std::vector<double>* find(std::string_view word) const;

  // Entries sorted by word, for deterministic serialization.
  std::vector<std::string> words() const;

  // Copies every entry of `other` that is not already present.
  void merge_missing(const EmbeddingTable& other);

 private:
  std::size_t dim_ = 0;
  OovPolicy policy_ = OovPolicy::Zero;
  std::uint64_t oov_seed_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

struct EmbeddingLoadResult {
  EmbeddingTable table;
  std::size_t malformed_lines = 0;
};

// Reads "word v1 ... vH" lines. The dimension is `expected_dim` when given,
// otherwise the length of the first entry. Lines with a different number of
// values or unparsable numbers are skipped and counted. A leading
// "<count> <dim>" header line (word2vec text format) is accepted. Throws when
// the file cannot be read, when `expected_dim` disagrees with every line, or
// when no entry parses.
EmbeddingLoadResult load_embeddings(const std::filesystem::path& path,
                                    std::optional<std::size_t> expected_dim = std::nullopt);

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);

struct TermEmbedding {
  std::vector<double> vector;
  bool oov = false;  // every token of the term was out of vocabulary
  std::size_t oov_tokens = 0;
};

// Sum of the word vectors of the term's tokens.
TermEmbedding embed_term(std::string_view term, const EmbeddingTable& table);

}  // namespace xlnbt
