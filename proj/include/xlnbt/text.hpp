#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xlnbt {

inline constexpr std::size_t kMaxUtteranceTokens = 40;

struct Utterance {
  std::vector<std::string> tokens;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  std::string text() const;  // tokens joined by single spaces

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

// Lowercases ASCII letters, splits on whitespace, and splits punctuation into
// separate tokens. An apostrophe inside a word starts a new token that keeps
// the apostrophe ("what's" -> "what", "'s"). Throws on empty input.
Utterance tokenize(std::string_view text);

enum class LengthPolicy { Error, Drop, Truncate };

// tokenize() plus the length bound: over-long input throws (Error), yields
// nullopt (Drop), or keeps the first `max_tokens` tokens (Truncate).
std::optional<Utterance> tokenize_bounded(std::string_view text,
                                          std::size_t max_tokens = kMaxUtteranceTokens,
                                          LengthPolicy policy = LengthPolicy::Error);

}  // namespace xlnbt
