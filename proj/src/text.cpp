#include "xlnbt/text.hpp"

#include <cctype>

#include "xlnbt/error.hpp"

namespace xlnbt {

std::string Utterance::text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

}  // namespace

Utterance tokenize(std::string_view text) {
  Utterance out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.tokens.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      flush();
    } else if (c == '\'' && !current.empty() && i + 1 < text.size() &&
               std::isalpha(static_cast<unsigned char>(text[i + 1]))) {
      // clitic: "what's" -> "what" "'s"
      flush();
      current.push_back('\'');
    } else if (is_punct(c)) {
      flush();
      out.tokens.emplace_back(1, static_cast<char>(c));
    } else {
      current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    }
  }
  flush();
  if (out.tokens.empty()) throw Error("tokenize: empty or whitespace-only text");
  return out;
}

std::optional<Utterance> tokenize_bounded(std::string_view text, std::size_t max_tokens,
                                          LengthPolicy policy) {
  Utterance u = tokenize(text);
  if (u.size() <= max_tokens) return u;
  switch (policy) {
    case LengthPolicy::Error:
      throw Error("tokenize: " + std::to_string(u.size()) + " tokens exceeds the limit of " +
                  std::to_string(max_tokens));
    case LengthPolicy::Drop:
      return std::nullopt;
    case LengthPolicy::Truncate:
      u.tokens.resize(max_tokens);
      return u;
  }
  return u;
}

}  // namespace xlnbt
