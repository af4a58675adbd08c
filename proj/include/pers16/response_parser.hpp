#pragma once

#include <cctype>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace pers16 {

enum class AnswerKind { LETTER, DIGIT };

struct ParsedAnswer {
  AnswerKind kind = AnswerKind::LETTER;
  std::optional<char> letter;
  std::optional<int> digit;
  std::vector<std::string> normalization_applied;

  std::string canonical() const { return letter ? std::string(1, *letter) : std::to_string(digit.value_or(0)); }
  bool operator==(const ParsedAnswer&) const = default;
};

enum class ParseError { NONE, UNPARSEABLE, AMBIGUOUS, OUT_OF_RANGE };

inline constexpr std::string_view to_string(ParseError e) {
  switch (e) {
    case ParseError::NONE: return "NONE";
    case ParseError::UNPARSEABLE: return "UNPARSEABLE";
    case ParseError::AMBIGUOUS: return "AMBIGUOUS";
    case ParseError::OUT_OF_RANGE: return "OUT_OF_RANGE";
  }
  return "?";
}

inline std::optional<ParseError> parse_error_from_string(std::string_view s) {
  for (auto e : {ParseError::UNPARSEABLE, ParseError::AMBIGUOUS, ParseError::OUT_OF_RANGE}) {
    if (to_string(e) == s) return e;
  }
  return std::nullopt;
}

struct ParseOutcome {
  std::optional<ParsedAnswer> answer;
  ParseError error = ParseError::NONE;

  bool ok() const { return answer.has_value(); }
  static ParseOutcome fail(ParseError e) { return {std::nullopt, e}; }
};

// Normalization tags.
inline constexpr std::string_view kTagTrim = "trim";
inline constexpr std::string_view kTagStripPunct = "strip-punct";
inline constexpr std::string_view kTagUppercase = "uppercase";
inline constexpr std::string_view kTagTokenFallback = "token-fallback";

namespace detail {

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Non-ASCII bytes count as word characters so multi-byte UTF-8 letters never
// split a word into fake single-letter tokens.
inline bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) != 0;
}

inline std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && !is_word_byte(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && is_word_byte(s[j])) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  return true;
}

}  // namespace detail

inline ParseOutcome parse_letter(std::string_view raw) {
  ParsedAnswer ans;
  ans.kind = AnswerKind::LETTER;
  std::string_view s = detail::trim(raw);
  if (s.size() != raw.size()) ans.normalization_applied.emplace_back(kTagTrim);
  if (!s.empty() && (s.back() == '.' || s.back() == ')')) {
    s.remove_suffix(1);
    ans.normalization_applied.emplace_back(kTagStripPunct);
  }
  if (s.size() == 1) {
    char c = s[0];
    if (c >= 'a' && c <= 'e') {
      c = static_cast<char>(c - 'a' + 'A');
      ans.normalization_applied.emplace_back(kTagUppercase);
    }
    if (c >= 'A' && c <= 'E') {
      ans.letter = c;
      return {ans, ParseError::NONE};
    }
  }

  std::set<char> candidates;
  for (auto tok : detail::tokens(raw)) {
    if (tok.size() == 1 && tok[0] >= 'A' && tok[0] <= 'E') candidates.insert(tok[0]);
  }
  if (candidates.size() > 1) return ParseOutcome::fail(ParseError::AMBIGUOUS);
  if (candidates.empty()) return ParseOutcome::fail(ParseError::UNPARSEABLE);
  ParsedAnswer fb;
  fb.kind = AnswerKind::LETTER;
  fb.letter = *candidates.begin();
  fb.normalization_applied.emplace_back(kTagTokenFallback);
  return {fb, ParseError::NONE};
}

inline ParseOutcome parse_intensity(std::string_view raw) {
  ParsedAnswer ans;
  ans.kind = AnswerKind::DIGIT;
  std::string_view s = detail::trim(raw);
  if (s.size() != raw.size()) ans.normalization_applied.emplace_back(kTagTrim);
  if (detail::all_digits(s)) {
    if (s.size() == 1 && s[0] >= '1' && s[0] <= '5') {
      ans.digit = s[0] - '0';
      return {ans, ParseError::NONE};
    }
    return ParseOutcome::fail(ParseError::OUT_OF_RANGE);
  }

  std::set<int> candidates;
  bool saw_out_of_range = false;
  for (auto tok : detail::tokens(raw)) {
    if (!detail::all_digits(tok)) continue;
    if (tok.size() == 1 && tok[0] >= '1' && tok[0] <= '5') {
      candidates.insert(tok[0] - '0');
    } else {
      saw_out_of_range = true;
    }
  }
  if (candidates.size() > 1) return ParseOutcome::fail(ParseError::AMBIGUOUS);
  if (candidates.empty()) {
    return ParseOutcome::fail(saw_out_of_range ? ParseError::OUT_OF_RANGE : ParseError::UNPARSEABLE);
  }
  ParsedAnswer fb;
  fb.kind = AnswerKind::DIGIT;
  fb.digit = *candidates.begin();
  fb.normalization_applied.emplace_back(kTagTokenFallback);
  return {fb, ParseError::NONE};
}

}  // namespace pers16
