#include "keyhead/text.hpp"

#include <array>
#include <cstdint>
#include <unordered_set>

namespace keyhead {

namespace {

// Fixed English stop-word list, kept in the repo so query normalization is
// reproducible across environments.
const std::unordered_set<std::string>& stopword_set() {
  static const std::unordered_set<std::string> words = {
      "a",      "about",  "above", "after",  "again",   "all",    "am",     "an",
      "and",    "any",    "are",   "as",     "at",      "be",     "because", "been",
      "before", "being",  "below", "between", "both",   "but",    "by",     "can",
      "could",  "did",    "do",    "does",   "doing",   "down",   "during", "each",
      "few",    "for",    "from",  "further", "had",    "has",    "have",   "having",
      "he",     "her",    "here",  "hers",   "him",     "his",    "how",    "i",
      "if",     "in",     "into",  "is",     "it",      "its",    "itself", "just",
      "me",     "more",   "most",  "my",     "no",      "nor",    "not",    "of",
      "off",    "on",     "once",  "only",   "or",      "other",  "our",    "ours",
      "out",    "over",   "own",   "same",   "she",     "should", "so",     "some",
      "such",   "than",   "that",  "the",    "their",   "theirs", "them",   "then",
      "there",  "these",  "they",  "this",   "those",   "through", "to",    "too",
      "under",  "until",  "up",    "very",   "was",     "we",     "were",   "what",
      "when",   "where",  "which", "while",  "who",     "whom",   "why",    "will",
      "with",   "would",  "you",   "your",   "yours",
  };
  return words;
}

bool in_punct_block(std::uint32_t cp) {
  // Common Unicode punctuation/symbol blocks stripped alongside ASCII
  // punctuation: general + supplemental punctuation, CJK symbols,
  // vertical/compat forms, fullwidth punctuation, Latin-1 punctuation.
  return (cp >= 0x00A1 && cp <= 0x00BF) || (cp >= 0x2000 && cp <= 0x206F) ||
         (cp >= 0x2E00 && cp <= 0x2E7F) || (cp >= 0x3000 && cp <= 0x303F) ||
         (cp >= 0xFE30 && cp <= 0xFE4F) || (cp >= 0xFF01 && cp <= 0xFF0F) ||
         (cp >= 0xFF1A && cp <= 0xFF20) || (cp >= 0xFF3B && cp <= 0xFF40) ||
         (cp >= 0xFF5B && cp <= 0xFF65);
}

// Decodes one UTF-8 code point starting at i; advances i. Malformed bytes
// decode as 0xFFFD and consume one byte.
std::uint32_t next_code_point(const std::string& s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int extra = 0;
  std::uint32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    extra = 1;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    extra = 2;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    extra = 3;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + static_cast<std::size_t>(extra) >= s.size()) {
    // Truncated sequence.
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k <= extra; ++k) {
    const auto bk = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
    if ((bk & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (bk & 0x3F);
  }
  i += static_cast<std::size_t>(extra) + 1;
  return cp;
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

}  // namespace

std::vector<std::string> clean_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    std::uint32_t cp = next_code_point(text, i);
    bool is_space = cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v';
    if (is_space) {
      if (!current.empty()) {
        tokens.push_back(current);
        current.clear();
      }
      continue;
    }
    if (cp < 0x80) {
      if (cp >= 'A' && cp <= 'Z') cp += 'a' - 'A';
      bool alnum = (cp >= 'a' && cp <= 'z') || (cp >= '0' && cp <= '9');
      if (alnum) current.push_back(static_cast<char>(cp));
      continue;  // ASCII punctuation and control bytes are deleted in place
    }
    if (cp == 0xFFFD || in_punct_block(cp)) continue;
    append_utf8(current, cp);
  }
  if (!current.empty()) tokens.push_back(current);
  return tokens;
}

std::vector<std::string> normalize_query(const std::string& raw) {
  std::vector<std::string> tokens = clean_tokens(raw);
  std::vector<std::string> kept;
  kept.reserve(tokens.size());
  for (auto& t : tokens)
    if (!is_stopword(t)) kept.push_back(std::move(t));
  return kept;
}

bool is_stopword(const std::string& token) { return stopword_set().count(token) > 0; }

bool is_clean_token(const std::string& token) {
  if (token.empty()) return false;
  for (unsigned char c : token) {
    bool alnum = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
    if (!alnum) return false;
  }
  return true;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      if (!current.empty()) {
        tokens.push_back(current);
        current.clear();
      }
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) tokens.push_back(current);
  return tokens;
}

}  // namespace keyhead
