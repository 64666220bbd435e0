#pragma once

#include <string>
#include <vector>

namespace keyhead {

// Whitespace tokenization after lowercasing ASCII letters and deleting
// punctuation/symbol code points (ASCII non-alphanumerics plus the common
// Unicode punctuation blocks). Tokens that clean to nothing are dropped.
std::vector<std::string> clean_tokens(const std::string& text);

// clean_tokens plus stop-word removal; the query normalization step.
std::vector<std::string> normalize_query(const std::string& raw);

bool is_stopword(const std::string& token);

// True when every byte is ASCII alphanumeric; n-gram candidates containing
// anything else are excluded from TF-IDF ranking.
bool is_clean_token(const std::string& token);

std::string join_tokens(const std::vector<std::string>& tokens);

std::vector<std::string> split_whitespace(const std::string& text);

}  // namespace keyhead
