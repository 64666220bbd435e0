#include "keyhead/vocab.hpp"

#include <algorithm>
#include <map>

#include "keyhead/errors.hpp"

namespace keyhead {

Vocabulary::Vocabulary() {
  tokens_ = {"<bos>", "<eos>", "<unk>"};
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) index_[tokens_[i]] = i;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& docs, int max_size) {
  if (max_size < 4) throw ContractError("vocabulary: max_size must leave room beyond the specials");
  std::map<std::string, long long> freq;  // ordered map keeps ties lexicographic
  for (const auto& doc : docs)
    for (const auto& tok : doc) ++freq[tok];

  std::vector<std::pair<std::string, long long>> entries(freq.begin(), freq.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary v;
  for (const auto& [tok, count] : entries) {
    if (v.size() >= max_size) break;
    if (v.index_.count(tok)) continue;  // a literal "<unk>" in the data
    v.index_[tok] = v.size();
    v.tokens_.push_back(tok);
  }
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw ContractError("vocabulary: id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> tokens;
  tokens.reserve(ids.size());
  for (int i : ids) {
    if (i == kBosId || i == kEosId) continue;
    tokens.push_back(token(i));
  }
  return tokens;
}

nlohmann::json Vocabulary::to_json() const { return nlohmann::json(tokens_); }

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  Vocabulary v;
  auto tokens = j.get<std::vector<std::string>>();
  if (tokens.size() < 3 || tokens[0] != "<bos>" || tokens[1] != "<eos>" || tokens[2] != "<unk>") {
    throw ParseError("vocabulary: serialized form must start with <bos>, <eos>, <unk>");
  }
  v.tokens_ = std::move(tokens);
  v.index_.clear();
  for (int i = 0; i < v.size(); ++i) v.index_[v.tokens_[static_cast<std::size_t>(i)]] = i;
  return v;
}

}  // namespace keyhead
