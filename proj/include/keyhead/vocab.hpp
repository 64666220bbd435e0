#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace keyhead {

// Whitespace-token vocabulary with fixed special ids. Out-of-vocabulary
// tokens map to <unk>.
class Vocabulary {
 public:
  static constexpr int kBosId = 0;
  static constexpr int kEosId = 1;
  static constexpr int kUnkId = 2;

  Vocabulary();

  // Frequency-then-lexicographic ordering, truncated to max_size entries
  // (including the three specials).
  static Vocabulary build(const std::vector<std::vector<std::string>>& docs, int max_size);

  int id(const std::string& token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  bool contains(const std::string& token) const { return index_.count(token) > 0; }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  // Drops specials.
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace keyhead
