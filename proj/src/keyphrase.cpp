#include "keyhead/keyphrase.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "keyhead/errors.hpp"
#include "keyhead/text.hpp"

namespace keyhead {

const char* candidate_source_name(CandidateSource source) {
  switch (source) {
    case CandidateSource::kTfidf:
      return "tfidf";
    case CandidateSource::kSeq2seq:
      return "seq2seq";
    case CandidateSource::kSlot:
      return "slot";
  }
  return "unknown";
}

double IdfTable::idf_for(const std::string& token) const {
  auto it = idf.find(token);
  if (it != idf.end()) return it->second;
  return std::log(static_cast<double>(1 + doc_count)) + 1.0;
}

nlohmann::json IdfTable::to_json() const {
  nlohmann::json j;
  j["doc_count"] = doc_count;
  nlohmann::json entries = nlohmann::json::object();
  for (const auto& [tok, value] : std::map<std::string, double>(idf.begin(), idf.end()))
    entries[tok] = value;
  j["idf"] = entries;
  return j;
}

IdfTable IdfTable::from_json(const nlohmann::json& j) {
  IdfTable t;
  t.doc_count = j.at("doc_count").get<long long>();
  for (auto it = j.at("idf").begin(); it != j.at("idf").end(); ++it)
    t.idf[it.key()] = it.value().get<double>();
  return t;
}

IdfTable build_idf(const std::vector<std::vector<std::string>>& training_articles) {
  if (training_articles.empty()) throw ContractError("build_idf: empty corpus");
  IdfTable table;
  table.doc_count = static_cast<long long>(training_articles.size());
  std::unordered_map<std::string, long long> df;
  for (const auto& doc : training_articles) {
    std::unordered_map<std::string, bool> seen;
    for (const auto& tok : doc) {
      if (!seen.emplace(tok, true).second) continue;
      ++df[tok];
    }
  }
  for (const auto& [tok, count] : df) {
    table.idf[tok] =
        std::log(static_cast<double>(1 + table.doc_count) / static_cast<double>(1 + count)) + 1.0;
  }
  return table;
}

std::vector<KeyphraseCandidate> tfidf_rank(const std::vector<std::string>& article,
                                           const IdfTable& table, int top_k,
                                           const TfidfThresholds& thresholds) {
  if (top_k < 1) throw ContractError("tfidf_rank: top_k must be at least 1");
  if (article.size() < 2) return {};

  std::map<std::vector<std::string>, int> counts;  // ordered: lexicographic tie-break for free
  for (int n = 2; n <= 4; ++n) {
    if (static_cast<int>(article.size()) < n) break;
    for (std::size_t s = 0; s + static_cast<std::size_t>(n) <= article.size(); ++s) {
      std::vector<std::string> phrase(article.begin() + static_cast<std::ptrdiff_t>(s),
                                      article.begin() + static_cast<std::ptrdiff_t>(s + static_cast<std::size_t>(n)));
      bool clean = true;
      for (const auto& tok : phrase) {
        if (!is_clean_token(tok)) {
          clean = false;
          break;
        }
      }
      if (clean) ++counts[phrase];
    }
  }

  std::vector<KeyphraseCandidate> ranked;
  for (const auto& [phrase, tf] : counts) {
    double idf_sum = 0.0;
    for (const auto& tok : phrase) idf_sum += table.idf_for(tok);
    double score = static_cast<double>(tf) * idf_sum / static_cast<double>(phrase.size());
    if (score < thresholds.min_score[phrase.size() - 2]) continue;
    ranked.push_back({phrase, score, CandidateSource::kTfidf});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.phrase < b.phrase;
  });
  if (static_cast<int>(ranked.size()) > top_k) ranked.resize(static_cast<std::size_t>(top_k));
  return ranked;
}

std::vector<KeyphraseCandidate> slot_predict_spans(const SpanScores& scores,
                                                   const std::vector<std::string>& article,
                                                   int top_k) {
  if (top_k < 1) throw ContractError("slot_predict_spans: top_k must be at least 1");
  if (scores.begin_probs.size() != article.size() || scores.end_probs.size() != article.size()) {
    throw ContractError("slot_predict_spans: span scores must cover every article position");
  }
  if (article.size() < 2) return {};

  struct Span {
    int begin, end;
    double score;
  };
  std::vector<Span> spans;
  const int len = static_cast<int>(article.size());
  for (int i = 0; i < len; ++i) {
    for (int j = i + 1; j < len && j - i + 1 <= 4; ++j) {
      if (j - i + 1 < 2) continue;
      spans.push_back({i, j, scores.begin_probs[static_cast<std::size_t>(i)] *
                                 scores.end_probs[static_cast<std::size_t>(j)]});
    }
  }
  std::stable_sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.begin != b.begin) return a.begin < b.begin;
    return a.end < b.end;
  });
  if (static_cast<int>(spans.size()) > top_k) spans.resize(static_cast<std::size_t>(top_k));

  std::vector<KeyphraseCandidate> out;
  for (const auto& s : spans) {
    KeyphraseCandidate c;
    c.phrase.assign(article.begin() + s.begin, article.begin() + s.end + 1);
    c.score = s.score;
    c.source = CandidateSource::kSlot;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace keyhead
