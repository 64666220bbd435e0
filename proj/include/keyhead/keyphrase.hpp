#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace keyhead {

enum class CandidateSource { kTfidf, kSeq2seq, kSlot };

const char* candidate_source_name(CandidateSource source);

struct KeyphraseCandidate {
  std::vector<std::string> phrase;  // 2 to 4 tokens
  double score = 0.0;
  CandidateSource source = CandidateSource::kTfidf;
};

struct IdfTable {
  std::unordered_map<std::string, double> idf;
  long long doc_count = 0;

  // idf(t) = ln((1 + D) / (1 + df(t))) + 1; unseen tokens use df = 0.
  double idf_for(const std::string& token) const;

  nlohmann::json to_json() const;
  static IdfTable from_json(const nlohmann::json& j);
};

IdfTable build_idf(const std::vector<std::vector<std::string>>& training_articles);

struct TfidfThresholds {
  // Minimum score per n-gram order; index 0 is n=2. Defaults keep everything.
  std::array<double, 3> min_score{0.0, 0.0, 0.0};
};

// Scores every 2/3/4-gram of the article as tf * mean token idf, excluding
// phrases whose tokens carry punctuation or special characters. Descending
// score, ties lexicographic.
std::vector<KeyphraseCandidate> tfidf_rank(const std::vector<std::string>& article,
                                           const IdfTable& table, int top_k,
                                           const TfidfThresholds& thresholds = {});

struct SpanScores {
  std::vector<double> begin_probs;
  std::vector<double> end_probs;
};

// Top-K spans (i, j) with j >= i and length in {2, 3, 4}, scored
// begin_probs[i] * end_probs[j]; ties break by (i, j) ascending.
std::vector<KeyphraseCandidate> slot_predict_spans(const SpanScores& scores,
                                                   const std::vector<std::string>& article,
                                                   int top_k);

}  // namespace keyhead
