#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace keyhead {

struct QueryRecord {
  std::vector<std::string> query;  // normalized tokens
  std::string article_id;
  long long clicks = 0;
};

struct ArticleRecord {
  std::string article_id;
  std::vector<std::string> article;
  std::vector<std::string> headline;
};

struct AlignedTriple {
  std::string article_id;
  std::vector<std::string> article;
  std::vector<std::string> headline;
  std::vector<std::string> keyphrase;  // contiguous in both article and headline
  double score = 0.0;
};

struct MiningConfig {
  int min_n = 2;
  int max_n = 4;
  int min_query_support = 2;      // phrase must appear in at least this many query records
  bool divide_by_length = true;   // the "normalized by length" direction; false multiplies
};

struct MinedKeyphrase {
  std::vector<std::string> phrase;
  double score = 0.0;
};

// Scores every contiguous n-gram (n in [min_n, max_n]) that appears in at
// least min_query_support query records: score = sum over containing
// records of (1 + clicks) divided (or multiplied) by token length. Returns
// the argmax with ties broken longer-first then lexicographic, or nothing
// when no phrase reaches the support threshold.
std::optional<MinedKeyphrase> mine_keyphrase(const std::vector<QueryRecord>& queries,
                                             const MiningConfig& cfg = {});

struct AlignConfig {
  int min_article_tokens = 100;
  int max_article_tokens = 600;
  int min_headline_tokens = 3;
  int max_headline_tokens = 20;
};

struct DropStats {
  long long kept = 0;
  long long no_keyphrase = 0;
  long long article_too_short = 0;
  long long article_too_long = 0;
  long long headline_too_short = 0;
  long long headline_too_long = 0;
  long long keyphrase_not_in_article = 0;
  long long keyphrase_not_in_headline = 0;

  nlohmann::ordered_json to_json() const;
};

bool contains_subsequence(const std::vector<std::string>& haystack,
                          const std::vector<std::string>& needle);

// Keeps only articles whose mined keyphrase is contained in both the
// article and the headline and whose lengths are within bounds. The first
// failing check (in the order of the DropStats fields) is the recorded
// drop reason.
std::vector<AlignedTriple> align_and_filter(const std::vector<ArticleRecord>& articles,
                                            const std::map<std::string, MinedKeyphrase>& mined,
                                            DropStats* stats = nullptr,
                                            const AlignConfig& cfg = {});

struct SplitResult {
  std::vector<AlignedTriple> train;
  std::vector<AlignedTriple> test;
  std::vector<AlignedTriple> dev;
};

// Deterministic shuffled partition. Ratios must sum to 1; sizes are
// floor(ratio * n) with the remainder assigned train, then test, then dev.
SplitResult split_triples(std::vector<AlignedTriple> triples, const std::array<double, 3>& ratios,
                          std::uint64_t seed);

// ---------------------------------------------------------------------
// Synthetic corpus generator. Each article carries facts_per_article
// planted facts: a keyphrase plus an adjacent marker token inside one fact
// sentence. The headline realizes exactly one fact (position-biased) as
// topic-phrase + keyphrase + marker + tail. Queries concentrate on the
// headline fact's keyphrase with high click counts so mining recovers it.
// ---------------------------------------------------------------------

struct SynthConfig {
  std::uint64_t seed = 1;
  int n_articles = 100;
  int facts_per_article = 3;
  int filler_vocab = 300;
  int keyphrase_vocab = 48;  // distinct keyphrase word tokens
  int marker_vocab = 24;
  int topic_vocab = 30;
  int min_article_tokens = 100;
  int kp_min_len = 2;
  int kp_max_len = 2;  // longer common phrases always lose to their own 2-gram under divide-by-length scoring
  int headline_fact_bias_pct = 70;  // probability the first listed fact is the headline fact
};

struct PlantedFact {
  std::vector<std::string> keyphrase;
  std::string marker;
  bool is_headline_fact = false;
};

struct SynthArticle {
  ArticleRecord record;
  std::vector<PlantedFact> facts;
};

struct SynthCorpus {
  std::vector<SynthArticle> articles;
  std::vector<QueryRecord> queries;
};

SynthCorpus generate_synthetic_corpus(const SynthConfig& cfg);

}  // namespace keyhead
