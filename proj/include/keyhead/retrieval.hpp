#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace keyhead {

struct RetrievalQuery {
  std::vector<std::string> query;
  std::string gold_article_id;
};

// Inverted index over generated headlines. In kConcat mode an article's K
// headlines form one searchable document; in kSeparate mode each headline
// is its own document and an article scores as the max over its slots.
class HeadlineIndex {
 public:
  enum class Mode { kConcat, kSeparate };

  struct Posting {
    int doc = 0;  // index into docs_
    int tf = 0;
  };
  struct DocInfo {
    std::string article_id;
    int slot = 0;
    int length = 0;
  };

  // headlines: article_id -> K tokenized headlines, every article nonempty.
  static HeadlineIndex build(const std::map<std::string, std::vector<std::vector<std::string>>>& headlines,
                             Mode mode = Mode::kConcat);

  Mode mode() const { return mode_; }
  int doc_count() const { return static_cast<int>(docs_.size()); }
  double average_length() const { return avg_length_; }
  const std::vector<DocInfo>& docs() const { return docs_; }
  const std::unordered_map<std::string, std::vector<Posting>>& postings() const { return postings_; }

 private:
  Mode mode_ = Mode::kConcat;
  std::vector<DocInfo> docs_;  // sorted by (article_id, slot)
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  double avg_length_ = 0.0;
};

struct SearchHit {
  std::string article_id;
  double score = 0.0;
};

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

// BM25 with the nonnegative (plus-one) idf: ln(1 + (N - df + .5)/(df + .5)).
// Articles with no matching token are absent from the result. Ties break
// by ascending article_id.
std::vector<SearchHit> search(const HeadlineIndex& index, const std::vector<std::string>& query,
                              int top_n, const Bm25Params& params = {});

struct RetrievalReport {
  double map = 0.0;       // scaled to [0, 100]
  double hit_rate = 0.0;  // fraction of queries with gold ranked within N, in [0, 100]
  std::vector<int> ranks;  // 1-based rank of gold per query; 0 when unranked
};

// With one relevant article per query, average precision is 1/rank when the
// gold article ranks within the top N and 0 otherwise (reciprocal rank
// capped at N).
RetrievalReport map_at_n(const HeadlineIndex& index, const std::vector<RetrievalQuery>& queries,
                         int n, const Bm25Params& params = {});

}  // namespace keyhead
