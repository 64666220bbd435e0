#include "keyhead/retrieval.hpp"

#include <algorithm>
#include <cmath>

#include "keyhead/errors.hpp"

namespace keyhead {

HeadlineIndex HeadlineIndex::build(
    const std::map<std::string, std::vector<std::vector<std::string>>>& headlines, Mode mode) {
  if (headlines.empty()) throw ContractError("build_index: no articles");
  HeadlineIndex index;
  index.mode_ = mode;

  long long total_length = 0;
  for (const auto& [article_id, slots] : headlines) {  // std::map iteration is id-sorted
    if (slots.empty()) throw ContractError("build_index: article " + article_id + " has no headlines");
    if (mode == Mode::kConcat) {
      DocInfo doc{article_id, 0, 0};
      std::map<std::string, int> tf;  // ordered for deterministic posting layout
      for (const auto& h : slots) {
        doc.length += static_cast<int>(h.size());
        for (const auto& tok : h) ++tf[tok];
      }
      int doc_idx = static_cast<int>(index.docs_.size());
      index.docs_.push_back(doc);
      total_length += doc.length;
      for (const auto& [tok, count] : tf) index.postings_[tok].push_back({doc_idx, count});
    } else {
      for (std::size_t slot = 0; slot < slots.size(); ++slot) {
        DocInfo doc{article_id, static_cast<int>(slot), static_cast<int>(slots[slot].size())};
        std::map<std::string, int> tf;
        for (const auto& tok : slots[slot]) ++tf[tok];
        int doc_idx = static_cast<int>(index.docs_.size());
        index.docs_.push_back(doc);
        total_length += doc.length;
        for (const auto& [tok, count] : tf) index.postings_[tok].push_back({doc_idx, count});
      }
    }
  }
  index.avg_length_ = static_cast<double>(total_length) / static_cast<double>(index.docs_.size());
  return index;
}

std::vector<SearchHit> search(const HeadlineIndex& index, const std::vector<std::string>& query,
                              int top_n, const Bm25Params& params) {
  if (top_n < 1) throw ContractError("search: top_n must be at least 1");
  const double n_docs = index.doc_count();
  std::unordered_map<int, double> doc_scores;
  for (const auto& term : query) {
    auto it = index.postings().find(term);
    if (it == index.postings().end()) continue;
    const auto& plist = it->second;
    double df = static_cast<double>(plist.size());
    double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
    for (const auto& posting : plist) {
      double tf = posting.tf;
      double len = index.docs()[static_cast<std::size_t>(posting.doc)].length;
      double denom = tf + params.k1 * (1.0 - params.b + params.b * len / index.average_length());
      doc_scores[posting.doc] += idf * tf * (params.k1 + 1.0) / denom;
    }
  }

  // Aggregate per article: sum is the concat-mode identity, max pools slots.
  std::map<std::string, double> article_scores;
  for (const auto& [doc, score] : doc_scores) {
    const auto& info = index.docs()[static_cast<std::size_t>(doc)];
    if (index.mode() == HeadlineIndex::Mode::kConcat) {
      article_scores[info.article_id] = score;
    } else {
      auto it = article_scores.find(info.article_id);
      if (it == article_scores.end()) {
        article_scores[info.article_id] = score;
      } else {
        it->second = std::max(it->second, score);
      }
    }
  }

  std::vector<SearchHit> hits;
  hits.reserve(article_scores.size());
  for (const auto& [id, score] : article_scores) hits.push_back({id, score});
  std::stable_sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.article_id < b.article_id;
  });
  if (static_cast<int>(hits.size()) > top_n) hits.resize(static_cast<std::size_t>(top_n));
  return hits;
}

RetrievalReport map_at_n(const HeadlineIndex& index, const std::vector<RetrievalQuery>& queries,
                         int n, const Bm25Params& params) {
  if (queries.empty()) throw ContractError("map_at_n: no queries");
  if (n < 1) throw ContractError("map_at_n: N must be at least 1");
  RetrievalReport report;
  double ap_sum = 0.0;
  int hits_within = 0;
  for (const auto& q : queries) {
    auto ranking = search(index, q.query, index.doc_count() + 1, params);
    int rank = 0;
    for (std::size_t i = 0; i < ranking.size(); ++i) {
      if (ranking[i].article_id == q.gold_article_id) {
        rank = static_cast<int>(i) + 1;
        break;
      }
    }
    report.ranks.push_back(rank);
    if (rank >= 1 && rank <= n) {
      ap_sum += 1.0 / rank;
      ++hits_within;
    }
  }
  report.map = 100.0 * ap_sum / static_cast<double>(queries.size());
  report.hit_rate = 100.0 * static_cast<double>(hits_within) / static_cast<double>(queries.size());
  return report;
}

}  // namespace keyhead
