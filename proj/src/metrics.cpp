#include "keyhead/metrics.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "keyhead/errors.hpp"

namespace keyhead {

namespace {

std::unordered_map<std::string, int> ngram_counts(const std::vector<std::string>& tokens, int n) {
  std::unordered_map<std::string, int> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t s = 0; s + static_cast<std::size_t>(n) <= tokens.size(); ++s) {
    std::string key;
    for (int i = 0; i < n; ++i) {
      if (i) key.push_back('\x1f');
      key += tokens[s + static_cast<std::size_t>(i)];
    }
    ++counts[key];
  }
  return counts;
}

double f_score(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

}  // namespace

RougeScore rouge_n(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference, int n) {
  if (n < 1) throw ContractError("rouge_n: n must be at least 1");
  auto cand = ngram_counts(candidate, n);
  auto ref = ngram_counts(reference, n);
  long long cand_total = 0, ref_total = 0, overlap = 0;
  for (const auto& [k, c] : cand) cand_total += c;
  for (const auto& [k, c] : ref) ref_total += c;
  for (const auto& [k, c] : cand) {
    auto it = ref.find(k);
    if (it != ref.end()) overlap += std::min(c, it->second);
  }
  RougeScore s;
  if (cand_total > 0) s.precision = static_cast<double>(overlap) / static_cast<double>(cand_total);
  if (ref_total > 0) s.recall = static_cast<double>(overlap) / static_cast<double>(ref_total);
  s.f1 = f_score(s.precision, s.recall);
  return s;
}

RougeScore rouge_l(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference) {
  const std::size_t m = candidate.size(), n = reference.size();
  RougeScore s;
  if (m == 0 || n == 0) return s;
  std::vector<int> prev(n + 1, 0), cur(n + 1, 0);
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      if (candidate[i - 1] == reference[j - 1]) {
        cur[j] = prev[j - 1] + 1;
      } else {
        cur[j] = std::max(prev[j], cur[j - 1]);
      }
    }
    std::swap(prev, cur);
  }
  int lcs = prev[n];
  s.precision = static_cast<double>(lcs) / static_cast<double>(m);
  s.recall = static_cast<double>(lcs) / static_cast<double>(n);
  s.f1 = f_score(s.precision, s.recall);
  return s;
}

RougeScore rouge(const std::vector<std::string>& candidate,
                 const std::vector<std::string>& reference, RougeMetric metric) {
  switch (metric) {
    case RougeMetric::kRouge1:
      return rouge_n(candidate, reference, 1);
    case RougeMetric::kRouge2:
      return rouge_n(candidate, reference, 2);
    case RougeMetric::kRougeL:
      return rouge_l(candidate, reference);
  }
  throw ContractError("rouge: unknown metric");
}

DistinctResult distinct_n(const std::vector<std::vector<std::string>>& headlines, int n) {
  if (headlines.empty()) throw ContractError("distinct_n: needs at least one headline");
  if (n < 1) throw ContractError("distinct_n: n must be at least 1");
  std::unordered_set<std::string> distinct;
  long long total = 0;
  for (const auto& h : headlines) {
    for (const auto& [k, c] : ngram_counts(h, n)) {
      distinct.insert(k);
      total += c;
    }
  }
  DistinctResult r;
  if (total == 0) {
    r.degenerate = true;
    return r;
  }
  r.value = static_cast<double>(distinct.size()) / static_cast<double>(total);
  return r;
}

int em_at_k(const std::vector<std::vector<std::string>>& candidates,
            const std::vector<std::string>& gold) {
  if (candidates.empty()) throw ContractError("em_at_k: K must be at least 1");
  for (const auto& c : candidates)
    if (c == gold) return 1;
  return 0;
}

double recall_at_k(const std::vector<std::vector<std::string>>& candidates,
                   const std::vector<std::string>& gold) {
  if (candidates.empty()) throw ContractError("recall_at_k: K must be at least 1");
  std::unordered_set<std::string> gold_types(gold.begin(), gold.end());
  if (gold_types.empty()) return 0.0;
  std::unordered_set<std::string> covered;
  for (const auto& c : candidates)
    for (const auto& tok : c)
      if (gold_types.count(tok)) covered.insert(tok);
  return static_cast<double>(covered.size()) / static_cast<double>(gold_types.size());
}

BestOfK best_of_k_rouge(const std::vector<std::vector<std::string>>& headlines,
                        const std::vector<std::string>& gold, RougeMetric metric) {
  if (headlines.empty()) throw ContractError("best_of_k_rouge: K must be at least 1");
  BestOfK best;
  for (std::size_t i = 0; i < headlines.size(); ++i) {
    RougeScore s = rouge(headlines[i], gold, metric);
    if (best.index < 0 || s.f1 > best.score.f1) {
      best.score = s;
      best.index = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace keyhead
