#pragma once

#include <string>
#include <vector>

namespace keyhead {

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

enum class RougeMetric { kRouge1, kRouge2, kRougeL };

// Clipped n-gram overlap. Empty n-gram sets on either side yield zeros.
RougeScore rouge_n(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference, int n);

// Longest-common-subsequence ROUGE with beta = 1.
RougeScore rouge_l(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference);

RougeScore rouge(const std::vector<std::string>& candidate,
                 const std::vector<std::string>& reference, RougeMetric metric);

struct DistinctResult {
  double value = 0.0;
  bool degenerate = false;  // every headline shorter than n
};

// Distinct n-grams across all K headlines divided by the total n-gram count.
DistinctResult distinct_n(const std::vector<std::vector<std::string>>& headlines, int n);

// 1 when any candidate equals the gold phrase token for token.
int em_at_k(const std::vector<std::vector<std::string>>& candidates,
            const std::vector<std::string>& gold);

// Fraction of unique gold tokens covered by the union of candidate tokens.
double recall_at_k(const std::vector<std::vector<std::string>>& candidates,
                   const std::vector<std::string>& gold);

struct BestOfK {
  RougeScore score;
  int index = -1;  // headline achieving the max f1 (first on ties)
};

BestOfK best_of_k_rouge(const std::vector<std::vector<std::string>>& headlines,
                        const std::vector<std::string>& gold, RougeMetric metric);

}  // namespace keyhead
