#include <doctest.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "keyhead/metrics.hpp"

using namespace keyhead;

namespace {

using Tokens = std::vector<std::string>;

// Exhaustive recursive LCS, the independent oracle for short sequences.
int lcs_recursive(const Tokens& a, const Tokens& b, std::size_t i, std::size_t j) {
  if (i == a.size() || j == b.size()) return 0;
  if (a[i] == b[j]) return 1 + lcs_recursive(a, b, i + 1, j + 1);
  return std::max(lcs_recursive(a, b, i + 1, j), lcs_recursive(a, b, i, j + 1));
}

Tokens random_tokens(std::mt19937_64& rng, int max_len, int alphabet) {
  Tokens t;
  int len = static_cast<int>(rng() % static_cast<unsigned>(max_len + 1));
  for (int i = 0; i < len; ++i)
    t.push_back(std::string(1, static_cast<char>('a' + rng() % static_cast<unsigned>(alphabet))));
  return t;
}

}  // namespace

TEST_CASE("rouge_n hand fixtures") {
  Tokens abc = {"a", "b", "c"};
  auto self_score = rouge_n(abc, abc, 1);
  CHECK(self_score.precision == 1.0);
  CHECK(self_score.recall == 1.0);
  CHECK(self_score.f1 == 1.0);

  auto disjoint = rouge_n({"x", "y"}, abc, 1);
  CHECK(disjoint.precision == 0.0);
  CHECK(disjoint.recall == 0.0);
  CHECK(disjoint.f1 == 0.0);

  auto partial = rouge_n(abc, {"a", "b", "d"}, 1);
  CHECK(partial.precision == doctest::Approx(2.0 / 3.0));
  CHECK(partial.recall == doctest::Approx(2.0 / 3.0));
  CHECK(partial.f1 == doctest::Approx(2.0 / 3.0));

  // overlap counts are clipped
  auto clipped = rouge_n({"a", "a", "b"}, {"a", "b"}, 1);
  CHECK(clipped.precision == doctest::Approx(2.0 / 3.0));
  CHECK(clipped.recall == doctest::Approx(1.0));

  auto bigram = rouge_n({"a", "b", "c"}, {"a", "b", "d"}, 2);
  CHECK(bigram.precision == doctest::Approx(0.5));
  CHECK(bigram.recall == doctest::Approx(0.5));

  // candidate shorter than n yields zeros
  auto degenerate = rouge_n({"a"}, abc, 2);
  CHECK(degenerate.f1 == 0.0);
}

TEST_CASE("rouge_l hand fixtures") {
  Tokens abc = {"a", "b", "c"};
  CHECK(rouge_l(abc, abc).f1 == 1.0);

  auto swapped = rouge_l({"a", "c", "b"}, {"a", "b", "c"});
  CHECK(swapped.precision == doctest::Approx(2.0 / 3.0));
  CHECK(swapped.recall == doctest::Approx(2.0 / 3.0));

  CHECK(rouge_l({}, abc).f1 == 0.0);
}

TEST_CASE("rouge_l matches the exhaustive recursion oracle") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    Tokens a = random_tokens(rng, 8, 4);
    Tokens b = random_tokens(rng, 8, 4);
    int lcs = lcs_recursive(a, b, 0, 0);
    auto s = rouge_l(a, b);
    if (a.empty() || b.empty()) {
      CHECK(s.f1 == 0.0);
      continue;
    }
    CHECK(s.precision == doctest::Approx(static_cast<double>(lcs) / a.size()).epsilon(1e-12));
    CHECK(s.recall == doctest::Approx(static_cast<double>(lcs) / b.size()).epsilon(1e-12));
  }
}

TEST_CASE("rouge_n swap symmetry and self identity") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 200; ++trial) {
    Tokens a = random_tokens(rng, 6, 3);
    Tokens b = random_tokens(rng, 6, 3);
    for (int n = 1; n <= 2; ++n) {
      auto ab = rouge_n(a, b, n);
      auto ba = rouge_n(b, a, n);
      CHECK(ab.precision == doctest::Approx(ba.recall).epsilon(1e-12));
      CHECK(ab.recall == doctest::Approx(ba.precision).epsilon(1e-12));
      if (static_cast<int>(a.size()) >= n && !a.empty()) {
        CHECK(rouge_n(a, a, n).f1 == doctest::Approx(1.0));
      }
    }
  }
}

TEST_CASE("distinct_n hand fixtures") {
  auto three_copies = distinct_n({{"a", "b"}, {"a", "b"}, {"a", "b"}}, 1);
  CHECK_FALSE(three_copies.degenerate);
  CHECK(three_copies.value == doctest::Approx(1.0 / 3.0));

  auto unique_tokens = distinct_n({{"a", "b", "c", "d"}}, 1);
  CHECK(unique_tokens.value == doctest::Approx(1.0));

  auto disjoint_pair = distinct_n({{"a", "b"}, {"c", "d"}}, 1);
  CHECK(disjoint_pair.value == doctest::Approx(1.0));

  auto too_short = distinct_n({{"a"}, {"b"}}, 2);
  CHECK(too_short.degenerate);
  CHECK(too_short.value == 0.0);
}

TEST_CASE("distinct_n equals the direct-count oracle") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 1000; ++trial) {
    int k = 1 + static_cast<int>(rng() % 4);
    std::vector<Tokens> headlines;
    for (int i = 0; i < k; ++i) headlines.push_back(random_tokens(rng, 6, 3));
    int n = 1 + static_cast<int>(rng() % 2);

    // direct count over joined n-grams
    std::vector<std::string> all;
    for (const auto& h : headlines) {
      if (static_cast<int>(h.size()) < n) continue;
      for (std::size_t s = 0; s + static_cast<std::size_t>(n) <= h.size(); ++s) {
        std::string key;
        for (int i = 0; i < n; ++i) key += h[s + static_cast<std::size_t>(i)] + "|";
        all.push_back(key);
      }
    }
    auto got = distinct_n(headlines, n);
    if (all.empty()) {
      CHECK(got.degenerate);
      continue;
    }
    std::sort(all.begin(), all.end());
    auto uniq = std::unique(all.begin(), all.end()) - all.begin();
    CHECK(got.value == doctest::Approx(static_cast<double>(uniq) / all.size()).epsilon(1e-12));
    CHECK(got.value > 0.0);
    CHECK(got.value <= 1.0);
    CHECK((got.value == 1.0) == (static_cast<std::size_t>(uniq) == all.size()));
  }
}

TEST_CASE("exact match and recall at k") {
  Tokens gold = {"a", "b"};
  CHECK(em_at_k({{"x", "y"}, {"a", "b"}}, gold) == 1);
  CHECK(em_at_k({{"x", "y"}}, gold) == 0);

  CHECK(recall_at_k({{"a", "b"}}, {"a", "b", "c"}) == doctest::Approx(2.0 / 3.0));

  // exact match implies full token coverage
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    Tokens g = random_tokens(rng, 4, 3);
    if (g.empty()) continue;
    std::vector<Tokens> cands = {random_tokens(rng, 4, 3), g};
    CHECK(em_at_k(cands, g) == 1);
    CHECK(recall_at_k(cands, g) == doctest::Approx(1.0));
  }
}

TEST_CASE("best of k rouge") {
  Tokens gold = {"a", "b", "c"};
  std::vector<Tokens> one = {{"a", "x", "c"}};
  auto single = best_of_k_rouge(one, gold, RougeMetric::kRouge1);
  CHECK(single.index == 0);
  CHECK(single.score.f1 == doctest::Approx(rouge_n(one[0], gold, 1).f1));

  std::vector<Tokens> three = {{"x", "y"}, {"a", "b", "c"}, {"a", "b"}};
  auto best = best_of_k_rouge(three, gold, RougeMetric::kRougeL);
  CHECK(best.index == 1);
  CHECK(best.score.f1 == doctest::Approx(1.0));

  double expected = 0.0;
  for (const auto& h : three) expected = std::max(expected, rouge_l(h, gold).f1);
  CHECK(best.score.f1 == doctest::Approx(expected));

  // monotone in K: adding a headline never lowers the best score
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 200; ++trial) {
    Tokens g = random_tokens(rng, 5, 3);
    if (g.empty()) continue;
    std::vector<Tokens> heads;
    double prev = -1.0;
    for (int k = 0; k < 4; ++k) {
      heads.push_back(random_tokens(rng, 5, 3));
      double cur = best_of_k_rouge(heads, g, RougeMetric::kRouge1).score.f1;
      CHECK(cur >= prev);
      prev = cur;
    }
  }
}
