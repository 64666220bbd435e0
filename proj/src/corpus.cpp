#include "keyhead/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "keyhead/errors.hpp"
#include "keyhead/text.hpp"

namespace keyhead {

namespace {

std::string ngram_key(const std::vector<std::string>& tokens, std::size_t start, int n) {
  std::string key;
  for (int i = 0; i < n; ++i) {
    if (i) key.push_back('\x1f');
    key += tokens[start + static_cast<std::size_t>(i)];
  }
  return key;
}

std::vector<std::string> split_key(const std::string& key) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : key) {
    if (c == '\x1f') {
      tokens.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  tokens.push_back(cur);
  return tokens;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive bounds
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

}  // namespace

std::optional<MinedKeyphrase> mine_keyphrase(const std::vector<QueryRecord>& queries,
                                             const MiningConfig& cfg) {
  if (queries.empty()) throw ContractError("mine_keyphrase: needs at least one normalized query");

  struct PhraseStat {
    int support = 0;          // number of distinct query records containing the phrase
    long long weight = 0;     // sum of (1 + clicks) over those records
    int length = 0;
  };
  std::unordered_map<std::string, PhraseStat> stats;

  for (const auto& q : queries) {
    std::unordered_set<std::string> seen_in_query;
    const auto& toks = q.query;
    for (int n = cfg.min_n; n <= cfg.max_n; ++n) {
      if (static_cast<int>(toks.size()) < n) continue;
      for (std::size_t s = 0; s + static_cast<std::size_t>(n) <= toks.size(); ++s) {
        std::string key = ngram_key(toks, s, n);
        if (!seen_in_query.insert(key).second) continue;  // containment, not occurrences
        auto& st = stats[key];
        st.support += 1;
        st.weight += 1 + q.clicks;
        st.length = n;
      }
    }
  }

  bool found = false;
  std::vector<std::string> best_phrase;
  double best_score = 0.0;
  int best_len = 0;
  for (const auto& [key, st] : stats) {
    if (st.support < cfg.min_query_support) continue;
    double score = cfg.divide_by_length ? static_cast<double>(st.weight) / st.length
                                        : static_cast<double>(st.weight) * st.length;
    std::vector<std::string> phrase = split_key(key);
    bool better = false;
    if (!found || score > best_score) {
      better = true;
    } else if (score == best_score) {
      if (st.length > best_len) {
        better = true;
      } else if (st.length == best_len && phrase < best_phrase) {
        better = true;
      }
    }
    if (better) {
      found = true;
      best_phrase = std::move(phrase);
      best_score = score;
      best_len = st.length;
    }
  }
  if (!found) return std::nullopt;
  return MinedKeyphrase{std::move(best_phrase), best_score};
}

bool contains_subsequence(const std::vector<std::string>& haystack,
                          const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  for (std::size_t s = 0; s + needle.size() <= haystack.size(); ++s) {
    bool match = true;
    for (std::size_t i = 0; i < needle.size(); ++i) {
      if (haystack[s + i] != needle[i]) {
        match = false;
        break;
      }
    }
    if (match) return true;
  }
  return false;
}

nlohmann::ordered_json DropStats::to_json() const {
  return nlohmann::ordered_json{{"kept", kept},
                                {"no_keyphrase", no_keyphrase},
                                {"article_too_short", article_too_short},
                                {"article_too_long", article_too_long},
                                {"headline_too_short", headline_too_short},
                                {"headline_too_long", headline_too_long},
                                {"keyphrase_not_in_article", keyphrase_not_in_article},
                                {"keyphrase_not_in_headline", keyphrase_not_in_headline}};
}

std::vector<AlignedTriple> align_and_filter(const std::vector<ArticleRecord>& articles,
                                            const std::map<std::string, MinedKeyphrase>& mined,
                                            DropStats* stats, const AlignConfig& cfg) {
  DropStats local;
  DropStats& s = stats ? *stats : local;
  std::vector<AlignedTriple> out;
  for (const auto& a : articles) {
    auto it = mined.find(a.article_id);
    if (it == mined.end()) {
      ++s.no_keyphrase;
      continue;
    }
    const int alen = static_cast<int>(a.article.size());
    const int hlen = static_cast<int>(a.headline.size());
    if (alen < cfg.min_article_tokens) {
      ++s.article_too_short;
      continue;
    }
    if (alen > cfg.max_article_tokens) {
      ++s.article_too_long;
      continue;
    }
    if (hlen < cfg.min_headline_tokens) {
      ++s.headline_too_short;
      continue;
    }
    if (hlen > cfg.max_headline_tokens) {
      ++s.headline_too_long;
      continue;
    }
    if (!contains_subsequence(a.article, it->second.phrase)) {
      ++s.keyphrase_not_in_article;
      continue;
    }
    if (!contains_subsequence(a.headline, it->second.phrase)) {
      ++s.keyphrase_not_in_headline;
      continue;
    }
    ++s.kept;
    out.push_back(AlignedTriple{a.article_id, a.article, a.headline, it->second.phrase,
                                it->second.score});
  }
  return out;
}

SplitResult split_triples(std::vector<AlignedTriple> triples, const std::array<double, 3>& ratios,
                          std::uint64_t seed) {
  if (triples.empty()) throw ContractError("split: empty input");
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) throw ContractError("split: ratios must sum to 1");

  std::mt19937_64 rng(seed);
  // Fisher-Yates with our own index draw for cross-platform determinism.
  for (std::size_t i = triples.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(triples[i - 1], triples[j]);
  }

  const std::size_t n = triples.size();
  std::array<std::size_t, 3> sizes{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    sizes[static_cast<std::size_t>(i)] = static_cast<std::size_t>(ratios[static_cast<std::size_t>(i)] * static_cast<double>(n));
    assigned += sizes[static_cast<std::size_t>(i)];
  }
  for (int i = 0; assigned < n; i = (i + 1) % 3) {
    ++sizes[static_cast<std::size_t>(i)];
    ++assigned;
  }

  SplitResult r;
  auto it = triples.begin();
  r.train.assign(it, it + static_cast<std::ptrdiff_t>(sizes[0]));
  it += static_cast<std::ptrdiff_t>(sizes[0]);
  r.test.assign(it, it + static_cast<std::ptrdiff_t>(sizes[1]));
  it += static_cast<std::ptrdiff_t>(sizes[1]);
  r.dev.assign(it, triples.end());
  return r;
}

SynthCorpus generate_synthetic_corpus(const SynthConfig& cfg) {
  if (cfg.n_articles <= 0 || cfg.facts_per_article <= 0 || cfg.filler_vocab <= 0 ||
      cfg.keyphrase_vocab <= 0 || cfg.marker_vocab <= 0 || cfg.topic_vocab <= 0) {
    throw ContractError("synthetic corpus: all sizes must be positive");
  }
  if (cfg.kp_min_len < 2 || cfg.kp_max_len > 4 || cfg.kp_min_len > cfg.kp_max_len) {
    throw ContractError("synthetic corpus: keyphrase length range must sit inside [2, 4]");
  }
  // Each fact needs a distinct keyphrase word set and marker within its article.
  if (cfg.keyphrase_vocab < cfg.facts_per_article * cfg.kp_max_len) {
    throw ContractError("synthetic corpus: keyphrase vocabulary too small to plant distinct keyphrases");
  }
  if (cfg.marker_vocab < cfg.facts_per_article) {
    throw ContractError("synthetic corpus: marker vocabulary too small to plant distinct markers");
  }
  if (cfg.topic_vocab < 3) throw ContractError("synthetic corpus: topic vocabulary too small");

  auto name = [](const char* prefix, int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%s%03d", prefix, i);
    return std::string(buf);
  };

  std::vector<std::string> filler, kp_words, markers, topics;
  for (int i = 0; i < cfg.filler_vocab; ++i) filler.push_back(name("w", i));
  for (int i = 0; i < cfg.keyphrase_vocab; ++i) kp_words.push_back(name("kp", i));
  for (int i = 0; i < cfg.marker_vocab; ++i) markers.push_back(name("mk", i));
  for (int i = 0; i < cfg.topic_vocab; ++i) topics.push_back(name("tp", i));
  const std::vector<std::string> tails = {"today", "tonight", "latest"};
  // Tail token frequencies create cheap intra-fact beam alternatives;
  // gaps stay well below the cost of switching facts.
  const std::vector<int> tail_weights = {40, 35, 25};

  std::mt19937_64 rng(cfg.seed);
  auto pick = [&](const std::vector<std::string>& pool) {
    return pool[static_cast<std::size_t>(rng() % pool.size())];
  };
  auto pick_weighted = [&](const std::vector<std::string>& pool, const std::vector<int>& weights) {
    int total = 0;
    for (int w : weights) total += w;
    int roll = uniform_int(rng, 0, total - 1);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      roll -= weights[i];
      if (roll < 0) return pool[i];
    }
    return pool.back();
  };
  auto sample_distinct = [&](const std::vector<std::string>& pool, int count) {
    std::set<int> chosen;
    while (static_cast<int>(chosen.size()) < count) chosen.insert(static_cast<int>(rng() % pool.size()));
    std::vector<std::string> out;
    for (int i : chosen) out.push_back(pool[static_cast<std::size_t>(i)]);
    // set iteration is sorted; shuffle so order carries no signal
    for (std::size_t i = out.size(); i > 1; --i) std::swap(out[i - 1], out[rng() % i]);
    return out;
  };

  SynthCorpus corpus;
  for (int ai = 0; ai < cfg.n_articles; ++ai) {
    SynthArticle sa;
    sa.record.article_id = name("a", ai);

    std::vector<std::string> topic = sample_distinct(topics, 3);

    // Plant facts with distinct keyphrase words and markers.
    int kp_len = uniform_int(rng, cfg.kp_min_len, cfg.kp_max_len);
    std::vector<std::string> kp_pool = sample_distinct(kp_words, cfg.facts_per_article * kp_len);
    std::vector<std::string> marker_pool = sample_distinct(markers, cfg.facts_per_article);
    for (int f = 0; f < cfg.facts_per_article; ++f) {
      PlantedFact fact;
      for (int w = 0; w < kp_len; ++w)
        fact.keyphrase.push_back(kp_pool[static_cast<std::size_t>(f * kp_len + w)]);
      fact.marker = marker_pool[static_cast<std::size_t>(f)];
      sa.facts.push_back(std::move(fact));
    }

    // Headline fact: position-biased, remaining mass split evenly.
    int headline_fact = 0;
    if (cfg.facts_per_article > 1) {
      int roll = uniform_int(rng, 0, 99);
      if (roll >= cfg.headline_fact_bias_pct) {
        headline_fact = 1 + static_cast<int>(rng() % static_cast<unsigned>(cfg.facts_per_article - 1));
      }
    }
    sa.facts[static_cast<std::size_t>(headline_fact)].is_headline_fact = true;

    // Article body: intro blocks repeating the topic phrase, then one
    // sentence per fact, then filler padding up to the length floor.
    auto& body = sa.record.article;
    for (int block = 0; block < 3; ++block) {
      for (int i = 0; i < 4; ++i) body.push_back(pick(filler));
      body.insert(body.end(), topic.begin(), topic.end());
      for (int i = 0; i < 4; ++i) body.push_back(pick(filler));
    }
    for (const auto& fact : sa.facts) {
      body.push_back(pick(filler));
      body.push_back(pick(filler));
      body.insert(body.end(), fact.keyphrase.begin(), fact.keyphrase.end());
      body.push_back(fact.marker);
      body.push_back(pick(filler));
      body.push_back(pick(filler));
    }
    while (static_cast<int>(body.size()) < cfg.min_article_tokens) body.push_back(pick(filler));

    const PlantedFact& hf = sa.facts[static_cast<std::size_t>(headline_fact)];
    auto& headline = sa.record.headline;
    headline.insert(headline.end(), topic.begin(), topic.end());
    headline.insert(headline.end(), hf.keyphrase.begin(), hf.keyphrase.end());
    headline.push_back(hf.marker);
    headline.push_back(pick_weighted(tails, tail_weights));

    // Queries: the headline fact gets several high-click queries; other
    // facts get at most weak support. Context words never repeat within a
    // fact's query set, so no cross n-gram reaches the support threshold.
    for (int f = 0; f < cfg.facts_per_article; ++f) {
      const PlantedFact& fact = sa.facts[static_cast<std::size_t>(f)];
      bool is_headline = f == headline_fact;
      int n_queries = is_headline ? uniform_int(rng, 4, 6) : uniform_int(rng, 0, 2);
      std::vector<std::string> ctx = sample_distinct(filler, 2 * n_queries + 2);
      std::size_t ctx_at = 0;
      for (int qi = 0; qi < n_queries; ++qi) {
        QueryRecord q;
        q.article_id = sa.record.article_id;
        q.clicks = is_headline ? uniform_int(rng, 4, 9) : uniform_int(rng, 0, 1);
        bool ctx_before = rng() % 2 == 0;
        bool ctx_after = rng() % 2 == 0;
        if (ctx_before) q.query.push_back(ctx[ctx_at++]);
        q.query.insert(q.query.end(), fact.keyphrase.begin(), fact.keyphrase.end());
        if (ctx_after) q.query.push_back(ctx[ctx_at++]);
        corpus.queries.push_back(std::move(q));
      }
    }

    corpus.articles.push_back(std::move(sa));
  }
  return corpus;
}

}  // namespace keyhead
