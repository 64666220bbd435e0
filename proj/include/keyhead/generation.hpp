#pragma once

#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "keyhead/decode.hpp"
#include "keyhead/errors.hpp"
#include "keyhead/keyphrase.hpp"
#include "keyhead/model.hpp"
#include "keyhead/vocab.hpp"

namespace keyhead {

// Wraps a frozen model into a next-token scorer. The model must outlive
// the returned scorer; the encoder runs once per scorer.
template <class Real>
StepScorer make_scorer(const HeadlineModel<Real>& model, const std::vector<int>& article_ids,
                       const std::optional<std::vector<int>>& keyphrase_ids) {
  auto ctx = std::make_shared<typename HeadlineModel<Real>::DecodeContext>(
      model.prepare(article_ids, keyphrase_ids));
  const HeadlineModel<Real>* m = &model;
  return [m, ctx](const std::vector<int>& prefix) { return m->next_log_probs(*ctx, prefix); };
}

// One headline per keyphrase, order preserved: headline i is the top beam
// result conditioned on keyphrase i.
template <class Real>
std::vector<ScoredSequence> generate_multi(const HeadlineModel<Real>& model,
                                           const std::vector<int>& article_ids,
                                           const std::vector<std::vector<int>>& keyphrases,
                                           DecodeConfig cfg) {
  if (!variant_needs_keyphrase(model.config().variant)) {
    throw ContractError(
        "generate_multi: model is keyphrase-agnostic; use beam_search with top_k instead");
  }
  if (keyphrases.empty()) throw ContractError("generate_multi: needs at least one keyphrase");
  cfg.top_k = 1;
  std::vector<ScoredSequence> out;
  out.reserve(keyphrases.size());
  for (const auto& kp : keyphrases) {
    auto scorer = make_scorer(model, article_ids, kp);
    auto ranked = beam_search(scorer, Vocabulary::kBosId, Vocabulary::kEosId, cfg);
    if (ranked.empty()) throw ContractError("generate_multi: decoding produced no hypothesis");
    out.push_back(std::move(ranked.front()));
  }
  return out;
}

// Beam-searched keyphrase generation from an article-to-keyphrase model:
// top beams filtered to 2-4 tokens, deduplicated, best first.
template <class Real>
std::vector<KeyphraseCandidate> seq2seq_keyphrases(const HeadlineModel<Real>& model,
                                                   const std::vector<int>& article_ids, int k,
                                                   DecodeConfig cfg, const Vocabulary& vocab) {
  if (k < 1) throw ContractError("seq2seq_keyphrases: k must be at least 1");
  cfg.beam_size = std::max(cfg.beam_size, 3 * k);
  cfg.top_k = cfg.beam_size;
  auto scorer = make_scorer<Real>(model, article_ids, std::nullopt);
  auto ranked = beam_search(scorer, Vocabulary::kBosId, Vocabulary::kEosId, cfg);

  std::vector<KeyphraseCandidate> out;
  std::set<std::vector<std::string>> seen;
  for (const auto& seq : ranked) {
    std::vector<std::string> phrase = vocab.decode(seq.tokens);
    if (phrase.size() < 2 || phrase.size() > 4) continue;
    if (!seen.insert(phrase).second) continue;
    out.push_back({phrase, seq.normalized_score, CandidateSource::kSeq2seq});
    if (static_cast<int>(out.size()) == k) break;
  }
  return out;
}

}  // namespace keyhead
