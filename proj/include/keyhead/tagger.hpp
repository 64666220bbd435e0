#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "keyhead/keyphrase.hpp"
#include "keyhead/model.hpp"
#include "keyhead/seeds.hpp"
#include "keyhead/tensor.hpp"

namespace keyhead {

// Span tagger: the shared encoder stack with two per-position heads that
// score keyphrase begin and end positions over the article.
template <class Real>
class SlotTagger {
 public:
  explicit SlotTagger(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(derive_seed(cfg_.seed, "slot_tagger"));
    Real emb_std = Real(1.0 / std::sqrt(static_cast<double>(cfg_.d_model)));
    embedding_ = Tensor<Real>::randn({cfg_.vocab_size, cfg_.d_model}, rng, emb_std, true);
    blocks_.resize(static_cast<std::size_t>(cfg_.n_blocks));
    for (auto& b : blocks_) b.init(cfg_, rng);
    begin_head_.init(cfg_.d_model, 1, rng);
    end_head_.init(cfg_.d_model, 1, rng);
  }

  const ModelConfig& config() const { return cfg_; }

  struct HeadOutputs {
    Tensor<Real> begin_probs;  // 1 x len
    Tensor<Real> end_probs;    // 1 x len
  };

  HeadOutputs forward(const std::vector<int>& article_ids, std::mt19937_64* drop_rng = nullptr) const {
    if (article_ids.empty()) throw ContractError("slot tagger: empty article");
    std::vector<int> ids = article_ids;
    if (static_cast<int>(ids.size()) > cfg_.max_article_len)
      ids.resize(static_cast<std::size_t>(cfg_.max_article_len));
    Tensor<Real> x = scale(embedding_rows(embedding_, ids),
                           Real(std::sqrt(static_cast<double>(cfg_.d_model))));
    x = add(x, positional_encoding<Real>(static_cast<int>(ids.size()), cfg_.d_model));
    if (drop_rng) x = dropout(x, cfg_.dropout_rate, *drop_rng);
    for (const auto& b : blocks_) x = b.forward(x, cfg_.dropout_rate, drop_rng);
    HeadOutputs out;
    out.begin_probs = softmax_rows(transpose(begin_head_.forward(x)));
    out.end_probs = softmax_rows(transpose(end_head_.forward(x)));
    return out;
  }

  // Cross entropy on the gold begin/end positions.
  Tensor<Real> loss(const std::vector<int>& article_ids, int gold_begin, int gold_end,
                    std::mt19937_64* drop_rng = nullptr) const {
    HeadOutputs heads = forward(article_ids, drop_rng);
    if (gold_begin < 0 || gold_end < gold_begin || gold_end >= heads.begin_probs.cols()) {
      throw ContractError("slot tagger: gold span out of range");
    }
    Tensor<Real> lb = pick_per_row(log_floor(heads.begin_probs, Real(1e-12)), {gold_begin});
    Tensor<Real> le = pick_per_row(log_floor(heads.end_probs, Real(1e-12)), {gold_end});
    return scale(add(sum_all(lb), sum_all(le)), Real(-1));
  }

  SpanScores span_scores(const std::vector<int>& article_ids) const {
    NoGradScope<Real> no_grad;
    HeadOutputs heads = forward(article_ids);
    SpanScores s;
    for (int i = 0; i < heads.begin_probs.cols(); ++i) {
      s.begin_probs.push_back(static_cast<double>(heads.begin_probs.at(0, i)));
      s.end_probs.push_back(static_cast<double>(heads.end_probs.at(0, i)));
    }
    return s;
  }

  std::vector<KeyphraseCandidate> predict(const std::vector<int>& article_ids,
                                          const std::vector<std::string>& article_tokens,
                                          int top_k) const {
    std::vector<std::string> window = article_tokens;
    if (static_cast<int>(window.size()) > cfg_.max_article_len)
      window.resize(static_cast<std::size_t>(cfg_.max_article_len));
    return slot_predict_spans(span_scores(article_ids), window, top_k);
  }

  ParamList<Real> named_parameters() {
    ParamList<Real> out;
    out.emplace_back("embedding", &embedding_);
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].collect("encoder." + std::to_string(i), out);
    begin_head_.collect("begin_head", out);
    end_head_.collect("end_head", out);
    return out;
  }

 private:
  ModelConfig cfg_;
  Tensor<Real> embedding_;
  std::vector<EncoderBlock<Real>> blocks_;
  Linear<Real> begin_head_, end_head_;
};

// First occurrence of the keyphrase in the article, as (begin, end).
inline std::optional<std::pair<int, int>> find_span(const std::vector<std::string>& article,
                                                    const std::vector<std::string>& phrase) {
  if (phrase.empty() || phrase.size() > article.size()) return std::nullopt;
  for (std::size_t s = 0; s + phrase.size() <= article.size(); ++s) {
    bool match = true;
    for (std::size_t i = 0; i < phrase.size(); ++i) {
      if (article[s + i] != phrase[i]) {
        match = false;
        break;
      }
    }
    if (match) return std::make_pair(static_cast<int>(s), static_cast<int>(s + phrase.size() - 1));
  }
  return std::nullopt;
}

}  // namespace keyhead
