#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "keyhead/corpus.hpp"
#include "keyhead/errors.hpp"
#include "keyhead/model.hpp"
#include "keyhead/seeds.hpp"
#include "keyhead/tensor.hpp"
#include "keyhead/vocab.hpp"

namespace keyhead {

// Inverse-sqrt schedule with linear warmup, scaled by d_model^-0.5.
inline double warmup_inverse_sqrt_lr(int step, int d_model, int warmup_steps, double scale) {
  double s = step;
  return scale / std::sqrt(static_cast<double>(d_model)) *
         std::min(1.0 / std::sqrt(s), s / std::pow(static_cast<double>(warmup_steps), 1.5));
}

template <class Real>
class AdamOptimizer {
 public:
  AdamOptimizer(ParamList<Real> params, double beta1 = 0.9, double beta2 = 0.98,
                double eps = 1e-9)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto& [name, p] : params_) {
      m_.emplace_back(p->numel(), 0.0);
      v_.emplace_back(p->numel(), 0.0);
    }
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p->zero_grad();
  }

  void apply(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
      Tensor<Real>* p = params_[pi].second;
      auto& m = m_[pi];
      auto& v = v_[pi];
      const auto& g = p->grad();
      auto& data = p->data();
      for (std::size_t i = 0; i < data.size(); ++i) {
        double gi = static_cast<double>(g[i]);
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
        double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
        data[i] -= static_cast<Real>(lr * update);
      }
    }
  }

  const ParamList<Real>& params() const { return params_; }

 private:
  ParamList<Real> params_;
  double beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// One teacher-forcing training example in id space.
struct EncodedTriple {
  std::vector<int> article;
  std::optional<std::vector<int>> keyphrase;
  std::vector<int> prefix;  // <bos> y_0 ... y_{T-2}
  std::vector<int> gold;    // y_0 ... y_{T-1} = <eos>
};

// Maps a corpus triple into ids. Articles over max_article_len are
// truncated (flagged through the return); over-length headlines or
// keyphrases violate the training contract.
inline EncodedTriple encode_triple(const AlignedTriple& t, const Vocabulary& vocab,
                                   const ModelConfig& cfg, bool* truncated = nullptr) {
  EncodedTriple e;
  e.article = vocab.encode(t.article);
  if (static_cast<int>(e.article.size()) > cfg.max_article_len) {
    e.article.resize(static_cast<std::size_t>(cfg.max_article_len));
    if (truncated) *truncated = true;
  }
  if (variant_needs_keyphrase(cfg.variant)) {
    if (static_cast<int>(t.keyphrase.size()) > cfg.max_keyphrase_len) {
      throw ContractError("encode_triple: keyphrase exceeds max_keyphrase_len");
    }
    e.keyphrase = vocab.encode(t.keyphrase);
  }
  if (static_cast<int>(t.headline.size()) > cfg.max_headline_len) {
    throw ContractError("encode_triple: headline exceeds max_headline_len");
  }
  std::vector<int> y = vocab.encode(t.headline);
  e.prefix.push_back(Vocabulary::kBosId);
  e.prefix.insert(e.prefix.end(), y.begin(), y.end());
  e.gold = y;
  e.gold.push_back(Vocabulary::kEosId);
  return e;
}

struct TrainConfig {
  int max_steps = 1000;
  int batch_size = 4;
  double lr_scale = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double adam_eps = 1e-9;
  int warmup_steps = 400;
  double label_smoothing = 0.1;
  bool use_dropout = true;
  std::uint64_t seed = 1;
  int checkpoint_every = 0;  // 0 checkpoints only at the end
};

struct TrainResult {
  std::vector<double> loss_curve;  // per-token loss per step
  int steps_run = 0;
};

// Average per-token negative log-likelihood over a corpus, forward only.
template <class Real>
double corpus_loss(const HeadlineModel<Real>& model, const std::vector<EncodedTriple>& corpus,
                   double label_smoothing = 0.0) {
  NoGradScope<Real> no_grad;
  double total = 0.0;
  long long tokens = 0;
  for (const auto& e : corpus) {
    auto fwd = model.forward(e.article, e.keyphrase, e.prefix);
    double l = static_cast<double>(model.loss(fwd, e.gold, label_smoothing).at(0));
    total += l * static_cast<double>(e.gold.size());
    tokens += static_cast<long long>(e.gold.size());
  }
  return total / static_cast<double>(tokens);
}

// SGD loop: uniform batch sampling, summed token-weighted loss, one tape
// per step, Adam with the warmup schedule. Deterministic given the seed.
template <class Real>
class HeadlineTrainer {
 public:
  using StepCallback = std::function<void(int step, double per_token_loss)>;
  using CheckpointCallback = std::function<void(int step)>;

  HeadlineTrainer(HeadlineModel<Real>& model, const TrainConfig& cfg)
      : model_(model),
        cfg_(cfg),
        optimizer_(model.named_parameters(), cfg.beta1, cfg.beta2, cfg.adam_eps),
        batch_rng_(derive_seed(cfg.seed, "batches")),
        dropout_rng_(derive_seed(cfg.seed, "dropout")) {}

  TrainResult train(const std::vector<EncodedTriple>& corpus, const StepCallback& on_step = {},
                    const CheckpointCallback& on_checkpoint = {}) {
    if (corpus.empty()) throw ContractError("train: empty corpus");
    TrainResult result;
    for (int step = 1; step <= cfg_.max_steps; ++step) {
      double loss = run_step(corpus, step);
      result.loss_curve.push_back(loss);
      result.steps_run = step;
      if (on_step) on_step(step, loss);
      if (on_checkpoint && cfg_.checkpoint_every > 0 && step % cfg_.checkpoint_every == 0) {
        on_checkpoint(step);
      }
    }
    if (on_checkpoint) on_checkpoint(result.steps_run);
    return result;
  }

  double run_step(const std::vector<EncodedTriple>& corpus, int step) {
    Tape<Real> tape;
    typename Tape<Real>::Scope scope(tape);
    optimizer_.zero_grad();

    std::mt19937_64* drop = nullptr;
    if (cfg_.use_dropout && model_.config().dropout_rate > 0.0) drop = &dropout_rng_;

    Tensor<Real> total = Tensor<Real>::zeros({1});
    long long tokens = 0;
    for (int b = 0; b < cfg_.batch_size; ++b) {
      const EncodedTriple& e = corpus[static_cast<std::size_t>(batch_rng_() % corpus.size())];
      auto fwd = model_.forward(e.article, e.keyphrase, e.prefix, drop);
      Tensor<Real> l = model_.loss(fwd, e.gold, cfg_.label_smoothing);
      total = add(total, scale(l, static_cast<Real>(e.gold.size())));
      tokens += static_cast<long long>(e.gold.size());
    }
    Tensor<Real> loss = scale(total, Real(1.0 / static_cast<double>(tokens)));
    tape.backward(loss);
    optimizer_.apply(warmup_inverse_sqrt_lr(step, model_.config().d_model, cfg_.warmup_steps,
                                            cfg_.lr_scale));
    return static_cast<double>(loss.at(0));
  }

 private:
  HeadlineModel<Real>& model_;
  TrainConfig cfg_;
  AdamOptimizer<Real> optimizer_;
  std::mt19937_64 batch_rng_;
  std::mt19937_64 dropout_rng_;
};

}  // namespace keyhead
