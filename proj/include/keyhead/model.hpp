#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "keyhead/checkpoint.hpp"
#include "keyhead/errors.hpp"
#include "keyhead/tensor.hpp"
#include "keyhead/vocab.hpp"

namespace keyhead {

// The nine decoder wirings. Base attends the article only; Key adds a
// keyphrase sub-layer; Filter swaps the article for its keyphrase-filtered
// form; the fuse variants combine filtered and original article states by
// addition, stacked cross-attention, or parallel cross-attention; the
// *FuseKey variants add the keyphrase sub-layer on top.
enum class DecoderVariant {
  kBase,
  kKey,
  kFilter,
  kAddFuse,
  kStackFuse,
  kParallelFuse,
  kAddFuseKey,
  kStackFuseKey,
  kParallelFuseKey,
};

inline const std::vector<DecoderVariant>& all_decoder_variants() {
  static const std::vector<DecoderVariant> all = {
      DecoderVariant::kBase,         DecoderVariant::kKey,
      DecoderVariant::kFilter,       DecoderVariant::kAddFuse,
      DecoderVariant::kStackFuse,    DecoderVariant::kParallelFuse,
      DecoderVariant::kAddFuseKey,   DecoderVariant::kStackFuseKey,
      DecoderVariant::kParallelFuseKey,
  };
  return all;
}

inline const char* variant_name(DecoderVariant v) {
  switch (v) {
    case DecoderVariant::kBase: return "base";
    case DecoderVariant::kKey: return "key";
    case DecoderVariant::kFilter: return "filter";
    case DecoderVariant::kAddFuse: return "add_fuse";
    case DecoderVariant::kStackFuse: return "stack_fuse";
    case DecoderVariant::kParallelFuse: return "parallel_fuse";
    case DecoderVariant::kAddFuseKey: return "add_fuse_key";
    case DecoderVariant::kStackFuseKey: return "stack_fuse_key";
    case DecoderVariant::kParallelFuseKey: return "parallel_fuse_key";
  }
  return "unknown";
}

inline DecoderVariant variant_from_name(const std::string& name) {
  for (DecoderVariant v : all_decoder_variants())
    if (name == variant_name(v)) return v;
  throw ContractError("unknown decoder variant '" + name + "'");
}

inline bool variant_needs_keyphrase(DecoderVariant v) { return v != DecoderVariant::kBase; }

inline bool variant_has_key_sublayer(DecoderVariant v) {
  return v == DecoderVariant::kKey || v == DecoderVariant::kAddFuseKey ||
         v == DecoderVariant::kStackFuseKey || v == DecoderVariant::kParallelFuseKey;
}

inline bool variant_uses_filtered(DecoderVariant v) {
  return v != DecoderVariant::kBase && v != DecoderVariant::kKey;
}

// Whether the decoder stack itself consumes the article states (Filter
// sees only the filtered form; the copy head reads the article regardless).
inline bool variant_decoder_reads_article(DecoderVariant v) {
  return v != DecoderVariant::kFilter;
}

inline bool variant_is_add_fuse(DecoderVariant v) {
  return v == DecoderVariant::kAddFuse || v == DecoderVariant::kAddFuseKey;
}
inline bool variant_is_stack_fuse(DecoderVariant v) {
  return v == DecoderVariant::kStackFuse || v == DecoderVariant::kStackFuseKey;
}
inline bool variant_is_parallel_fuse(DecoderVariant v) {
  return v == DecoderVariant::kParallelFuse || v == DecoderVariant::kParallelFuseKey;
}

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 64;
  int n_heads = 4;
  int n_blocks = 2;
  int d_ff = 256;
  int max_article_len = 600;
  int max_headline_len = 20;
  int max_keyphrase_len = 4;
  DecoderVariant variant = DecoderVariant::kBase;
  double dropout_rate = 0.1;
  std::uint64_t seed = 1;
  // Self-attention depth of the keyphrase encoder; default keeps it at
  // embeddings plus positions only.
  int keyphrase_blocks = 0;
  // Place the keyphrase sub-layer right after self-attention (true) or
  // after the fuse stages (false).
  bool key_sublayer_first = true;

  void validate() const {
    if (vocab_size < 4) throw ContractError("model config: vocab_size must cover the specials");
    if (d_model <= 0 || n_heads <= 0 || n_blocks <= 0 || d_ff <= 0)
      throw ContractError("model config: dimensions must be positive");
    if (d_model % n_heads != 0)
      throw ContractError("model config: d_model must be divisible by n_heads");
    if (max_article_len < 1 || max_headline_len < 1 || max_keyphrase_len < 1)
      throw ContractError("model config: max lengths must be at least 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
      throw ContractError("model config: dropout_rate must be in [0, 1)");
    if (keyphrase_blocks < 0) throw ContractError("model config: keyphrase_blocks must be >= 0");
  }

  nlohmann::ordered_json to_json() const {
    return nlohmann::ordered_json{{"vocab_size", vocab_size},
                                  {"d_model", d_model},
                                  {"n_heads", n_heads},
                                  {"n_blocks", n_blocks},
                                  {"d_ff", d_ff},
                                  {"max_article_len", max_article_len},
                                  {"max_headline_len", max_headline_len},
                                  {"max_keyphrase_len", max_keyphrase_len},
                                  {"variant", variant_name(variant)},
                                  {"dropout_rate", dropout_rate},
                                  {"seed", seed},
                                  {"keyphrase_blocks", keyphrase_blocks},
                                  {"key_sublayer_first", key_sublayer_first}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.vocab_size = j.at("vocab_size").get<int>();
    c.d_model = j.value("d_model", c.d_model);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.n_blocks = j.value("n_blocks", c.n_blocks);
    c.d_ff = j.value("d_ff", c.d_ff);
    c.max_article_len = j.value("max_article_len", c.max_article_len);
    c.max_headline_len = j.value("max_headline_len", c.max_headline_len);
    c.max_keyphrase_len = j.value("max_keyphrase_len", c.max_keyphrase_len);
    if (j.contains("variant")) c.variant = variant_from_name(j.at("variant").get<std::string>());
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.seed = j.value("seed", c.seed);
    c.keyphrase_blocks = j.value("keyphrase_blocks", c.keyphrase_blocks);
    c.key_sublayer_first = j.value("key_sublayer_first", c.key_sublayer_first);
    c.validate();
    return c;
  }
};

// Sinusoidal position signal rows [offset, offset + len).
template <class Real>
Tensor<Real> positional_encoding(int len, int d_model, int offset = 0) {
  Tensor<Real> pe({len, d_model});
  for (int pos = 0; pos < len; ++pos) {
    for (int i = 0; i < d_model; i += 2) {
      double angle = (pos + offset) / std::pow(10000.0, static_cast<double>(i) / d_model);
      pe.at(pos, i) = static_cast<Real>(std::sin(angle));
      if (i + 1 < d_model) pe.at(pos, i + 1) = static_cast<Real>(std::cos(angle));
    }
  }
  return pe;
}

using NamedParam = std::pair<std::string, void*>;  // unused; see ParamList below

template <class Real>
using ParamList = std::vector<std::pair<std::string, Tensor<Real>*>>;

template <class Real>
struct Linear {
  Tensor<Real> w, b;

  void init(int in_dim, int out_dim, std::mt19937_64& rng) {
    w = Tensor<Real>::randn({in_dim, out_dim}, rng, Real(1.0 / std::sqrt(static_cast<double>(in_dim))), true);
    b = Tensor<Real>::zeros({out_dim}, true);
  }
  Tensor<Real> forward(const Tensor<Real>& x) const { return add_row_bias(matmul(x, w), b); }
  void collect(const std::string& prefix, ParamList<Real>& out) {
    out.emplace_back(prefix + ".w", &w);
    out.emplace_back(prefix + ".b", &b);
  }
};

// Per-head projection matrices plus the output projection.
template <class Real>
struct AttentionParams {
  std::vector<Tensor<Real>> wq, wk, wv;  // n_heads matrices of [d_model x d_k]
  Tensor<Real> wo;                       // [(n_heads * d_k) x d_model]
};

template <class Real>
struct MultiHeadAttention {
  int n_heads = 0;
  int d_model = 0;
  int d_k = 0;
  AttentionParams<Real> p;

  void init(int model_dim, int heads, std::mt19937_64& rng) {
    n_heads = heads;
    d_model = model_dim;
    d_k = model_dim / heads;
    Real std_dev = Real(1.0 / std::sqrt(static_cast<double>(model_dim)));
    p.wq.clear();
    p.wk.clear();
    p.wv.clear();
    for (int h = 0; h < heads; ++h) {
      p.wq.push_back(Tensor<Real>::randn({d_model, d_k}, rng, std_dev, true));
      p.wk.push_back(Tensor<Real>::randn({d_model, d_k}, rng, std_dev, true));
      p.wv.push_back(Tensor<Real>::randn({d_model, d_k}, rng, std_dev, true));
    }
    p.wo = Tensor<Real>::randn({heads * d_k, d_model}, rng, std_dev, true);
  }

  Tensor<Real> forward(const Tensor<Real>& q, const Tensor<Real>& k, const Tensor<Real>& v,
                       const BoolMask* mask) const {
    std::vector<Tensor<Real>> heads;
    heads.reserve(static_cast<std::size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h) {
      heads.push_back(attention(matmul(q, p.wq[static_cast<std::size_t>(h)]),
                                matmul(k, p.wk[static_cast<std::size_t>(h)]),
                                matmul(v, p.wv[static_cast<std::size_t>(h)]), mask));
    }
    return matmul(concat_cols(heads), p.wo);
  }

  void collect(const std::string& prefix, ParamList<Real>& out) {
    for (int h = 0; h < n_heads; ++h) {
      std::string hp = prefix + ".h" + std::to_string(h);
      out.emplace_back(hp + ".wq", &p.wq[static_cast<std::size_t>(h)]);
      out.emplace_back(hp + ".wk", &p.wk[static_cast<std::size_t>(h)]);
      out.emplace_back(hp + ".wv", &p.wv[static_cast<std::size_t>(h)]);
    }
    out.emplace_back(prefix + ".wo", &p.wo);
  }
};

template <class Real>
struct LayerNormLayer {
  Tensor<Real> gain, bias;
  Real eps = Real(1e-6);

  void init(int d) {
    gain = Tensor<Real>::full({d}, Real(1), true);
    bias = Tensor<Real>::zeros({d}, true);
  }
  Tensor<Real> forward(const Tensor<Real>& x) const { return layer_norm(x, gain, bias, eps); }
  void collect(const std::string& prefix, ParamList<Real>& out) {
    out.emplace_back(prefix + ".gain", &gain);
    out.emplace_back(prefix + ".bias", &bias);
  }
};

template <class Real>
struct FeedForward {
  Linear<Real> expand, project;

  void init(int d_model, int d_ff, std::mt19937_64& rng) {
    expand.init(d_model, d_ff, rng);
    project.init(d_ff, d_model, rng);
  }
  Tensor<Real> forward(const Tensor<Real>& x) const { return project.forward(relu(expand.forward(x))); }
  void collect(const std::string& prefix, ParamList<Real>& out) {
    expand.collect(prefix + ".expand", out);
    project.collect(prefix + ".project", out);
  }
};

template <class Real>
struct EncoderBlock {
  MultiHeadAttention<Real> self_attn;
  LayerNormLayer<Real> self_norm;
  FeedForward<Real> ff;
  LayerNormLayer<Real> ff_norm;

  void init(const ModelConfig& cfg, std::mt19937_64& rng) {
    self_attn.init(cfg.d_model, cfg.n_heads, rng);
    self_norm.init(cfg.d_model);
    ff.init(cfg.d_model, cfg.d_ff, rng);
    ff_norm.init(cfg.d_model);
  }

  Tensor<Real> forward(const Tensor<Real>& x, double drop_rate, std::mt19937_64* drop_rng) const {
    Tensor<Real> a = self_attn.forward(x, x, x, nullptr);
    if (drop_rng) a = dropout(a, drop_rate, *drop_rng);
    Tensor<Real> u = self_norm.forward(add(x, a));
    Tensor<Real> f = ff.forward(u);
    if (drop_rng) f = dropout(f, drop_rate, *drop_rng);
    return ff_norm.forward(add(u, f));
  }

  void collect(const std::string& prefix, ParamList<Real>& out) {
    self_attn.collect(prefix + ".self", out);
    self_norm.collect(prefix + ".self_norm", out);
    ff.collect(prefix + ".ff", out);
    ff_norm.collect(prefix + ".ff_norm", out);
  }
};

// Decoder inputs with read instrumentation. Reads go through the accessors
// so tests can verify a variant never touches a source it does not need.
template <class Real>
struct DecoderSources {
  std::optional<Tensor<Real>> article;    // encoder states
  std::optional<Tensor<Real>> filtered;   // keyphrase-filtered encoder states
  std::optional<Tensor<Real>> keyphrase;  // keyphrase token states

  mutable int article_reads = 0;
  mutable int filtered_reads = 0;
  mutable int keyphrase_reads = 0;

  const Tensor<Real>& read_article() const {
    if (!article) throw ContractError("decoder: variant requires the article source");
    ++article_reads;
    return *article;
  }
  const Tensor<Real>& read_filtered() const {
    if (!filtered) throw ContractError("decoder: variant requires the keyphrase-filtered source");
    ++filtered_reads;
    return *filtered;
  }
  const Tensor<Real>& read_keyphrase() const {
    if (!keyphrase) throw ContractError("decoder: variant requires the keyphrase source");
    ++keyphrase_reads;
    return *keyphrase;
  }
};

// Captures the two parallel cross-attention branch outputs and their
// point-wise sum, per block, when running a parallel-fuse variant.
template <class Real>
struct ParallelFuseProbe {
  std::vector<Tensor<Real>> filtered_branch;
  std::vector<Tensor<Real>> article_branch;
  std::vector<Tensor<Real>> fused;
};

template <class Real>
struct DecoderBlock {
  DecoderVariant variant = DecoderVariant::kBase;
  bool key_first = true;
  MultiHeadAttention<Real> self_attn;
  LayerNormLayer<Real> self_norm;
  // Key-sub-layer pieces (Key and *FuseKey variants).
  MultiHeadAttention<Real> key_attn;
  LayerNormLayer<Real> key_norm;
  // Single-source cross attention (Base, Key, Filter, AddFuse).
  MultiHeadAttention<Real> cross_attn;
  LayerNormLayer<Real> cross_norm;
  // Dual-source fuse attention (StackFuse, ParallelFuse); the stacked form
  // normalizes each stage, the parallel form shares one normalization.
  MultiHeadAttention<Real> fuse_filtered_attn;
  LayerNormLayer<Real> fuse_filtered_norm;
  MultiHeadAttention<Real> fuse_article_attn;
  LayerNormLayer<Real> fuse_article_norm;
  FeedForward<Real> ff;
  LayerNormLayer<Real> ff_norm;

  void init(const ModelConfig& cfg, std::mt19937_64& rng) {
    variant = cfg.variant;
    key_first = cfg.key_sublayer_first;
    self_attn.init(cfg.d_model, cfg.n_heads, rng);
    self_norm.init(cfg.d_model);
    if (variant_has_key_sublayer(variant)) {
      key_attn.init(cfg.d_model, cfg.n_heads, rng);
      key_norm.init(cfg.d_model);
    }
    if (variant_is_stack_fuse(variant) || variant_is_parallel_fuse(variant)) {
      fuse_filtered_attn.init(cfg.d_model, cfg.n_heads, rng);
      fuse_article_attn.init(cfg.d_model, cfg.n_heads, rng);
      if (variant_is_stack_fuse(variant)) {
        fuse_filtered_norm.init(cfg.d_model);
      }
      fuse_article_norm.init(cfg.d_model);
    } else {
      cross_attn.init(cfg.d_model, cfg.n_heads, rng);
      cross_norm.init(cfg.d_model);
    }
    ff.init(cfg.d_model, cfg.d_ff, rng);
    ff_norm.init(cfg.d_model);
  }

  // cross_source: the single cross-attention source for Base/Key/Filter and
  // the fused states for AddFuse. filtered/article sources feed the
  // stack/parallel stages. key_source feeds the keyphrase sub-layer.
  Tensor<Real> forward(const Tensor<Real>& x, const Tensor<Real>* cross_source,
                       const Tensor<Real>* filtered_source, const Tensor<Real>* article_source,
                       const Tensor<Real>* key_source, const BoolMask& causal, double drop_rate,
                       std::mt19937_64* drop_rng, ParallelFuseProbe<Real>* probe = nullptr) const {
    auto maybe_drop = [&](Tensor<Real> t) {
      return drop_rng ? dropout(t, drop_rate, *drop_rng) : t;
    };

    Tensor<Real> u = self_norm.forward(add(x, maybe_drop(self_attn.forward(x, x, x, &causal))));

    auto key_stage = [&](Tensor<Real> h) {
      return key_norm.forward(add(h, maybe_drop(key_attn.forward(h, *key_source, *key_source, nullptr))));
    };
    if (variant_has_key_sublayer(variant) && key_first) u = key_stage(u);

    if (variant_is_stack_fuse(variant)) {
      Tensor<Real> t = fuse_filtered_norm.forward(
          add(u, maybe_drop(fuse_filtered_attn.forward(u, *filtered_source, *filtered_source, nullptr))));
      u = fuse_article_norm.forward(
          add(t, maybe_drop(fuse_article_attn.forward(t, *article_source, *article_source, nullptr))));
    } else if (variant_is_parallel_fuse(variant)) {
      Tensor<Real> filtered_branch =
          fuse_filtered_attn.forward(u, *filtered_source, *filtered_source, nullptr);
      Tensor<Real> article_branch =
          fuse_article_attn.forward(u, *article_source, *article_source, nullptr);
      Tensor<Real> fused = add(article_branch, filtered_branch);
      if (probe) {
        probe->filtered_branch.push_back(filtered_branch);
        probe->article_branch.push_back(article_branch);
        probe->fused.push_back(fused);
      }
      u = fuse_article_norm.forward(add(u, maybe_drop(fused)));
    } else {
      u = cross_norm.forward(add(u, maybe_drop(cross_attn.forward(u, *cross_source, *cross_source, nullptr))));
    }

    if (variant_has_key_sublayer(variant) && !key_first) u = key_stage(u);

    return ff_norm.forward(add(u, maybe_drop(ff.forward(u))));
  }

  void collect(const std::string& prefix, ParamList<Real>& out) {
    self_attn.collect(prefix + ".self", out);
    self_norm.collect(prefix + ".self_norm", out);
    if (variant_has_key_sublayer(variant)) {
      key_attn.collect(prefix + ".key", out);
      key_norm.collect(prefix + ".key_norm", out);
    }
    if (variant_is_stack_fuse(variant) || variant_is_parallel_fuse(variant)) {
      fuse_filtered_attn.collect(prefix + ".fuse_filtered", out);
      if (variant_is_stack_fuse(variant)) fuse_filtered_norm.collect(prefix + ".fuse_filtered_norm", out);
      fuse_article_attn.collect(prefix + ".fuse_article", out);
      fuse_article_norm.collect(prefix + ".fuse_norm", out);
    } else {
      cross_attn.collect(prefix + ".cross", out);
      cross_norm.collect(prefix + ".cross_norm", out);
    }
    ff.collect(prefix + ".ff", out);
    ff_norm.collect(prefix + ".ff_norm", out);
  }
};

// Generation/copy output mixture. Copy attention is a dedicated
// single-head attention over the encoder states; its weights, aggregated
// by source token id, form the copy distribution.
template <class Real>
struct CopyHead {
  Tensor<Real> wq, wk;       // [d_model x d_model]
  Linear<Real> gen_gate;     // [2 d_model -> 1]
  Linear<Real> vocab_proj;   // [d_model -> vocab]

  void init(const ModelConfig& cfg, std::mt19937_64& rng) {
    Real std_dev = Real(1.0 / std::sqrt(static_cast<double>(cfg.d_model)));
    wq = Tensor<Real>::randn({cfg.d_model, cfg.d_model}, rng, std_dev, true);
    wk = Tensor<Real>::randn({cfg.d_model, cfg.d_model}, rng, std_dev, true);
    gen_gate.init(2 * cfg.d_model, 1, rng);
    vocab_proj.init(cfg.d_model, cfg.vocab_size, rng);
  }

  void collect(const std::string& prefix, ParamList<Real>& out) {
    out.emplace_back(prefix + ".wq", &wq);
    out.emplace_back(prefix + ".wk", &wk);
    gen_gate.collect(prefix + ".gen_gate", out);
    vocab_proj.collect(prefix + ".vocab", out);
  }
};

template <class Real>
class HeadlineModel {
 public:
  struct EncoderOutput {
    Tensor<Real> states;          // src_len x d_model
    std::vector<int> source_ids;  // token ids after truncation, for the copy path
    bool truncated = false;
  };

  struct ForwardResult {
    Tensor<Real> probs;      // tgt_len x vocab, generation/copy mixture
    Tensor<Real> gen_probs;  // tgt_len x vocab, vocabulary softmax alone
    Tensor<Real> p_gen;      // tgt_len x 1
    Tensor<Real> copy_attn;  // tgt_len x src_len
    bool truncated = false;
  };

  explicit HeadlineModel(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(cfg_.seed);
    Real emb_std = Real(1.0 / std::sqrt(static_cast<double>(cfg_.d_model)));
    embedding_ = Tensor<Real>::randn({cfg_.vocab_size, cfg_.d_model}, rng, emb_std, true);
    encoder_.resize(static_cast<std::size_t>(cfg_.n_blocks));
    for (auto& b : encoder_) b.init(cfg_, rng);
    key_encoder_.resize(static_cast<std::size_t>(cfg_.keyphrase_blocks));
    for (auto& b : key_encoder_) b.init(cfg_, rng);
    if (variant_uses_filtered(cfg_.variant)) {
      filter_attn_.init(cfg_.d_model, cfg_.n_heads, rng);
      if (variant_is_add_fuse(cfg_.variant)) {
        // Re-expands the filtered states back to article length so the
        // point-wise addition is well defined for any keyphrase length.
        expand_attn_.init(cfg_.d_model, cfg_.n_heads, rng);
      }
    }
    decoder_.resize(static_cast<std::size_t>(cfg_.n_blocks));
    for (auto& b : decoder_) b.init(cfg_, rng);
    copy_head_.init(cfg_, rng);
  }

  const ModelConfig& config() const { return cfg_; }

  EncoderOutput encode(const std::vector<int>& article_ids, std::mt19937_64* drop_rng = nullptr) const {
    if (article_ids.empty()) throw ContractError("encode: empty article");
    EncoderOutput out;
    out.source_ids = article_ids;
    if (static_cast<int>(out.source_ids.size()) > cfg_.max_article_len) {
      out.source_ids.resize(static_cast<std::size_t>(cfg_.max_article_len));
      out.truncated = true;
    }
    Tensor<Real> x = embed_with_positions(out.source_ids, drop_rng);
    for (const auto& block : encoder_) x = block.forward(x, cfg_.dropout_rate, drop_rng);
    out.states = x;
    return out;
  }

  // Keyphrase representation: shared embedding table plus positions, with
  // optional extra self-attention blocks.
  Tensor<Real> encode_keyphrase(const std::vector<int>& keyphrase_ids,
                                std::mt19937_64* drop_rng = nullptr) const {
    if (keyphrase_ids.empty()) throw ContractError("encode_keyphrase: empty keyphrase");
    if (static_cast<int>(keyphrase_ids.size()) > cfg_.max_keyphrase_len) {
      throw ContractError("encode_keyphrase: keyphrase longer than max_keyphrase_len");
    }
    Tensor<Real> x = embed_with_positions(keyphrase_ids, drop_rng);
    for (const auto& block : key_encoder_) x = block.forward(x, cfg_.dropout_rate, drop_rng);
    return x;
  }

  // Keyphrase-filtered article states: attention from the keyphrase over
  // the encoder output, one row per keyphrase token.
  Tensor<Real> filter_article(const Tensor<Real>& keyphrase_states, const Tensor<Real>& encoder_states,
                              std::mt19937_64* drop_rng = nullptr) const {
    if (!variant_uses_filtered(cfg_.variant)) {
      throw ContractError("filter_article: variant has no filtered-article path");
    }
    Tensor<Real> f = filter_attn_.forward(keyphrase_states, encoder_states, encoder_states, nullptr);
    if (drop_rng) f = dropout(f, cfg_.dropout_rate, *drop_rng);
    return f;
  }

  // Runs the decoder stack over the target prefix. Fails fast when a
  // source the variant needs is absent and never reads an unneeded one.
  Tensor<Real> run_decoder(const std::vector<int>& prefix_ids, const DecoderSources<Real>& sources,
                           std::mt19937_64* drop_rng = nullptr,
                           ParallelFuseProbe<Real>* probe = nullptr) const {
    if (prefix_ids.empty() || prefix_ids.front() != Vocabulary::kBosId) {
      throw ContractError("decoder: target prefix must begin with <bos>");
    }
    if (static_cast<int>(prefix_ids.size()) > cfg_.max_headline_len + 1) {
      throw ContractError("decoder: target prefix longer than max_headline_len");
    }
    if (cfg_.variant == DecoderVariant::kBase && sources.keyphrase.has_value()) {
      throw ContractError("decoder: base variant rejects keyphrase input");
    }

    const Tensor<Real>* cross = nullptr;
    const Tensor<Real>* filtered = nullptr;
    const Tensor<Real>* article = nullptr;
    const Tensor<Real>* key = nullptr;
    Tensor<Real> fused_storage;

    if (variant_has_key_sublayer(cfg_.variant)) key = &sources.read_keyphrase();
    if (variant_is_stack_fuse(cfg_.variant) || variant_is_parallel_fuse(cfg_.variant)) {
      filtered = &sources.read_filtered();
      article = &sources.read_article();
    } else if (variant_is_add_fuse(cfg_.variant)) {
      const Tensor<Real>& enc = sources.read_article();
      const Tensor<Real>& flt = sources.read_filtered();
      fused_storage = add(enc, expand_attn_.forward(enc, flt, flt, nullptr));
      cross = &fused_storage;
    } else if (cfg_.variant == DecoderVariant::kFilter) {
      cross = &sources.read_filtered();
    } else {
      cross = &sources.read_article();
    }

    Tensor<Real> x = embed_with_positions(prefix_ids, drop_rng);
    BoolMask causal = causal_mask(static_cast<int>(prefix_ids.size()));
    for (const auto& block : decoder_) {
      x = block.forward(x, cross, filtered, article, key, causal, cfg_.dropout_rate, drop_rng, probe);
    }
    return x;
  }

  ForwardResult forward(const std::vector<int>& article_ids,
                        const std::optional<std::vector<int>>& keyphrase_ids,
                        const std::vector<int>& prefix_ids,
                        std::mt19937_64* drop_rng = nullptr) const {
    check_keyphrase_contract(keyphrase_ids.has_value());
    EncoderOutput enc = encode(article_ids, drop_rng);
    DecoderSources<Real> sources = build_sources(enc, keyphrase_ids, drop_rng);
    Tensor<Real> dec = run_decoder(prefix_ids, sources, drop_rng);
    return mix_output(dec, enc);
  }

  // Mean per-token negative log-likelihood under teacher forcing, with
  // optional uniform label smoothing over the vocabulary.
  Tensor<Real> loss(const ForwardResult& fwd, const std::vector<int>& gold_ids,
                    double label_smoothing = 0.0) const {
    if (gold_ids.empty() || static_cast<int>(gold_ids.size()) != fwd.probs.rows()) {
      throw ContractError("loss: gold length must match the prefix shift");
    }
    if (gold_ids.back() != Vocabulary::kEosId) {
      throw ContractError("loss: gold headline must end with <eos>");
    }
    Tensor<Real> log_probs = log_floor(fwd.probs, Real(1e-12));
    Tensor<Real> picked = pick_per_row(log_probs, gold_ids);
    Tensor<Real> per_pos;
    if (label_smoothing > 0.0) {
      Real eps = static_cast<Real>(label_smoothing);
      per_pos = add(scale(picked, Real(1) - eps),
                    scale(row_sums(log_probs), eps / static_cast<Real>(cfg_.vocab_size)));
    } else {
      per_pos = picked;
    }
    return scale(mean_all(per_pos), Real(-1));
  }

  ParamList<Real> named_parameters() {
    ParamList<Real> out;
    out.emplace_back("embedding", &embedding_);
    for (std::size_t i = 0; i < encoder_.size(); ++i)
      encoder_[i].collect("encoder." + std::to_string(i), out);
    for (std::size_t i = 0; i < key_encoder_.size(); ++i)
      key_encoder_[i].collect("key_encoder." + std::to_string(i), out);
    if (variant_uses_filtered(cfg_.variant)) {
      filter_attn_.collect("filter", out);
      if (variant_is_add_fuse(cfg_.variant)) expand_attn_.collect("expand", out);
    }
    for (std::size_t i = 0; i < decoder_.size(); ++i)
      decoder_[i].collect("decoder." + std::to_string(i), out);
    copy_head_.collect("copy", out);
    return out;
  }

  // ---- decoding support (frozen model) ----

  struct DecodeContext {
    EncoderOutput enc;
    DecoderSources<Real> sources;
  };

  DecodeContext prepare(const std::vector<int>& article_ids,
                        const std::optional<std::vector<int>>& keyphrase_ids) const {
    check_keyphrase_contract(keyphrase_ids.has_value());
    NoGradScope<Real> no_grad;
    DecodeContext ctx;
    ctx.enc = encode(article_ids);
    ctx.sources = build_sources(ctx.enc, keyphrase_ids, nullptr);
    return ctx;
  }

  std::vector<double> next_log_probs(const DecodeContext& ctx, const std::vector<int>& prefix) const {
    NoGradScope<Real> no_grad;
    Tensor<Real> dec = run_decoder(prefix, ctx.sources);
    ForwardResult fwd = mix_output(dec, ctx.enc);
    const int t = fwd.probs.rows() - 1;
    std::vector<double> out(static_cast<std::size_t>(cfg_.vocab_size));
    for (int v = 0; v < cfg_.vocab_size; ++v) {
      out[static_cast<std::size_t>(v)] =
          std::log(std::max(static_cast<double>(fwd.probs.at(t, v)), 1e-300));
    }
    return out;
  }

 private:
  void check_keyphrase_contract(bool have_keyphrase) const {
    if (variant_needs_keyphrase(cfg_.variant) && !have_keyphrase) {
      throw ContractError(std::string("forward: variant '") + variant_name(cfg_.variant) +
                          "' requires a keyphrase");
    }
    if (!variant_needs_keyphrase(cfg_.variant) && have_keyphrase) {
      throw ContractError("forward: base variant rejects keyphrase input");
    }
  }

  DecoderSources<Real> build_sources(const EncoderOutput& enc,
                                     const std::optional<std::vector<int>>& keyphrase_ids,
                                     std::mt19937_64* drop_rng) const {
    DecoderSources<Real> sources;
    if (variant_decoder_reads_article(cfg_.variant)) sources.article = enc.states;
    if (variant_needs_keyphrase(cfg_.variant)) {
      Tensor<Real> key = encode_keyphrase(*keyphrase_ids, drop_rng);
      if (variant_uses_filtered(cfg_.variant))
        sources.filtered = filter_article(key, enc.states, drop_rng);
      if (variant_has_key_sublayer(cfg_.variant)) sources.keyphrase = key;
    }
    return sources;
  }

  ForwardResult mix_output(const Tensor<Real>& dec, const EncoderOutput& enc) const {
    ForwardResult r;
    r.truncated = enc.truncated;
    Tensor<Real> gen = softmax_rows(copy_head_.vocab_proj.forward(dec));
    r.gen_probs = gen;
    Tensor<Real> scores = scale(matmul(matmul(dec, copy_head_.wq), transpose(matmul(enc.states, copy_head_.wk))),
                                Real(1.0 / std::sqrt(static_cast<double>(cfg_.d_model))));
    r.copy_attn = softmax_rows(scores);
    Tensor<Real> context = matmul(r.copy_attn, enc.states);
    r.p_gen = sigmoid(copy_head_.gen_gate.forward(concat_cols<Real>({dec, context})));
    Tensor<Real> copy_dist = scatter_cols_by_id(r.copy_attn, enc.source_ids, cfg_.vocab_size);
    r.probs = add(mul_rows(gen, r.p_gen), mul_rows(copy_dist, affine(r.p_gen, Real(-1), Real(1))));
    return r;
  }

  Tensor<Real> embed_with_positions(const std::vector<int>& ids, std::mt19937_64* drop_rng) const {
    Tensor<Real> x = scale(embedding_rows(embedding_, ids),
                           Real(std::sqrt(static_cast<double>(cfg_.d_model))));
    x = add(x, positional_encoding<Real>(static_cast<int>(ids.size()), cfg_.d_model));
    if (drop_rng) x = dropout(x, cfg_.dropout_rate, *drop_rng);
    return x;
  }

  ModelConfig cfg_;
  Tensor<Real> embedding_;  // shared across article, keyphrase, and target
  std::vector<EncoderBlock<Real>> encoder_;
  std::vector<EncoderBlock<Real>> key_encoder_;
  MultiHeadAttention<Real> filter_attn_;
  MultiHeadAttention<Real> expand_attn_;
  std::vector<DecoderBlock<Real>> decoder_;
  CopyHead<Real> copy_head_;
};

// ---- persistence: checkpoint plus a JSON sidecar with config and vocab ----

template <class Real>
void save_model(const std::string& path, HeadlineModel<Real>& model, const Vocabulary& vocab) {
  std::vector<std::pair<std::string, Tensor<Real>>> tensors;
  for (auto& [name, p] : model.named_parameters()) tensors.emplace_back(name, *p);
  save_checkpoint(path, tensors);
  nlohmann::ordered_json sidecar;
  sidecar["config"] = model.config().to_json();
  sidecar["vocab"] = vocab.to_json();
  std::ofstream out(path + ".json", std::ios::trunc);
  if (!out) throw ContractError("save_model: cannot write " + path + ".json");
  out << sidecar.dump(2) << '\n';
}

template <class Real>
struct LoadedModel {
  HeadlineModel<Real> model;
  Vocabulary vocab;
};

template <class Real>
LoadedModel<Real> load_model(const std::string& path) {
  std::ifstream in(path + ".json");
  if (!in) throw ParseError("load_model: cannot open " + path + ".json");
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("load_model: bad sidecar: " + std::string(e.what()));
  }
  ModelConfig cfg = ModelConfig::from_json(sidecar.at("config"));
  LoadedModel<Real> loaded{HeadlineModel<Real>(cfg), Vocabulary::from_json(sidecar.at("vocab"))};
  auto tensors = load_checkpoint<Real>(path);
  auto params = loaded.model.named_parameters();
  if (tensors.size() != params.size()) {
    throw ContractError("load_model: checkpoint has " + std::to_string(tensors.size()) +
                        " tensors, model expects " + std::to_string(params.size()));
  }
  for (auto& [name, p] : params) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ContractError("load_model: checkpoint missing tensor " + name);
    if (it->second.shape() != p->shape()) {
      throw ContractError("load_model: shape mismatch for " + name);
    }
    p->data() = it->second.data();
  }
  return loaded;
}

}  // namespace keyhead
