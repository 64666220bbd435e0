#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "keyhead/gradcheck.hpp"
#include "keyhead/model.hpp"

using namespace keyhead;

namespace {

ModelConfig tiny_config(DecoderVariant v, std::uint64_t seed = 7) {
  ModelConfig cfg;
  cfg.vocab_size = 13;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.n_blocks = 1;
  cfg.d_ff = 12;
  cfg.max_article_len = 16;
  cfg.max_headline_len = 8;
  cfg.max_keyphrase_len = 4;
  cfg.variant = v;
  cfg.dropout_rate = 0.0;
  cfg.seed = seed;
  return cfg;
}

std::vector<int> ids(std::initializer_list<int> v) { return std::vector<int>(v); }

const std::vector<int> kArticle = {3, 4, 5, 6, 7, 4};
const std::vector<int> kKeyphrase = {5, 6};
const std::vector<int> kPrefix = {Vocabulary::kBosId, 8, 9, 10};
const std::vector<int> kGold = {8, 9, 10, Vocabulary::kEosId};

std::optional<std::vector<int>> key_for(DecoderVariant v) {
  if (variant_needs_keyphrase(v)) return kKeyphrase;
  return std::nullopt;
}

template <class Real>
DecoderSources<Real> full_sources(const HeadlineModel<Real>& model) {
  auto enc = model.encode(kArticle);
  DecoderSources<Real> s;
  s.article = enc.states;
  if (variant_uses_filtered(model.config().variant)) {
    s.filtered = model.filter_article(model.encode_keyphrase(kKeyphrase), enc.states);
  } else {
    // present but unrequired; the decoder must not touch it
    s.filtered = enc.states;
  }
  if (model.config().variant != DecoderVariant::kBase) s.keyphrase = model.encode_keyphrase(kKeyphrase);
  return s;
}

}  // namespace

TEST_CASE("multi-head with one identity head equals plain attention") {
  MultiHeadAttention<double> mha;
  std::mt19937_64 rng(3);
  mha.init(4, 1, rng);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      mha.p.wq[0].at(i, j) = i == j ? 1.0 : 0.0;
      mha.p.wk[0].at(i, j) = i == j ? 1.0 : 0.0;
      mha.p.wv[0].at(i, j) = i == j ? 1.0 : 0.0;
      mha.p.wo.at(i, j) = i == j ? 1.0 : 0.0;
    }
  auto q = Tensor<double>::randn({3, 4}, rng, 1.0);
  auto k = Tensor<double>::randn({5, 4}, rng, 1.0);
  auto v = Tensor<double>::randn({5, 4}, rng, 1.0);
  auto direct = attention<double>(q, k, v);
  auto via_mha = mha.forward(q, k, v, nullptr);
  for (std::size_t i = 0; i < direct.numel(); ++i)
    CHECK(via_mha.data()[i] == doctest::Approx(direct.data()[i]).epsilon(1e-12));
}

TEST_CASE("multi-head output shape is q_rows x d_model") {
  MultiHeadAttention<double> mha;
  std::mt19937_64 rng(5);
  mha.init(8, 2, rng);
  auto q = Tensor<double>::randn({3, 8}, rng, 1.0);
  auto kv = Tensor<double>::randn({6, 8}, rng, 1.0);
  auto out = mha.forward(q, kv, kv, nullptr);
  CHECK(out.shape() == std::vector<int>{3, 8});
}

TEST_CASE("multi-head gradient through all projections") {
  MultiHeadAttention<double> mha;
  std::mt19937_64 rng(11);
  mha.init(4, 2, rng);
  auto q = Tensor<double>::randn({3, 4}, rng, 1.0, true);
  auto kv = Tensor<double>::randn({4, 4}, rng, 1.0, true);
  ParamList<double> params;
  mha.collect("mha", params);
  params.emplace_back("q", &q);
  params.emplace_back("kv", &kv);
  auto report = check_gradients<double>(params, [&] { return mean_all(mha.forward(q, kv, kv, nullptr)); });
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("encode shape, determinism, truncation, and contracts") {
  auto cfg = tiny_config(DecoderVariant::kBase);
  HeadlineModel<double> model(cfg);
  auto enc = model.encode(kArticle);
  CHECK(enc.states.shape() == std::vector<int>{static_cast<int>(kArticle.size()), cfg.d_model});
  CHECK_FALSE(enc.truncated);

  HeadlineModel<double> twin(cfg);
  auto enc2 = twin.encode(kArticle);
  CHECK(std::memcmp(enc.states.data().data(), enc2.states.data().data(),
                    enc.states.numel() * sizeof(double)) == 0);

  std::vector<int> longer(static_cast<std::size_t>(cfg.max_article_len) + 3, 4);
  auto trunc = model.encode(longer);
  CHECK(trunc.truncated);
  CHECK(trunc.states.rows() == cfg.max_article_len);
  CHECK(trunc.source_ids.size() == static_cast<std::size_t>(cfg.max_article_len));

  CHECK_THROWS_AS(model.encode({}), ContractError);
  CHECK_THROWS_AS(model.encode({0, 99}), ContractError);
}

TEST_CASE("encode depends on token order") {
  auto cfg = tiny_config(DecoderVariant::kBase);
  HeadlineModel<double> model(cfg);
  auto a = model.encode(ids({3, 4, 5, 6}));
  auto b = model.encode(ids({6, 5, 4, 3}));
  double diff = 0;
  for (std::size_t i = 0; i < a.states.numel(); ++i)
    diff = std::max(diff, std::fabs(a.states.data()[i] - b.states.data()[i]));
  CHECK(diff > 1e-9);
}

TEST_CASE("keyphrase encoding shares the embedding table with the encoder") {
  auto cfg = tiny_config(DecoderVariant::kKey);
  HeadlineModel<double> model(cfg);
  auto rep = model.encode_keyphrase(kKeyphrase);
  CHECK(rep.shape() == std::vector<int>{2, cfg.d_model});

  // embeddings + positions only: reproducible from the shared table
  Tensor<double>* table = nullptr;
  for (auto& [name, p] : model.named_parameters())
    if (name == "embedding") table = p;
  REQUIRE(table != nullptr);
  auto expected = add(scale(embedding_rows(*table, kKeyphrase), std::sqrt(8.0)),
                      positional_encoding<double>(2, cfg.d_model));
  for (std::size_t i = 0; i < rep.numel(); ++i)
    CHECK(rep.data()[i] == doctest::Approx(expected.data()[i]).epsilon(1e-12));

  CHECK_THROWS_AS(model.encode_keyphrase({}), ContractError);
  CHECK_THROWS_AS(model.encode_keyphrase({3, 4, 5, 6, 7}), ContractError);
}

TEST_CASE("filter article produces one row per keyphrase token") {
  auto cfg = tiny_config(DecoderVariant::kFilter);
  HeadlineModel<double> model(cfg);
  auto enc = model.encode(kArticle);
  auto key = model.encode_keyphrase(kKeyphrase);
  auto filtered = model.filter_article(key, enc.states);
  CHECK(filtered.shape() == std::vector<int>{2, cfg.d_model});

  // single-row source: every output row is the same projection of that row
  auto enc1 = model.encode(ids({3}));
  auto f1 = model.filter_article(key, enc1.states);
  for (int j = 0; j < cfg.d_model; ++j)
    CHECK(f1.at(0, j) == doctest::Approx(f1.at(1, j)).epsilon(1e-12));
}

TEST_CASE("decoder output shape and source contracts per variant") {
  for (DecoderVariant v : all_decoder_variants()) {
    CAPTURE(variant_name(v));
    HeadlineModel<double> model(tiny_config(v));
    auto sources = full_sources(model);
    if (v == DecoderVariant::kBase) sources.keyphrase.reset();

    auto out = model.run_decoder(kPrefix, sources);
    CHECK(out.shape() == std::vector<int>{static_cast<int>(kPrefix.size()), 8});

    // instrumentation: no variant reads a source it does not require
    if (!variant_decoder_reads_article(v)) CHECK(sources.article_reads == 0);
    if (!variant_uses_filtered(v)) CHECK(sources.filtered_reads == 0);
    if (!variant_has_key_sublayer(v)) CHECK(sources.keyphrase_reads == 0);
    if (variant_decoder_reads_article(v)) CHECK(sources.article_reads > 0);
    if (variant_uses_filtered(v)) CHECK(sources.filtered_reads > 0);
    if (variant_has_key_sublayer(v)) CHECK(sources.keyphrase_reads > 0);

    // missing required sources fail fast
    if (variant_decoder_reads_article(v)) {
      auto broken = full_sources(model);
      if (v == DecoderVariant::kBase) broken.keyphrase.reset();
      broken.article.reset();
      CHECK_THROWS_AS(model.run_decoder(kPrefix, broken), ContractError);
    }
    if (variant_uses_filtered(v)) {
      auto broken = full_sources(model);
      broken.filtered.reset();
      CHECK_THROWS_AS(model.run_decoder(kPrefix, broken), ContractError);
    }
  }

  // base rejects a keyphrase outright
  HeadlineModel<double> base(tiny_config(DecoderVariant::kBase));
  auto sources = full_sources(base);
  CHECK(sources.keyphrase.has_value() == false);
  sources.keyphrase = base.encode_keyphrase(kKeyphrase);
  CHECK_THROWS_AS(base.run_decoder(kPrefix, sources), ContractError);
}

TEST_CASE("decoder prefix contract") {
  HeadlineModel<double> model(tiny_config(DecoderVariant::kBase));
  auto sources = full_sources(model);
  sources.keyphrase.reset();
  CHECK_THROWS_AS(model.run_decoder({8, 9}, sources), ContractError);
  CHECK_THROWS_AS(model.run_decoder({}, sources), ContractError);
}

TEST_CASE("parallel fuse block output is exactly the sum of its branches") {
  for (DecoderVariant v : {DecoderVariant::kParallelFuse, DecoderVariant::kParallelFuseKey}) {
    CAPTURE(variant_name(v));
    HeadlineModel<double> model(tiny_config(v));
    auto sources = full_sources(model);
    ParallelFuseProbe<double> probe;
    model.run_decoder(kPrefix, sources, nullptr, &probe);
    REQUIRE(probe.fused.size() == 1);
    for (std::size_t i = 0; i < probe.fused[0].numel(); ++i) {
      CHECK(probe.fused[0].data()[i] ==
            probe.article_branch[0].data()[i] + probe.filtered_branch[0].data()[i]);
    }
  }
}

TEST_CASE("parallel fuse with tied weights and equal sources doubles one branch") {
  HeadlineModel<double> model(tiny_config(DecoderVariant::kParallelFuse));
  // tie the two cross attentions
  ParamList<double> params = model.named_parameters();
  for (auto& [name, p] : params) {
    auto pos = name.find(".fuse_filtered.");
    if (pos == std::string::npos) continue;
    std::string twin = name;
    twin.replace(pos, 15, ".fuse_article.");
    for (auto& [name2, p2] : params) {
      if (name2 == twin) p2->data() = p->data();
    }
  }
  auto enc = model.encode(kArticle);
  DecoderSources<double> sources;
  sources.article = enc.states;
  sources.filtered = enc.states;  // same source on both branches
  ParallelFuseProbe<double> probe;
  model.run_decoder(kPrefix, sources, nullptr, &probe);
  REQUIRE(probe.fused.size() == 1);
  for (std::size_t i = 0; i < probe.fused[0].numel(); ++i) {
    CHECK(probe.fused[0].data()[i] == 2.0 * probe.article_branch[0].data()[i]);
  }
}

TEST_CASE("forward produces a proper mixture distribution") {
  for (DecoderVariant v : all_decoder_variants()) {
    CAPTURE(variant_name(v));
    HeadlineModel<double> model(tiny_config(v));
    auto fwd = model.forward(kArticle, key_for(v), kPrefix);
    CHECK(fwd.probs.shape() == std::vector<int>{static_cast<int>(kPrefix.size()), 13});
    for (int t = 0; t < fwd.probs.rows(); ++t) {
      double sum = 0;
      for (int c = 0; c < fwd.probs.cols(); ++c) {
        CHECK(fwd.probs.at(t, c) >= 0.0);
        sum += fwd.probs.at(t, c);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(fwd.p_gen.at(t, 0) >= 0.0);
      CHECK(fwd.p_gen.at(t, 0) <= 1.0);
    }
  }
}

TEST_CASE("forward keyphrase contract") {
  HeadlineModel<double> base(tiny_config(DecoderVariant::kBase));
  CHECK_THROWS_AS(base.forward(kArticle, kKeyphrase, kPrefix), ContractError);
  HeadlineModel<double> key(tiny_config(DecoderVariant::kKey));
  CHECK_THROWS_AS(key.forward(kArticle, std::nullopt, kPrefix), ContractError);
}

TEST_CASE("unknown source tokens receive probability through the copy path") {
  auto cfg = tiny_config(DecoderVariant::kBase);
  HeadlineModel<double> model(cfg);
  std::vector<int> article = {3, Vocabulary::kUnkId, 5, 6};  // an out-of-vocab source word
  auto fwd = model.forward(article, std::nullopt, kPrefix);
  for (int t = 0; t < fwd.probs.rows(); ++t) {
    double copy_mass_on_unk = fwd.copy_attn.at(t, 1);
    CHECK(copy_mass_on_unk > 0.0);
    double floor = (1.0 - fwd.p_gen.at(t, 0)) * copy_mass_on_unk;
    CHECK(fwd.probs.at(t, Vocabulary::kUnkId) >= floor - 1e-15);
    CHECK(fwd.probs.at(t, Vocabulary::kUnkId) > 0.0);
  }
}

TEST_CASE("p_gen forced to one reduces the mixture to the vocabulary softmax") {
  auto cfg = tiny_config(DecoderVariant::kBase);
  HeadlineModel<double> model(cfg);
  for (auto& [name, p] : model.named_parameters()) {
    if (name == "copy.gen_gate.b") p->data()[0] = 50.0;
  }
  auto fwd = model.forward(kArticle, std::nullopt, kPrefix);
  for (std::size_t i = 0; i < fwd.probs.numel(); ++i)
    CHECK(std::fabs(fwd.probs.data()[i] - fwd.gen_probs.data()[i]) < 1e-12);
}

TEST_CASE("loss hand cases") {
  auto cfg = tiny_config(DecoderVariant::kBase);
  HeadlineModel<double> model(cfg);
  const int t_len = static_cast<int>(kGold.size());

  typename HeadlineModel<double>::ForwardResult fake;
  fake.probs = Tensor<double>::zeros({t_len, cfg.vocab_size});
  for (int t = 0; t < t_len; ++t) fake.probs.at(t, kGold[static_cast<std::size_t>(t)]) = 1.0;
  CHECK(model.loss(fake, kGold).at(0) == doctest::Approx(0.0).epsilon(1e-9));

  typename HeadlineModel<double>::ForwardResult uniform;
  uniform.probs = Tensor<double>::full({t_len, cfg.vocab_size}, 1.0 / cfg.vocab_size);
  CHECK(model.loss(uniform, kGold).at(0) == doctest::Approx(std::log(cfg.vocab_size)));
  // uniform stays at ln V under label smoothing
  CHECK(model.loss(uniform, kGold, 0.1).at(0) == doctest::Approx(std::log(cfg.vocab_size)));

  std::vector<int> bad_len = {8, Vocabulary::kEosId};
  CHECK_THROWS_AS(model.loss(uniform, bad_len), ContractError);
  std::vector<int> no_eos = {8, 9, 10, 11};
  CHECK_THROWS_AS(model.loss(uniform, no_eos), ContractError);
}

TEST_CASE("end-to-end gradients match finite differences for every variant") {
  for (DecoderVariant v : all_decoder_variants()) {
    CAPTURE(variant_name(v));
    HeadlineModel<double> model(tiny_config(v, 21));
    auto key = key_for(v);
    auto report = check_gradients<double>(
        model.named_parameters(),
        [&] {
          auto fwd = model.forward(kArticle, key, kPrefix);
          return model.loss(fwd, kGold, 0.1);
        },
        1e-5);
    CAPTURE(report.worst_param);
    CAPTURE(report.analytic_at_worst);
    CAPTURE(report.numeric_at_worst);
    CHECK(report.max_rel_err < 1e-4);
  }
}

TEST_CASE("keyphrase changes the first-step distribution for filter and fuse variants") {
  const std::vector<DecoderVariant> sensitive = {
      DecoderVariant::kFilter,       DecoderVariant::kAddFuse,
      DecoderVariant::kStackFuse,    DecoderVariant::kParallelFuse,
      DecoderVariant::kAddFuseKey,   DecoderVariant::kStackFuseKey,
      DecoderVariant::kParallelFuseKey,
  };
  for (DecoderVariant v : sensitive) {
    CAPTURE(variant_name(v));
    int changed = 0;
    const int trials = 30;
    for (int seed = 0; seed < trials; ++seed) {
      HeadlineModel<double> model(tiny_config(v, 100 + static_cast<std::uint64_t>(seed)));
      auto a = model.next_log_probs(model.prepare(kArticle, ids({5, 6})), {Vocabulary::kBosId});
      auto b = model.next_log_probs(model.prepare(kArticle, ids({7, 3})), {Vocabulary::kBosId});
      double diff = 0;
      for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::fabs(a[i] - b[i]));
      if (diff > 1e-12) ++changed;
    }
    CHECK(changed == trials);
  }
}

TEST_CASE("model save and load round trip preserves behavior bitwise") {
  auto cfg = tiny_config(DecoderVariant::kStackFuseKey);
  HeadlineModel<float> model(cfg);
  std::vector<std::vector<std::string>> docs = {{"alpha", "beta", "gamma"}};
  Vocabulary vocab = Vocabulary::build(docs, cfg.vocab_size);
  save_model("model_roundtrip.ckpt", model, vocab);
  auto loaded = load_model<float>("model_roundtrip.ckpt");
  CHECK(loaded.vocab.contains("alpha"));
  CHECK(loaded.model.config().variant == DecoderVariant::kStackFuseKey);

  auto a = model.forward(kArticle, kKeyphrase, kPrefix);
  auto b = loaded.model.forward(kArticle, kKeyphrase, kPrefix);
  CHECK(std::memcmp(a.probs.data().data(), b.probs.data().data(),
                    a.probs.numel() * sizeof(float)) == 0);
  std::remove("model_roundtrip.ckpt");
  std::remove("model_roundtrip.ckpt.json");
}
