#include "keyhead/decode.hpp"

#include <algorithm>
#include <cmath>

#include "keyhead/errors.hpp"

namespace keyhead {

namespace {

void validate(const DecodeConfig& cfg) {
  if (cfg.beam_size < 1) throw ContractError("decode: beam_size must be at least 1");
  if (cfg.max_steps < 1) throw ContractError("decode: max_steps must be at least 1");
  if (cfg.length_penalty_alpha < 0) throw ContractError("decode: length penalty alpha must be >= 0");
  if (cfg.diversity_gamma < 0) throw ContractError("decode: diversity penalty must be >= 0");
  if (cfg.top_k < 1 || cfg.top_k > cfg.beam_size) {
    throw ContractError("decode: top_k must be in [1, beam_size]");
  }
}

struct Candidate {
  int parent = 0;
  int token = 0;
  double log_prob = 0.0;        // cumulative, penalty-free
  double selection_score = 0.0; // log_prob minus the sibling-rank penalty
};

}  // namespace

double length_penalty(int generated_len, double alpha) {
  return std::pow((5.0 + generated_len) / 6.0, alpha);
}

std::vector<ScoredSequence> beam_search(const StepScorer& scorer, int bos_id, int eos_id,
                                        const DecodeConfig& cfg) {
  validate(cfg);

  std::vector<BeamHypothesis> beams{{std::vector<int>{bos_id}, 0.0, false}};
  std::vector<ScoredSequence> pool;

  auto normalized = [&](double log_prob, int generated_len) {
    return log_prob / length_penalty(generated_len, cfg.length_penalty_alpha);
  };
  auto retire = [&](const BeamHypothesis& parent, int token, double log_prob, bool finished) {
    ScoredSequence seq;
    seq.tokens = parent.tokens;
    if (token >= 0) seq.tokens.push_back(token);
    seq.log_prob = log_prob;
    seq.finished = finished;
    seq.normalized_score = normalized(log_prob, static_cast<int>(seq.tokens.size()) - 1);
    pool.push_back(std::move(seq));
  };

  for (int step = 0; step < cfg.max_steps && !beams.empty(); ++step) {
    std::vector<Candidate> candidates;
    for (std::size_t pi = 0; pi < beams.size(); ++pi) {
      const std::vector<double> log_probs = scorer(beams[pi].tokens);
      const int vocab = static_cast<int>(log_probs.size());

      std::vector<int> order(static_cast<std::size_t>(vocab));
      for (int t = 0; t < vocab; ++t) order[static_cast<std::size_t>(t)] = t;
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (log_probs[static_cast<std::size_t>(a)] != log_probs[static_cast<std::size_t>(b)])
          return log_probs[static_cast<std::size_t>(a)] > log_probs[static_cast<std::size_t>(b)];
        return a < b;
      });

      // A prefix of each parent's ranked children suffices: selection
      // scores are strictly decreasing in sibling rank. EOS is always
      // examined so a finished continuation is never lost.
      int take = std::min(vocab, cfg.beam_size + 1);
      for (int r = 0; r < vocab; ++r) {
        int token = order[static_cast<std::size_t>(r)];
        if (r >= take && token != eos_id) continue;
        double cum = beams[pi].log_prob + log_probs[static_cast<std::size_t>(token)];
        if (token == eos_id) {
          retire(beams[pi], token, cum, true);
        } else {
          candidates.push_back({static_cast<int>(pi), token, cum,
                                cum - cfg.diversity_gamma * (r + 1)});
        }
      }
    }

    std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.selection_score != b.selection_score) return a.selection_score > b.selection_score;
      if (a.parent != b.parent) return a.parent < b.parent;
      return a.token < b.token;
    });
    if (static_cast<int>(candidates.size()) > cfg.beam_size)
      candidates.resize(static_cast<std::size_t>(cfg.beam_size));

    std::vector<BeamHypothesis> next;
    next.reserve(candidates.size());
    for (const auto& c : candidates) {
      BeamHypothesis h = beams[static_cast<std::size_t>(c.parent)];
      h.tokens.push_back(c.token);
      h.log_prob = c.log_prob;
      next.push_back(std::move(h));
    }
    beams = std::move(next);
  }

  for (const auto& h : beams) retire(h, -1, h.log_prob, false);

  std::stable_sort(pool.begin(), pool.end(), [](const ScoredSequence& a, const ScoredSequence& b) {
    if (a.normalized_score != b.normalized_score) return a.normalized_score > b.normalized_score;
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.tokens < b.tokens;
  });
  if (static_cast<int>(pool.size()) > cfg.top_k) pool.resize(static_cast<std::size_t>(cfg.top_k));
  return pool;
}

std::vector<int> greedy_decode(const StepScorer& scorer, int bos_id, int eos_id, int max_steps) {
  std::vector<int> tokens{bos_id};
  for (int step = 0; step < max_steps; ++step) {
    std::vector<double> log_probs = scorer(tokens);
    int best = 0;
    for (int t = 1; t < static_cast<int>(log_probs.size()); ++t) {
      if (log_probs[static_cast<std::size_t>(t)] > log_probs[static_cast<std::size_t>(best)]) best = t;
    }
    tokens.push_back(best);
    if (best == eos_id) break;
  }
  return tokens;
}

}  // namespace keyhead
