#pragma once

#include <functional>
#include <vector>

namespace keyhead {

struct DecodeConfig {
  int beam_size = 5;
  int max_steps = 20;
  double length_penalty_alpha = 0.6;
  double diversity_gamma = 0.0;  // sibling-rank penalty; 0 is plain beam search
  int top_k = 1;
};

struct BeamHypothesis {
  std::vector<int> tokens;  // starts with BOS
  double log_prob = 0.0;    // exact sum of per-step token log-probabilities
  bool finished = false;
};

struct ScoredSequence {
  std::vector<int> tokens;         // BOS ... (EOS when finished)
  double log_prob = 0.0;           // penalty-free cumulative log-probability
  double normalized_score = 0.0;   // log_prob / lp(len)
  bool finished = false;
};

// Next-token log-probabilities given the prefix (which starts with BOS).
using StepScorer = std::function<std::vector<double>(const std::vector<int>& prefix)>;

// lp(len) = ((5 + len) / 6)^alpha, len counting tokens after BOS.
double length_penalty(int generated_len, double alpha);

// Beam search over a frozen scorer. EOS expansions retire to a finished
// pool; the beam keeps beam_size unfinished hypotheses alive. The final
// ranking pools finished hypotheses with whatever is still alive at
// max_steps and sorts by normalized score. When diversity_gamma > 0 the
// r-th ranked child of each parent has gamma * r subtracted from its
// selection score only; reported scores are penalty-free.
std::vector<ScoredSequence> beam_search(const StepScorer& scorer, int bos_id, int eos_id,
                                        const DecodeConfig& cfg);

inline std::vector<ScoredSequence> diverse_beam_search(const StepScorer& scorer, int bos_id,
                                                       int eos_id, const DecodeConfig& cfg) {
  return beam_search(scorer, bos_id, eos_id, cfg);
}

// Argmax decoding until EOS or max_steps.
std::vector<int> greedy_decode(const StepScorer& scorer, int bos_id, int eos_id, int max_steps);

}  // namespace keyhead
