#pragma once

/**
 * Decoding strategies over next-token distributions: greedy, beam search,
 * and the sampling family (pure, temperature, top-k, nucleus).
 *
 * Determinism rules, fixed so that runs are exactly reproducible:
 *  - every tie (argmax, top-k cutoff, beam ranking) breaks toward the lower
 *    token id or lexicographically smaller sequence;
 *  - each sampled token consumes exactly one RNG draw;
 *  - parameter settings that make a transform the identity (tau = 1,
 *    k >= vocab size, eta >= 1) return the input distribution unchanged, so
 *    equivalent strategies produce bit-identical sequences under one seed.
 */

#include <vector>

#include "clab/lm.hpp"
#include "clab/rng.hpp"

namespace clab {

enum class StrategyKind { Greedy, Beam, Pure, Temperature, TopK, Nucleus };

struct DecodingStrategy {
  StrategyKind kind = StrategyKind::Pure;
  double tau = 0.9;     // temperature, in (0, 1]
  int k = 50;           // top-k cutoff, >= 1
  double eta = 0.95;    // nucleus mass, in (0, 1]
  int beam_width = 5;   // >= 1

  void validate() const;  // throws std::invalid_argument on a bad field
};

const char* strategy_name(StrategyKind kind);
StrategyKind parse_strategy(const std::string& name);

// Applies the sampling-family transform (pure, temperature, top-k, nucleus)
// to a distribution. Output sums to 1 and its support never exceeds the
// input's. Greedy and beam strategies have no distribution transform.
std::vector<double> transform_dist(const std::vector<double>& dist,
                                   const DecodingStrategy& strategy);

// Draws one token. Greedy takes the argmax (ties toward the lowest id) and
// consumes no randomness; sampling strategies transform then consume exactly
// one draw. Beam search is sequence-level and is rejected here.
int sample_token(const std::vector<double>& dist,
                 const DecodingStrategy& strategy, Rng& rng);

// Width-limited exact search over continuations of the given length, scored
// by summed raw log-probabilities. Ranking ties break toward the
// lexicographically smaller token sequence; width 1 reduces to greedy.
std::vector<int> beam_search(const NGramModel& model,
                             const std::vector<int>& context, int length,
                             int width);

// Autoregressive continuation of exactly `length` (>= 1) tokens. Beam
// dispatches to beam_search; greedy ignores `rng`; sampling strategies
// consume one draw per emitted token. EOS is sampleable but not terminating.
std::vector<int> generate(const NGramModel& model,
                          const std::vector<int>& context, int length,
                          const DecodingStrategy& strategy, Rng& rng);

}  // namespace clab
