#pragma once

/**
 * Text-quality metrics: n-gram diversity, BLEU and Self-BLEU, a
 * cluster-histogram divergence-frontier score ("MAUVE-lite"), and Flesch
 * reading ease.
 *
 * All functions operate on plain token-string sequences so they work both on
 * vocabulary-encoded pipeline output and on raw corpora loaded from disk.
 * Corpus-level metrics (self_bleu, mauve_lite) canonicalize document order
 * internally, so with a fixed rng seed they are invariant to the order in
 * which documents are supplied.
 */

#include <string>
#include <vector>

#include "clab/rng.hpp"

namespace clab {

using TokenSeq = std::vector<std::string>;

struct QualityScores {
  double diversity = 0;    // in [0, 1]
  double self_bleu = 0;    // in [0, 100]
  double mauve = 0;        // in [0, 1]
  double readability = 0;  // unbounded, typically -50..120
};

struct EmbeddingConfig {
  int hash_dim = 1024;          // >= num_clusters
  int num_clusters = 16;
  double scaling_c = 5.0;
  int lambda_grid_size = 99;
  double smoothing_eps = 1e-6;

  void validate() const;
};

// Product over n = 2..4 of (unique n-grams / total n-grams). Requires at
// least 4 tokens.
double diversity(const TokenSeq& tokens);

// Geometric mean of clipped modified n-gram precisions for n = 1..min(4,
// candidate length), each floored at 1e-9 before the log, times a brevity
// penalty exp(1 - r/c) when the candidate is shorter than the closest-length
// reference (length ties prefer the shorter reference).
double bleu(const TokenSeq& candidate, const std::vector<TokenSeq>& references);

// Mean BLEU of each sampled doc against all other sampled docs, times 100.
// Samples min(sample_size, len(docs)) docs without replacement.
double self_bleu(const std::vector<TokenSeq>& docs, int sample_size, Rng& rng);

// Hashed 1-2-gram term-frequency embedding, L2-normalized (zero vector for
// an empty doc).
std::vector<double> embed(const TokenSeq& tokens, int hash_dim);

// Divergence-frontier area for two cluster histograms: for each lambda on an
// interior grid, R = lambda*P + (1-lambda)*Q contributes the point
// (exp(-c*KL(Q||R)), exp(-c*KL(P||R))); points are augmented with (0,1) and
// (1,0) and integrated by the trapezoid rule after sorting by x (ties: y
// descending).
double divergence_frontier_area(const std::vector<double>& p,
                                const std::vector<double>& q, double scaling_c,
                                int lambda_grid_size);

// Distribution similarity between two document sets: sample up to 1000 docs
// per side, k-means over the union of embeddings, smoothed cluster
// histograms, divergence-frontier area. Requires >= num_clusters docs per
// side.
double mauve_lite(const std::vector<TokenSeq>& human_docs,
                  const std::vector<TokenSeq>& model_docs,
                  const EmbeddingConfig& cfg, Rng& rng);

// Flesch reading ease: 206.835 - 1.015*(words/sentences) -
// 84.6*(syllables/words). Sentences are runs of '.', '!', '?' (minimum 1);
// words are whitespace tokens containing a letter; syllables count vowel
// groups (aeiouy) minus a silent trailing 'e', minimum 1 per word.
double reading_ease(const std::string& text);

}  // namespace clab
