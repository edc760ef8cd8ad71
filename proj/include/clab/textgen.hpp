#pragma once

/**
 * Deterministic pseudo-natural corpus synthesizer for desk-scale runs.
 *
 * Text follows a compact first-order backbone: a small core lexicon where
 * each word has a few heavily skewed preferred successors, so frequent
 * n-gram histories are densely observed and sharpened resampling has a
 * concentration channel to collapse into. A rare-word cycle injects the
 * full long-tail vocabulary inside a bounded positional band of each
 * chunk-sized stretch of text, keeping every rare word out of the count
 * tables of chunk-trained models while still entering the vocabulary;
 * each rare word is deterministically followed by a core connector.
 * Sentence punctuation keeps readability metrics meaningful. Identical
 * config and seed reproduce the corpus byte for byte.
 */

#include <cstdint>
#include <string>
#include <vector>

#include "clab/corpus.hpp"
#include "clab/rng.hpp"

namespace clab {

struct TextGenConfig {
  int vocab_words = 4800;        // distinct lexicon words
  int core_words = 200;          // dense first-order backbone
  int sentence_starters = 4;     // core prefix usable at sentence starts
  int successors_per_word = 8;   // preferred successors per core word
  double successor_prob = 0.95;  // follow the backbone after a core word
  double successor_lead = 13.0;  // top-successor weight over the flat rest
  int successor_cycle = 3;       // top successors chain words into loops
  double tail_prob = 0.10;       // rare-word injection rate inside the band
  int tail_period = 64;          // positional band cycle, in tokens
  int tail_window = 30;          // band prefix where rare words may appear
  double zipf_exponent = 0.70;   // core unigram tilt
  int min_sentence_words = 6;
  int max_sentence_words = 11;
  double comma_prob = 0.04;
  int min_doc_tokens = 130;
  int max_doc_tokens = 200;
};

class TextGen {
 public:
  TextGen(const TextGenConfig& cfg, uint64_t seed);

  // Tokens include punctuation marks, matching the corpus tokenizer's
  // count. target_tokens <= 0 draws a length from the configured range.
  // The rare-word cycle advances across calls, so make_doc is not
  // thread-safe and call order determines content.
  Document make_doc(const std::string& id, Rng& rng,
                    int target_tokens = 0) const;

  const std::vector<std::string>& lexicon() const { return words_; }

 private:
  TextGenConfig cfg_;
  std::vector<std::string> words_;            // rank order, core first
  std::vector<double> core_cum_;              // cumulative Zipf weights
  std::vector<double> succ_cum_;              // cumulative successor weights
  std::vector<std::vector<int>> successors_;  // per core word, word indices
  mutable int tail_cursor_ = 0;
};

// Train/test corpora from one seeded lexicon. Train documents are emitted
// until they yield exactly `train_chunks` non-overlapping (m, c) chunk
// pairs; the final document is trimmed to land on the boundary.
void synthesize_corpus(const TextGenConfig& cfg, uint64_t seed,
                       int train_chunks, int test_docs, int m, int c,
                       std::vector<Document>& train,
                       std::vector<Document>& test);

}  // namespace clab
