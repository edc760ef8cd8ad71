#pragma once

/**
 * Interpolated n-gram language model with stupid backoff and additive
 * smoothing. "Fine-tuning" is modeled as count interpolation against a
 * frozen base model: the finetuned distribution is
 *   lambda * p_data(.|h) + (1 - lambda) * p_base(.|h),
 * which preserves the recursive-training structure (every generation starts
 * from the same base) without gradient training.
 *
 * Models are immutable after construction; next_token_dist and evaluate are
 * read-only and safe for concurrent use.
 */

#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "clab/corpus.hpp"

namespace clab {

struct CountTable {
  std::unordered_map<int, long long> counts;  // next token -> count
  long long total = 0;
};

struct VecIntHash {
  size_t operator()(const std::vector<int>& v) const {
    uint64_t h = 0x9e3779b97f4a7c15ULL ^ v.size();
    for (int x : v) {
      h ^= static_cast<uint64_t>(static_cast<uint32_t>(x)) + 0x9e3779b9ULL +
           (h << 6) + (h >> 2);
    }
    return static_cast<size_t>(h);
  }
};

class NGramModel {
 public:
  // Empty model: every distribution is uniform (additive smoothing over zero
  // counts). Training entry points below fill in counts.
  NGramModel(int order, std::shared_ptr<const Vocabulary> vocab, double delta);

  int order() const { return order_; }
  double smoothing_delta() const { return delta_; }
  double interp_lambda() const { return lambda_; }
  const Vocabulary& vocab() const { return *vocab_; }
  std::shared_ptr<const Vocabulary> vocab_ptr() const { return vocab_; }
  const NGramModel* base() const { return base_.get(); }

  // Full-support distribution over the vocabulary given a history (last
  // order-1 tokens are used; shorter histories are BOS-padded; unseen
  // histories back off to shorter orders down to the unigram level).
  std::vector<double> next_token_dist(std::span<const int> history) const;
  void next_token_dist_into(std::span<const int> history,
                            std::vector<double>& out) const;

  // Count accumulation (single-writer; used by the train functions).
  void observe(std::span<const int> sequence, size_t target_begin);

  uint64_t vocab_hash() const { return vocab_->content_hash(); }

  void save(const std::string& path) const;
  // Loads a model file. A model saved with a base requires `base`; a base
  // model must be loaded with base == nullptr. Refuses a vocabulary-hash
  // mismatch.
  static NGramModel load(const std::string& path,
                         std::shared_ptr<const Vocabulary> vocab,
                         std::shared_ptr<const NGramModel> base = nullptr);

  friend NGramModel finetune(std::shared_ptr<const NGramModel> base,
                             const std::vector<ChunkPair>& dataset,
                             double interp_lambda);

 private:
  struct DistParts {  // own-counts distribution at the backed-off level
    double floor;     // delta / (total + delta * V)
    double denom;     // total + delta * V
    const CountTable* table;  // nullptr when no counts exist at any level
  };
  DistParts data_dist_parts(std::span<const int> history) const;

  int order_;
  std::shared_ptr<const Vocabulary> vocab_;
  double delta_;
  double lambda_ = 1.0;
  std::shared_ptr<const NGramModel> base_;
  // tables_[len]: histories of length len, 0 <= len <= order-1
  std::vector<std::unordered_map<std::vector<int>, CountTable, VecIntHash>>
      tables_;
};

// Counts accumulated over all token positions with BOS padding; the result
// has no base reference. Throws on an empty corpus.
NGramModel train_base(const std::vector<Document>& docs, int order,
                      double delta, std::shared_ptr<const Vocabulary> vocab);

// Counts accumulated only over continuation positions (contexts condition
// but contribute no targets). Always starts from the given frozen base.
NGramModel finetune(std::shared_ptr<const NGramModel> base,
                    const std::vector<ChunkPair>& dataset,
                    double interp_lambda);

struct EvalResult {
  double perplexity = 0;
  double accuracy = 0;
  long long token_count = 0;
  std::vector<double> nll_values;  // natural log, per continuation token
};

// Teacher-forced evaluation over continuation positions of (m, c)-chunked
// documents. Argmax ties break toward the lowest token id. The reduction
// runs in document-id order so the result is independent of document order
// and of worker partitioning.
EvalResult evaluate(const NGramModel& model, const std::vector<Document>& docs,
                    int m, int c, int workers = 1);

struct Histogram {
  std::vector<double> edges;        // size B+1
  std::vector<long long> counts;    // size B
};

// One perplexity value per document (exp of its mean continuation NLL),
// binned with fixed edges. Out-of-range values are clamped into the first or
// last bin so counts always total the number of binned documents.
Histogram perplexity_histogram(const NGramModel& model,
                               const std::vector<Document>& docs, int m, int c,
                               const std::vector<double>& edges,
                               int workers = 1);

}  // namespace clab
