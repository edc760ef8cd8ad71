#pragma once

/**
 * Corpus ingestion: word-level tokenization, vocabulary construction, and
 * segmentation of documents into fixed-length context/continuation chunk
 * pairs. Collections are immutable after load; everything here is pure and
 * safe to call concurrently.
 */

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace clab {

enum class OriginKind { Human, Synthetic };

struct Document {
  std::string id;
  std::string text;
  std::vector<int> tokens;  // derived via Vocabulary::encode, not serialized
  OriginKind origin = OriginKind::Human;
  int generation = -1;  // -1 for human, >= 1 for synthetic
  std::optional<double> score;

  bool is_human() const { return origin == OriginKind::Human; }
};

// Whitespace/punctuation word tokenizer. Splits on Unicode whitespace, then
// every ASCII punctuation character becomes a standalone token; maximal
// non-punctuation runs are word tokens. ASCII letters are lowercased when
// `lowercase` is set. Empty text yields an empty sequence.
std::vector<std::string> tokenize(std::string_view text, bool lowercase);

// Joins tokens with single spaces (the normalized text form).
std::string detokenize(const std::vector<std::string>& tokens);

class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;

  Vocabulary();

  // Adds a token with the next free id. Fails on duplicates.
  int add(const std::string& token);

  int encode(std::string_view token) const;  // kUnk for unknown tokens
  const std::string& decode(int id) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }

  std::vector<int> encode_tokens(const std::vector<std::string>& tokens) const;
  std::string decode_tokens(const std::vector<int>& ids) const;

  // FNV-1a over token strings in id order; used to pin model files to the
  // vocabulary they were built with.
  uint64_t content_hash() const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

// Tokens with frequency >= min_count get ids in descending-frequency order
// (ties broken lexicographically); everything else maps to UNK.
// Throws if no token reaches min_count ("empty vocabulary").
Vocabulary build_vocab(const std::vector<Document>& docs, int min_count,
                       bool lowercase);

// Fills doc.tokens for every document.
void encode_documents(std::vector<Document>& docs, const Vocabulary& vocab,
                      bool lowercase);

struct ChunkPair {
  std::vector<int> context;       // exactly m tokens
  std::vector<int> continuation;  // exactly c tokens
  std::string source_doc;
};

// Consecutive non-overlapping windows of m+c tokens; the trailing remainder
// is discarded. Requires doc.tokens to be populated.
std::vector<ChunkPair> chunk(const Document& doc, int m, int c);

std::vector<ChunkPair> chunk_all(const std::vector<Document>& docs, int m,
                                 int c);

// JSONL corpus file: one object per line with fields
// {"id", "text", "origin": "human"|"synthetic", "generation", "score"}.
// Malformed records raise an error naming the line number and field.
std::vector<Document> load_corpus(const std::string& path);
void save_corpus(const std::vector<Document>& docs, const std::string& path);

}  // namespace clab
