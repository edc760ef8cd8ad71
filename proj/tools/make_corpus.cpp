/**
 * Seeded desk-corpus generator. Emits a train corpus sized to an exact
 * number of context/continuation chunks plus a held-out test corpus drawn
 * from the same lexicon, both as JSONL.
 */

#include <CLI11.hpp>

#include <iostream>

#include "clab/corpus.hpp"
#include "clab/textgen.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Deterministic pseudo-natural corpus synthesizer"};
  app.name("make-corpus");

  std::string train_path;
  std::string test_path;
  uint64_t seed = 0;
  int chunks = 2000;
  int test_docs = 200;
  int m = 32;
  int c = 32;
  clab::TextGenConfig cfg;

  app.add_option("--train", train_path, "Train corpus JSONL output")
      ->required();
  app.add_option("--test", test_path, "Test corpus JSONL output")->required();
  app.add_option("--seed", seed, "Corpus seed")->required();
  app.add_option("--chunks", chunks,
                 "Exact number of (m, c) chunks the train corpus yields");
  app.add_option("--test-docs", test_docs, "Held-out document count");
  app.add_option("--m", m, "Context length in tokens");
  app.add_option("--c", c, "Continuation length in tokens");
  app.add_option("--vocab-words", cfg.vocab_words, "Lexicon size");
  app.add_option("--core-words", cfg.core_words, "Backbone lexicon size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    std::vector<clab::Document> train;
    std::vector<clab::Document> test;
    clab::synthesize_corpus(cfg, seed, chunks, test_docs, m, c, train, test);
    clab::save_corpus(train, train_path);
    clab::save_corpus(test, test_path);
    std::cout << "train: " << train.size() << " docs (" << chunks
              << " chunks of " << m + c << " tokens) -> " << train_path
              << "\n"
              << "test: " << test.size() << " docs -> " << test_path << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
