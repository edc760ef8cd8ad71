#include "clab/textgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <unordered_set>

namespace clab {
namespace {

const char* kOnsets[] = {"b",  "c",  "d",  "f",  "g",  "h",  "j",  "k",
                         "l",  "m",  "n",  "p",  "r",  "s",  "t",  "v",
                         "w",  "z",  "br", "ch", "cl", "dr", "fl", "gr",
                         "pl", "pr", "sh", "sl", "sp", "st", "th", "tr"};
const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ea", "ee", "io", "ou"};
const char* kCodas[] = {"", "", "n", "r", "s", "t", "l", "m", "nd", "st", "rn"};

std::string make_word(Rng& rng, int syllables) {
  std::string w;
  for (int s = 0; s < syllables; ++s) {
    w += kOnsets[rng.next_below(sizeof(kOnsets) / sizeof(kOnsets[0]))];
    w += kVowels[rng.next_below(sizeof(kVowels) / sizeof(kVowels[0]))];
    if (s + 1 == syllables || rng.next_double() < 0.3) {
      w += kCodas[rng.next_below(sizeof(kCodas) / sizeof(kCodas[0]))];
    }
  }
  return w;
}

std::vector<double> zipf_cum(int count, double exponent, int rank_offset) {
  std::vector<double> cum(count);
  double total = 0.0;
  for (int r = 0; r < count; ++r) {
    total += 1.0 / std::pow(static_cast<double>(r + rank_offset), exponent);
    cum[r] = total;
  }
  return cum;
}

int cum_draw(const std::vector<double>& cum, Rng& rng) {
  double u = rng.next_double() * cum.back();
  auto it = std::upper_bound(cum.begin(), cum.end(), u);
  if (it == cum.end()) --it;
  return static_cast<int>(it - cum.begin());
}

}  // namespace

TextGen::TextGen(const TextGenConfig& cfg, uint64_t seed) : cfg_(cfg) {
  if (cfg.vocab_words < cfg.core_words + 100 || cfg.core_words < 8 ||
      cfg.sentence_starters < 1 || cfg.sentence_starters > cfg.core_words ||
      cfg.successors_per_word < 2 ||
      cfg.successors_per_word >= cfg.core_words ||
      cfg.successor_prob < 0.0 || cfg.successor_prob > 1.0 ||
      cfg.successor_lead < 1.0 || cfg.successor_cycle < 2 ||
      cfg.successor_cycle > cfg.core_words ||
      cfg.tail_prob < 0.0 || cfg.tail_prob > 0.25 ||
      cfg.tail_window < 1 || cfg.tail_period <= cfg.tail_window ||
      cfg.min_sentence_words < 4 ||
      cfg.max_sentence_words < cfg.min_sentence_words ||
      cfg.min_doc_tokens < cfg.min_sentence_words + 1 ||
      cfg.max_doc_tokens < cfg.min_doc_tokens) {
    throw std::invalid_argument("textgen: invalid configuration");
  }
  Rng rng(seed_combine(seed, 0x7465787467656eULL));  // "textgen"

  std::unordered_set<std::string> seen;
  words_.reserve(cfg.vocab_words);
  while (static_cast<int>(words_.size()) < cfg.vocab_words) {
    int rank = static_cast<int>(words_.size());
    int syl;
    if (rank < cfg.core_words) {
      syl = 1 + (rng.next_double() < 0.45 ? 1 : 0);
    } else {
      double u = rng.next_double();
      syl = u < 0.30 ? 2 : u < 0.75 ? 3 : 4;
    }
    std::string w = make_word(rng, syl);
    if (seen.insert(w).second) words_.push_back(std::move(w));
  }

  core_cum_ = zipf_cum(cfg.core_words, cfg.zipf_exponent, 2);

  succ_cum_.resize(cfg.successors_per_word);
  double total = 0.0;
  for (int j = 0; j < cfg.successors_per_word; ++j) {
    total += j == 0 ? cfg.successor_lead : 1.0;
    succ_cum_[j] = total;
  }

  // Top successors chain consecutive words into short loops, so heavily
  // sharpened sampling revisits the same few-token paths; the flat
  // alternates are drawn uniformly without replacement and keep the
  // backbone graph well connected.
  successors_.resize(cfg.core_words);
  for (int w = 0; w < cfg.core_words; ++w) {
    auto& succ = successors_[w];
    succ.reserve(cfg.successors_per_word);
    int block = w - w % cfg.successor_cycle;
    int next = w + 1;
    if (next >= cfg.core_words || next >= block + cfg.successor_cycle) {
      next = block;
    }
    if (next == w) next = 0;  // lone trailing block
    succ.push_back(next);
    while (static_cast<int>(succ.size()) < cfg.successors_per_word) {
      int pick = static_cast<int>(rng.next_below(cfg.core_words));
      if (pick == w) continue;
      if (std::find(succ.begin(), succ.end(), pick) != succ.end()) continue;
      succ.push_back(pick);
    }
  }
}

Document TextGen::make_doc(const std::string& id, Rng& rng,
                           int target_tokens) const {
  if (target_tokens <= 0) {
    target_tokens =
        cfg_.min_doc_tokens +
        static_cast<int>(rng.next_below(
            static_cast<uint64_t>(cfg_.max_doc_tokens - cfg_.min_doc_tokens) +
            1));
  }
  int tail_count = cfg_.vocab_words - cfg_.core_words;

  std::string text;
  int tokens = 0;
  int prev = -1;
  int forced = -1;
  int sentence_len = 0;
  int sentence_pos = 0;
  while (tokens < target_tokens) {
    if (sentence_pos == 0) {
      sentence_len =
          cfg_.min_sentence_words +
          static_cast<int>(rng.next_below(
              static_cast<uint64_t>(cfg_.max_sentence_words -
                                    cfg_.min_sentence_words) +
              1));
    }
    int word;
    if (sentence_pos == 0) {
      word = static_cast<int>(rng.next_below(cfg_.sentence_starters));
      forced = -1;
    } else if (forced >= 0) {
      word = forced;
      forced = -1;
    } else {
      double u = rng.next_double();
      // Rare words need a following connector word and must stay inside
      // the positional band, so only inject mid-sentence there.
      if (u < cfg_.tail_prob && sentence_pos + 1 < sentence_len &&
          tokens % cfg_.tail_period < cfg_.tail_window) {
        word = cfg_.core_words + tail_cursor_;
        tail_cursor_ = (tail_cursor_ + 1) % tail_count;
        forced = (word - cfg_.core_words) % cfg_.core_words;
      } else if (prev >= 0 && prev < cfg_.core_words &&
                 rng.next_double() < cfg_.successor_prob) {
        word = successors_[prev][cum_draw(succ_cum_, rng)];
      } else {
        word = cum_draw(core_cum_, rng);
      }
    }
    std::string surface = words_[word];
    if (sentence_pos == 0) {
      surface[0] = static_cast<char>(
          std::toupper(static_cast<unsigned char>(surface[0])));
    }
    if (!text.empty()) text += ' ';
    text += surface;
    ++tokens;
    prev = word;
    ++sentence_pos;
    if (tokens >= target_tokens) break;
    if (sentence_pos >= sentence_len) {
      double u = rng.next_double();
      text += u < 0.92 ? '.' : u < 0.96 ? '!' : '?';
      ++tokens;
      sentence_pos = 0;
      prev = -1;
      forced = -1;
    } else if (forced < 0 && word < cfg_.core_words &&
               rng.next_double() < cfg_.comma_prob) {
      text += ',';
      ++tokens;
    }
  }

  Document doc;
  doc.id = id;
  doc.text = std::move(text);
  doc.origin = OriginKind::Human;
  doc.generation = -1;
  return doc;
}

void synthesize_corpus(const TextGenConfig& cfg, uint64_t seed,
                       int train_chunks, int test_docs, int m, int c,
                       std::vector<Document>& train,
                       std::vector<Document>& test) {
  if (train_chunks < 1 || test_docs < 0 || m < 1 || c < 1) {
    throw std::invalid_argument("synthesize_corpus: invalid request");
  }
  // Rare words go in the band of each chunk that chunk-trained models
  // neither predict nor condition on, so their rows stay dense.
  TextGenConfig aligned = cfg;
  aligned.tail_period = m + c;
  aligned.tail_window = std::max(1, m - 2);
  TextGen gen(aligned, seed);
  int chunk_len = m + c;

  Rng train_rng(seed_combine(seed, 1));
  train.clear();
  int have = 0;
  int index = 0;
  while (have < train_chunks) {
    int remaining = train_chunks - have;
    char id[32];
    std::snprintf(id, sizeof(id), "train-%05d", index++);
    Document doc = gen.make_doc(id, train_rng);
    int yield = static_cast<int>(tokenize(doc.text, false).size()) / chunk_len;
    if (yield == 0 || yield > remaining) {
      int want = yield == 0 ? 1 : remaining;
      doc = gen.make_doc(id, train_rng, want * chunk_len);
      yield = want;
    }
    have += yield;
    train.push_back(std::move(doc));
  }

  Rng test_rng(seed_combine(seed, 2));
  test.clear();
  test.reserve(test_docs);
  for (int i = 0; i < test_docs; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "test-%05d", i);
    test.push_back(gen.make_doc(id, test_rng));
  }
}

}  // namespace clab
