#include "clab/lm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "clab/parallel.hpp"

namespace clab {

NGramModel::NGramModel(int order, std::shared_ptr<const Vocabulary> vocab,
                       double delta)
    : order_(order), vocab_(std::move(vocab)), delta_(delta) {
  if (order_ < 1) throw std::invalid_argument("NGramModel: order must be >= 1");
  if (!(delta_ > 0)) {
    throw std::invalid_argument("NGramModel: smoothing delta must be positive");
  }
  if (!vocab_) throw std::invalid_argument("NGramModel: null vocabulary");
  tables_.resize(static_cast<size_t>(order_));
}

void NGramModel::observe(std::span<const int> sequence, size_t target_begin) {
  int hist_max = order_ - 1;
  std::vector<int> key;
  key.reserve(static_cast<size_t>(hist_max));
  for (size_t pos = target_begin; pos < sequence.size(); ++pos) {
    int target = sequence[pos];
    for (int len = 0; len <= hist_max; ++len) {
      key.clear();
      for (int back = len; back >= 1; --back) {
        long long idx = static_cast<long long>(pos) - back;
        key.push_back(idx < 0 ? Vocabulary::kBos : sequence[idx]);
      }
      auto& table = tables_[static_cast<size_t>(len)][key];
      ++table.counts[target];
      ++table.total;
    }
  }
}

NGramModel::DistParts NGramModel::data_dist_parts(
    std::span<const int> history) const {
  size_t vocab_size = vocab_->size();
  int hist_max = order_ - 1;
  thread_local std::vector<int> padded;
  padded.clear();
  size_t take = std::min(static_cast<size_t>(hist_max), history.size());
  for (size_t i = take; i < static_cast<size_t>(hist_max); ++i) {
    padded.push_back(Vocabulary::kBos);
  }
  for (size_t i = history.size() - take; i < history.size(); ++i) {
    padded.push_back(history[i]);
  }
  thread_local std::vector<int> key;
  for (int len = hist_max; len >= 0; --len) {
    key.assign(padded.end() - len, padded.end());
    const auto& level = tables_[static_cast<size_t>(len)];
    auto it = level.find(key);
    if (it != level.end()) {
      double denom = static_cast<double>(it->second.total) +
                     delta_ * static_cast<double>(vocab_size);
      return {delta_ / denom, denom, &it->second};
    }
  }
  double denom = delta_ * static_cast<double>(vocab_size);
  return {delta_ / denom, denom, nullptr};
}

void NGramModel::next_token_dist_into(std::span<const int> history,
                                      std::vector<double>& out) const {
  size_t vocab_size = vocab_->size();
  out.resize(vocab_size);
  DistParts own = data_dist_parts(history);
  if (!base_) {
    std::fill(out.begin(), out.end(), own.floor);
    if (own.table) {
      for (const auto& [token, count] : own.table->counts) {
        out[static_cast<size_t>(token)] =
            (static_cast<double>(count) + delta_) / own.denom;
      }
    }
    return;
  }
  DistParts bp = base_->data_dist_parts(history);
  double fill = lambda_ * own.floor + (1.0 - lambda_) * bp.floor;
  std::fill(out.begin(), out.end(), fill);
  if (own.table && lambda_ != 0.0) {
    for (const auto& [token, count] : own.table->counts) {
      out[static_cast<size_t>(token)] +=
          lambda_ * (static_cast<double>(count) / own.denom);
    }
  }
  if (bp.table && lambda_ != 1.0) {
    for (const auto& [token, count] : bp.table->counts) {
      out[static_cast<size_t>(token)] +=
          (1.0 - lambda_) * (static_cast<double>(count) / bp.denom);
    }
  }
}

std::vector<double> NGramModel::next_token_dist(
    std::span<const int> history) const {
  std::vector<double> out;
  next_token_dist_into(history, out);
  return out;
}

NGramModel train_base(const std::vector<Document>& docs, int order,
                      double delta, std::shared_ptr<const Vocabulary> vocab) {
  NGramModel model(order, std::move(vocab), delta);
  long long total = 0;
  for (const auto& doc : docs) {
    model.observe(doc.tokens, 0);
    total += static_cast<long long>(doc.tokens.size());
  }
  if (total == 0) throw std::runtime_error("train_base: empty corpus");
  return model;
}

NGramModel finetune(std::shared_ptr<const NGramModel> base,
                    const std::vector<ChunkPair>& dataset,
                    double interp_lambda) {
  if (!base) throw std::invalid_argument("finetune: null base model");
  if (base->base_) {
    throw std::invalid_argument("finetune: base must not itself have a base");
  }
  if (!(interp_lambda >= 0.0 && interp_lambda <= 1.0)) {
    throw std::invalid_argument("finetune: interp_lambda must be in [0, 1]");
  }
  if (dataset.empty()) throw std::runtime_error("finetune: empty dataset");
  NGramModel model(base->order(), base->vocab_ptr(), base->smoothing_delta());
  std::vector<int> seq;
  for (const auto& pair : dataset) {
    seq.clear();
    seq.insert(seq.end(), pair.context.begin(), pair.context.end());
    seq.insert(seq.end(), pair.continuation.begin(), pair.continuation.end());
    model.observe(seq, pair.context.size());
  }
  model.base_ = std::move(base);
  model.lambda_ = interp_lambda;
  return model;
}

namespace {

size_t argmax_lowest(const std::vector<double>& dist) {
  size_t best = 0;
  for (size_t i = 1; i < dist.size(); ++i) {
    if (dist[i] > dist[best]) best = i;
  }
  return best;
}

struct ChunkScore {
  double nll_sum = 0;
  long long correct = 0;
  long long count = 0;
};

}  // namespace

EvalResult evaluate(const NGramModel& model, const std::vector<Document>& docs,
                    int m, int c, int workers) {
  std::vector<ChunkPair> chunks = chunk_all(docs, m, c);
  if (chunks.empty()) throw std::runtime_error("evaluate: no evaluable tokens");

  EvalResult result;
  result.nll_values.resize(chunks.size() * static_cast<size_t>(c));
  std::vector<ChunkScore> scores(chunks.size());

  parallel_for(chunks.size(), workers, [&](size_t ci) {
    const ChunkPair& pair = chunks[ci];
    thread_local std::vector<int> seq;
    thread_local std::vector<double> dist;
    seq.clear();
    seq.insert(seq.end(), pair.context.begin(), pair.context.end());
    seq.insert(seq.end(), pair.continuation.begin(), pair.continuation.end());
    ChunkScore& cs = scores[ci];
    size_t out_base = ci * static_cast<size_t>(c);
    for (size_t pos = pair.context.size(); pos < seq.size(); ++pos) {
      model.next_token_dist_into(
          std::span<const int>(seq.data(), pos), dist);
      int target = seq[pos];
      double nll = -std::log(dist[static_cast<size_t>(target)]);
      result.nll_values[out_base + (pos - pair.context.size())] = nll;
      cs.nll_sum += nll;
      if (argmax_lowest(dist) == static_cast<size_t>(target)) ++cs.correct;
      ++cs.count;
    }
  });

  // Reduce in document-id order: the totals are identical no matter how the
  // input documents were ordered or partitioned across workers.
  // chunk_all assigns chunk indices consecutively per document.
  std::vector<std::vector<size_t>> doc_chunks(docs.size());
  size_t next = 0;
  size_t window = static_cast<size_t>(m) + static_cast<size_t>(c);
  for (size_t d = 0; d < docs.size(); ++d) {
    size_t cnt = docs[d].tokens.size() / window;
    for (size_t k = 0; k < cnt; ++k) doc_chunks[d].push_back(next++);
  }
  if (next != chunks.size()) {
    throw std::logic_error("evaluate: chunk bookkeeping mismatch");
  }
  std::vector<size_t> doc_order(docs.size());
  std::iota(doc_order.begin(), doc_order.end(), size_t{0});
  std::sort(doc_order.begin(), doc_order.end(), [&](size_t a, size_t b) {
    if (docs[a].id != docs[b].id) return docs[a].id < docs[b].id;
    return a < b;
  });

  double nll_total = 0;
  long long correct = 0;
  long long count = 0;
  for (size_t d : doc_order) {
    for (size_t ci : doc_chunks[d]) {
      nll_total += scores[ci].nll_sum;
      correct += scores[ci].correct;
      count += scores[ci].count;
    }
  }
  if (count == 0) throw std::runtime_error("evaluate: no evaluable tokens");
  result.perplexity = std::exp(nll_total / static_cast<double>(count));
  result.accuracy =
      static_cast<double>(correct) / static_cast<double>(count);
  result.token_count = count;
  return result;
}

Histogram perplexity_histogram(const NGramModel& model,
                               const std::vector<Document>& docs, int m, int c,
                               const std::vector<double>& edges, int workers) {
  if (edges.size() < 2 ||
      !std::is_sorted(edges.begin(), edges.end()) ||
      std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
    throw std::invalid_argument(
        "perplexity_histogram: edges must be strictly increasing");
  }
  if (docs.empty()) {
    throw std::invalid_argument("perplexity_histogram: no documents");
  }

  std::vector<double> doc_ppl(docs.size(),
                              std::numeric_limits<double>::quiet_NaN());
  parallel_for(docs.size(), workers, [&](size_t di) {
    std::vector<ChunkPair> chunks = chunk(docs[di], m, c);
    if (chunks.empty()) return;  // too short to score; leaves NaN
    thread_local std::vector<int> seq;
    thread_local std::vector<double> dist;
    double nll_sum = 0;
    long long count = 0;
    for (const auto& pair : chunks) {
      seq.clear();
      seq.insert(seq.end(), pair.context.begin(), pair.context.end());
      seq.insert(seq.end(), pair.continuation.begin(),
                 pair.continuation.end());
      for (size_t pos = pair.context.size(); pos < seq.size(); ++pos) {
        model.next_token_dist_into(std::span<const int>(seq.data(), pos),
                                   dist);
        nll_sum += -std::log(dist[static_cast<size_t>(seq[pos])]);
        ++count;
      }
    }
    doc_ppl[di] = std::exp(nll_sum / static_cast<double>(count));
  });

  Histogram hist;
  hist.edges = edges;
  hist.counts.assign(edges.size() - 1, 0);
  long long num_bins = static_cast<long long>(hist.counts.size());
  for (double ppl : doc_ppl) {
    if (std::isnan(ppl)) continue;
    auto it = std::upper_bound(edges.begin(), edges.end(), ppl);
    long long idx = static_cast<long long>(it - edges.begin()) - 1;
    idx = std::clamp(idx, 0LL, num_bins - 1);
    ++hist.counts[static_cast<size_t>(idx)];
  }
  return hist;
}

namespace {

constexpr char kModelMagic[8] = {'C', 'L', 'A', 'B', 'N', 'G', 'M', '1'};

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& value) {
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
}

}  // namespace

void NGramModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_model: cannot open " + path);
  out.write(kModelMagic, sizeof(kModelMagic));
  write_pod(out, static_cast<uint32_t>(order_));
  write_pod(out, delta_);
  write_pod(out, lambda_);
  write_pod(out, vocab_hash());
  write_pod(out, static_cast<uint8_t>(base_ ? 1 : 0));
  write_pod(out, static_cast<uint32_t>(tables_.size()));
  for (const auto& level : tables_) {
    write_pod(out, static_cast<uint64_t>(level.size()));
    for (const auto& [history, table] : level) {
      write_pod(out, static_cast<uint32_t>(history.size()));
      for (int token : history) write_pod(out, static_cast<int32_t>(token));
      write_pod(out, static_cast<uint64_t>(table.counts.size()));
      for (const auto& [token, count] : table.counts) {
        write_pod(out, static_cast<int32_t>(token));
        write_pod(out, static_cast<int64_t>(count));
      }
    }
  }
  if (!out) throw std::runtime_error("save_model: write failed: " + path);
}

NGramModel NGramModel::load(const std::string& path,
                            std::shared_ptr<const Vocabulary> vocab,
                            std::shared_ptr<const NGramModel> base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_model: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("load_model: not a model file: " + path);
  }
  uint32_t order = 0;
  double delta = 0;
  double lambda = 1;
  uint64_t vhash = 0;
  uint8_t has_base = 0;
  uint32_t num_levels = 0;
  read_pod(in, order);
  read_pod(in, delta);
  read_pod(in, lambda);
  read_pod(in, vhash);
  read_pod(in, has_base);
  read_pod(in, num_levels);
  if (!in) throw std::runtime_error("load_model: truncated file: " + path);
  if (!vocab) throw std::invalid_argument("load_model: null vocabulary");
  if (vhash != vocab->content_hash()) {
    throw std::runtime_error(
        "load_model: vocabulary mismatch (model was saved with a different "
        "vocabulary): " +
        path);
  }
  if (has_base && !base) {
    throw std::runtime_error("load_model: model requires its base model: " +
                             path);
  }
  if (!has_base && base) {
    throw std::runtime_error("load_model: model has no base: " + path);
  }

  NGramModel model(static_cast<int>(order), vocab, delta);
  if (num_levels != static_cast<uint32_t>(model.order_)) {
    throw std::runtime_error("load_model: corrupt level count: " + path);
  }
  for (uint32_t len = 0; len < num_levels; ++len) {
    uint64_t num_histories = 0;
    read_pod(in, num_histories);
    for (uint64_t h = 0; h < num_histories; ++h) {
      uint32_t hist_len = 0;
      read_pod(in, hist_len);
      std::vector<int> history(hist_len);
      for (auto& token : history) {
        int32_t t = 0;
        read_pod(in, t);
        token = t;
      }
      uint64_t num_pairs = 0;
      read_pod(in, num_pairs);
      CountTable table;
      for (uint64_t p = 0; p < num_pairs; ++p) {
        int32_t token = 0;
        int64_t count = 0;
        read_pod(in, token);
        read_pod(in, count);
        table.counts[token] = count;
        table.total += count;
      }
      if (!in) throw std::runtime_error("load_model: truncated file: " + path);
      model.tables_[len].emplace(std::move(history), std::move(table));
    }
  }
  if (has_base) {
    if (base->base_) {
      throw std::runtime_error("load_model: base must not itself have a base");
    }
    model.base_ = std::move(base);
  }
  model.lambda_ = lambda;
  return model;
}

}  // namespace clab
