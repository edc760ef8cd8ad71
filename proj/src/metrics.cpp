#include "clab/metrics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace clab {

namespace {

struct NKey {
  std::array<int32_t, 4> ids;  // padded with -1 beyond the n-gram length
  bool operator==(const NKey& o) const { return ids == o.ids; }
};

struct NKeyHash {
  size_t operator()(const NKey& k) const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (int32_t id : k.ids) {
      h ^= static_cast<uint32_t>(id);
      h *= 0x100000001b3ULL;
      h ^= h >> 29;
    }
    return static_cast<size_t>(h);
  }
};

struct Interner {
  std::unordered_map<std::string, int32_t> map;
  int32_t intern(const std::string& s) {
    auto [it, inserted] = map.emplace(s, static_cast<int32_t>(map.size()));
    return it->second;
  }
  std::vector<int32_t> intern_seq(const TokenSeq& tokens) {
    std::vector<int32_t> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(intern(t));
    return out;
  }
};

NKey make_key(const std::vector<int32_t>& seq, size_t start, int n) {
  NKey k{{-1, -1, -1, -1}};
  for (int i = 0; i < n; ++i) k.ids[static_cast<size_t>(i)] = seq[start + i];
  return k;
}

using CountMap = std::unordered_map<NKey, int, NKeyHash>;

CountMap ngram_counts(const std::vector<int32_t>& seq, int n) {
  CountMap counts;
  if (seq.size() < static_cast<size_t>(n)) return counts;
  for (size_t i = 0; i + n <= seq.size(); ++i) {
    ++counts[make_key(seq, i, n)];
  }
  return counts;
}

uint64_t fnv1a64(std::initializer_list<const std::string*> parts,
                 uint8_t family) {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](uint8_t byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  feed(family);
  bool first = true;
  for (const std::string* part : parts) {
    if (!first) feed(0x1f);
    first = false;
    for (char ch : *part) feed(static_cast<uint8_t>(ch));
  }
  return h;
}

using SparseVec = std::vector<std::pair<int, double>>;  // sorted by index

SparseVec sparse_embed(const TokenSeq& tokens, int hash_dim) {
  std::unordered_map<int, double> tf;
  for (const auto& tok : tokens) {
    tf[static_cast<int>(fnv1a64({&tok}, 1) %
                        static_cast<uint64_t>(hash_dim))] += 1.0;
  }
  for (size_t i = 0; i + 1 < tokens.size(); ++i) {
    tf[static_cast<int>(fnv1a64({&tokens[i], &tokens[i + 1]}, 2) %
                        static_cast<uint64_t>(hash_dim))] += 1.0;
  }
  SparseVec out(tf.begin(), tf.end());
  std::sort(out.begin(), out.end());
  double norm2 = 0;
  for (const auto& [idx, v] : out) norm2 += v * v;
  if (norm2 > 0) {
    double inv = 1.0 / std::sqrt(norm2);
    for (auto& [idx, v] : out) v *= inv;
  }
  return out;
}

// Indices of `docs` in a canonical (lexicographic) order, so corpus-level
// metrics do not depend on input ordering.
std::vector<size_t> canonical_order(const std::vector<TokenSeq>& docs) {
  std::vector<size_t> order(docs.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (docs[a] != docs[b]) return docs[a] < docs[b];
    return a < b;
  });
  return order;
}

double brevity_penalty(long long cand_len, long long ref_len) {
  if (cand_len >= ref_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_len) /
                            static_cast<double>(cand_len));
}

constexpr double kPrecisionFloor = 1e-9;
constexpr int kMauveSampleSize = 1000;

}  // namespace

void EmbeddingConfig::validate() const {
  if (num_clusters < 1) {
    throw std::invalid_argument("mauve: num_clusters must be >= 1");
  }
  if (hash_dim < num_clusters) {
    throw std::invalid_argument("mauve: hash_dim must be >= num_clusters");
  }
  if (!(scaling_c > 0)) {
    throw std::invalid_argument("mauve: scaling_c must be > 0");
  }
  if (lambda_grid_size < 1) {
    throw std::invalid_argument("mauve: lambda_grid_size must be >= 1");
  }
  if (!(smoothing_eps > 0)) {
    throw std::invalid_argument("mauve: smoothing_eps must be > 0");
  }
}

double diversity(const TokenSeq& tokens) {
  if (tokens.size() < 4) {
    throw std::invalid_argument("diversity: need at least 4 tokens");
  }
  Interner interner;
  std::vector<int32_t> seq = interner.intern_seq(tokens);
  long long unique_prod = 1;
  long long total_prod = 1;
  for (int n = 2; n <= 4; ++n) {
    std::unordered_set<NKey, NKeyHash> unique;
    long long total = static_cast<long long>(seq.size()) - n + 1;
    for (size_t i = 0; i + n <= seq.size(); ++i) {
      unique.insert(make_key(seq, i, n));
    }
    unique_prod *= static_cast<long long>(unique.size());
    total_prod *= total;
  }
  // Single division keeps small hand-checkable cases exact.
  return static_cast<double>(unique_prod) / static_cast<double>(total_prod);
}

double bleu(const TokenSeq& candidate,
            const std::vector<TokenSeq>& references) {
  if (candidate.empty()) {
    throw std::invalid_argument("bleu: empty candidate");
  }
  if (references.empty()) {
    throw std::invalid_argument("bleu: need at least one reference");
  }
  Interner interner;
  std::vector<int32_t> cand = interner.intern_seq(candidate);
  std::vector<std::vector<int32_t>> refs;
  refs.reserve(references.size());
  for (const auto& r : references) refs.push_back(interner.intern_seq(r));

  int max_n = static_cast<int>(std::min<size_t>(4, cand.size()));
  double log_sum = 0;
  for (int n = 1; n <= max_n; ++n) {
    CountMap cand_counts = ngram_counts(cand, n);
    CountMap ref_max;
    for (const auto& ref : refs) {
      for (const auto& [key, count] : ngram_counts(ref, n)) {
        auto& slot = ref_max[key];
        slot = std::max(slot, count);
      }
    }
    long long clipped = 0;
    long long total = static_cast<long long>(cand.size()) - n + 1;
    for (const auto& [key, count] : cand_counts) {
      auto it = ref_max.find(key);
      if (it != ref_max.end()) clipped += std::min(count, it->second);
    }
    double precision =
        std::max(static_cast<double>(clipped) / static_cast<double>(total),
                 kPrecisionFloor);
    log_sum += std::log(precision);
  }

  long long cand_len = static_cast<long long>(cand.size());
  long long best_ref_len = static_cast<long long>(refs.front().size());
  for (const auto& ref : refs) {
    long long len = static_cast<long long>(ref.size());
    long long d_new = std::llabs(len - cand_len);
    long long d_old = std::llabs(best_ref_len - cand_len);
    if (d_new < d_old || (d_new == d_old && len < best_ref_len)) {
      best_ref_len = len;
    }
  }
  return brevity_penalty(cand_len, best_ref_len) *
         std::exp(log_sum / static_cast<double>(max_n));
}

namespace {

struct GramStats {
  int max_count = 0;
  int second_count = 0;  // max over docs other than argmax_doc
  int argmax_doc = -1;
};

}  // namespace

double self_bleu(const std::vector<TokenSeq>& docs, int sample_size,
                 Rng& rng) {
  if (docs.size() < 2) {
    throw std::invalid_argument("self_bleu: need at least 2 docs");
  }
  if (sample_size < 2) {
    throw std::invalid_argument("self_bleu: sample_size must be >= 2");
  }
  std::vector<size_t> canon = canonical_order(docs);
  size_t k = std::min(static_cast<size_t>(sample_size), docs.size());
  std::vector<size_t> picks = rng.sample_indices(docs.size(), k);

  Interner interner;
  std::vector<std::vector<int32_t>> sample;
  sample.reserve(k);
  for (size_t p : picks) {
    const TokenSeq& doc = docs[canon[p]];
    if (doc.empty()) {
      throw std::invalid_argument("self_bleu: empty document");
    }
    sample.push_back(interner.intern_seq(doc));
  }

  // Per n-gram, the top two counts across the sample let each doc clip
  // against "all other docs" without a second pass over the corpus.
  std::array<std::vector<CountMap>, 4> per_doc_counts;
  std::array<std::unordered_map<NKey, GramStats, NKeyHash>, 4> stats;
  for (int n = 1; n <= 4; ++n) {
    auto& counts_n = per_doc_counts[static_cast<size_t>(n - 1)];
    auto& stats_n = stats[static_cast<size_t>(n - 1)];
    counts_n.reserve(k);
    for (size_t d = 0; d < k; ++d) {
      counts_n.push_back(ngram_counts(sample[d], n));
      for (const auto& [key, count] : counts_n.back()) {
        GramStats& gs = stats_n[key];
        if (count > gs.max_count) {
          gs.second_count = gs.max_count;
          gs.max_count = count;
          gs.argmax_doc = static_cast<int>(d);
        } else if (count > gs.second_count) {
          gs.second_count = count;
        }
      }
    }
  }

  std::vector<long long> lengths(k);
  for (size_t d = 0; d < k; ++d) {
    lengths[d] = static_cast<long long>(sample[d].size());
  }
  std::vector<long long> sorted_lengths(lengths);
  std::sort(sorted_lengths.begin(), sorted_lengths.end());

  double score_sum = 0;
  for (size_t d = 0; d < k; ++d) {
    long long cand_len = lengths[d];
    int max_n = static_cast<int>(std::min<long long>(4, cand_len));
    double log_sum = 0;
    for (int n = 1; n <= max_n; ++n) {
      const auto& counts_n = per_doc_counts[static_cast<size_t>(n - 1)];
      const auto& stats_n = stats[static_cast<size_t>(n - 1)];
      long long clipped = 0;
      long long total = cand_len - n + 1;
      for (const auto& [key, count] : counts_n[d]) {
        const GramStats& gs = stats_n.at(key);
        int other_max = gs.argmax_doc == static_cast<int>(d) ? gs.second_count
                                                             : gs.max_count;
        clipped += std::min(count, other_max);
      }
      double precision =
          std::max(static_cast<double>(clipped) / static_cast<double>(total),
                   kPrecisionFloor);
      log_sum += std::log(precision);
    }

    // Closest other-doc length, excluding this doc's own instance; length
    // ties prefer the shorter reference.
    auto lo = std::lower_bound(sorted_lengths.begin(), sorted_lengths.end(),
                               cand_len);
    auto hi = std::upper_bound(sorted_lengths.begin(), sorted_lengths.end(),
                               cand_len);
    long long ref_len;
    if (hi - lo >= 2) {
      ref_len = cand_len;  // another doc shares this length
    } else {
      bool has_pred = lo != sorted_lengths.begin();
      bool has_succ = hi != sorted_lengths.end();
      long long pred = has_pred ? *(lo - 1) : 0;
      long long succ = has_succ ? *hi : 0;
      if (!has_pred) {
        ref_len = succ;
      } else if (!has_succ) {
        ref_len = pred;
      } else {
        ref_len = (cand_len - pred <= succ - cand_len) ? pred : succ;
      }
    }
    score_sum += brevity_penalty(cand_len, ref_len) *
                 std::exp(log_sum / static_cast<double>(max_n));
  }
  return 100.0 * score_sum / static_cast<double>(k);
}

std::vector<double> embed(const TokenSeq& tokens, int hash_dim) {
  if (hash_dim < 1) {
    throw std::invalid_argument("embed: hash_dim must be >= 1");
  }
  std::vector<double> out(static_cast<size_t>(hash_dim), 0.0);
  for (const auto& [idx, v] : sparse_embed(tokens, hash_dim)) {
    out[static_cast<size_t>(idx)] = v;
  }
  return out;
}

namespace {

double kl_divergence(const std::vector<double>& a,
                     const std::vector<double>& b) {
  double kl = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] <= 0) continue;
    if (b[i] <= 0) return std::numeric_limits<double>::infinity();
    kl += a[i] * std::log(a[i] / b[i]);
  }
  return std::max(kl, 0.0);
}

std::vector<int> kmeans_assign(const std::vector<SparseVec>& points, int k,
                               Rng& rng) {
  size_t n = points.size();
  size_t dim = 0;
  for (const auto& p : points) {
    for (const auto& [idx, v] : p) {
      dim = std::max(dim, static_cast<size_t>(idx) + 1);
    }
  }
  dim = std::max(dim, size_t{1});

  std::vector<double> x2(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (const auto& [idx, v] : points[i]) x2[i] += v * v;
  }

  std::vector<std::vector<double>> centroids(
      static_cast<size_t>(k), std::vector<double>(dim, 0.0));
  std::vector<double> c2(static_cast<size_t>(k), 0.0);
  auto densify = [&](size_t pi, size_t ci) {
    auto& c = centroids[ci];
    std::fill(c.begin(), c.end(), 0.0);
    for (const auto& [idx, v] : points[pi]) c[static_cast<size_t>(idx)] = v;
  };
  auto centroid_norm2 = [&](size_t ci) {
    double s = 0;
    for (double v : centroids[ci]) s += v * v;
    return s;
  };
  auto dist2 = [&](size_t pi, size_t ci) {
    double dot = 0;
    const auto& c = centroids[ci];
    for (const auto& [idx, v] : points[pi]) {
      dot += v * c[static_cast<size_t>(idx)];
    }
    return std::max(x2[pi] - 2.0 * dot + c2[ci], 0.0);
  };

  // k-means++ seeding: the next center is drawn proportionally to squared
  // distance from the nearest chosen center.
  densify(rng.next_below(static_cast<uint64_t>(n)), 0);
  c2[0] = centroid_norm2(0);
  std::vector<double> d2(n);
  for (size_t i = 0; i < n; ++i) d2[i] = dist2(i, 0);
  for (size_t ci = 1; ci < static_cast<size_t>(k); ++ci) {
    double total = 0;
    for (double d : d2) total += d;
    size_t pick;
    if (total > 0) {
      double u = rng.next_double() * total;
      double cum = 0;
      pick = n - 1;
      for (size_t i = 0; i < n; ++i) {
        cum += d2[i];
        if (u < cum) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.next_below(static_cast<uint64_t>(n));
    }
    densify(pick, ci);
    c2[ci] = centroid_norm2(ci);
    for (size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], dist2(i, ci));
  }

  std::vector<int> assign(n, -1);
  std::vector<int> prev(n, -1);
  std::vector<std::vector<double>> accum(static_cast<size_t>(k));
  std::vector<long long> counts(static_cast<size_t>(k));
  for (int iter = 0; iter < 50; ++iter) {
    for (size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = dist2(i, 0);
      for (int j = 1; j < k; ++j) {
        double d = dist2(i, static_cast<size_t>(j));
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      assign[i] = best;
    }
    if (assign == prev) break;  // fixed point; further iterations are no-ops
    prev = assign;

    for (int j = 0; j < k; ++j) {
      accum[static_cast<size_t>(j)].assign(dim, 0.0);
      counts[static_cast<size_t>(j)] = 0;
    }
    for (size_t i = 0; i < n; ++i) {
      auto& acc = accum[static_cast<size_t>(assign[i])];
      for (const auto& [idx, v] : points[i]) acc[static_cast<size_t>(idx)] += v;
      ++counts[static_cast<size_t>(assign[i])];
    }
    for (int j = 0; j < k; ++j) {
      if (counts[static_cast<size_t>(j)] == 0) continue;  // keep old center
      auto& c = centroids[static_cast<size_t>(j)];
      double inv = 1.0 / static_cast<double>(counts[static_cast<size_t>(j)]);
      for (size_t dI = 0; dI < dim; ++dI) {
        c[dI] = accum[static_cast<size_t>(j)][dI] * inv;
      }
      c2[static_cast<size_t>(j)] = centroid_norm2(static_cast<size_t>(j));
    }
  }
  return assign;
}

}  // namespace

double divergence_frontier_area(const std::vector<double>& p,
                                const std::vector<double>& q, double scaling_c,
                                int lambda_grid_size) {
  if (p.empty() || p.size() != q.size()) {
    throw std::invalid_argument(
        "divergence_frontier_area: histograms must be nonempty and equal "
        "size");
  }
  if (!(scaling_c > 0) || lambda_grid_size < 1) {
    throw std::invalid_argument(
        "divergence_frontier_area: bad scaling or grid size");
  }
  std::vector<std::pair<double, double>> pts;
  pts.reserve(static_cast<size_t>(lambda_grid_size) + 2);
  std::vector<double> r(p.size());
  for (int j = 1; j <= lambda_grid_size; ++j) {
    double lambda =
        static_cast<double>(j) / static_cast<double>(lambda_grid_size + 1);
    for (size_t i = 0; i < p.size(); ++i) {
      r[i] = lambda * p[i] + (1.0 - lambda) * q[i];
    }
    pts.emplace_back(std::exp(-scaling_c * kl_divergence(q, r)),
                     std::exp(-scaling_c * kl_divergence(p, r)));
  }
  pts.emplace_back(0.0, 1.0);
  pts.emplace_back(1.0, 0.0);
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second > b.second;
  });
  double area = 0;
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    area += (pts[i + 1].first - pts[i].first) *
            (pts[i].second + pts[i + 1].second) * 0.5;
  }
  return area;
}

double mauve_lite(const std::vector<TokenSeq>& human_docs,
                  const std::vector<TokenSeq>& model_docs,
                  const EmbeddingConfig& cfg, Rng& rng) {
  cfg.validate();
  if (human_docs.size() < static_cast<size_t>(cfg.num_clusters) ||
      model_docs.size() < static_cast<size_t>(cfg.num_clusters)) {
    throw std::runtime_error(
        "mauve_lite: need at least num_clusters docs on each side");
  }
  auto select = [&](const std::vector<TokenSeq>& docs) {
    std::vector<size_t> canon = canonical_order(docs);
    size_t take = std::min(static_cast<size_t>(kMauveSampleSize), docs.size());
    std::vector<size_t> picks = rng.sample_indices(docs.size(), take);
    std::vector<SparseVec> out;
    out.reserve(take);
    for (size_t p : picks) {
      out.push_back(sparse_embed(docs[canon[p]], cfg.hash_dim));
    }
    return out;
  };
  std::vector<SparseVec> points = select(human_docs);
  size_t n_human = points.size();
  for (auto& v : select(model_docs)) points.push_back(std::move(v));
  size_t n_model = points.size() - n_human;

  std::vector<int> assign = kmeans_assign(points, cfg.num_clusters, rng);

  std::vector<double> p_hist(static_cast<size_t>(cfg.num_clusters), 0.0);
  std::vector<double> q_hist(static_cast<size_t>(cfg.num_clusters), 0.0);
  for (size_t i = 0; i < n_human; ++i) {
    p_hist[static_cast<size_t>(assign[i])] += 1.0;
  }
  for (size_t i = n_human; i < points.size(); ++i) {
    q_hist[static_cast<size_t>(assign[i])] += 1.0;
  }
  auto finalize = [&](std::vector<double>& h, size_t count) {
    double total = 0;
    for (double& v : h) {
      v = v / static_cast<double>(count) + cfg.smoothing_eps;
      total += v;
    }
    for (double& v : h) v /= total;
  };
  finalize(p_hist, n_human);
  finalize(q_hist, n_model);
  return divergence_frontier_area(p_hist, q_hist, cfg.scaling_c,
                                  cfg.lambda_grid_size);
}

double reading_ease(const std::string& text) {
  long long words = 0;
  long long syllables = 0;
  size_t i = 0;
  auto is_space = [](char ch) {
    return ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' ||
           ch == '\f' || ch == '\v';
  };
  auto is_vowel = [](char ch) {
    ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return ch == 'a' || ch == 'e' || ch == 'i' || ch == 'o' || ch == 'u' ||
           ch == 'y';
  };
  auto is_alpha = [](char ch) {
    return std::isalpha(static_cast<unsigned char>(ch)) != 0;
  };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i == start) break;
    bool has_alpha = false;
    long long groups = 0;
    bool in_group = false;
    char last_alpha = '\0';
    for (size_t p = start; p < i; ++p) {
      char ch = text[p];
      if (is_alpha(ch)) {
        has_alpha = true;
        last_alpha =
            static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      }
      if (is_alpha(ch) && is_vowel(ch)) {
        if (!in_group) ++groups;
        in_group = true;
      } else {
        in_group = false;
      }
    }
    if (!has_alpha) continue;
    ++words;
    if (last_alpha == 'e') --groups;
    syllables += std::max(groups, 1LL);
  }
  if (words == 0) throw std::invalid_argument("reading_ease: no words");

  long long sentences = 0;
  bool in_run = false;
  for (char ch : text) {
    if (ch == '.' || ch == '!' || ch == '?') {
      if (!in_run) ++sentences;
      in_run = true;
    } else {
      in_run = false;
    }
  }
  sentences = std::max(sentences, 1LL);

  return 206.835 -
         1.015 * (static_cast<double>(words) /
                  static_cast<double>(sentences)) -
         84.6 * (static_cast<double>(syllables) /
                 static_cast<double>(words));
}

}  // namespace clab
