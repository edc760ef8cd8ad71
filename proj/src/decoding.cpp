#include "clab/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace clab {

void DecodingStrategy::validate() const {
  if (kind == StrategyKind::Temperature && !(tau > 0 && tau <= 1)) {
    throw std::invalid_argument("decoding: tau must be in (0, 1]");
  }
  if (kind == StrategyKind::TopK && k < 1) {
    throw std::invalid_argument("decoding: k must be >= 1");
  }
  if (kind == StrategyKind::Nucleus && !(eta > 0 && eta <= 1)) {
    throw std::invalid_argument("decoding: eta must be in (0, 1]");
  }
  if (kind == StrategyKind::Beam && beam_width < 1) {
    throw std::invalid_argument("decoding: beam_width must be >= 1");
  }
}

const char* strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::Greedy: return "greedy";
    case StrategyKind::Beam: return "beam";
    case StrategyKind::Pure: return "pure";
    case StrategyKind::Temperature: return "temperature";
    case StrategyKind::TopK: return "top_k";
    case StrategyKind::Nucleus: return "nucleus";
  }
  return "unknown";
}

StrategyKind parse_strategy(const std::string& name) {
  if (name == "greedy") return StrategyKind::Greedy;
  if (name == "beam") return StrategyKind::Beam;
  if (name == "pure") return StrategyKind::Pure;
  if (name == "temperature") return StrategyKind::Temperature;
  if (name == "top_k") return StrategyKind::TopK;
  if (name == "nucleus") return StrategyKind::Nucleus;
  throw std::invalid_argument("decoding: unknown strategy '" + name + "'");
}

namespace {

size_t argmax_lowest(const std::vector<double>& dist) {
  size_t best = 0;
  for (size_t i = 1; i < dist.size(); ++i) {
    if (dist[i] > dist[best]) best = i;
  }
  return best;
}

bool is_identity(const DecodingStrategy& s, size_t vocab_size) {
  switch (s.kind) {
    case StrategyKind::Pure: return true;
    case StrategyKind::Temperature: return s.tau == 1.0;
    case StrategyKind::TopK: return static_cast<size_t>(s.k) >= vocab_size;
    case StrategyKind::Nucleus: return s.eta >= 1.0;
    default: return false;
  }
}

// Renormalizes the masked entries of `dist` into `out`, accumulating the
// kept mass in ascending id order so the result is ordering-independent.
void renormalize_masked(const std::vector<double>& dist,
                        const std::vector<char>& keep,
                        std::vector<double>& out) {
  double total = 0;
  for (size_t i = 0; i < dist.size(); ++i) {
    if (keep[i]) total += dist[i];
  }
  out.resize(dist.size());
  for (size_t i = 0; i < dist.size(); ++i) {
    out[i] = keep[i] ? dist[i] / total : 0.0;
  }
}

void transform_into(const std::vector<double>& dist,
                    const DecodingStrategy& s, std::vector<double>& out) {
  size_t n = dist.size();
  switch (s.kind) {
    case StrategyKind::Temperature: {
      double inv_tau = 1.0 / s.tau;
      out.resize(n);
      // The smoothing floor makes most entries share one value; pow is
      // computed once per distinct minimum.
      double mn = *std::min_element(dist.begin(), dist.end());
      double pow_mn = std::pow(mn, inv_tau);
      double total = 0;
      for (size_t i = 0; i < n; ++i) {
        out[i] = dist[i] == mn ? pow_mn : std::pow(dist[i], inv_tau);
        total += out[i];
      }
      for (size_t i = 0; i < n; ++i) out[i] /= total;
      return;
    }
    case StrategyKind::TopK: {
      std::vector<size_t> order(n);
      std::iota(order.begin(), order.end(), size_t{0});
      auto better = [&](size_t a, size_t b) {
        if (dist[a] != dist[b]) return dist[a] > dist[b];
        return a < b;
      };
      size_t keep_n = std::min(static_cast<size_t>(s.k), n);
      std::nth_element(order.begin(), order.begin() + (keep_n - 1),
                       order.end(), better);
      std::vector<char> keep(n, 0);
      for (size_t i = 0; i < keep_n; ++i) keep[order[i]] = 1;
      renormalize_masked(dist, keep, out);
      return;
    }
    case StrategyKind::Nucleus: {
      std::vector<size_t> order(n);
      std::iota(order.begin(), order.end(), size_t{0});
      std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (dist[a] != dist[b]) return dist[a] > dist[b];
        return a < b;
      });
      std::vector<char> keep(n, 0);
      double cum = 0;
      for (size_t i = 0; i < n; ++i) {
        keep[order[i]] = 1;
        cum += dist[order[i]];
        if (cum >= s.eta) break;
      }
      renormalize_masked(dist, keep, out);
      return;
    }
    case StrategyKind::Pure:
      out = dist;
      return;
    default:
      throw std::invalid_argument(
          "transform_dist: deterministic strategy has no distribution "
          "transform");
  }
}

void check_normalized(const std::vector<double>& dist, const char* who) {
  double total = 0;
  for (double p : dist) total += p;
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument(std::string(who) +
                                ": distribution is not normalized");
  }
}

int draw_index(const std::vector<double>& dist, Rng& rng) {
  double u = rng.next_double();
  double cum = 0;
  size_t last_positive = 0;
  for (size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] <= 0) continue;
    last_positive = i;
    cum += dist[i];
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(last_positive);  // rounding undershoot
}

}  // namespace

std::vector<double> transform_dist(const std::vector<double>& dist,
                                   const DecodingStrategy& strategy) {
  strategy.validate();
  if (dist.empty()) {
    throw std::invalid_argument("transform_dist: empty distribution");
  }
  if (strategy.kind == StrategyKind::Greedy ||
      strategy.kind == StrategyKind::Beam) {
    throw std::invalid_argument(
        "transform_dist: deterministic strategy has no distribution "
        "transform");
  }
  check_normalized(dist, "transform_dist");
  if (is_identity(strategy, dist.size())) return dist;
  std::vector<double> out;
  transform_into(dist, strategy, out);
  return out;
}

int sample_token(const std::vector<double>& dist,
                 const DecodingStrategy& strategy, Rng& rng) {
  strategy.validate();
  if (dist.empty()) {
    throw std::invalid_argument("sample_token: empty distribution");
  }
  check_normalized(dist, "sample_token");
  if (strategy.kind == StrategyKind::Greedy) {
    return static_cast<int>(argmax_lowest(dist));
  }
  if (strategy.kind == StrategyKind::Beam) {
    throw std::invalid_argument(
        "sample_token: beam search is sequence-level, not per-token");
  }
  if (is_identity(strategy, dist.size())) return draw_index(dist, rng);
  thread_local std::vector<double> buf;
  transform_into(dist, strategy, buf);
  return draw_index(buf, rng);
}

std::vector<int> beam_search(const NGramModel& model,
                             const std::vector<int>& context, int length,
                             int width) {
  if (width < 1) {
    throw std::invalid_argument("beam_search: width must be >= 1");
  }
  if (length < 0) {
    throw std::invalid_argument("beam_search: length must be >= 0");
  }
  if (length == 0) return {};

  struct Beam {
    std::vector<int> suffix;  // generated tokens only
    double score = 0;         // summed ln p
  };
  std::vector<Beam> beams{{{}, 0.0}};
  std::vector<int> seq;
  std::vector<double> dist;
  std::vector<Beam> candidates;
  for (int step = 0; step < length; ++step) {
    candidates.clear();
    for (const Beam& b : beams) {
      seq.assign(context.begin(), context.end());
      seq.insert(seq.end(), b.suffix.begin(), b.suffix.end());
      model.next_token_dist_into(seq, dist);
      for (size_t t = 0; t < dist.size(); ++t) {
        Beam c;
        c.suffix = b.suffix;
        c.suffix.push_back(static_cast<int>(t));
        c.score = b.score + std::log(dist[t]);
        candidates.push_back(std::move(c));
      }
    }
    auto better = [](const Beam& a, const Beam& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.suffix < b.suffix;
    };
    size_t keep = std::min(static_cast<size_t>(width), candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + keep,
                      candidates.end(), better);
    candidates.resize(keep);
    beams = std::move(candidates);
    candidates = {};
  }
  return beams.front().suffix;
}

std::vector<int> generate(const NGramModel& model,
                          const std::vector<int>& context, int length,
                          const DecodingStrategy& strategy, Rng& rng) {
  strategy.validate();
  if (length < 1) {
    throw std::invalid_argument("generate: length must be >= 1");
  }
  if (strategy.kind == StrategyKind::Beam) {
    return beam_search(model, context, length, strategy.beam_width);
  }
  std::vector<int> seq(context);
  std::vector<int> out;
  out.reserve(static_cast<size_t>(length));
  std::vector<double> dist;
  for (int step = 0; step < length; ++step) {
    model.next_token_dist_into(seq, dist);
    int token = sample_token(dist, strategy, rng);
    seq.push_back(token);
    out.push_back(token);
  }
  return out;
}

}  // namespace clab
