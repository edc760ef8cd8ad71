#include "clab/resampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace clab {

void ResampleConfig::validate() const {
  if (!(k > 0)) {
    throw std::invalid_argument("resample: k must be > 0");
  }
  if (!(b >= 1)) {
    throw std::invalid_argument("resample: b must be >= 1");
  }
  if (r_max < 1) {
    throw std::invalid_argument("resample: r_max must be >= 1");
  }
}

std::vector<double> compute_weights(const std::vector<double>& scores,
                                    double b) {
  if (scores.empty()) {
    throw std::invalid_argument("compute_weights: empty score list");
  }
  if (!(b >= 1)) {
    throw std::invalid_argument("compute_weights: b must be >= 1");
  }
  std::vector<double> weights(scores.size());
  double total = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    double q = scores[i];
    if (!(q >= 0 && q <= 1)) {
      throw std::invalid_argument(
          "compute_weights: scores must be in [0, 1]");
    }
    weights[i] = std::pow(1.0 - q, b);
    total += weights[i];
  }
  if (total <= 0) {
    throw std::runtime_error("degenerate pool: all samples judged machine");
  }
  for (double& w : weights) w /= total;
  return weights;
}

std::vector<Document> resample(const WeightedPool& pool,
                               const ResampleConfig& cfg, Rng& rng) {
  cfg.validate();
  size_t n = pool.samples.size();
  if (n == 0) {
    throw std::invalid_argument("resample: empty pool");
  }
  if (pool.weights.size() != n) {
    throw std::invalid_argument("resample: weights do not match samples");
  }
  long long draws = static_cast<long long>(
      std::floor(cfg.k * static_cast<double>(n) + 0.5));  // round half up
  if (cfg.k > static_cast<double>(cfg.r_max)) {
    throw std::runtime_error(
        "resample: infeasible configuration (k exceeds r_max)");
  }

  std::vector<double> active(pool.weights);
  std::vector<char> removed(n, 0);
  std::vector<int> copies(n, 0);
  size_t active_count = n;
  double active_total = 0;
  for (double w : active) active_total += w;

  std::vector<Document> out;
  out.reserve(static_cast<size_t>(draws));
  for (long long d = 0; d < draws; ++d) {
    if (active_count == 0) {
      throw std::runtime_error(
          "resample: pool exhausted before reaching the requested size");
    }
    size_t pick = n;  // sentinel
    if (active_total > 0) {
      double u = rng.next_double() * active_total;
      double cum = 0;
      size_t last_alive = n;
      for (size_t i = 0; i < n; ++i) {
        if (removed[i] || active[i] <= 0) continue;
        last_alive = i;
        cum += active[i];
        if (u < cum) {
          pick = i;
          break;
        }
      }
      if (pick == n) pick = last_alive;  // rounding undershoot
      if (pick == n) active_total = 0;   // only zero-weight samples remain
    }
    if (pick == n) {
      // Remaining samples all carry zero weight; fall back to a uniform
      // draw so the output size contract still holds.
      uint64_t target = rng.next_below(active_count);
      for (size_t i = 0; i < n; ++i) {
        if (removed[i]) continue;
        if (target == 0) {
          pick = i;
          break;
        }
        --target;
      }
    }
    out.push_back(pool.samples[pick]);
    if (++copies[pick] >= cfg.r_max) {
      removed[pick] = 1;
      --active_count;
      active_total -= active[pick];
      if (active_total < 0) active_total = 0;
      active[pick] = 0;
    }
  }
  return out;
}

std::vector<Document> sir_curate(const std::vector<Document>& docs,
                                 const DetectorModel& detector,
                                 const ResampleConfig& cfg, Rng& rng,
                                 bool use_calibrated_scores) {
  cfg.validate();
  WeightedPool pool;
  pool.samples = docs;
  pool.scores.reserve(docs.size());
  for (const auto& doc : docs) {
    pool.scores.push_back(use_calibrated_scores
                              ? predict(detector, doc)
                              : predict_uncalibrated(detector, doc));
  }
  pool.weights = compute_weights(pool.scores, cfg.b);
  return resample(pool, cfg, rng);
}

}  // namespace clab
