#pragma once

/**
 * Sampling Importance Resampling over detector scores: documents that look
 * human (low q) get large importance weights w_j = (1-q_j)^b / sum, and the
 * training pool is redrawn with replacement from those weights. A per-sample
 * copy cap keeps any single document from dominating the resampled set; a
 * capped sample is removed and the remaining weights renormalized, which
 * keeps the output size exact.
 */

#include <vector>

#include "clab/corpus.hpp"
#include "clab/detector.hpp"
#include "clab/rng.hpp"

namespace clab {

struct WeightedPool {
  std::vector<Document> samples;
  std::vector<double> scores;   // q_j in [0, 1]
  std::vector<double> weights;  // w_j >= 0, summing to 1
};

struct ResampleConfig {
  double k = 1.5;   // up-sampling factor, > 0
  double b = 10.0;  // bias exponent, >= 1
  int r_max = 10;   // max copies per sample, >= 1

  void validate() const;
};

// w_j = (1 - q_j)^b / sum_l (1 - q_l)^b.
std::vector<double> compute_weights(const std::vector<double>& scores,
                                    double b);

// round(k*n) sequential weighted draws with replacement, in draw order.
// Feasibility (k <= r_max) is checked before any drawing.
std::vector<Document> resample(const WeightedPool& pool,
                               const ResampleConfig& cfg, Rng& rng);

// score with the detector -> compute_weights -> resample. Scores are
// calibrated (temperature-scaled) unless use_calibrated_scores is false.
std::vector<Document> sir_curate(const std::vector<Document>& docs,
                                 const DetectorModel& detector,
                                 const ResampleConfig& cfg, Rng& rng,
                                 bool use_calibrated_scores = true);

}  // namespace clab
