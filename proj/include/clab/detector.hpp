#pragma once

/**
 * Machine-generated-text detector: a linear classifier over hashed word and
 * character n-gram features, with temperature scaling for calibration.
 * predict() returns q(x), the probability that a document is
 * machine-generated (label 1 = machine, 0 = human).
 *
 * AUC is computed from raw logits, so temperature calibration provably
 * never changes ranking metrics, only probability calibration.
 */

#include <string>
#include <vector>

#include "clab/corpus.hpp"
#include "clab/rng.hpp"

namespace clab {

struct DetectorModel {
  int feature_dim = 0;
  std::vector<double> weights;  // size feature_dim
  double bias = 0;
  double temperature = 1.0;     // > 0
  double threshold = 0.5;       // in (0, 1)

  void save(const std::string& path) const;
  static DetectorModel load(const std::string& path);
};

struct LabeledDoc {
  Document doc;
  int label = 0;  // 0 human, 1 machine
};

struct DetectorEval {
  double auc = 0;
  double accuracy = 0;
  double f1_macro = 0;
  double ece = 0;  // 10 equal-width probability bins
};

using SparseFeatures = std::vector<std::pair<int, double>>;  // sorted

// Union of word 1-2-grams and character 3-5-grams (over lowercased text)
// hashed into feature_dim buckets, TF-weighted, L2-normalized. An empty doc
// maps to the zero vector.
SparseFeatures featurize(const Document& doc, int feature_dim);

// Mini-batch gradient descent (batch 16, shuffled per epoch) on binary
// cross-entropy with label-smoothed targets y' = y(1-alpha) + alpha/2 plus
// an L2 penalty. When a validation set is given, the returned weights are
// the epoch snapshot with the highest validation AUC. Temperature is left
// at 1.
DetectorModel train_detector(const std::vector<LabeledDoc>& train,
                             int feature_dim, int epochs,
                             double learning_rate, double l2,
                             double label_smoothing, Rng& rng,
                             const std::vector<LabeledDoc>* validation =
                                 nullptr);

// Fits the temperature T minimizing unsmoothed validation NLL of
// sigmoid(z/T) by golden-section search on [0.05, 20]; weights are
// untouched and the result never has higher NLL than T = 1. Returns the
// fitted T (also stored in the model).
double calibrate(DetectorModel& model,
                 const std::vector<LabeledDoc>& validation);

double predict_logit(const DetectorModel& model, const Document& doc);

// q = sigmoid(logit / T), clamped into (0, 1).
double predict(const DetectorModel& model, const Document& doc);

// q with T forced to 1 (pre-calibration score).
double predict_uncalibrated(const DetectorModel& model, const Document& doc);

// Mann-Whitney AUC with half-credit for ties. Requires both classes.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// AUC from logits, accuracy and macro-F1 at model.threshold, and expected
// calibration error over 10 equal-width probability bins.
DetectorEval evaluate_detector(const DetectorModel& model,
                               const std::vector<LabeledDoc>& test);

// Threshold maximizing validation macro-F1 over midpoints of adjacent
// distinct sorted scores; ties take the lower threshold; all-identical
// scores fall back to 0.5.
double choose_threshold(const DetectorModel& model,
                        const std::vector<LabeledDoc>& validation);

}  // namespace clab
