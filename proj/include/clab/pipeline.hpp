#pragma once

/**
 * Recursive generate-and-retrain experiment driver.
 *
 * One run trains a base n-gram model on human text, fine-tunes generation
 * zero, trains and freezes a human-vs-machine detector, then repeats: build
 * a mixed training pool from human chunks and earlier synthetic sets, curate
 * it (keep as-is, detector-guided resampling, or drop all synthetic), train
 * the next generation from the same base, and generate its synthetic set by
 * continuing every human context. Each report row pairs a generation's
 * held-out evaluation with the quality of the text that generation emits.
 *
 * Determinism contract: identical config (seed included) yields byte
 * identical report.csv regardless of worker count. Every stochastic stage
 * derives its rng from the run seed and a stage tag, and per-document work
 * is seeded per document.
 */

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "clab/corpus.hpp"
#include "clab/decoding.hpp"
#include "clab/detector.hpp"
#include "clab/lm.hpp"
#include "clab/metrics.hpp"
#include "clab/resampler.hpp"
#include "clab/rng.hpp"

namespace clab {

enum class Mode { Baseline, Mitigation, Oracle };

std::string mode_name(Mode mode);
Mode parse_mode(const std::string& name);

struct MixConfig {
  double alpha = 0.0;  // human share
  double beta = 1.0;   // newest synthetic share
  double gamma = 0.0;  // split across all earlier synthetic sets

  void validate() const;

  static MixConfig fully_synthetic() { return {0.0, 1.0, 0.0}; }
  static MixConfig partial(double alpha) { return {alpha, 1.0, 0.0}; }
  static MixConfig accumulate() { return {0.5, 0.5, 0.5}; }
};

struct PoolComposition {
  int n_human = 0;
  int n_synth_current = 0;  // from the newest synthetic set
  int n_synth_prior = 0;    // from all earlier synthetic sets
  int max_duplication = 0;  // highest copy count of any single document
};

struct GenerationReport {
  int generation = 0;
  double perplexity = 0.0;  // held-out test set
  double accuracy = 0.0;
  double diversity = 0.0;  // of this generation's own synthetic output
  double self_bleu = 0.0;
  double mauve = 0.0;
  double readability = 0.0;
  double detector_acc = 0.0;  // share of that output flagged machine
  PoolComposition pool;       // what this generation trained on
};

struct DetectorParams {
  std::string path;  // load a trained detector instead of training one
  int feature_dim = 1 << 18;
  int epochs = 5;
  double learning_rate = 0.5;
  double l2 = 1e-6;
  double label_smoothing = 0.1;
  double human_fraction = 0.5;  // human share of the detector training mix
  double val_fraction = 0.2;

  void validate() const;
};

struct MetricParams {
  EmbeddingConfig embedding;
  int sample_size = 1000;  // self-BLEU document sample
  std::vector<double> hist_edges = {0.0,   5.0,   10.0,   20.0,  50.0,
                                    100.0, 200.0, 500.0,  1000.0, 5000.0};

  void validate() const;
};

struct ExperimentConfig {
  uint64_t seed = 1;

  std::string train_path;
  std::string test_path;
  bool lowercase = true;
  int min_count = 1;
  int m = 32;
  int c = 32;

  int order = 3;
  double delta = 0.01;
  double lambda = 0.9;

  DecodingStrategy strategy{StrategyKind::Temperature, 0.9, 50, 0.95, 5};

  MixConfig mix;
  Mode mode = Mode::Baseline;
  int generations = 10;
  int n = 2000;  // pool unit count for the mixing shares
  ResampleConfig resample;
  bool resample_calibrated = true;

  DetectorParams detector;
  MetricParams metrics;

  std::string out_dir;  // empty: keep everything in memory
  int workers = 0;      // 0: hardware concurrency

  void validate() const;
};

struct RunResult {
  std::vector<GenerationReport> reports;
  std::vector<std::pair<std::string, double>> stage_seconds;
  std::string out_dir;
};

// Eq-style mixed pool: floor(alpha*n) human docs, floor(beta*n) from the
// newest synthetic set, and for generation >= 2 floor(gamma*n/(i-1)) from
// each earlier set, drawn without replacement and shuffled.
// synthetic_sets[k] is the set produced at pipeline generation k+1.
std::vector<Document> build_pool(
    const std::vector<Document>& human,
    const std::vector<std::vector<Document>>& synthetic_sets, int generation,
    const MixConfig& mix, int n, Rng& rng);

// One continuation per context; document j is generated with an rng seeded
// from (base_seed, generation, j), so output is independent of worker count.
std::vector<Document> generate_synthetic_set(
    const NGramModel& model, const std::vector<std::vector<int>>& contexts,
    int c, const DecodingStrategy& strategy, uint64_t base_seed,
    int generation, int workers);

RunResult run_experiment(const ExperimentConfig& cfg);

std::string report_csv(const std::vector<GenerationReport>& reports);
std::vector<GenerationReport> parse_report_csv(const std::string& text);

// Signed percentage change per metric between the final common generation
// of two runs, as CSV.
std::string compare_runs(const std::vector<GenerationReport>& a,
                         const std::vector<GenerationReport>& b);

}  // namespace clab
