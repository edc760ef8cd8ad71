/**
 * Command-line entry point. Subcommands wrap the library stages: `run`
 * drives a full recursive experiment from a config file, the detect-*
 * family trains, evaluates, and applies the human-vs-machine detector,
 * `curate` performs detector-guided importance resampling on a corpus,
 * `metrics` scores a document set, and `compare` diffs two run reports.
 *
 * Exit codes: 0 success, 1 configuration error (bad flags, bad config,
 * missing files), 2 runtime failure.
 */

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "clab/config.hpp"
#include "clab/corpus.hpp"
#include "clab/detector.hpp"
#include "clab/metrics.hpp"
#include "clab/pipeline.hpp"
#include "clab/resampler.hpp"
#include "clab/rng.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

using nlohmann::json;

uint64_t fnv1a64(const std::string& data) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw clab::ConfigError("file not found: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << content;
  if (!out) throw std::runtime_error(path + ": write failed");
}

std::vector<clab::LabeledDoc> load_labeled(const std::string& human_path,
                                           const std::string& synth_path) {
  std::vector<clab::LabeledDoc> labeled;
  for (const clab::Document& doc : clab::load_corpus(human_path)) {
    labeled.push_back({doc, 0});
  }
  for (const clab::Document& doc : clab::load_corpus(synth_path)) {
    labeled.push_back({doc, 1});
  }
  return labeled;
}

struct RunArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  int64_t seed = -1;
  int workers = -1;
};

int cmd_run(const RunArgs& args) {
  clab::ExperimentConfig cfg =
      clab::load_config(args.config_path, args.overrides);
  if (args.seed >= 0) cfg.seed = static_cast<uint64_t>(args.seed);
  if (args.workers >= 0) cfg.workers = args.workers;
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (cfg.out_dir.empty()) {
    throw clab::ConfigError(
        "config: pipeline.out_dir is required for run (or pass --out)");
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw clab::ConfigError(e.what());
  }

  clab::RunResult result = clab::run_experiment(cfg);

  std::string snapshot = clab::serialize_config(cfg);
  json stages = json::object();
  for (const auto& [name, seconds] : result.stage_seconds) {
    stages[name] = seconds;
  }
  std::filesystem::path out(cfg.out_dir);
  json synthetic = json::array();
  json histograms = json::array();
  json models = json::array();
  for (size_t i = 0; i < result.reports.size(); ++i) {
    synthetic.push_back(
        (out / ("synthetic_gen" + std::to_string(i) + ".jsonl")).string());
    histograms.push_back(
        (out / ("ppl_hist_gen" + std::to_string(i) + ".csv")).string());
    models.push_back(
        (out / "models" / ("gen" + std::to_string(i) + ".ngram")).string());
  }
  json manifest = {
      {"format", "clab-manifest-v1"},
      {"version", kVersion},
      {"config", snapshot},
      {"config_hash", hex64(fnv1a64(snapshot))},
      {"stage_seconds", stages},
      {"outputs",
       {{"report", (out / "report.csv").string()},
        {"vocab", (out / "vocab.json").string()},
        {"base_model", (out / "models" / "base.ngram").string()},
        {"models", models},
        {"detector", (out / "detector.json").string()},
        {"synthetic_sets", synthetic},
        {"histograms", histograms}}},
  };
  write_file((out / "manifest.json").string(), manifest.dump(2) + "\n");

  const clab::GenerationReport& last = result.reports.back();
  std::cout << "run complete: " << result.reports.size() << " generations\n"
            << "final perplexity " << last.perplexity << ", diversity "
            << last.diversity << ", detector_acc " << last.detector_acc
            << "\n"
            << "report: " << (out / "report.csv").string() << "\n";
  return 0;
}

struct DetectTrainArgs {
  std::string human_path;
  std::string synth_path;
  std::string out_path;
  uint64_t seed = 0;
  int feature_dim = 1 << 18;
  int epochs = 5;
  double learning_rate = 0.5;
  double l2 = 1e-6;
  double label_smoothing = 0.1;
  double val_fraction = 0.2;
  double human_fraction = 0.0;  // 0 keeps every human doc
};

int cmd_detect_train(const DetectTrainArgs& args) {
  std::vector<clab::Document> human = clab::load_corpus(args.human_path);
  std::vector<clab::Document> synth = clab::load_corpus(args.synth_path);
  clab::Rng rng(args.seed);

  if (args.human_fraction > 0) {
    if (args.human_fraction >= 1) {
      throw clab::ConfigError("--human-fraction must be in (0, 1)");
    }
    double ratio = args.human_fraction / (1.0 - args.human_fraction);
    size_t want = static_cast<size_t>(std::max<long long>(
        1, std::llround(ratio * static_cast<double>(synth.size()))));
    if (want < human.size()) {
      std::vector<clab::Document> picked;
      picked.reserve(want);
      for (size_t p : rng.sample_indices(human.size(), want)) {
        picked.push_back(std::move(human[p]));
      }
      human = std::move(picked);
    }
  }

  std::vector<clab::LabeledDoc> labeled;
  labeled.reserve(human.size() + synth.size());
  for (clab::Document& doc : human) labeled.push_back({std::move(doc), 0});
  for (clab::Document& doc : synth) labeled.push_back({std::move(doc), 1});
  rng.shuffle(labeled);

  size_t val_count = static_cast<size_t>(std::llround(
      args.val_fraction * static_cast<double>(labeled.size())));
  val_count = std::min(std::max<size_t>(val_count, 1), labeled.size() - 1);
  std::vector<clab::LabeledDoc> val(labeled.end() - val_count, labeled.end());
  labeled.resize(labeled.size() - val_count);

  clab::DetectorModel model = clab::train_detector(
      labeled, args.feature_dim, args.epochs, args.learning_rate, args.l2,
      args.label_smoothing, rng, &val);
  clab::calibrate(model, val);
  model.threshold = clab::choose_threshold(model, val);
  model.save(args.out_path);

  clab::DetectorEval eval = clab::evaluate_detector(model, val);
  json out = {{"detector", args.out_path},
              {"train_docs", labeled.size()},
              {"val_docs", val.size()},
              {"val_auc", eval.auc},
              {"val_accuracy", eval.accuracy},
              {"val_f1_macro", eval.f1_macro},
              {"val_ece", eval.ece},
              {"temperature", model.temperature},
              {"threshold", model.threshold}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_detect_eval(const std::string& detector_path,
                    const std::string& human_path,
                    const std::string& synth_path) {
  clab::DetectorModel model = clab::DetectorModel::load(detector_path);
  std::vector<clab::LabeledDoc> labeled =
      load_labeled(human_path, synth_path);
  clab::DetectorEval eval = clab::evaluate_detector(model, labeled);
  json out = {{"docs", labeled.size()},
              {"auc", eval.auc},
              {"accuracy", eval.accuracy},
              {"f1_macro", eval.f1_macro},
              {"ece", eval.ece}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_detect_score(const std::string& detector_path,
                     const std::string& input_path,
                     const std::string& out_path, bool uncalibrated) {
  clab::DetectorModel model = clab::DetectorModel::load(detector_path);
  std::vector<clab::Document> docs = clab::load_corpus(input_path);
  for (clab::Document& doc : docs) {
    doc.score = uncalibrated ? clab::predict_uncalibrated(model, doc)
                             : clab::predict(model, doc);
  }
  clab::save_corpus(docs, out_path);
  std::cout << "scored " << docs.size() << " docs -> " << out_path << "\n";
  return 0;
}

struct CurateArgs {
  std::string input_path;
  std::string detector_path;
  std::string out_path;
  uint64_t seed = 0;
  clab::ResampleConfig resample;
  bool uncalibrated = false;
};

int cmd_curate(const CurateArgs& args) {
  clab::DetectorModel model = clab::DetectorModel::load(args.detector_path);
  clab::WeightedPool pool;
  pool.samples = clab::load_corpus(args.input_path);
  pool.scores.reserve(pool.samples.size());
  for (const clab::Document& doc : pool.samples) {
    pool.scores.push_back(args.uncalibrated
                              ? clab::predict_uncalibrated(model, doc)
                              : clab::predict(model, doc));
  }
  pool.weights = clab::compute_weights(pool.scores, args.resample.b);

  std::vector<double> sorted = pool.weights;
  std::sort(sorted.begin(), sorted.end());
  double median = sorted.size() % 2 == 1
                      ? sorted[sorted.size() / 2]
                      : 0.5 * (sorted[sorted.size() / 2 - 1] +
                               sorted[sorted.size() / 2]);
  double sq = 0;
  for (double w : pool.weights) sq += w * w;

  clab::Rng rng(args.seed);
  std::vector<clab::Document> curated =
      clab::resample(pool, args.resample, rng);
  clab::save_corpus(curated, args.out_path);

  json out = {{"input_docs", pool.samples.size()},
              {"output_docs", curated.size()},
              {"weight_min", sorted.front()},
              {"weight_median", median},
              {"weight_max", sorted.back()},
              {"effective_sample_size", 1.0 / sq},
              {"output", args.out_path}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

struct MetricsArgs {
  std::string input_path;
  std::string refs_path;
  std::string per_doc_path;
  uint64_t seed = 0;
  bool lowercase = false;
  int sample_size = 1000;
  clab::EmbeddingConfig embedding;
};

int cmd_metrics(const MetricsArgs& args) {
  std::vector<clab::Document> docs = clab::load_corpus(args.input_path);
  std::vector<clab::Document> refs = clab::load_corpus(args.refs_path);
  auto to_seqs = [&](const std::vector<clab::Document>& set) {
    std::vector<clab::TokenSeq> seqs;
    seqs.reserve(set.size());
    for (const clab::Document& doc : set) {
      seqs.push_back(clab::tokenize(doc.text, args.lowercase));
    }
    return seqs;
  };
  std::vector<clab::TokenSeq> doc_seqs = to_seqs(docs);
  std::vector<clab::TokenSeq> ref_seqs = to_seqs(refs);

  double div_sum = 0;
  long long div_n = 0;
  double read_sum = 0;
  long long read_n = 0;
  std::string per_doc = "id,diversity,readability\n";
  for (size_t d = 0; d < docs.size(); ++d) {
    double div = doc_seqs[d].size() >= 4 ? clab::diversity(doc_seqs[d]) : 0.0;
    bool word = std::any_of(docs[d].text.begin(), docs[d].text.end(),
                            [](unsigned char ch) { return std::isalpha(ch); });
    double read = word ? clab::reading_ease(docs[d].text) : 0.0;
    if (doc_seqs[d].size() >= 4) {
      div_sum += div;
      ++div_n;
    }
    if (word) {
      read_sum += read;
      ++read_n;
    }
    char row[160];
    std::snprintf(row, sizeof(row), "%.17g,%.17g", div, read);
    per_doc += docs[d].id + "," + row + "\n";
  }

  clab::Rng rng(args.seed);
  double sb = clab::self_bleu(doc_seqs, args.sample_size, rng);
  double mauve = clab::mauve_lite(ref_seqs, doc_seqs, args.embedding, rng);

  if (!args.per_doc_path.empty()) write_file(args.per_doc_path, per_doc);

  json out = {
      {"docs", docs.size()},
      {"diversity", div_n > 0 ? div_sum / static_cast<double>(div_n) : 0.0},
      {"self_bleu", sb},
      {"mauve", mauve},
      {"readability",
       read_n > 0 ? read_sum / static_cast<double>(read_n) : 0.0}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_compare(const std::string& path_a, const std::string& path_b,
                const std::string& out_path) {
  std::vector<clab::GenerationReport> a =
      clab::parse_report_csv(read_file(path_a));
  std::vector<clab::GenerationReport> b =
      clab::parse_report_csv(read_file(path_b));
  std::string csv = clab::compare_runs(a, b);
  if (!out_path.empty()) write_file(out_path, csv);
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale laboratory for recursive-training collapse"};
  app.name("collapse-lab");
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run = app.add_subcommand(
      "run", "Run a recursive generate-and-retrain experiment");
  run->add_option("--config", run_args.config_path, "Experiment config file")
      ->required();
  run->add_option("--set", run_args.overrides,
                  "Override config values (section.key=value, repeatable)");
  run->add_option("--seed", run_args.seed,
                  "Override the run seed from the config");
  run->add_option("--workers", run_args.workers,
                  "Intra-stage parallelism (0 = all cores)")
      ->envname("COLLAPSE_LAB_WORKERS");
  run->add_option("--out", run_args.out_dir,
                  "Override pipeline.out_dir from the config");

  DetectTrainArgs dt_args;
  CLI::App* dt = app.add_subcommand(
      "detect-train", "Train and calibrate the human-vs-machine detector");
  dt->add_option("--human", dt_args.human_path, "Human-labeled corpus JSONL")
      ->required();
  dt->add_option("--synthetic", dt_args.synth_path,
                 "Machine-labeled corpus JSONL")
      ->required();
  dt->add_option("--out", dt_args.out_path, "Detector model output path")
      ->required();
  dt->add_option("--seed", dt_args.seed, "Shuffle/init seed")->required();
  dt->add_option("--feature-dim", dt_args.feature_dim,
                 "Hashed feature dimension");
  dt->add_option("--epochs", dt_args.epochs, "Training epochs");
  dt->add_option("--learning-rate", dt_args.learning_rate,
                 "Gradient step size");
  dt->add_option("--l2", dt_args.l2, "L2 regularization strength");
  dt->add_option("--label-smoothing", dt_args.label_smoothing,
                 "Target smoothing in [0, 1)");
  dt->add_option("--val-fraction", dt_args.val_fraction,
                 "Validation share of the combined corpus");
  dt->add_option("--human-fraction", dt_args.human_fraction,
                 "Target human share of the mix (0 keeps all human docs)");

  std::string de_detector;
  std::string de_human;
  std::string de_synth;
  CLI::App* de = app.add_subcommand(
      "detect-eval", "Evaluate a detector on labeled corpora");
  de->add_option("--detector", de_detector, "Detector model file")->required();
  de->add_option("--human", de_human, "Human-labeled corpus JSONL")
      ->required();
  de->add_option("--synthetic", de_synth, "Machine-labeled corpus JSONL")
      ->required();

  std::string ds_detector;
  std::string ds_input;
  std::string ds_out;
  bool ds_uncal = false;
  CLI::App* ds = app.add_subcommand(
      "detect-score", "Attach detector scores to a corpus");
  ds->add_option("--detector", ds_detector, "Detector model file")->required();
  ds->add_option("--input", ds_input, "Corpus JSONL to score")->required();
  ds->add_option("--out", ds_out, "Scored corpus output path")->required();
  ds->add_flag("--uncalibrated", ds_uncal,
               "Use raw probabilities (skip temperature calibration)");

  CurateArgs cu_args;
  CLI::App* cu = app.add_subcommand(
      "curate", "Detector-guided importance resampling of a corpus");
  cu->add_option("--input", cu_args.input_path, "Pool corpus JSONL")
      ->required();
  cu->add_option("--detector", cu_args.detector_path, "Detector model file")
      ->required();
  cu->add_option("--out", cu_args.out_path, "Curated corpus output path")
      ->required();
  cu->add_option("--seed", cu_args.seed, "Resampling seed")->required();
  cu->add_option("--k", cu_args.resample.k, "Output size multiplier");
  cu->add_option("--b", cu_args.resample.b, "Weight sharpening exponent");
  cu->add_option("--r-max", cu_args.resample.r_max,
                 "Maximum copies of any document");
  cu->add_flag("--uncalibrated", cu_args.uncalibrated,
               "Score with raw probabilities");

  MetricsArgs me_args;
  CLI::App* me = app.add_subcommand(
      "metrics", "Text quality metrics for a document set");
  me->add_option("--input", me_args.input_path, "Corpus JSONL to score")
      ->required();
  me->add_option("--refs", me_args.refs_path,
                 "Reference (human) corpus JSONL")
      ->required();
  me->add_option("--seed", me_args.seed, "Sampling seed")->required();
  me->add_option("--per-doc", me_args.per_doc_path,
                 "Optional per-document CSV output path");
  me->add_flag("--lowercase", me_args.lowercase,
               "Lowercase before tokenizing");
  me->add_option("--sample-size", me_args.sample_size,
                 "Documents sampled for self-BLEU");
  me->add_option("--hash-dim", me_args.embedding.hash_dim,
                 "Embedding hash dimension");
  me->add_option("--num-clusters", me_args.embedding.num_clusters,
                 "Quantization clusters");

  std::string co_a;
  std::string co_b;
  std::string co_out;
  CLI::App* co = app.add_subcommand(
      "compare", "Percentage change between two run reports");
  co->add_option("--a", co_a, "First report.csv")->required();
  co->add_option("--b", co_b, "Second report.csv")->required();
  co->add_option("--out", co_out, "Optional comparison CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*dt) return cmd_detect_train(dt_args);
    if (*de) return cmd_detect_eval(de_detector, de_human, de_synth);
    if (*ds) return cmd_detect_score(ds_detector, ds_input, ds_out, ds_uncal);
    if (*cu) return cmd_curate(cu_args);
    if (*me) return cmd_metrics(me_args);
    if (*co) return cmd_compare(co_a, co_b, co_out);
  } catch (const clab::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
