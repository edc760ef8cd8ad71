#include "clab/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "clab/parallel.hpp"

namespace clab {
namespace {

constexpr uint64_t kPoolTag = 0x706f6f6cULL;
constexpr uint64_t kSirTag = 0x736972ULL;
constexpr uint64_t kMetricsTag = 0x6d747263ULL;
constexpr uint64_t kDetectorTag = 0x64657463ULL;

class StageClock {
 public:
  void add(const std::string& name, double seconds) {
    for (auto& entry : stages_) {
      if (entry.first == name) {
        entry.second += seconds;
        return;
      }
    }
    stages_.emplace_back(name, seconds);
  }

  std::vector<std::pair<std::string, double>> take() {
    return std::move(stages_);
  }

 private:
  std::vector<std::pair<std::string, double>> stages_;
};

class ScopedStage {
 public:
  ScopedStage(StageClock& clock, std::string name)
      : clock_(clock),
        name_(std::move(name)),
        start_(std::chrono::steady_clock::now()) {}
  ~ScopedStage() {
    std::chrono::duration<double> d =
        std::chrono::steady_clock::now() - start_;
    clock_.add(name_, d.count());
  }

 private:
  StageClock& clock_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool has_alpha(const std::string& text) {
  for (unsigned char ch : text) {
    if (std::isalpha(ch)) return true;
  }
  return false;
}

std::vector<TokenSeq> decode_all(const std::vector<Document>& docs,
                                 const Vocabulary& vocab, size_t skip) {
  std::vector<TokenSeq> seqs(docs.size());
  for (size_t d = 0; d < docs.size(); ++d) {
    const auto& tokens = docs[d].tokens;
    TokenSeq& seq = seqs[d];
    size_t from = std::min(skip, tokens.size());
    seq.reserve(tokens.size() - from);
    for (size_t t = from; t < tokens.size(); ++t) {
      seq.push_back(vocab.decode(tokens[t]));
    }
  }
  return seqs;
}

std::string join_tokens(const TokenSeq& seq) {
  std::string text;
  for (const std::string& tok : seq) {
    if (!text.empty()) text += ' ';
    text += tok;
  }
  return text;
}

// Quality is scored on the generated continuations, with the conditioning
// prefix of each document dropped.
QualityScores set_quality(const std::vector<Document>& docs,
                          const std::vector<TokenSeq>& human_refs,
                          const Vocabulary& vocab, const MetricParams& mp,
                          size_t skip, Rng& rng) {
  std::vector<TokenSeq> seqs = decode_all(docs, vocab, skip);

  QualityScores q;
  double div_sum = 0.0;
  long long div_n = 0;
  for (const TokenSeq& seq : seqs) {
    if (seq.size() < 4) continue;
    div_sum += diversity(seq);
    ++div_n;
  }
  q.diversity = div_n > 0 ? div_sum / static_cast<double>(div_n) : 0.0;

  q.self_bleu = self_bleu(seqs, mp.sample_size, rng);
  q.mauve = mauve_lite(human_refs, seqs, mp.embedding, rng);

  double read_sum = 0.0;
  long long read_n = 0;
  for (const TokenSeq& seq : seqs) {
    std::string text = join_tokens(seq);
    if (!has_alpha(text)) continue;
    read_sum += reading_ease(text);
    ++read_n;
  }
  q.readability = read_n > 0 ? read_sum / static_cast<double>(read_n) : 0.0;
  return q;
}

double detector_machine_rate(const DetectorModel& det,
                             const std::vector<Document>& docs) {
  if (docs.empty()) return 0.0;
  long long flagged = 0;
  for (const Document& doc : docs) {
    if (predict(det, doc) >= det.threshold) ++flagged;
  }
  return static_cast<double>(flagged) / static_cast<double>(docs.size());
}

DetectorModel make_detector(const std::vector<Document>& human,
                            const std::vector<Document>& synth,
                            const DetectorParams& params, Rng& rng) {
  double ratio = params.human_fraction / (1.0 - params.human_fraction);
  long long want_human =
      std::llround(ratio * static_cast<double>(synth.size()));
  size_t n_human = std::min(
      human.size(), static_cast<size_t>(std::max<long long>(want_human, 1)));

  std::vector<LabeledDoc> labeled;
  labeled.reserve(n_human + synth.size());
  for (size_t p : rng.sample_indices(human.size(), n_human)) {
    labeled.push_back({human[p], 0});
  }
  for (const Document& doc : synth) labeled.push_back({doc, 1});
  rng.shuffle(labeled);

  size_t val_count = static_cast<size_t>(
      std::llround(params.val_fraction * static_cast<double>(labeled.size())));
  val_count = std::min(std::max<size_t>(val_count, 1), labeled.size() - 1);
  std::vector<LabeledDoc> val(labeled.end() - val_count, labeled.end());
  labeled.resize(labeled.size() - val_count);

  DetectorModel model =
      train_detector(labeled, params.feature_dim, params.epochs,
                     params.learning_rate, params.l2, params.label_smoothing,
                     rng, &val);
  calibrate(model, val);
  model.threshold = choose_threshold(model, val);
  return model;
}

PoolComposition pool_composition(const std::vector<Document>& pool,
                                 int generation) {
  PoolComposition comp;
  std::unordered_map<std::string, int> copies;
  for (const Document& doc : pool) {
    if (doc.is_human()) {
      ++comp.n_human;
    } else if (doc.generation == generation) {
      ++comp.n_synth_current;
    } else {
      ++comp.n_synth_prior;
    }
    int c = ++copies[doc.id];
    comp.max_duplication = std::max(comp.max_duplication, c);
  }
  return comp;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << content;
  if (!out) throw std::runtime_error(path + ": write failed");
}

std::string histogram_csv(const Histogram& hist) {
  std::string csv = "bin_lo,bin_hi,count\n";
  for (size_t b = 0; b + 1 < hist.edges.size(); ++b) {
    csv += g17(hist.edges[b]);
    csv += ',';
    csv += g17(hist.edges[b + 1]);
    csv += ',';
    csv += std::to_string(hist.counts[b]);
    csv += '\n';
  }
  return csv;
}

}  // namespace

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::Baseline:
      return "baseline";
    case Mode::Mitigation:
      return "mitigation";
    case Mode::Oracle:
      return "oracle";
  }
  throw std::logic_error("mode_name: unknown mode");
}

Mode parse_mode(const std::string& name) {
  if (name == "baseline") return Mode::Baseline;
  if (name == "mitigation") return Mode::Mitigation;
  if (name == "oracle") return Mode::Oracle;
  throw std::invalid_argument("unknown mode: " + name);
}

void MixConfig::validate() const {
  for (double v : {alpha, beta, gamma}) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument(
          "mix: alpha, beta, gamma must be in [0, 1]");
    }
  }
}

void DetectorParams::validate() const {
  if (feature_dim < 2) {
    throw std::invalid_argument("detector: feature_dim must be >= 2");
  }
  if (epochs < 1) throw std::invalid_argument("detector: epochs must be >= 1");
  if (!(learning_rate > 0)) {
    throw std::invalid_argument("detector: learning_rate must be > 0");
  }
  if (l2 < 0) throw std::invalid_argument("detector: l2 must be >= 0");
  if (!(label_smoothing >= 0 && label_smoothing < 1)) {
    throw std::invalid_argument("detector: label_smoothing must be in [0, 1)");
  }
  if (!(human_fraction > 0 && human_fraction < 1)) {
    throw std::invalid_argument("detector: human_fraction must be in (0, 1)");
  }
  if (!(val_fraction > 0 && val_fraction < 1)) {
    throw std::invalid_argument("detector: val_fraction must be in (0, 1)");
  }
}

void MetricParams::validate() const {
  embedding.validate();
  if (sample_size < 2) {
    throw std::invalid_argument("metrics: sample_size must be >= 2");
  }
  if (hist_edges.size() < 2) {
    throw std::invalid_argument("metrics: need at least 2 histogram edges");
  }
  for (size_t i = 1; i < hist_edges.size(); ++i) {
    if (!(hist_edges[i] > hist_edges[i - 1])) {
      throw std::invalid_argument(
          "metrics: histogram edges must be strictly increasing");
    }
  }
}

void ExperimentConfig::validate() const {
  if (train_path.empty() || test_path.empty()) {
    throw std::invalid_argument("config: train and test paths are required");
  }
  if (min_count < 1) {
    throw std::invalid_argument("config: min_count must be >= 1");
  }
  if (m < 1 || c < 1) {
    throw std::invalid_argument("config: chunk sizes must be >= 1");
  }
  if (order < 1) throw std::invalid_argument("config: order must be >= 1");
  if (!(delta > 0)) throw std::invalid_argument("config: delta must be > 0");
  if (!(lambda >= 0 && lambda <= 1)) {
    throw std::invalid_argument("config: lambda must be in [0, 1]");
  }
  strategy.validate();
  mix.validate();
  if (generations < 1) {
    throw std::invalid_argument("config: generations must be >= 1");
  }
  if (n < 1) throw std::invalid_argument("config: n must be >= 1");
  resample.validate();
  detector.validate();
  metrics.validate();
  if (workers < 0) {
    throw std::invalid_argument("config: workers must be >= 0");
  }
}

std::vector<Document> build_pool(
    const std::vector<Document>& human,
    const std::vector<std::vector<Document>>& synthetic_sets, int generation,
    const MixConfig& mix, int n, Rng& rng) {
  mix.validate();
  if (generation < 1) {
    throw std::invalid_argument("build_pool: generation must be >= 1");
  }
  if (n < 1) throw std::invalid_argument("build_pool: n must be >= 1");
  if (static_cast<int>(synthetic_sets.size()) < generation) {
    throw std::invalid_argument(
        "build_pool: need synthetic sets for generations 1.." +
        std::to_string(generation));
  }

  std::vector<Document> pool;
  auto draw = [&](const std::vector<Document>& source, int want,
                  const std::string& name) {
    if (want <= 0) return;
    if (static_cast<int>(source.size()) < want) {
      throw std::runtime_error("build_pool: source " + name + " has " +
                               std::to_string(source.size()) +
                               " docs, needs " + std::to_string(want));
    }
    for (size_t p : rng.sample_indices(source.size(),
                                       static_cast<size_t>(want))) {
      pool.push_back(source[p]);
    }
  };

  // Tiny slack absorbs representation dust in products like 0.1 * 2000
  // without ever crossing a true fractional part.
  auto share = [n](double coeff, int parts) {
    return static_cast<int>(
        std::floor(coeff * static_cast<double>(n) / parts + 1e-9));
  };

  draw(human, share(mix.alpha, 1), "D_H");
  draw(synthetic_sets[static_cast<size_t>(generation) - 1],
       share(mix.beta, 1), "D_S^" + std::to_string(generation));
  if (generation >= 2) {
    int each = share(mix.gamma, generation - 1);
    for (int g = generation - 1; g >= 1; --g) {
      draw(synthetic_sets[static_cast<size_t>(g) - 1], each,
           "D_S^" + std::to_string(g));
    }
  }
  rng.shuffle(pool);
  return pool;
}

std::vector<Document> generate_synthetic_set(
    const NGramModel& model, const std::vector<std::vector<int>>& contexts,
    int c, const DecodingStrategy& strategy, uint64_t base_seed,
    int generation, int workers) {
  strategy.validate();
  if (c < 1) {
    throw std::invalid_argument(
        "generate_synthetic_set: continuation length must be >= 1");
  }
  if (generation < 1) {
    throw std::invalid_argument(
        "generate_synthetic_set: generation must be >= 1");
  }

  std::vector<std::vector<int>> continuations(contexts.size());
  parallel_for(contexts.size(), workers, [&](size_t j) {
    Rng rng(seed_combine(base_seed, static_cast<uint64_t>(generation),
                         static_cast<uint64_t>(j)));
    continuations[j] = generate(model, contexts[j], c, strategy, rng);
  });

  const Vocabulary& vocab = model.vocab();
  std::vector<Document> docs(contexts.size());
  for (size_t j = 0; j < contexts.size(); ++j) {
    Document& doc = docs[j];
    doc.id = "gen" + std::to_string(generation) + "-" + std::to_string(j);
    doc.tokens = contexts[j];
    doc.tokens.insert(doc.tokens.end(), continuations[j].begin(),
                      continuations[j].end());
    doc.text = vocab.decode_tokens(doc.tokens);
    doc.origin = OriginKind::Synthetic;
    doc.generation = generation;
  }
  return docs;
}

std::string report_csv(const std::vector<GenerationReport>& reports) {
  std::string csv =
      "generation,perplexity,accuracy,diversity,self_bleu,mauve,readability,"
      "detector_acc,n_human,n_synth_current,n_synth_prior,max_duplication\n";
  for (const GenerationReport& r : reports) {
    csv += std::to_string(r.generation);
    for (double v : {r.perplexity, r.accuracy, r.diversity, r.self_bleu,
                     r.mauve, r.readability, r.detector_acc}) {
      csv += ',';
      csv += g17(v);
    }
    for (int v : {r.pool.n_human, r.pool.n_synth_current, r.pool.n_synth_prior,
                  r.pool.max_duplication}) {
      csv += ',';
      csv += std::to_string(v);
    }
    csv += '\n';
  }
  return csv;
}

std::vector<GenerationReport> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("generation,", 0) != 0) {
    throw std::runtime_error("report: invalid header");
  }
  std::vector<GenerationReport> reports;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() != 12) {
      throw std::runtime_error("report: line " + std::to_string(lineno) +
                               ": expected 12 fields");
    }
    GenerationReport r;
    try {
      r.generation = std::stoi(fields[0]);
      r.perplexity = std::stod(fields[1]);
      r.accuracy = std::stod(fields[2]);
      r.diversity = std::stod(fields[3]);
      r.self_bleu = std::stod(fields[4]);
      r.mauve = std::stod(fields[5]);
      r.readability = std::stod(fields[6]);
      r.detector_acc = std::stod(fields[7]);
      r.pool.n_human = std::stoi(fields[8]);
      r.pool.n_synth_current = std::stoi(fields[9]);
      r.pool.n_synth_prior = std::stoi(fields[10]);
      r.pool.max_duplication = std::stoi(fields[11]);
    } catch (const std::exception&) {
      throw std::runtime_error("report: line " + std::to_string(lineno) +
                               ": malformed value");
    }
    reports.push_back(r);
  }
  return reports;
}

std::string compare_runs(const std::vector<GenerationReport>& a,
                         const std::vector<GenerationReport>& b) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("compare_runs: empty report");
  }
  int common = std::min(a.back().generation, b.back().generation);
  auto find_row = [common](const std::vector<GenerationReport>& reports,
                           const char* which) {
    for (const GenerationReport& r : reports) {
      if (r.generation == common) return r;
    }
    throw std::runtime_error(std::string("compare_runs: run ") + which +
                             " lacks generation " + std::to_string(common));
  };
  GenerationReport ra = find_row(a, "a");
  GenerationReport rb = find_row(b, "b");

  struct MetricRef {
    const char* name;
    double GenerationReport::* field;
  };
  const MetricRef metrics[] = {
      {"perplexity", &GenerationReport::perplexity},
      {"accuracy", &GenerationReport::accuracy},
      {"diversity", &GenerationReport::diversity},
      {"self_bleu", &GenerationReport::self_bleu},
      {"mauve", &GenerationReport::mauve},
      {"readability", &GenerationReport::readability},
      {"detector_acc", &GenerationReport::detector_acc},
  };
  std::string csv = "metric,run_a,run_b,pct_change\n";
  for (const MetricRef& metric : metrics) {
    double va = ra.*(metric.field);
    double vb = rb.*(metric.field);
    double pct = (vb - va) / std::abs(va) * 100.0;
    csv += metric.name;
    csv += ',';
    csv += g17(va);
    csv += ',';
    csv += g17(vb);
    csv += ',';
    csv += g17(pct);
    csv += '\n';
  }
  return csv;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  int workers =
      cfg.workers > 0
          ? cfg.workers
          : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  StageClock clock;
  RunResult result;
  result.out_dir = cfg.out_dir;

  bool persist = !cfg.out_dir.empty();
  std::filesystem::path out(cfg.out_dir);
  if (persist) {
    std::filesystem::create_directories(out / "models");
  }

  // Corpus, vocabulary, and the fixed context set.
  std::vector<Document> train_docs;
  std::vector<Document> test_docs;
  std::shared_ptr<Vocabulary> vocab;
  std::vector<ChunkPair> human_pairs;
  std::vector<Document> human_chunks;
  std::vector<std::vector<int>> contexts;
  {
    ScopedStage stage(clock, "corpus");
    train_docs = load_corpus(cfg.train_path);
    test_docs = load_corpus(cfg.test_path);
    vocab = std::make_shared<Vocabulary>(
        build_vocab(train_docs, cfg.min_count, cfg.lowercase));
    encode_documents(train_docs, *vocab, cfg.lowercase);
    encode_documents(test_docs, *vocab, cfg.lowercase);
    human_pairs = chunk_all(train_docs, cfg.m, cfg.c);
    if (human_pairs.empty()) {
      throw std::runtime_error(
          "run: training corpus yields no context/continuation chunks");
    }

    std::unordered_map<std::string, int> per_source;
    human_chunks.reserve(human_pairs.size());
    contexts.reserve(human_pairs.size());
    for (const ChunkPair& pair : human_pairs) {
      Document doc;
      int ordinal = per_source[pair.source_doc]++;
      doc.id = pair.source_doc + "#" + std::to_string(ordinal);
      doc.tokens = pair.context;
      doc.tokens.insert(doc.tokens.end(), pair.continuation.begin(),
                        pair.continuation.end());
      doc.text = vocab->decode_tokens(doc.tokens);
      doc.origin = OriginKind::Human;
      human_chunks.push_back(std::move(doc));
      contexts.push_back(pair.context);
    }
  }

  std::shared_ptr<const NGramModel> base;
  {
    ScopedStage stage(clock, "train_base");
    base = std::make_shared<const NGramModel>(
        train_base(train_docs, cfg.order, cfg.delta,
                   std::static_pointer_cast<const Vocabulary>(vocab)));
  }
  if (persist) {
    vocab->save((out / "vocab.json").string());
    base->save((out / "models" / "base.ngram").string());
  }

  std::vector<TokenSeq> human_refs =
      decode_all(human_chunks, *vocab, static_cast<size_t>(cfg.m));

  int G = cfg.generations;
  std::vector<GenerationReport> reports;
  reports.reserve(static_cast<size_t>(G) + 1);
  // synthetic_sets[g-1] holds the set produced at pipeline generation g; the
  // set produced by the generation-i model is synthetic_sets[i], so report
  // row i always describes that model's held-out fit and its own output.
  std::vector<std::vector<Document>> synthetic_sets;
  synthetic_sets.reserve(static_cast<size_t>(G) + 1);

  NGramModel current(cfg.order,
                     std::static_pointer_cast<const Vocabulary>(vocab),
                     cfg.delta);
  {
    ScopedStage stage(clock, "train");
    current = finetune(base, human_pairs, cfg.lambda);
  }

  NGramModel gen0 = current;  // reference model for perplexity histograms
  DetectorModel detector;
  std::vector<Histogram> histograms;

  for (int i = 0; i <= G; ++i) {
    try {
      if (i > 0) {
        std::vector<Document> pool;
        {
          ScopedStage stage(clock, "pool");
          Rng pool_rng(seed_combine(cfg.seed, kPoolTag,
                                    static_cast<uint64_t>(i)));
          pool = build_pool(human_chunks, synthetic_sets, i, cfg.mix, cfg.n,
                            pool_rng);
        }
        std::vector<Document> curated;
        {
          ScopedStage stage(clock, "curate");
          switch (cfg.mode) {
            case Mode::Baseline:
              curated = std::move(pool);
              break;
            case Mode::Mitigation: {
              Rng sir_rng(seed_combine(cfg.seed, kSirTag,
                                       static_cast<uint64_t>(i)));
              curated = sir_curate(pool, detector, cfg.resample, sir_rng,
                                   cfg.resample_calibrated);
              break;
            }
            case Mode::Oracle:
              for (Document& doc : pool) {
                if (doc.is_human()) curated.push_back(std::move(doc));
              }
              break;
          }
        }
        GenerationReport report;
        report.generation = i;
        report.pool = pool_composition(curated, i);
        {
          ScopedStage stage(clock, "train");
          std::vector<ChunkPair> pairs = chunk_all(curated, cfg.m, cfg.c);
          if (pairs.empty()) {
            throw std::runtime_error("curated pool yields no chunks");
          }
          current = finetune(base, pairs, cfg.lambda);
        }
        reports.push_back(report);
      } else {
        GenerationReport report;
        report.generation = 0;
        report.pool.n_human = static_cast<int>(human_chunks.size());
        report.pool.max_duplication = 1;
        reports.push_back(report);
      }

      GenerationReport& report = reports.back();
      {
        ScopedStage stage(clock, "evaluate");
        EvalResult eval = evaluate(current, test_docs, cfg.m, cfg.c, workers);
        report.perplexity = eval.perplexity;
        report.accuracy = eval.accuracy;
      }

      {
        ScopedStage stage(clock, "generate");
        synthetic_sets.push_back(generate_synthetic_set(
            current, contexts, cfg.c, cfg.strategy, cfg.seed, i + 1,
            workers));
      }
      const std::vector<Document>& own_output = synthetic_sets.back();

      if (i == 0) {
        ScopedStage stage(clock, "detector");
        if (!cfg.detector.path.empty()) {
          detector = DetectorModel::load(cfg.detector.path);
        } else {
          Rng det_rng(seed_combine(cfg.seed, kDetectorTag));
          detector =
              make_detector(human_chunks, own_output, cfg.detector, det_rng);
        }
      }

      {
        ScopedStage stage(clock, "metrics");
        Rng metrics_rng(seed_combine(cfg.seed, kMetricsTag,
                                     static_cast<uint64_t>(i)));
        QualityScores q =
            set_quality(own_output, human_refs, *vocab, cfg.metrics,
                        static_cast<size_t>(cfg.m), metrics_rng);
        report.diversity = q.diversity;
        report.self_bleu = q.self_bleu;
        report.mauve = q.mauve;
        report.readability = q.readability;
        report.detector_acc = detector_machine_rate(detector, own_output);
        histograms.push_back(perplexity_histogram(gen0, own_output, cfg.m,
                                                  cfg.c, cfg.metrics.hist_edges,
                                                  workers));
      }

      if (persist) {
        ScopedStage stage(clock, "persist");
        current.save(
            (out / "models" / ("gen" + std::to_string(i) + ".ngram")).string());
        save_corpus(own_output,
                    (out / ("synthetic_gen" + std::to_string(i) + ".jsonl"))
                        .string());
        write_text_file(
            (out / ("ppl_hist_gen" + std::to_string(i) + ".csv")).string(),
            histogram_csv(histograms.back()));
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("generation " + std::to_string(i) + ": " +
                               e.what());
    }
  }

  if (persist) {
    ScopedStage stage(clock, "persist");
    detector.save((out / "detector.json").string());
    write_text_file((out / "report.csv").string(), report_csv(reports));
  }

  result.reports = std::move(reports);
  result.stage_seconds = clock.take();
  return result;
}

}  // namespace clab
