#include "clab/detector.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

namespace clab {

namespace {

uint64_t fnv1a64_feed(uint64_t h, const char* data, size_t len) {
  for (size_t i = 0; i < len; ++i) {
    h ^= static_cast<uint8_t>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t hash_feature(uint8_t family, const std::string& a,
                      const std::string* b = nullptr) {
  uint64_t h = 0xcbf29ce484222325ULL;
  char f = static_cast<char>(family);
  h = fnv1a64_feed(h, &f, 1);
  h = fnv1a64_feed(h, a.data(), a.size());
  if (b) {
    char sep = 0x1f;
    h = fnv1a64_feed(h, &sep, 1);
    h = fnv1a64_feed(h, b->data(), b->size());
  }
  return h;
}

double sigmoid(double z) {
  if (z >= 0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

double clamp_prob(double q) {
  return std::clamp(q, 1e-12, 1.0 - 1e-12);
}

double sparse_dot(const std::vector<double>& w, const SparseFeatures& x) {
  double dot = 0;
  for (const auto& [idx, v] : x) dot += w[static_cast<size_t>(idx)] * v;
  return dot;
}

// Stable ln(1 + exp(x)).
double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

constexpr int kBatchSize = 16;

double macro_f1(const std::vector<int>& labels,
                const std::vector<int>& preds) {
  long long tp = 0, fp = 0, fn = 0, tn = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (preds[i] == 1 && labels[i] == 1) ++tp;
    if (preds[i] == 1 && labels[i] == 0) ++fp;
    if (preds[i] == 0 && labels[i] == 1) ++fn;
    if (preds[i] == 0 && labels[i] == 0) ++tn;
  }
  auto f1 = [](long long tp_, long long fp_, long long fn_) {
    double denom = static_cast<double>(2 * tp_ + fp_ + fn_);
    if (denom == 0) return 0.0;
    return 2.0 * static_cast<double>(tp_) / denom;
  };
  return 0.5 * (f1(tp, fp, fn) + f1(tn, fn, fp));
}

void require_both_classes(const std::vector<LabeledDoc>& docs,
                          const char* who) {
  bool has0 = false;
  bool has1 = false;
  for (const auto& ld : docs) {
    if (ld.label == 0) has0 = true;
    if (ld.label == 1) has1 = true;
  }
  if (!has0 || !has1) {
    throw std::runtime_error(std::string(who) +
                             ": both classes must be present");
  }
}

}  // namespace

SparseFeatures featurize(const Document& doc, int feature_dim) {
  if (feature_dim < 1) {
    throw std::invalid_argument("featurize: feature_dim must be >= 1");
  }
  std::string lowered = doc.text;
  for (char& ch : lowered) {
    ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  std::unordered_map<int, double> tf;
  auto bump = [&](uint64_t h) {
    tf[static_cast<int>(h % static_cast<uint64_t>(feature_dim))] += 1.0;
  };
  std::vector<std::string> words = tokenize(lowered, false);
  for (const auto& w : words) bump(hash_feature(1, w));
  for (size_t i = 0; i + 1 < words.size(); ++i) {
    bump(hash_feature(2, words[i], &words[i + 1]));
  }
  for (int n = 3; n <= 5; ++n) {
    if (lowered.size() < static_cast<size_t>(n)) continue;
    for (size_t i = 0; i + n <= lowered.size(); ++i) {
      bump(hash_feature(static_cast<uint8_t>(n),
                        lowered.substr(i, static_cast<size_t>(n))));
    }
  }
  SparseFeatures out(tf.begin(), tf.end());
  std::sort(out.begin(), out.end());
  double norm2 = 0;
  for (const auto& [idx, v] : out) norm2 += v * v;
  if (norm2 > 0) {
    double inv = 1.0 / std::sqrt(norm2);
    for (auto& [idx, v] : out) v *= inv;
  }
  return out;
}

DetectorModel train_detector(const std::vector<LabeledDoc>& train,
                             int feature_dim, int epochs,
                             double learning_rate, double l2,
                             double label_smoothing, Rng& rng,
                             const std::vector<LabeledDoc>* validation) {
  if (feature_dim < 1) {
    throw std::invalid_argument("train_detector: feature_dim must be >= 1");
  }
  if (epochs < 1) {
    throw std::invalid_argument("train_detector: epochs must be >= 1");
  }
  if (!(learning_rate > 0)) {
    throw std::invalid_argument(
        "train_detector: learning_rate must be > 0");
  }
  if (l2 < 0) {
    throw std::invalid_argument("train_detector: l2 must be >= 0");
  }
  if (!(label_smoothing >= 0 && label_smoothing <= 1)) {
    throw std::invalid_argument(
        "train_detector: label_smoothing must be in [0, 1]");
  }
  require_both_classes(train, "train_detector");

  size_t n = train.size();
  std::vector<SparseFeatures> features(n);
  std::vector<double> targets(n);
  for (size_t i = 0; i < n; ++i) {
    features[i] = featurize(train[i].doc, feature_dim);
    targets[i] = static_cast<double>(train[i].label) *
                     (1.0 - label_smoothing) +
                 label_smoothing / 2.0;
  }
  std::vector<SparseFeatures> val_features;
  std::vector<int> val_labels;
  if (validation) {
    require_both_classes(*validation, "train_detector");
    val_features.reserve(validation->size());
    for (const auto& ld : *validation) {
      val_features.push_back(featurize(ld.doc, feature_dim));
      val_labels.push_back(ld.label);
    }
  }

  DetectorModel model;
  model.feature_dim = feature_dim;
  model.weights.assign(static_cast<size_t>(feature_dim), 0.0);
  model.bias = 0;

  std::vector<double> best_weights;
  double best_bias = 0;
  double best_auc = -1;

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::vector<double> grad(static_cast<size_t>(feature_dim), 0.0);
  std::vector<int> touched;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t start = 0; start < n; start += kBatchSize) {
      size_t end = std::min(n, start + kBatchSize);
      double batch_size = static_cast<double>(end - start);
      touched.clear();
      double bias_grad = 0;
      for (size_t bi = start; bi < end; ++bi) {
        size_t i = order[bi];
        double z = sparse_dot(model.weights, features[i]) + model.bias;
        double g = (sigmoid(z) - targets[i]) / batch_size;
        for (const auto& [idx, v] : features[i]) {
          if (grad[static_cast<size_t>(idx)] == 0) touched.push_back(idx);
          grad[static_cast<size_t>(idx)] += g * v;
        }
        bias_grad += g;
      }
      double decay = 1.0 - learning_rate * l2;
      if (l2 > 0) {
        for (double& w : model.weights) w *= decay;
      }
      for (int idx : touched) {
        model.weights[static_cast<size_t>(idx)] -=
            learning_rate * grad[static_cast<size_t>(idx)];
        grad[static_cast<size_t>(idx)] = 0;
      }
      model.bias -= learning_rate * bias_grad;
    }
    if (validation) {
      std::vector<double> scores(val_features.size());
      for (size_t i = 0; i < val_features.size(); ++i) {
        scores[i] = sparse_dot(model.weights, val_features[i]) + model.bias;
      }
      double epoch_auc = auc(scores, val_labels);
      if (epoch_auc > best_auc) {
        best_auc = epoch_auc;
        best_weights = model.weights;
        best_bias = model.bias;
      }
    }
  }
  if (validation) {
    model.weights = std::move(best_weights);
    model.bias = best_bias;
  }
  return model;
}

double calibrate(DetectorModel& model,
                 const std::vector<LabeledDoc>& validation) {
  require_both_classes(validation, "calibrate");
  std::vector<double> logits(validation.size());
  std::vector<int> labels(validation.size());
  for (size_t i = 0; i < validation.size(); ++i) {
    logits[i] = predict_logit(model, validation[i].doc);
    labels[i] = validation[i].label;
  }
  auto nll = [&](double t) {
    double total = 0;
    for (size_t i = 0; i < logits.size(); ++i) {
      double zt = logits[i] / t;
      total += labels[i] == 1 ? softplus(-zt) : softplus(zt);
    }
    return total;
  };

  double lo = 0.05;
  double hi = 20.0;
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - invphi * (hi - lo);
  double x2 = lo + invphi * (hi - lo);
  double f1 = nll(x1);
  double f2 = nll(x2);
  for (int iter = 0; iter < 100; ++iter) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - invphi * (hi - lo);
      f1 = nll(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + invphi * (hi - lo);
      f2 = nll(x2);
    }
  }
  double t_star = (lo + hi) / 2.0;
  // T = 1 is inside the search interval; never do worse than no calibration.
  if (nll(1.0) <= nll(t_star)) t_star = 1.0;
  model.temperature = t_star;
  return t_star;
}

double predict_logit(const DetectorModel& model, const Document& doc) {
  return sparse_dot(model.weights, featurize(doc, model.feature_dim)) +
         model.bias;
}

double predict(const DetectorModel& model, const Document& doc) {
  return clamp_prob(sigmoid(predict_logit(model, doc) / model.temperature));
}

double predict_uncalibrated(const DetectorModel& model, const Document& doc) {
  return clamp_prob(sigmoid(predict_logit(model, doc)));
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw std::invalid_argument("auc: scores and labels must align");
  }
  long long n_pos = 0;
  for (int label : labels) n_pos += label == 1 ? 1 : 0;
  long long n_neg = static_cast<long long>(labels.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw std::invalid_argument("auc: both classes must be present");
  }
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scores[a] < scores[b];
  });
  double pos_rank_sum = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) /
                     2.0;  // 1-based ranks i+1..j share the midrank
    for (size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) pos_rank_sum += midrank;
    }
    i = j;
  }
  double u = pos_rank_sum -
             static_cast<double>(n_pos) * static_cast<double>(n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

DetectorEval evaluate_detector(const DetectorModel& model,
                               const std::vector<LabeledDoc>& test) {
  require_both_classes(test, "evaluate_detector");
  size_t n = test.size();
  std::vector<double> logits(n);
  std::vector<double> probs(n);
  std::vector<int> labels(n);
  std::vector<int> preds(n);
  for (size_t i = 0; i < n; ++i) {
    logits[i] = predict_logit(model, test[i].doc);
    probs[i] = clamp_prob(sigmoid(logits[i] / model.temperature));
    labels[i] = test[i].label;
    preds[i] = probs[i] >= model.threshold ? 1 : 0;
  }

  DetectorEval eval;
  eval.auc = auc(logits, labels);
  long long correct = 0;
  for (size_t i = 0; i < n; ++i) correct += preds[i] == labels[i] ? 1 : 0;
  eval.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  eval.f1_macro = macro_f1(labels, preds);

  constexpr int kBins = 10;
  double bin_prob[kBins] = {0};
  double bin_pos[kBins] = {0};
  long long bin_count[kBins] = {0};
  for (size_t i = 0; i < n; ++i) {
    int b = std::min(static_cast<int>(probs[i] * kBins), kBins - 1);
    bin_prob[b] += probs[i];
    bin_pos[b] += labels[i];
    ++bin_count[b];
  }
  double ece = 0;
  for (int b = 0; b < kBins; ++b) {
    if (bin_count[b] == 0) continue;
    double cnt = static_cast<double>(bin_count[b]);
    ece += (cnt / static_cast<double>(n)) *
           std::abs(bin_prob[b] / cnt - bin_pos[b] / cnt);
  }
  eval.ece = ece;
  return eval;
}

double choose_threshold(const DetectorModel& model,
                        const std::vector<LabeledDoc>& validation) {
  require_both_classes(validation, "choose_threshold");
  size_t n = validation.size();
  std::vector<double> probs(n);
  std::vector<int> labels(n);
  for (size_t i = 0; i < n; ++i) {
    probs[i] = predict(model, validation[i].doc);
    labels[i] = validation[i].label;
  }
  std::vector<double> distinct(probs);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()),
                 distinct.end());
  if (distinct.size() < 2) return 0.5;

  double best_threshold = 0.5;
  double best_f1 = -1;
  std::vector<int> preds(n);
  for (size_t d = 0; d + 1 < distinct.size(); ++d) {
    double t = (distinct[d] + distinct[d + 1]) / 2.0;
    for (size_t i = 0; i < n; ++i) preds[i] = probs[i] >= t ? 1 : 0;
    double f1 = macro_f1(labels, preds);
    if (f1 > best_f1) {  // strict: ascending scan keeps the lowest maximizer
      best_f1 = f1;
      best_threshold = t;
    }
  }
  return best_threshold;
}

void DetectorModel::save(const std::string& path) const {
  nlohmann::json j;
  j["format"] = "clab-detector-v1";
  j["feature_dim"] = feature_dim;
  j["weights"] = weights;
  j["bias"] = bias;
  j["temperature"] = temperature;
  j["threshold"] = threshold;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("detector save: cannot open " + path);
  out << j.dump() << "\n";
  if (!out) throw std::runtime_error("detector save: write failed: " + path);
}

DetectorModel DetectorModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("detector load: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception&) {
    throw std::runtime_error(path + ": invalid detector file");
  }
  if (!j.is_object() || j.value("format", "") != "clab-detector-v1") {
    throw std::runtime_error(path + ": invalid detector file");
  }
  DetectorModel model;
  try {
    model.feature_dim = j.at("feature_dim").get<int>();
    model.weights = j.at("weights").get<std::vector<double>>();
    model.bias = j.at("bias").get<double>();
    model.temperature = j.at("temperature").get<double>();
    model.threshold = j.at("threshold").get<double>();
  } catch (const nlohmann::json::exception&) {
    throw std::runtime_error(path + ": invalid detector file");
  }
  if (model.feature_dim < 1 ||
      model.weights.size() != static_cast<size_t>(model.feature_dim) ||
      !(model.temperature > 0)) {
    throw std::runtime_error(path + ": invalid detector file");
  }
  return model;
}

}  // namespace clab
