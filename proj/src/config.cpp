#include "clab/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

namespace clab {
namespace {

std::string trim(const std::string& s) {
  size_t lo = s.find_first_not_of(" \t\r");
  if (lo == std::string::npos) return "";
  size_t hi = s.find_last_not_of(" \t\r");
  return s.substr(lo, hi - lo + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: " + key + ": expected a boolean, got '" + v +
                    "'");
}

long long parse_int(const std::string& v, const std::string& key) {
  try {
    size_t used = 0;
    long long out = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + ": expected an integer, got '" + v +
                      "'");
  }
}

uint64_t parse_u64(const std::string& v, const std::string& key) {
  try {
    size_t used = 0;
    unsigned long long out = std::stoull(v, &used);
    if (used != v.size() || v.find('-') != std::string::npos) {
      throw std::invalid_argument(v);
    }
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key +
                      ": expected a non-negative integer, got '" + v + "'");
  }
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    size_t used = 0;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + ": expected a number, got '" + v +
                      "'");
  }
}

std::vector<double> parse_double_list(const std::string& v,
                                      const std::string& key) {
  std::vector<double> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    out.push_back(parse_double(trim(item), key));
  }
  if (out.empty()) {
    throw ConfigError("config: " + key + ": expected a list of numbers");
  }
  return out;
}

void apply_pair(ExperimentConfig& cfg, const std::string& key,
                const std::string& value) {
  using Setter = std::function<void(ExperimentConfig&, const std::string&)>;
  struct Entry {
    const char* key;
    Setter set;
  };
  static const std::vector<Entry> table = {
      {"corpus.train",
       [](ExperimentConfig& c, const std::string& v) { c.train_path = v; }},
      {"corpus.test",
       [](ExperimentConfig& c, const std::string& v) { c.test_path = v; }},
      {"corpus.lowercase",
       [](ExperimentConfig& c, const std::string& v) {
         c.lowercase = parse_bool(v, "corpus.lowercase");
       }},
      {"corpus.min_count",
       [](ExperimentConfig& c, const std::string& v) {
         c.min_count = static_cast<int>(parse_int(v, "corpus.min_count"));
       }},
      {"corpus.m",
       [](ExperimentConfig& c, const std::string& v) {
         c.m = static_cast<int>(parse_int(v, "corpus.m"));
       }},
      {"corpus.c",
       [](ExperimentConfig& c, const std::string& v) {
         c.c = static_cast<int>(parse_int(v, "corpus.c"));
       }},
      {"lm.order",
       [](ExperimentConfig& c, const std::string& v) {
         c.order = static_cast<int>(parse_int(v, "lm.order"));
       }},
      {"lm.delta",
       [](ExperimentConfig& c, const std::string& v) {
         c.delta = parse_double(v, "lm.delta");
       }},
      {"lm.lambda",
       [](ExperimentConfig& c, const std::string& v) {
         c.lambda = parse_double(v, "lm.lambda");
       }},
      {"decoding.strategy",
       [](ExperimentConfig& c, const std::string& v) {
         try {
           c.strategy.kind = parse_strategy(v);
         } catch (const std::exception& e) {
           throw ConfigError(std::string("config: decoding.strategy: ") +
                             e.what());
         }
       }},
      {"decoding.tau",
       [](ExperimentConfig& c, const std::string& v) {
         c.strategy.tau = parse_double(v, "decoding.tau");
       }},
      {"decoding.k",
       [](ExperimentConfig& c, const std::string& v) {
         c.strategy.k = static_cast<int>(parse_int(v, "decoding.k"));
       }},
      {"decoding.eta",
       [](ExperimentConfig& c, const std::string& v) {
         c.strategy.eta = parse_double(v, "decoding.eta");
       }},
      {"decoding.beam_width",
       [](ExperimentConfig& c, const std::string& v) {
         c.strategy.beam_width =
             static_cast<int>(parse_int(v, "decoding.beam_width"));
       }},
      {"mix.preset",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "fully_synthetic") {
           c.mix = MixConfig::fully_synthetic();
         } else if (v == "partial") {
           c.mix = MixConfig::partial(0.5);
         } else if (v == "accumulate") {
           c.mix = MixConfig::accumulate();
         } else {
           throw ConfigError("config: mix.preset: unknown preset '" + v +
                             "'");
         }
       }},
      {"mix.alpha",
       [](ExperimentConfig& c, const std::string& v) {
         c.mix.alpha = parse_double(v, "mix.alpha");
       }},
      {"mix.beta",
       [](ExperimentConfig& c, const std::string& v) {
         c.mix.beta = parse_double(v, "mix.beta");
       }},
      {"mix.gamma",
       [](ExperimentConfig& c, const std::string& v) {
         c.mix.gamma = parse_double(v, "mix.gamma");
       }},
      {"pipeline.seed",
       [](ExperimentConfig& c, const std::string& v) {
         c.seed = parse_u64(v, "pipeline.seed");
       }},
      {"pipeline.generations",
       [](ExperimentConfig& c, const std::string& v) {
         c.generations =
             static_cast<int>(parse_int(v, "pipeline.generations"));
       }},
      {"pipeline.mode",
       [](ExperimentConfig& c, const std::string& v) {
         try {
           c.mode = parse_mode(v);
         } catch (const std::exception& e) {
           throw ConfigError(std::string("config: pipeline.mode: ") +
                             e.what());
         }
       }},
      {"pipeline.n",
       [](ExperimentConfig& c, const std::string& v) {
         c.n = static_cast<int>(parse_int(v, "pipeline.n"));
       }},
      {"pipeline.out_dir",
       [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; }},
      {"pipeline.workers",
       [](ExperimentConfig& c, const std::string& v) {
         c.workers = static_cast<int>(parse_int(v, "pipeline.workers"));
       }},
      {"resample.k",
       [](ExperimentConfig& c, const std::string& v) {
         c.resample.k = parse_double(v, "resample.k");
       }},
      {"resample.b",
       [](ExperimentConfig& c, const std::string& v) {
         c.resample.b = parse_double(v, "resample.b");
       }},
      {"resample.r_max",
       [](ExperimentConfig& c, const std::string& v) {
         c.resample.r_max = static_cast<int>(parse_int(v, "resample.r_max"));
       }},
      {"resample.calibrated",
       [](ExperimentConfig& c, const std::string& v) {
         c.resample_calibrated = parse_bool(v, "resample.calibrated");
       }},
      {"detector.path",
       [](ExperimentConfig& c, const std::string& v) { c.detector.path = v; }},
      {"detector.feature_dim",
       [](ExperimentConfig& c, const std::string& v) {
         c.detector.feature_dim =
             static_cast<int>(parse_int(v, "detector.feature_dim"));
       }},
      {"detector.epochs",
       [](ExperimentConfig& c, const std::string& v) {
         c.detector.epochs = static_cast<int>(parse_int(v, "detector.epochs"));
       }},
      {"detector.learning_rate",
       [](ExperimentConfig& c, const std::string& v) {
         c.detector.learning_rate = parse_double(v, "detector.learning_rate");
       }},
      {"detector.l2",
       [](ExperimentConfig& c, const std::string& v) {
         c.detector.l2 = parse_double(v, "detector.l2");
       }},
      {"detector.label_smoothing",
       [](ExperimentConfig& c, const std::string& v) {
         c.detector.label_smoothing =
             parse_double(v, "detector.label_smoothing");
       }},
      {"detector.human_fraction",
       [](ExperimentConfig& c, const std::string& v) {
         c.detector.human_fraction =
             parse_double(v, "detector.human_fraction");
       }},
      {"detector.val_fraction",
       [](ExperimentConfig& c, const std::string& v) {
         c.detector.val_fraction = parse_double(v, "detector.val_fraction");
       }},
      {"metrics.hash_dim",
       [](ExperimentConfig& c, const std::string& v) {
         c.metrics.embedding.hash_dim =
             static_cast<int>(parse_int(v, "metrics.hash_dim"));
       }},
      {"metrics.num_clusters",
       [](ExperimentConfig& c, const std::string& v) {
         c.metrics.embedding.num_clusters =
             static_cast<int>(parse_int(v, "metrics.num_clusters"));
       }},
      {"metrics.scaling_c",
       [](ExperimentConfig& c, const std::string& v) {
         c.metrics.embedding.scaling_c = parse_double(v, "metrics.scaling_c");
       }},
      {"metrics.lambda_grid_size",
       [](ExperimentConfig& c, const std::string& v) {
         c.metrics.embedding.lambda_grid_size =
             static_cast<int>(parse_int(v, "metrics.lambda_grid_size"));
       }},
      {"metrics.smoothing_eps",
       [](ExperimentConfig& c, const std::string& v) {
         c.metrics.embedding.smoothing_eps =
             parse_double(v, "metrics.smoothing_eps");
       }},
      {"metrics.sample_size",
       [](ExperimentConfig& c, const std::string& v) {
         c.metrics.sample_size =
             static_cast<int>(parse_int(v, "metrics.sample_size"));
       }},
      {"metrics.hist_edges",
       [](ExperimentConfig& c, const std::string& v) {
         c.metrics.hist_edges = parse_double_list(v, "metrics.hist_edges");
       }},
  };

  for (const Entry& entry : table) {
    if (key == entry.key) {
      entry.set(cfg, value);
      return;
    }
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("config: override must be section.key=value, got '" +
                      assignment + "'");
  }
  apply_pair(cfg, trim(assignment.substr(0, eq)),
             trim(assignment.substr(eq + 1)));
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        throw ConfigError("config: line " + std::to_string(lineno) +
                          ": malformed section header");
      }
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) +
                        ": expected key = value");
    }
    std::string key = trim(t.substr(0, eq));
    if (section.empty()) {
      throw ConfigError("config: line " + std::to_string(lineno) + ": key '" +
                        key + "' outside any section");
    }
    try {
      apply_pair(cfg, section + "." + key, trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config: line " + std::to_string(lineno) + ": " +
                        std::string(e.what()).substr(8));
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config file not found: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  ExperimentConfig cfg = parse_config_text(buf.str());
  for (const std::string& o : overrides) apply_override(cfg, o);

  auto check_exists = [](const std::string& file, const std::string& key) {
    if (!file.empty() && !std::filesystem::exists(file)) {
      throw ConfigError("config: " + key + ": file not found: " + file);
    }
  };
  check_exists(cfg.train_path, "corpus.train");
  check_exists(cfg.test_path, "corpus.test");
  check_exists(cfg.detector.path, "detector.path");
  return cfg;
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string edges;
  for (size_t i = 0; i < cfg.metrics.hist_edges.size(); ++i) {
    if (i > 0) edges += ',';
    edges += g17(cfg.metrics.hist_edges[i]);
  }
  std::ostringstream out;
  out << "[corpus]\n"
      << "train = " << cfg.train_path << "\n"
      << "test = " << cfg.test_path << "\n"
      << "lowercase = " << (cfg.lowercase ? "true" : "false") << "\n"
      << "min_count = " << cfg.min_count << "\n"
      << "m = " << cfg.m << "\n"
      << "c = " << cfg.c << "\n\n"
      << "[lm]\n"
      << "order = " << cfg.order << "\n"
      << "delta = " << g17(cfg.delta) << "\n"
      << "lambda = " << g17(cfg.lambda) << "\n\n"
      << "[decoding]\n"
      << "strategy = " << strategy_name(cfg.strategy.kind) << "\n"
      << "tau = " << g17(cfg.strategy.tau) << "\n"
      << "k = " << cfg.strategy.k << "\n"
      << "eta = " << g17(cfg.strategy.eta) << "\n"
      << "beam_width = " << cfg.strategy.beam_width << "\n\n"
      << "[mix]\n"
      << "alpha = " << g17(cfg.mix.alpha) << "\n"
      << "beta = " << g17(cfg.mix.beta) << "\n"
      << "gamma = " << g17(cfg.mix.gamma) << "\n\n"
      << "[pipeline]\n"
      << "seed = " << cfg.seed << "\n"
      << "generations = " << cfg.generations << "\n"
      << "mode = " << mode_name(cfg.mode) << "\n"
      << "n = " << cfg.n << "\n"
      << "out_dir = " << cfg.out_dir << "\n"
      << "workers = " << cfg.workers << "\n\n"
      << "[resample]\n"
      << "k = " << g17(cfg.resample.k) << "\n"
      << "b = " << g17(cfg.resample.b) << "\n"
      << "r_max = " << cfg.resample.r_max << "\n"
      << "calibrated = " << (cfg.resample_calibrated ? "true" : "false")
      << "\n\n"
      << "[detector]\n"
      << "path = " << cfg.detector.path << "\n"
      << "feature_dim = " << cfg.detector.feature_dim << "\n"
      << "epochs = " << cfg.detector.epochs << "\n"
      << "learning_rate = " << g17(cfg.detector.learning_rate) << "\n"
      << "l2 = " << g17(cfg.detector.l2) << "\n"
      << "label_smoothing = " << g17(cfg.detector.label_smoothing) << "\n"
      << "human_fraction = " << g17(cfg.detector.human_fraction) << "\n"
      << "val_fraction = " << g17(cfg.detector.val_fraction) << "\n\n"
      << "[metrics]\n"
      << "hash_dim = " << cfg.metrics.embedding.hash_dim << "\n"
      << "num_clusters = " << cfg.metrics.embedding.num_clusters << "\n"
      << "scaling_c = " << g17(cfg.metrics.embedding.scaling_c) << "\n"
      << "lambda_grid_size = " << cfg.metrics.embedding.lambda_grid_size
      << "\n"
      << "smoothing_eps = " << g17(cfg.metrics.embedding.smoothing_eps) << "\n"
      << "sample_size = " << cfg.metrics.sample_size << "\n"
      << "hist_edges = " << edges << "\n";
  return out.str();
}

}  // namespace clab
