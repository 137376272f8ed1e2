// SPDX-License-Identifier: Apache-2.0
#include "fedlmd/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "fedlmd/errors.hpp"
#include "fedlmd/rng.hpp"

namespace fedlmd {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct KeyDef {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
T parse_number(const std::string& key, const std::string& v);

template <>
double parse_number<double>(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

template <>
int parse_number<int>(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    long long d = std::stoll(v, &pos);
    if (pos != v.size() || d < INT32_MIN || d > INT32_MAX) throw std::invalid_argument("");
    return static_cast<int>(d);
  } catch (...) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

template <>
int64_t parse_number<int64_t>(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

template <>
uint64_t parse_number<uint64_t>(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    unsigned long long d = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

const std::vector<KeyDef>& schema() {
  static const std::vector<KeyDef> defs = [] {
    std::vector<KeyDef> d;
    auto str = [&d](const char* name, std::string RunConfig::*f) {
      d.push_back({name, [f](RunConfig& c, const std::string& v) { c.*f = v; },
                   [f](const RunConfig& c) { return c.*f; }});
    };
    auto num_d = [&d](const char* name, double RunConfig::*f) {
      d.push_back({name,
                   [f, name](RunConfig& c, const std::string& v) {
                     c.*f = parse_number<double>(name, v);
                   },
                   [f](const RunConfig& c) { return fmt_double(c.*f); }});
    };
    auto num_i = [&d](const char* name, int RunConfig::*f) {
      d.push_back({name,
                   [f, name](RunConfig& c, const std::string& v) {
                     c.*f = parse_number<int>(name, v);
                   },
                   [f](const RunConfig& c) { return std::to_string(c.*f); }});
    };
    auto num_i64 = [&d](const char* name, int64_t RunConfig::*f) {
      d.push_back({name,
                   [f, name](RunConfig& c, const std::string& v) {
                     c.*f = parse_number<int64_t>(name, v);
                   },
                   [f](const RunConfig& c) { return std::to_string(c.*f); }});
    };
    auto num_u64 = [&d](const char* name, uint64_t RunConfig::*f) {
      d.push_back({name,
                   [f, name](RunConfig& c, const std::string& v) {
                     c.*f = parse_number<uint64_t>(name, v);
                   },
                   [f](const RunConfig& c) { return std::to_string(c.*f); }});
    };
    auto boolean = [&d](const char* name, bool RunConfig::*f) {
      d.push_back({name,
                   [f, name](RunConfig& c, const std::string& v) { c.*f = parse_bool(name, v); },
                   [f](const RunConfig& c) { return (c.*f) ? "true" : "false"; }});
    };

    str("data.kind", &RunConfig::data_kind);
    str("data.path", &RunConfig::data_path);
    str("data.test_path", &RunConfig::data_test_path);
    num_i("data.classes", &RunConfig::data_classes);
    num_d("data.normalize_mean", &RunConfig::normalize_mean);
    num_d("data.normalize_std", &RunConfig::normalize_std);
    num_i64("data.train_per_class", &RunConfig::train_per_class);
    num_i64("data.test_per_class", &RunConfig::test_per_class);
    boolean("data.augment", &RunConfig::augment);
    num_i("data.synth_classes", &RunConfig::synth_classes);
    num_i("data.synth_per_class", &RunConfig::synth_per_class);
    num_i("data.synth_dim", &RunConfig::synth_dim);
    num_d("data.synth_spacing", &RunConfig::synth_spacing);
    num_u64("data.synth_seed", &RunConfig::synth_seed);
    num_i("data.image_classes", &RunConfig::image_classes);
    num_i("data.image_train_per_class", &RunConfig::image_train_per_class);
    num_i("data.image_test_per_class", &RunConfig::image_test_per_class);
    num_d("data.image_noise", &RunConfig::image_noise);
    num_i("data.image_shift", &RunConfig::image_shift);
    num_u64("data.image_seed", &RunConfig::image_seed);

    str("partition.strategy", &RunConfig::partition_strategy);
    num_i("partition.clients", &RunConfig::clients);
    num_i("partition.shards_per_client", &RunConfig::shards_per_client);
    num_d("partition.alpha", &RunConfig::alpha);
    num_i64("partition.seed", &RunConfig::partition_seed);
    boolean("partition.require_nonempty", &RunConfig::require_nonempty);
    num_i("partition.retries", &RunConfig::partition_retries);

    str("model.arch", &RunConfig::arch);

    str("loss.kind", &RunConfig::loss_kind);
    num_d("loss.beta", &RunConfig::beta);
    num_d("loss.tau", &RunConfig::tau);
    num_d("loss.smoothing", &RunConfig::smoothing);
    num_d("loss.mu_prox", &RunConfig::mu_prox);

    str("majority.rule", &RunConfig::majority_rule);
    str("majority.mask_set", &RunConfig::mask_set);

    num_i("schedule.rounds", &RunConfig::rounds);
    num_i("schedule.local_epochs", &RunConfig::local_epochs);
    num_i("schedule.clients_per_round", &RunConfig::clients_per_round);
    num_i("schedule.batch_size", &RunConfig::batch_size);
    num_d("schedule.lr", &RunConfig::lr);
    num_d("schedule.lr_decay", &RunConfig::lr_decay);
    num_d("schedule.momentum", &RunConfig::momentum);
    num_d("schedule.weight_decay", &RunConfig::weight_decay);
    num_i64("schedule.switch_round", &RunConfig::switch_round);
    num_d("schedule.server_momentum", &RunConfig::server_momentum);

    str("aggregate.weighting", &RunConfig::weighting);

    num_u64("run.seed", &RunConfig::seed);
    str("run.output_dir", &RunConfig::output_dir);
    num_i("run.workers", &RunConfig::workers);
    num_i("run.eval_batch", &RunConfig::eval_batch);
    return d;
  }();
  return defs;
}

const KeyDef* find_key(const std::string& name) {
  for (const auto& k : schema())
    if (k.name == name) return &k;
  return nullptr;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : schema()) out.push_back(k.name);
  return out;
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::vector<std::string> errors;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(lineno) + ": expected 'section.key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const KeyDef* def = find_key(key);
    if (!def) {
      errors.push_back("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
      continue;
    }
    try {
      def->set(cfg, value);
    } catch (const ConfigError& e) {
      errors.push_back(e.what());
    }
  }
  if (!errors.empty()) {
    std::string msg = "config errors:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

void apply_overrides(RunConfig& cfg, const std::map<std::string, std::string>& overrides) {
  std::vector<std::string> errors;
  for (const auto& [key, value] : overrides) {
    const KeyDef* def = find_key(key);
    if (!def) {
      errors.push_back("unknown key '" + key + "'");
      continue;
    }
    try {
      def->set(cfg, value);
    } catch (const ConfigError& e) {
      errors.push_back(e.what());
    }
  }
  if (!errors.empty()) {
    std::string msg = "override errors:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
}

std::vector<std::string> validate_config(const RunConfig& cfg) {
  std::vector<std::string> v;
  auto expect = [&v](bool ok, const std::string& msg) {
    if (!ok) v.push_back(msg);
  };

  expect(cfg.data_kind == "idx" || cfg.data_kind == "csv" || cfg.data_kind == "synth" ||
             cfg.data_kind == "synth_image",
         "data.kind: must be idx, csv, synth, or synth_image");
  if (cfg.data_kind == "idx" || cfg.data_kind == "csv")
    expect(!cfg.data_path.empty(), "data.path: required for " + cfg.data_kind + " datasets");
  if (cfg.data_kind == "csv")
    expect(!cfg.data_test_path.empty(), "data.test_path: required for csv datasets");
  expect(cfg.normalize_std > 0.0, "data.normalize_std: must be positive");
  expect(cfg.data_classes >= 0, "data.classes: must be non-negative");
  expect(cfg.synth_classes >= 2, "data.synth_classes: must be >= 2");
  expect(cfg.synth_per_class >= 0, "data.synth_per_class: must be non-negative");
  expect(cfg.synth_dim >= 1, "data.synth_dim: must be >= 1");
  expect(cfg.image_classes >= 2 && cfg.image_classes <= 255,
         "data.image_classes: must be in [2, 255]");
  expect(cfg.image_train_per_class >= 0, "data.image_train_per_class: must be non-negative");
  expect(cfg.image_test_per_class >= 0, "data.image_test_per_class: must be non-negative");
  expect(cfg.image_noise >= 0.0, "data.image_noise: must be non-negative");
  expect(cfg.image_shift >= 0, "data.image_shift: must be non-negative");
  expect(cfg.train_per_class >= 0, "data.train_per_class: must be non-negative");
  expect(cfg.test_per_class >= 0, "data.test_per_class: must be non-negative");

  bool strategy_ok = cfg.partition_strategy == "sharding" || cfg.partition_strategy == "lda";
  expect(strategy_ok, "partition.strategy: must be sharding or lda");
  expect(cfg.clients >= 1, "partition.clients: must be >= 1");
  expect(cfg.shards_per_client >= 1, "partition.shards_per_client: must be >= 1");
  expect(cfg.alpha > 0.0, "partition.alpha: must be positive");
  expect(cfg.partition_retries >= 0, "partition.retries: must be non-negative");

  bool arch_ok = cfg.arch == "mlp" || cfg.arch == "cnn2";
  expect(arch_ok, "model.arch: must be mlp or cnn2");

  bool loss_ok = true;
  try {
    loss_from_name(cfg.loss_kind);
  } catch (const ConfigError&) {
    loss_ok = false;
  }
  expect(loss_ok, "loss.kind: unknown kind '" + cfg.loss_kind + "'");
  expect(cfg.beta >= 0.0, "loss.beta: must be non-negative");
  expect(cfg.tau > 0.0, "loss.tau: must be positive");
  expect(cfg.smoothing >= 0.0 && cfg.smoothing < 1.0, "loss.smoothing: must be in [0, 1)");
  expect(cfg.mu_prox >= 0.0, "loss.mu_prox: must be non-negative");

  expect(cfg.majority_rule == "mean" || cfg.majority_rule == "sqrt",
         "majority.rule: must be mean or sqrt");
  expect(cfg.mask_set == "majority" || cfg.mask_set == "present",
         "majority.mask_set: must be majority or present");

  expect(cfg.rounds >= 0, "schedule.rounds: must be non-negative");
  expect(cfg.local_epochs >= 0, "schedule.local_epochs: must be non-negative");
  expect(cfg.clients_per_round >= 1, "schedule.clients_per_round: must be >= 1");
  expect(cfg.clients_per_round <= cfg.clients,
         "schedule.clients_per_round: must not exceed partition.clients");
  expect(cfg.batch_size >= 1, "schedule.batch_size: must be >= 1");
  expect(cfg.lr > 0.0, "schedule.lr: must be positive");
  expect(cfg.lr_decay > 0.0 && cfg.lr_decay <= 1.0, "schedule.lr_decay: must be in (0, 1]");
  expect(cfg.momentum >= 0.0 && cfg.momentum < 1.0, "schedule.momentum: must be in [0, 1)");
  expect(cfg.weight_decay >= 0.0, "schedule.weight_decay: must be non-negative");
  expect(cfg.switch_round == -1 ||
             (cfg.switch_round >= 0 && cfg.switch_round <= cfg.rounds),
         "schedule.switch_round: must be -1 (auto) or in [0, rounds]");
  expect(cfg.server_momentum >= 0.0 && cfg.server_momentum < 1.0,
         "schedule.server_momentum: must be in [0, 1)");

  expect(cfg.weighting == "simple" || cfg.weighting == "by_samples",
         "aggregate.weighting: must be simple or by_samples");

  expect(cfg.workers >= 1, "run.workers: must be >= 1");
  expect(cfg.eval_batch >= 1, "run.eval_batch: must be >= 1");
  expect(!cfg.output_dir.empty(), "run.output_dir: must not be empty");
  return v;
}

void check_config(const RunConfig& cfg) {
  auto v = validate_config(cfg);
  if (v.empty()) return;
  std::string msg = "invalid config:";
  for (const auto& e : v) msg += "\n  " + e;
  throw ConfigError(msg);
}

RunConfig resolve_config(const RunConfig& cfg) {
  check_config(cfg);
  RunConfig r = cfg;
  if (r.partition_seed < 0) r.partition_seed = static_cast<int64_t>(r.seed);
  if (r.switch_round < 0)
    r.switch_round = (r.loss_kind == "lmd_tf") ? r.rounds : 0;
  return r;
}

std::string config_snapshot(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : schema()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

std::string config_hash(const RunConfig& cfg) {
  const uint64_t h = fnv1a64(config_snapshot(cfg));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%012llx", static_cast<unsigned long long>(h & 0xFFFFFFFFFFFFull));
  return buf;
}

}  // namespace fedlmd
