// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "arsl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "arsl/errors.hpp"
#include "arsl/rng.hpp"

namespace arsl {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("expected a finite number, got '" + v + "'");
  }
  return out;
}

long long to_int(const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ConfigError("expected on/off, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double in_range(double v, double lo, double hi) {
  if (!(v >= lo && v <= hi)) throw ConfigError("value " + fmt(v) + " outside [" + fmt(lo) + ", " + fmt(hi) + "]");
  return v;
}

int int_at_least(long long v, long long lo) {
  if (v < lo || v > 1'000'000'000) throw ConfigError("value " + std::to_string(v) + " must be >= " + std::to_string(lo));
  return static_cast<int>(v);
}

struct Entry {
  ConfigKey key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};


template <typename Ptr>
Entry number(std::string name, std::string desc, Ptr field, double lo, double hi) {
  return Entry{{std::move(name), std::move(desc)},
               [=](ExperimentConfig& c, const std::string& v) { field(c) = in_range(to_double(v), lo, hi); },
               [=](const ExperimentConfig& c) { return fmt(field(c)); }};
}

template <typename Ptr>
Entry integer(std::string name, std::string desc, Ptr field, long long lo) {
  return Entry{{std::move(name), std::move(desc)},
               [=](ExperimentConfig& c, const std::string& v) { field(c) = int_at_least(to_int(v), lo); },
               [=](const ExperimentConfig& c) { return std::to_string(field(c)); }};
}

template <typename Ptr>
Entry flag(std::string name, std::string desc, Ptr field) {
  return Entry{{std::move(name), std::move(desc)},
               [=](ExperimentConfig& c, const std::string& v) { field(c) = to_bool(v); },
               [=](const ExperimentConfig& c) { return std::string(field(c) ? "on" : "off"); }};
}

const std::vector<Entry>& entries() {
  using C = ExperimentConfig;
  static const std::vector<Entry> table = {
      {{"seed", "master seed for data, initialization and training"},
       [](C& c, const std::string& v) { c.seed = to_u64(v); },
       [](const C& c) { return std::to_string(c.seed); }},
      integer("scenes", "number of training scenes", [](auto& c) -> auto& { return c.scenes; }, 1),
      number("labeled_fraction", "share of training scenes that keep labels",
             [](auto& c) -> auto& { return c.labeled_fraction; }, 0.0, 1.0),
      integer("holdout_scenes", "held-out scenes for eval and diagnose",
              [](auto& c) -> auto& { return c.holdout_scenes; }, 1),
      {{"dataset", "directory written by gen-data; empty generates scenes in memory"},
       [](C& c, const std::string& v) { c.dataset = v; },
       [](const C& c) { return c.dataset; }},
      integer("image_size", "scene width and height in pixels",
              [](auto& c) -> auto& { return c.scene.image_size; }, 8),
      integer("num_classes", "object classes (disk, square, triangle)",
              [](auto& c) -> auto& { return c.scene.num_classes; }, 1),
      integer("min_objects", "fewest objects per scene", [](auto& c) -> auto& { return c.scene.min_objects; }, 1),
      integer("max_objects", "most objects per scene", [](auto& c) -> auto& { return c.scene.max_objects; }, 1),
      number("min_size", "smallest object extent in pixels", [](auto& c) -> auto& { return c.scene.min_size; },
             2.0, 4096.0),
      number("max_size", "largest object extent in pixels", [](auto& c) -> auto& { return c.scene.max_size; },
             2.0, 4096.0),
      number("noise", "pixel noise standard deviation", [](auto& c) -> auto& { return c.scene.noise; }, 0.0, 1.0),
      number("max_pair_iou", "largest IoU allowed between two objects",
             [](auto& c) -> auto& { return c.scene.max_pair_iou; }, 0.0, 1.0),
      number("color_jitter", "per-object color perturbation", [](auto& c) -> auto& { return c.scene.color_jitter; },
             0.0, 1.0),
      number("beta", "unsupervised loss weight", [](auto& c) -> auto& { return c.train.beta; }, 0.0, 1e6),
      number("lambda", "unlabeled IoU-branch loss weight", [](auto& c) -> auto& { return c.train.lambda; }, 0.0,
             1e6),
      number("ema_momentum", "teacher EMA momentum", [](auto& c) -> auto& { return c.train.ema_momentum; }, 0.0,
             1.0),
      number("tau_neg", "TSA negative threshold", [](auto& c) -> auto& { return c.train.tsa.tau_neg; }, 0.0, 1.0),
      number("sigma", "pseudo-box score filter of the box assigner",
             [](auto& c) -> auto& { return c.train.tsa.sigma; }, 0.0, 1.0),
      number("gamma", "focal modulation exponent", [](auto& c) -> auto& { return c.train.gamma; }, 0.0, 100.0),
      number("iou_match_threshold", "IoU needed to join a candidate to a positive",
             [](auto& c) -> auto& { return c.train.tsa.iou_match_threshold; }, 0.0, 1.0),
      number("nms_threshold", "pseudo-box NMS IoU", [](auto& c) -> auto& { return c.train.nms_threshold; }, 0.0,
             1.0),
      {{"assigner", "unlabeled assignment: box or tsa"},
       [](C& c, const std::string& v) {
         if (v == "box") c.train.assigner = AssignerMode::BoxBaseline;
         else if (v == "tsa") c.train.assigner = AssignerMode::Tsa;
         else throw ConfigError("expected box or tsa, got '" + v + "'");
       },
       [](const C& c) { return std::string(c.train.assigner == AssignerMode::Tsa ? "tsa" : "box"); }},
      {{"head", "quality branch: centerness or jce"},
       [](C& c, const std::string& v) {
         if (v == "centerness") c.train.head = HeadMode::Centerness;
         else if (v == "jce") c.train.head = HeadMode::Jce;
         else throw ConfigError("expected centerness or jce, got '" + v + "'");
       },
       [](const C& c) { return std::string(c.train.head == HeadMode::Jce ? "jce" : "centerness"); }},
      flag("mining", "TSA potential positive mining", [](auto& c) -> auto& { return c.train.tsa.mining; }),
      integer("burn_in_iters", "supervised iterations before self-training",
              [](auto& c) -> auto& { return c.train.burn_in_iters; }, 0),
      integer("total_iters", "total training iterations", [](auto& c) -> auto& { return c.train.total_iters; }, 0),
      number("lr", "SGD learning rate", [](auto& c) -> auto& { return c.train.lr; }, 0.0, 10.0),
      integer("warmup_iters", "iterations of linear learning-rate warm-up",
              [](auto& c) -> auto& { return c.train.warmup_iters; }, 0),
      number("momentum", "SGD momentum", [](auto& c) -> auto& { return c.train.momentum; }, 0.0, 1.0),
      number("weight_decay", "L2 weight decay", [](auto& c) -> auto& { return c.train.weight_decay; }, 0.0, 1.0),
      integer("labeled_batch", "labeled images per iteration",
              [](auto& c) -> auto& { return c.train.labeled_batch; }, 1),
      integer("unlabeled_batch", "unlabeled images per iteration",
              [](auto& c) -> auto& { return c.train.unlabeled_batch; }, 0),
      number("aug_scale_min", "strong view contrast factor lower bound",
             [](auto& c) -> auto& { return c.train.strong.scale_lo; }, 0.0, 10.0),
      number("aug_scale_max", "strong view contrast factor upper bound",
             [](auto& c) -> auto& { return c.train.strong.scale_hi; }, 0.0, 10.0),
      number("aug_shift", "strong view brightness shift bound", [](auto& c) -> auto& { return c.train.strong.shift; },
             0.0, 1.0),
      flag("aug_cutout", "strong view cutout square", [](auto& c) -> auto& { return c.train.strong.cutout; }),
      integer("aug_cutout_min", "smallest cutout side", [](auto& c) -> auto& { return c.train.strong.cutout_min; },
              0),
      integer("aug_cutout_max", "largest cutout side", [](auto& c) -> auto& { return c.train.strong.cutout_max; },
              0),
      flag("aug_independent_flip", "strong view samples its own flip",
           [](auto& c) -> auto& { return c.train.strong.independent_flip; }),
      {{"strides", "three comma-separated convolution strides"},
       [](C& c, const std::string& v) {
         std::stringstream ss(v);
         std::string item;
         std::vector<int> out;
         while (std::getline(ss, item, ',')) out.push_back(int_at_least(to_int(trim(item)), 1));
         if (out.size() != 3) throw ConfigError("expected three strides, got '" + v + "'");
         std::copy(out.begin(), out.end(), c.train.model.strides.begin());
       },
       [](const C& c) {
         const auto& s = c.train.model.strides;
         return std::to_string(s[0]) + "," + std::to_string(s[1]) + "," + std::to_string(s[2]);
       }},
      integer("threads", "worker threads (1 is fully deterministic)",
              [](auto& c) -> auto& { return c.train.threads; }, 1),
      integer("checkpoint_every", "iterations between checkpoints",
              [](auto& c) -> auto& { return c.checkpoint_every; }, 1),
      number("eval_score_threshold", "detection score floor at evaluation",
             [](auto& c) -> auto& { return c.eval_score_threshold; }, 0.0, 1.0),
      number("eval_nms_threshold", "detection NMS IoU at evaluation",
             [](auto& c) -> auto& { return c.eval_nms_threshold; }, 0.0, 1.0),
      {{"sweep_sigmas", "comma-separated sigma values for the threshold sweep"},
       [](C& c, const std::string& v) {
         std::vector<double> out;
         std::stringstream ss(v);
         std::string item;
         while (std::getline(ss, item, ',')) out.push_back(in_range(to_double(trim(item)), 0.0, 1.0));
         if (out.empty()) throw ConfigError("expected at least one value");
         c.sweep_sigmas = std::move(out);
       },
       [](const C& c) {
         std::string s;
         for (std::size_t k = 0; k < c.sweep_sigmas.size(); ++k) s += (k ? "," : "") + fmt(c.sweep_sigmas[k]);
         return s;
       }},
  };
  return table;
}

const Entry& find_entry(const std::string& key) {
  for (const Entry& e : entries()) {
    if (e.key.name == key) return e;
  }
  throw ConfigError("unknown key '" + key + "'");
}

}  // namespace

void ExperimentConfig::finalize() {
  train.seed = seed;
  train.model.num_classes = scene.num_classes;
  if (scene.image_size % train.model.total_stride() != 0) {
    throw ConfigError("image_size must be divisible by the total stride " +
                      std::to_string(train.model.total_stride()));
  }
  scene.validate();
  train.validate();
  if (train.burn_in_iters > train.total_iters) throw ConfigError("burn_in_iters exceeds total_iters");
  if (train.strong.scale_lo > train.strong.scale_hi) throw ConfigError("aug_scale_min exceeds aug_scale_max");
  if (train.strong.cutout_min > train.strong.cutout_max) throw ConfigError("aug_cutout_min exceeds aug_cutout_max");
  if (scene.num_classes > 3) throw ConfigError("num_classes must be at most 3");
}

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const Entry& e : entries()) out.push_back(e.key);
    return out;
  }();
  return keys;
}

void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const Entry& e = find_entry(key);
  try {
    e.set(config, value);
  } catch (const ConfigError& err) {
    throw ConfigError("key '" + key + "': " + err.what());
  }
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  ExperimentConfig config;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + "missing key");
    if (auto it = seen.find(key); it != seen.end()) {
      throw ConfigError(where + "key '" + key + "' already set on line " + std::to_string(it->second));
    }
    seen[key] = lineno;
    try {
      set_config_value(config, key, value);
    } catch (const ConfigError& err) {
      throw ConfigError(where + err.what());
    }
  }
  try {
    config.finalize();
  } catch (const ConfigError& err) {
    throw ConfigError(source + ": " + err.what());
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

std::string echo_config(const ExperimentConfig& config) {
  std::ostringstream out;
  for (const Entry& e : entries()) {
    out << "# " << e.key.description << '\n' << e.key.name << " = " << e.get(config) << '\n';
  }
  return out.str();
}

std::vector<Sample> holdout_dataset(const ExperimentConfig& config) {
  return generate_dataset(config.holdout_scenes, 1.0, mix_seed(config.seed, 0x401d), config.scene);
}

std::vector<Sample> training_dataset(const ExperimentConfig& config) {
  if (!config.dataset.empty()) return load_dataset(config.dataset);
  return generate_dataset(config.scenes, config.labeled_fraction, config.seed, config.scene);
}

}  // namespace arsl
