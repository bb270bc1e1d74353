// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "arsl/data.hpp"
#include "arsl/pipeline.hpp"

namespace arsl {

/// Everything a command needs, read from one flat `key = value` file.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  SceneSpec scene;
  int scenes = 1000;
  double labeled_fraction = 0.1;
  /// Held-out scenes for eval and diagnose when no dataset is given.
  int holdout_scenes = 200;
  /// Directory written by gen-data; empty means generate in memory.
  std::string dataset;
  TrainConfig train;
  int checkpoint_every = 1000;
  double eval_score_threshold = 0.05;
  double eval_nms_threshold = 0.6;
  std::vector<double> sweep_sigmas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};

  /// Pushes `seed` into the training config and checks cross-key rules.
  void finalize();
};

struct ConfigKey {
  std::string name;
  std::string description;
};

/// The schema: every accepted key, in echo order.
const std::vector<ConfigKey>& config_schema();

/// Throws ConfigError naming the source, line and key on any problem.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Sets one key from its textual value, as a config line would.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Canonical dump; parse_config(echo_config(c)) reproduces c exactly.
std::string echo_config(const ExperimentConfig& config);

/// Held-out scenes drawn from a seed stream disjoint from the training set.
std::vector<Sample> holdout_dataset(const ExperimentConfig& config);

/// Training scenes: loaded from `dataset` when set, otherwise generated.
std::vector<Sample> training_dataset(const ExperimentConfig& config);

}  // namespace arsl
