// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "arsl/config.hpp"
#include "arsl/diagnostics.hpp"
#include "arsl/eval.hpp"

namespace arsl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumeric = 2;

/// Writes images/, annotations.jsonl and config.txt under `out`.
void cmd_gen_data(const ExperimentConfig& config, const std::filesystem::path& out);

struct TrainOutcome {
  std::filesystem::path final_checkpoint;
  std::filesystem::path log;
  int iterations = 0;
};

/// Writes config.txt, train_log.jsonl, periodic ckpt_<iter>.bin and
/// final.bin. On a non-finite loss, failure.json and failure.bin are dumped
/// before the NumericError propagates.
TrainOutcome cmd_train(const ExperimentConfig& config, const std::filesystem::path& out,
                       const std::optional<std::filesystem::path>& resume = std::nullopt);

/// Teacher parameters are evaluated. An empty dataset path means the
/// config's held-out scenes.
EvalReport cmd_eval(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                    const std::optional<std::filesystem::path>& dataset, const std::filesystem::path& out);

DiagnosticsReport cmd_diagnose(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                               const std::optional<std::filesystem::path>& dataset,
                               const std::filesystem::path& out);

/// Dumps teacher score maps and ground truth for assign-sim.
void cmd_predict(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                 const std::optional<std::filesystem::path>& dataset, const std::filesystem::path& out);

/// Runs the configured assigner on dumped predictions and reports
/// ambiguity counts against the dumped ground truth.
AmbiguityCounts cmd_assign_sim(const ExperimentConfig& config, const std::filesystem::path& predictions,
                               const std::filesystem::path& gt, const std::filesystem::path& out);

/// Entry point of the `arsl` executable; returns the process exit code.
int run_cli(const std::vector<std::string>& args);

}  // namespace arsl
