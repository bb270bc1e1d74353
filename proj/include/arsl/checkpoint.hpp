// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "arsl/model.hpp"

namespace arsl {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Training state on disk: student, EMA teacher and the student's momentum.
struct Checkpoint {
  std::uint64_t iteration = 0;
  ModelParams student;
  ModelParams teacher;
  std::vector<double> momentum;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Little-endian layout: magic "ARSLCKPT", u32 version, u64 iteration, model
/// config, then named arrays with shape headers, closed by an FNV-1a checksum.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws FormatError for missing, truncated, corrupt or wrong-version files.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace arsl
