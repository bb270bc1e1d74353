// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "arsl/assignment.hpp"
#include "arsl/data.hpp"
#include "arsl/diagnostics.hpp"
#include "arsl/pipeline.hpp"

namespace arsl {

/// Teacher predictions, one JSON object per image and line:
/// {"image", "height", "width", "stride", "num_classes", "joint", "boxes"}.
std::string prediction_record(int image, const ScoreMap& map);
ScoreMap parse_prediction_record(const std::string& line);
void write_predictions(const std::filesystem::path& path, const std::vector<ScoreMap>& maps);
/// ParseError messages name the file and line.
std::vector<ScoreMap> read_predictions(const std::filesystem::path& path);

/// Ground truth, one line per image: {"image", "objects": [{"class", "box"}]}.
std::string gt_record(int image, const std::vector<GtObject>& gt);
void write_gt(const std::filesystem::path& path, const std::vector<std::vector<GtObject>>& gt);
std::vector<std::vector<GtObject>> read_gt(const std::filesystem::path& path);

/// One line per location: indices, verdict and targets.
std::string assignment_records(int image, const AssignmentResult& result);

std::string step_record_json(const StepRecord& record);
std::string ambiguity_json(const AmbiguityCounts& counts);

std::string to_string(Verdict verdict);

/// Writes text to a file, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace arsl
