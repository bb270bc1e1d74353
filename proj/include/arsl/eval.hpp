// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "arsl/data.hpp"
#include "arsl/geometry.hpp"
#include "arsl/model.hpp"

namespace arsl {

struct ImageDetection {
  int image = 0;
  Detection det;
};

struct ImageGt {
  int image = 0;
  GtObject object;
};

struct ApResult {
  /// Empty for classes without ground truth; those are left out of the mean.
  std::vector<std::optional<double>> per_class;
  double mean = 0.0;
};

/// COCO-style AP at one IoU threshold: greedy matching in descending score
/// (input index breaks ties), 101-point interpolated precision envelope.
ApResult average_precision(const std::vector<ImageDetection>& dets, const std::vector<ImageGt>& gts,
                           double iou_threshold, int num_classes);

struct EvalReport {
  double ap50 = 0.0;
  double ap50_95 = 0.0;
  std::vector<std::optional<double>> per_class_ap50;
  std::vector<std::optional<double>> per_class_ap50_95;
  int images = 0;
  int detections = 0;

  std::string to_json() const;
  std::string to_table() const;
};

/// AP50 and AP averaged over IoU 0.50:0.05:0.95.
EvalReport evaluate_detections(const std::vector<ImageDetection>& dets, const std::vector<ImageGt>& gts,
                               int num_classes, int images);

/// Decoded, score-thresholded, NMSed detections of one image, best first,
/// truncated to max_dets.
std::vector<Detection> predict(const ModelParams& params, const Image& image, double score_threshold,
                               double nms_threshold, int max_dets = 100);

EvalReport evaluate(const ModelParams& params, const std::vector<Sample>& dataset, double score_threshold,
                    double nms_threshold);

}  // namespace arsl
