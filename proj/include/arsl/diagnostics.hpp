// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "arsl/assignment.hpp"
#include "arsl/data.hpp"
#include "arsl/geometry.hpp"
#include "arsl/model.hpp"

namespace arsl {

/// Pearson correlation. Throws UndefinedError for fewer than two points or a
/// constant input.
double pearson_cc(std::span<const double> x, std::span<const double> y);

struct SelectionReport {
  double mean_iou = 0.0;
  double topk_iou = 0.0;
  double pcc = 0.0;
  int detections = 0;
  int k = 5;
};

/// Best same-class IoU of a detection against ground truth (0 if none).
double localization_quality(const Detection& det, std::span<const GtObject> gt);

/// Selection metrics over per-image detection lists (already NMSed).
/// Throws UndefinedError when there are no detections or the scores or
/// qualities are constant.
SelectionReport selection_report(const std::vector<std::vector<Detection>>& dets,
                                 const std::vector<std::vector<GtObject>>& gt, int k = 5);

SelectionReport selection_report(const ModelParams& params, const std::vector<Sample>& dataset, int k,
                                 double score_threshold, double nms_threshold);

struct AmbiguityCounts {
  long true_positives = 0;
  long false_positives = 0;
  long false_negatives = 0;
  long oracle_positives = 0;

  AmbiguityCounts& operator+=(const AmbiguityCounts& o);
};

/// Compares an assigner's verdicts with the supervised FCOS assignment of
/// the true ground truth. TP: assigned positive with the oracle's class.
/// FP: assigned positive on an oracle negative or with the wrong class.
/// FN: oracle positive not counted as TP, so TP + FN = oracle positives.
AmbiguityCounts assignment_ambiguity_report(const AssignmentResult& assigned, std::span<const GtObject> gt);

struct ConfidenceHistogram {
  static constexpr int kBins = 10;
  std::array<long, kBins> positives{};
  std::array<long, kBins> negatives{};

  static int bin_of(double score);
  double positive_fraction(int bin) const;
  double negative_fraction(int bin) const;
};

/// Bins teacher max joint scores; positive/negative by the oracle assignment.
ConfidenceHistogram confidence_histogram(std::span<const ScoreMap> teacher,
                                         const std::vector<std::vector<GtObject>>& gt);

struct SweepPoint {
  double sigma = 0.0;
  AmbiguityCounts counts;
};

/// Box-based assignment at each sigma, pooled over the dataset.
std::vector<SweepPoint> threshold_sweep(std::span<const ScoreMap> teacher,
                                        const std::vector<std::vector<GtObject>>& gt,
                                        std::span<const double> sigmas, double nms_threshold);

/// TSA assignment counts pooled over the dataset.
AmbiguityCounts tsa_ambiguity(std::span<const ScoreMap> teacher, const std::vector<std::vector<GtObject>>& gt,
                              const TsaConfig& config);

struct DiagnosticsReport {
  SelectionReport selection;
  bool selection_defined = true;
  std::string selection_error;
  AmbiguityCounts box_baseline;
  AmbiguityCounts tsa_without_mining;
  AmbiguityCounts tsa_with_mining;
  ConfidenceHistogram histogram;
  std::vector<SweepPoint> sweep;

  std::string to_json() const;
  std::string to_table() const;
  /// Tab-separated x/y series for external plotting.
  std::string plot_data() const;
};

DiagnosticsReport diagnose(const ModelParams& params, const std::vector<Sample>& dataset,
                           const TsaConfig& config, double score_threshold, double nms_threshold,
                           std::span<const double> sigmas);

}  // namespace arsl
