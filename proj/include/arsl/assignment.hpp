// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "arsl/data.hpp"
#include "arsl/geometry.hpp"
#include "arsl/jce.hpp"
#include "arsl/model.hpp"

namespace arsl {

/// Quality branch interpretation: FCOS centerness or predicted IoU.
enum class HeadMode { Centerness, Jce };

enum class Verdict { Negative, Candidate, Positive };

struct TsaConfig {
  double tau_neg = 0.1;
  double iou_match_threshold = 0.6;
  /// Pseudo-box confidence filter of the box-based assigner.
  double sigma = 0.5;
  /// Candidates take part in classification and localization mining. When
  /// off they are ignored by both tasks.
  bool mining = true;

  void validate() const;
};

/// Teacher outputs as the assigners see them: joint scores and decoded boxes.
struct ScoreMap {
  Grid grid;
  int num_classes = 0;
  std::vector<double> joint;  // size * num_classes
  std::vector<Box> boxes;     // size

  int size() const { return grid.size(); }
  std::span<const double> scores(int loc) const {
    return {joint.data() + static_cast<std::size_t>(loc) * num_classes,
            static_cast<std::size_t>(num_classes)};
  }
  double max_score(int loc) const;
  /// Lowest index among maxima.
  int argmax(int loc) const;
  std::vector<double> max_scores() const;
};

/// sigmoid(cls) * sigmoid(quality) at every location, with decoded boxes.
ScoreMap score_map(const DenseMap& map);

struct LocationAssignment {
  Verdict verdict = Verdict::Negative;
  std::optional<ClassTarget> cls_target;
  std::optional<Box> loc_target;
  /// Quality-branch target; IoU for the JCE head, centerness otherwise.
  /// Filled by materialize_targets from the student prediction.
  std::optional<double> iou_target;
  bool cls_active = false;
  bool loc_active = false;

  /// cls_active with a nonzero target channel.
  bool assigned_positive() const;
};

struct AssignmentResult {
  Grid grid;
  int num_classes = 0;
  std::vector<LocationAssignment> locations;
  /// Positive threshold used by TSA; +inf when no location cleared tau_neg
  /// or for box-based assignment.
  double tau_pos = std::numeric_limits<double>::infinity();

  struct Counts {
    int negative = 0;
    int candidate = 0;
    int positive = 0;
    int cls_active = 0;
    int loc_active = 0;
  };
  Counts counts() const;
};

/// mean + population std of the pooled maxima; +inf for an empty list.
double dynamic_positive_threshold(std::span<const double> maxes);

/// Negative below tau_neg, Positive above tau_pos, Candidate on [tau_neg, tau_pos].
std::vector<Verdict> tsa_partition(std::span<const double> maxes, double tau_neg, double tau_pos);

std::vector<ClassTarget> mine_classification(std::span<const int> candidates, const ScoreMap& teacher);

struct LocalizationMatch {
  std::optional<Box> target;
  std::vector<int> matched;  // positive locations that passed all three tests
};

/// Score-weighted average of boxes, corners averaged independently.
Box weighted_box(std::span<const Box> boxes, std::span<const double> weights);

/// A candidate matches a positive when the teacher's argmax classes agree,
/// their boxes overlap with IoU above the threshold, and the candidate's
/// center lies strictly inside the positive box.
std::vector<LocalizationMatch> mine_localization(std::span<const int> candidates,
                                                 std::span<const int> positives,
                                                 const ScoreMap& teacher,
                                                 double iou_match_threshold);

AssignmentResult assign_tsa(const ScoreMap& teacher, const TsaConfig& config);

/// FCOS rule: a location is positive for the smallest-area box containing
/// its center (lowest index on ties), negative otherwise. Every location is
/// cls_active; positives are loc_active.
AssignmentResult assign_boxes(std::span<const GtObject> boxes, const Grid& grid, int num_classes,
                              HeadMode head);

/// Filters teacher detections at `sigma` (strictly greater) and applies
/// class-wise NMS.
std::vector<Detection> pseudo_boxes(const ScoreMap& teacher, double sigma, double nms_threshold);

AssignmentResult assign_box_baseline(std::span<const Detection> pseudo, const Grid& grid,
                                     int num_classes, HeadMode head);

double centerness(const GridLocation& loc, const Box& box);

/// Fills iou_target for loc_active locations and resolves LabeledIoU class
/// targets, both from the current student prediction.
void materialize_targets(AssignmentResult& result, const DenseMap& student, HeadMode head);

}  // namespace arsl
