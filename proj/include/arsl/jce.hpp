// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "arsl/geometry.hpp"

namespace arsl {

/// Probabilities are clamped to [kProbEps, 1 - kProbEps] before any log.
inline constexpr double kProbEps = 1e-6;

double sigmoid(double x);

/// Where a classification target came from.
enum class TargetSource {
  /// Soft IoU label on labeled data (or a pseudo box standing in for GT).
  LabeledIoU,
  /// Largest teacher joint score on its argmax channel.
  UnlabeledTeacher,
  /// Background: the zero vector.
  Negative,
  /// Hard 1.0 label, used by the centerness head.
  OneHot,
};

/// Per-location classification target with at most one nonzero channel.
struct ClassTarget {
  std::vector<double> values;
  TargetSource source = TargetSource::Negative;

  /// Index of the nonzero channel, or -1 for the zero vector.
  int channel() const;
  double value() const;

  static ClassTarget negative(int num_classes);
  static ClassTarget on_channel(int num_classes, int channel, double value, TargetSource source);
};

/// Elementwise product of class probabilities and the IoU probability.
std::vector<double> joint_confidence(std::span<const double> cls_scores, double iou_score);

ClassTarget labeled_target(const Box& pred_box, const Box& gt, int gt_class, int num_classes);

/// Teacher scores are copied by value; ties break to the lowest channel.
ClassTarget unlabeled_target(std::span<const double> teacher_joint);

struct FocalLossGrad {
  double loss = 0.0;
  std::vector<double> grad_cls_logits;
  double grad_iou_logit = 0.0;
};

/// Quality-focal loss on the joint score sigmoid(cls) * sigmoid(iou):
///   sum_c |S_c - p_c|^gamma * BCE(p_c, S_c)
/// Gradients flow to both the class logits and the IoU logit.
FocalLossGrad united_focal_loss(std::span<const double> cls_logits, double iou_logit,
                                const ClassTarget& target, double gamma);

/// Same loss on sigmoid(cls) alone; grad_iou_logit is always 0.
FocalLossGrad class_focal_loss(std::span<const double> cls_logits, const ClassTarget& target,
                               double gamma);

struct BceLossGrad {
  double loss = 0.0;
  double grad_logit = 0.0;
};

/// BCE(p, t) with gradient p - t with respect to the logit of p.
BceLossGrad iou_branch_loss(double pred_iou, double target_iou);

}  // namespace arsl
