// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "arsl/jce.hpp"

#include <algorithm>
#include <cmath>

#include "arsl/errors.hpp"

namespace arsl {

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

int ClassTarget::channel() const {
  for (std::size_t c = 0; c < values.size(); ++c) {
    if (values[c] != 0.0) return static_cast<int>(c);
  }
  return -1;
}

double ClassTarget::value() const {
  const int c = channel();
  return c < 0 ? 0.0 : values[static_cast<std::size_t>(c)];
}

ClassTarget ClassTarget::negative(int num_classes) {
  return {std::vector<double>(static_cast<std::size_t>(num_classes), 0.0), TargetSource::Negative};
}

ClassTarget ClassTarget::on_channel(int num_classes, int channel, double value,
                                    TargetSource source) {
  if (channel < 0 || channel >= num_classes) {
    throw ConfigError("class target channel out of range");
  }
  ClassTarget t{std::vector<double>(static_cast<std::size_t>(num_classes), 0.0), source};
  t.values[static_cast<std::size_t>(channel)] = value;
  return t;
}

std::vector<double> joint_confidence(std::span<const double> cls_scores, double iou_score) {
  std::vector<double> out(cls_scores.size());
  for (std::size_t c = 0; c < cls_scores.size(); ++c) out[c] = cls_scores[c] * iou_score;
  return out;
}

ClassTarget labeled_target(const Box& pred_box, const Box& gt, int gt_class, int num_classes) {
  return ClassTarget::on_channel(num_classes, gt_class, iou(pred_box, gt),
                                 TargetSource::LabeledIoU);
}

ClassTarget unlabeled_target(std::span<const double> teacher_joint) {
  const int num_classes = static_cast<int>(teacher_joint.size());
  if (teacher_joint.empty()) return ClassTarget::negative(0);
  // max_element returns the first maximum, i.e. the lowest index on ties.
  const auto it = std::max_element(teacher_joint.begin(), teacher_joint.end());
  ClassTarget t = ClassTarget::on_channel(num_classes, static_cast<int>(it - teacher_joint.begin()),
                                          *it, TargetSource::UnlabeledTeacher);
  return t;
}

namespace {

struct TermGrad {
  double loss;
  double d_prob;  // d loss / d p, zero where p was clamped
};

TermGrad quality_focal_term(double p_raw, double s, double gamma) {
  const bool clamped = p_raw < kProbEps || p_raw > 1.0 - kProbEps;
  const double p = std::clamp(p_raw, kProbEps, 1.0 - kProbEps);
  const double bce = -(s * std::log(p) + (1.0 - s) * std::log(1.0 - p));
  const double diff = p - s;
  const double mag = std::abs(diff);
  const double mod = gamma == 0.0 ? 1.0 : std::pow(mag, gamma);
  if (clamped) return {mod * bce, 0.0};

  const double d_bce = -s / p + (1.0 - s) / (1.0 - p);
  double d_mod = 0.0;
  if (gamma != 0.0 && mag > 0.0) {
    d_mod = gamma * std::pow(mag, gamma - 1.0) * (diff > 0.0 ? 1.0 : -1.0);
  }
  return {mod * bce, d_mod * bce + mod * d_bce};
}

}  // namespace

FocalLossGrad united_focal_loss(std::span<const double> cls_logits, double iou_logit,
                                const ClassTarget& target, double gamma) {
  if (target.values.size() != cls_logits.size()) {
    throw ConfigError("united_focal_loss: target has wrong number of classes");
  }
  FocalLossGrad out;
  out.grad_cls_logits.assign(cls_logits.size(), 0.0);
  const double q = sigmoid(iou_logit);
  const double dq = q * (1.0 - q);
  for (std::size_t c = 0; c < cls_logits.size(); ++c) {
    const double s = sigmoid(cls_logits[c]);
    const TermGrad term = quality_focal_term(s * q, target.values[c], gamma);
    out.loss += term.loss;
    out.grad_cls_logits[c] = term.d_prob * s * (1.0 - s) * q;
    out.grad_iou_logit += term.d_prob * s * dq;
  }
  return out;
}

FocalLossGrad class_focal_loss(std::span<const double> cls_logits, const ClassTarget& target,
                               double gamma) {
  if (target.values.size() != cls_logits.size()) {
    throw ConfigError("class_focal_loss: target has wrong number of classes");
  }
  FocalLossGrad out;
  out.grad_cls_logits.assign(cls_logits.size(), 0.0);
  for (std::size_t c = 0; c < cls_logits.size(); ++c) {
    const double s = sigmoid(cls_logits[c]);
    const TermGrad term = quality_focal_term(s, target.values[c], gamma);
    out.loss += term.loss;
    out.grad_cls_logits[c] = term.d_prob * s * (1.0 - s);
  }
  return out;
}

BceLossGrad iou_branch_loss(double pred_iou, double target_iou) {
  const double p = std::clamp(pred_iou, kProbEps, 1.0 - kProbEps);
  return {-(target_iou * std::log(p) + (1.0 - target_iou) * std::log(1.0 - p)),
          pred_iou - target_iou};
}

}  // namespace arsl
