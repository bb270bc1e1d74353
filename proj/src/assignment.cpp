// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "arsl/assignment.hpp"

#include <algorithm>
#include <cmath>

#include "arsl/errors.hpp"

namespace arsl {

void TsaConfig::validate() const {
  if (!(tau_neg >= 0.0 && tau_neg < 1.0)) throw ConfigError("tsa: tau_neg must be in [0, 1)");
  if (!(iou_match_threshold > 0.0 && iou_match_threshold < 1.0)) {
    throw ConfigError("tsa: iou_match_threshold must be in (0, 1)");
  }
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw ConfigError("tsa: sigma must be in [0, 1]");
}

double ScoreMap::max_score(int loc) const {
  const auto s = scores(loc);
  return *std::max_element(s.begin(), s.end());
}

int ScoreMap::argmax(int loc) const {
  const auto s = scores(loc);
  return static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
}

std::vector<double> ScoreMap::max_scores() const {
  std::vector<double> out(static_cast<std::size_t>(size()));
  for (int loc = 0; loc < size(); ++loc) out[static_cast<std::size_t>(loc)] = max_score(loc);
  return out;
}

ScoreMap score_map(const DenseMap& map) {
  ScoreMap out;
  out.grid = map.grid;
  out.num_classes = map.num_classes;
  out.joint.resize(map.cls_logits.size());
  out.boxes.resize(static_cast<std::size_t>(map.size()));
  for (int loc = 0; loc < map.size(); ++loc) {
    const double q = sigmoid(map.iou_logits[static_cast<std::size_t>(loc)]);
    const auto cls = map.cls(loc);
    for (int c = 0; c < map.num_classes; ++c) {
      out.joint[static_cast<std::size_t>(loc) * map.num_classes + c] =
          sigmoid(cls[static_cast<std::size_t>(c)]) * q;
    }
    out.boxes[static_cast<std::size_t>(loc)] = map.box(loc);
  }
  return out;
}

bool LocationAssignment::assigned_positive() const {
  return cls_active && cls_target.has_value() && cls_target->channel() >= 0;
}

AssignmentResult::Counts AssignmentResult::counts() const {
  Counts c;
  for (const LocationAssignment& a : locations) {
    switch (a.verdict) {
      case Verdict::Negative: ++c.negative; break;
      case Verdict::Candidate: ++c.candidate; break;
      case Verdict::Positive: ++c.positive; break;
    }
    c.cls_active += a.cls_active ? 1 : 0;
    c.loc_active += a.loc_active ? 1 : 0;
  }
  return c;
}

double dynamic_positive_threshold(std::span<const double> maxes) {
  if (maxes.empty()) return std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(maxes.size());
  double mean = 0.0;
  for (double v : maxes) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : maxes) var += (v - mean) * (v - mean);
  return mean + std::sqrt(var / n);
}

std::vector<Verdict> tsa_partition(std::span<const double> maxes, double tau_neg, double tau_pos) {
  std::vector<Verdict> out(maxes.size());
  for (std::size_t k = 0; k < maxes.size(); ++k) {
    if (maxes[k] < tau_neg) {
      out[k] = Verdict::Negative;
    } else if (maxes[k] > tau_pos) {
      out[k] = Verdict::Positive;
    } else {
      out[k] = Verdict::Candidate;
    }
  }
  return out;
}

std::vector<ClassTarget> mine_classification(std::span<const int> candidates, const ScoreMap& teacher) {
  std::vector<ClassTarget> out;
  out.reserve(candidates.size());
  for (int loc : candidates) out.push_back(unlabeled_target(teacher.scores(loc)));
  return out;
}

Box weighted_box(std::span<const Box> boxes, std::span<const double> weights) {
  if (boxes.empty() || boxes.size() != weights.size()) {
    throw ConfigError("weighted_box: need matching, non-empty boxes and weights");
  }
  double wsum = 0.0;
  Box acc{0.0, 0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    const double w = weights[k];
    acc.x1 += w * boxes[k].x1;
    acc.y1 += w * boxes[k].y1;
    acc.x2 += w * boxes[k].x2;
    acc.y2 += w * boxes[k].y2;
    wsum += w;
  }
  if (!(wsum > 0.0)) throw ConfigError("weighted_box: weights must sum to a positive value");
  return {acc.x1 / wsum, acc.y1 / wsum, acc.x2 / wsum, acc.y2 / wsum};
}

std::vector<LocalizationMatch> mine_localization(std::span<const int> candidates,
                                                 std::span<const int> positives,
                                                 const ScoreMap& teacher,
                                                 double iou_match_threshold) {
  std::vector<LocalizationMatch> out(candidates.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const int cand = candidates[k];
    const int cls = teacher.argmax(cand);
    const Box& cbox = teacher.boxes[static_cast<std::size_t>(cand)];
    const GridLocation cloc = teacher.grid.at(cand);
    std::vector<Box> boxes;
    std::vector<double> weights;
    for (int pos : positives) {
      const Box& pbox = teacher.boxes[static_cast<std::size_t>(pos)];
      if (teacher.argmax(pos) != cls) continue;
      if (!(iou(cbox, pbox) > iou_match_threshold)) continue;
      if (!center_inside(cloc, pbox)) continue;
      out[k].matched.push_back(pos);
      boxes.push_back(pbox);
      weights.push_back(teacher.max_score(pos));
    }
    if (!boxes.empty()) out[k].target = weighted_box(boxes, weights);
  }
  return out;
}

AssignmentResult assign_tsa(const ScoreMap& teacher, const TsaConfig& config) {
  config.validate();
  AssignmentResult result;
  result.grid = teacher.grid;
  result.num_classes = teacher.num_classes;
  const int n = teacher.size();
  result.locations.resize(static_cast<std::size_t>(n));

  const std::vector<double> maxes = teacher.max_scores();
  std::vector<double> pooled;
  for (double m : maxes) {
    if (m >= config.tau_neg) pooled.push_back(m);
  }
  result.tau_pos = dynamic_positive_threshold(pooled);
  const std::vector<Verdict> verdicts = tsa_partition(maxes, config.tau_neg, result.tau_pos);

  std::vector<int> candidates;
  std::vector<int> positives;
  for (int loc = 0; loc < n; ++loc) {
    LocationAssignment& a = result.locations[static_cast<std::size_t>(loc)];
    a.verdict = verdicts[static_cast<std::size_t>(loc)];
    switch (a.verdict) {
      case Verdict::Negative:
        a.cls_target = ClassTarget::negative(teacher.num_classes);
        a.cls_active = true;
        break;
      case Verdict::Positive:
        a.cls_target = unlabeled_target(teacher.scores(loc));
        a.cls_active = true;
        a.loc_target = teacher.boxes[static_cast<std::size_t>(loc)];
        a.loc_active = true;
        positives.push_back(loc);
        break;
      case Verdict::Candidate:
        candidates.push_back(loc);
        break;
    }
  }
  if (!config.mining) return result;

  const std::vector<ClassTarget> cls_targets = mine_classification(candidates, teacher);
  const std::vector<LocalizationMatch> matches =
      mine_localization(candidates, positives, teacher, config.iou_match_threshold);
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    LocationAssignment& a = result.locations[static_cast<std::size_t>(candidates[k])];
    a.cls_target = cls_targets[k];
    a.cls_active = true;
    if (matches[k].target) {
      a.loc_target = matches[k].target;
      a.loc_active = true;
    }
  }
  return result;
}

AssignmentResult assign_boxes(std::span<const GtObject> boxes, const Grid& grid, int num_classes,
                              HeadMode head) {
  AssignmentResult result;
  result.grid = grid;
  result.num_classes = num_classes;
  result.locations.resize(static_cast<std::size_t>(grid.size()));
  for (int loc = 0; loc < grid.size(); ++loc) {
    const GridLocation gl = grid.at(loc);
    int best = -1;
    double best_area = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < boxes.size(); ++k) {
      if (center_inside(gl, boxes[k].box) && boxes[k].box.area() < best_area) {
        best = static_cast<int>(k);
        best_area = boxes[k].box.area();
      }
    }
    LocationAssignment& a = result.locations[static_cast<std::size_t>(loc)];
    a.cls_active = true;
    if (best < 0) {
      a.verdict = Verdict::Negative;
      a.cls_target = ClassTarget::negative(num_classes);
      continue;
    }
    const GtObject& o = boxes[static_cast<std::size_t>(best)];
    a.verdict = Verdict::Positive;
    // LabeledIoU carries a placeholder 1.0 until materialize_targets.
    a.cls_target = ClassTarget::on_channel(
        num_classes, o.cls, 1.0, head == HeadMode::Jce ? TargetSource::LabeledIoU : TargetSource::OneHot);
    a.loc_target = o.box;
    a.loc_active = true;
  }
  return result;
}

std::vector<Detection> pseudo_boxes(const ScoreMap& teacher, double sigma, double nms_threshold) {
  std::vector<Detection> dets;
  for (int loc = 0; loc < teacher.size(); ++loc) {
    const double score = teacher.max_score(loc);
    if (score > sigma) {
      dets.push_back({teacher.boxes[static_cast<std::size_t>(loc)], teacher.argmax(loc), score});
    }
  }
  return nms(dets, nms_threshold);
}

AssignmentResult assign_box_baseline(std::span<const Detection> pseudo, const Grid& grid,
                                     int num_classes, HeadMode head) {
  std::vector<GtObject> boxes;
  boxes.reserve(pseudo.size());
  for (const Detection& d : pseudo) boxes.push_back({d.box, d.cls});
  return assign_boxes(boxes, grid, num_classes, head);
}

double centerness(const GridLocation& loc, const Box& box) {
  if (!center_inside(loc, box)) return 0.0;
  const Ltrb d = encode_ltrb(loc, box);
  const double lr = std::min(d.l, d.r) / std::max(d.l, d.r);
  const double tb = std::min(d.t, d.b) / std::max(d.t, d.b);
  return std::sqrt(lr * tb);
}

void materialize_targets(AssignmentResult& result, const DenseMap& student, HeadMode head) {
  if (student.size() != result.grid.size()) {
    throw ConfigError("materialize_targets: student grid does not match the assignment grid");
  }
  for (int loc = 0; loc < student.size(); ++loc) {
    LocationAssignment& a = result.locations[static_cast<std::size_t>(loc)];
    if (!a.loc_active) continue;
    const Box pred = student.box(loc);
    const double quality = head == HeadMode::Jce ? iou(pred, *a.loc_target)
                                                 : centerness(student.grid.at(loc), *a.loc_target);
    a.iou_target = quality;
    if (a.cls_target && a.cls_target->source == TargetSource::LabeledIoU) {
      const int ch = a.cls_target->channel();
      if (ch >= 0) a.cls_target->values[static_cast<std::size_t>(ch)] = iou(pred, *a.loc_target);
    }
  }
}

}  // namespace arsl
