// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "arsl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "arsl/assignment.hpp"

namespace arsl {

ApResult average_precision(const std::vector<ImageDetection>& dets, const std::vector<ImageGt>& gts,
                           double iou_threshold, int num_classes) {
  ApResult result;
  result.per_class.resize(static_cast<std::size_t>(num_classes));
  double sum = 0.0;
  int counted = 0;
  for (int cls = 0; cls < num_classes; ++cls) {
    // Ground truth of this class grouped by image.
    std::map<int, std::vector<std::size_t>> gt_by_image;
    int num_gt = 0;
    for (std::size_t k = 0; k < gts.size(); ++k) {
      if (gts[k].object.cls == cls) {
        gt_by_image[gts[k].image].push_back(k);
        ++num_gt;
      }
    }
    if (num_gt == 0) continue;

    std::vector<std::size_t> order;
    for (std::size_t k = 0; k < dets.size(); ++k) {
      if (dets[k].det.cls == cls) order.push_back(k);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return dets[a].det.score > dets[b].det.score;
    });

    std::vector<bool> used(gts.size(), false);
    std::vector<double> precision;
    std::vector<double> recall;
    int tp = 0;
    int fp = 0;
    for (std::size_t k : order) {
      const ImageDetection& d = dets[k];
      double best = iou_threshold;
      std::ptrdiff_t match = -1;
      if (auto it = gt_by_image.find(d.image); it != gt_by_image.end()) {
        for (std::size_t g : it->second) {
          if (used[g]) continue;
          const double v = iou(d.det.box, gts[g].object.box);
          if (v >= best) {
            if (match < 0 || v > best) {
              best = v;
              match = static_cast<std::ptrdiff_t>(g);
            }
          }
        }
      }
      if (match >= 0) {
        used[static_cast<std::size_t>(match)] = true;
        ++tp;
      } else {
        ++fp;
      }
      precision.push_back(static_cast<double>(tp) / (tp + fp));
      recall.push_back(static_cast<double>(tp) / num_gt);
    }
    for (std::size_t k = precision.size(); k-- > 1;) {
      precision[k - 1] = std::max(precision[k - 1], precision[k]);
    }
    double ap = 0.0;
    for (int r = 0; r <= 100; ++r) {
      const double level = r / 100.0;
      const auto it = std::lower_bound(recall.begin(), recall.end(), level - 1e-12);
      if (it != recall.end()) ap += precision[static_cast<std::size_t>(it - recall.begin())];
    }
    ap /= 101.0;
    result.per_class[static_cast<std::size_t>(cls)] = ap;
    sum += ap;
    ++counted;
  }
  result.mean = counted > 0 ? sum / counted : 0.0;
  return result;
}

EvalReport evaluate_detections(const std::vector<ImageDetection>& dets, const std::vector<ImageGt>& gts,
                               int num_classes, int images) {
  EvalReport report;
  report.images = images;
  report.detections = static_cast<int>(dets.size());
  const ApResult ap50 = average_precision(dets, gts, 0.5, num_classes);
  report.ap50 = ap50.mean;
  report.per_class_ap50 = ap50.per_class;
  report.per_class_ap50_95.assign(static_cast<std::size_t>(num_classes), std::nullopt);
  double total = 0.0;
  constexpr int kSteps = 10;
  for (int t = 0; t < kSteps; ++t) {
    const ApResult r = average_precision(dets, gts, 0.5 + 0.05 * t, num_classes);
    total += r.mean;
    for (int c = 0; c < num_classes; ++c) {
      const auto& v = r.per_class[static_cast<std::size_t>(c)];
      if (!v) continue;
      auto& acc = report.per_class_ap50_95[static_cast<std::size_t>(c)];
      acc = acc.value_or(0.0) + *v / kSteps;
    }
  }
  report.ap50_95 = total / kSteps;
  return report;
}

std::vector<Detection> predict(const ModelParams& params, const Image& image, double score_threshold,
                               double nms_threshold, int max_dets) {
  const ScoreMap scores = score_map(forward(params, image));
  std::vector<Detection> dets = pseudo_boxes(scores, score_threshold, nms_threshold);
  if (static_cast<int>(dets.size()) > max_dets) dets.resize(static_cast<std::size_t>(max_dets));
  return dets;
}

EvalReport evaluate(const ModelParams& params, const std::vector<Sample>& dataset, double score_threshold,
                    double nms_threshold) {
  std::vector<ImageDetection> dets;
  std::vector<ImageGt> gts;
  for (std::size_t k = 0; k < dataset.size(); ++k) {
    const int id = static_cast<int>(k);
    for (const Detection& d : predict(params, dataset[k].image, score_threshold, nms_threshold)) {
      dets.push_back({id, d});
    }
    for (const GtObject& o : dataset[k].gt) gts.push_back({id, o});
  }
  return evaluate_detections(dets, gts, params.config.num_classes, static_cast<int>(dataset.size()));
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["images"] = images;
  j["detections"] = detections;
  j["ap50"] = ap50;
  j["ap50_95"] = ap50_95;
  auto per_class = [](const std::vector<std::optional<double>>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& x : v) arr.push_back(x ? nlohmann::json(*x) : nlohmann::json(nullptr));
    return arr;
  };
  j["per_class_ap50"] = per_class(per_class_ap50);
  j["per_class_ap50_95"] = per_class(per_class_ap50_95);
  return j.dump(2);
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "images %d  detections %d\n", images, detections);
  out << line;
  out << "class    AP50     AP50:95\n";
  for (std::size_t c = 0; c < per_class_ap50.size(); ++c) {
    if (per_class_ap50[c]) {
      std::snprintf(line, sizeof line, "%-8zu %-8.4f %-8.4f\n", c, *per_class_ap50[c],
                    per_class_ap50_95[c].value_or(0.0));
    } else {
      std::snprintf(line, sizeof line, "%-8zu %-8s %-8s\n", c, "-", "-");
    }
    out << line;
  }
  std::snprintf(line, sizeof line, "%-8s %-8.4f %-8.4f\n", "mean", ap50, ap50_95);
  out << line;
  return out.str();
}

}  // namespace arsl
