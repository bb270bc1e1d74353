// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "arsl/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "arsl/errors.hpp"
#include "arsl/eval.hpp"

namespace arsl {

double pearson_cc(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw UndefinedError("pearson_cc: inputs differ in length");
  if (x.size() < 2) throw UndefinedError("pearson_cc: need at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = x[k] - mx;
    const double dy = y[k] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedError("pearson_cc: constant input, correlation undefined");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double localization_quality(const Detection& det, std::span<const GtObject> gt) {
  double best = 0.0;
  for (const GtObject& o : gt) {
    if (o.cls == det.cls) best = std::max(best, iou(det.box, o.box));
  }
  return best;
}

SelectionReport selection_report(const std::vector<std::vector<Detection>>& dets,
                                 const std::vector<std::vector<GtObject>>& gt, int k) {
  if (dets.size() != gt.size()) throw ConfigError("selection_report: one GT list per image required");
  SelectionReport report;
  report.k = k;
  std::vector<double> scores;
  std::vector<double> quality;
  double topk_sum = 0.0;
  int topk_images = 0;
  for (std::size_t img = 0; img < dets.size(); ++img) {
    std::vector<std::size_t> order(dets[img].size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return dets[img][a].score > dets[img][b].score;
    });
    double img_sum = 0.0;
    int taken = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      const Detection& d = dets[img][order[rank]];
      const double q = localization_quality(d, gt[img]);
      scores.push_back(d.score);
      quality.push_back(q);
      if (static_cast<int>(rank) < k) {
        img_sum += q;
        ++taken;
      }
    }
    if (taken > 0) {
      topk_sum += img_sum / taken;
      ++topk_images;
    }
  }
  if (scores.empty()) throw UndefinedError("selection_report: no detections to report on");
  report.detections = static_cast<int>(scores.size());
  report.mean_iou = std::accumulate(quality.begin(), quality.end(), 0.0) / static_cast<double>(quality.size());
  report.topk_iou = topk_sum / topk_images;
  report.pcc = pearson_cc(scores, quality);
  return report;
}

SelectionReport selection_report(const ModelParams& params, const std::vector<Sample>& dataset, int k,
                                 double score_threshold, double nms_threshold) {
  std::vector<std::vector<Detection>> dets;
  std::vector<std::vector<GtObject>> gt;
  for (const Sample& s : dataset) {
    dets.push_back(predict(params, s.image, score_threshold, nms_threshold));
    gt.push_back(s.gt);
  }
  bool any_gt = std::any_of(gt.begin(), gt.end(), [](const auto& g) { return !g.empty(); });
  if (!any_gt) throw UndefinedError("selection_report: dataset carries no ground truth");
  return selection_report(dets, gt, k);
}

AmbiguityCounts& AmbiguityCounts::operator+=(const AmbiguityCounts& o) {
  true_positives += o.true_positives;
  false_positives += o.false_positives;
  false_negatives += o.false_negatives;
  oracle_positives += o.oracle_positives;
  return *this;
}

AmbiguityCounts assignment_ambiguity_report(const AssignmentResult& assigned, std::span<const GtObject> gt) {
  const AssignmentResult oracle = assign_boxes(gt, assigned.grid, assigned.num_classes, HeadMode::Jce);
  AmbiguityCounts counts;
  for (std::size_t loc = 0; loc < assigned.locations.size(); ++loc) {
    const LocationAssignment& o = oracle.locations[loc];
    const LocationAssignment& a = assigned.locations[loc];
    const bool oracle_pos = o.verdict == Verdict::Positive;
    const int oracle_cls = oracle_pos ? o.cls_target->channel() : -1;
    const bool assigned_pos = a.assigned_positive();
    const bool class_match = assigned_pos && oracle_pos && a.cls_target->channel() == oracle_cls;
    if (oracle_pos) ++counts.oracle_positives;
    if (class_match) {
      ++counts.true_positives;
    } else {
      if (assigned_pos) ++counts.false_positives;
      if (oracle_pos) ++counts.false_negatives;
    }
  }
  return counts;
}

int ConfidenceHistogram::bin_of(double score) {
  const int b = static_cast<int>(std::floor(score * kBins));
  return std::clamp(b, 0, kBins - 1);
}

double ConfidenceHistogram::positive_fraction(int bin) const {
  const long total = positives[static_cast<std::size_t>(bin)] + negatives[static_cast<std::size_t>(bin)];
  return total == 0 ? 0.0 : static_cast<double>(positives[static_cast<std::size_t>(bin)]) / total;
}

double ConfidenceHistogram::negative_fraction(int bin) const {
  const long total = positives[static_cast<std::size_t>(bin)] + negatives[static_cast<std::size_t>(bin)];
  return total == 0 ? 0.0 : static_cast<double>(negatives[static_cast<std::size_t>(bin)]) / total;
}

ConfidenceHistogram confidence_histogram(std::span<const ScoreMap> teacher,
                                         const std::vector<std::vector<GtObject>>& gt) {
  if (teacher.size() != gt.size()) throw ConfigError("confidence_histogram: one GT list per map required");
  ConfidenceHistogram h;
  for (std::size_t img = 0; img < teacher.size(); ++img) {
    const AssignmentResult oracle = assign_boxes(gt[img], teacher[img].grid, teacher[img].num_classes, HeadMode::Jce);
    for (int loc = 0; loc < teacher[img].size(); ++loc) {
      const int b = ConfidenceHistogram::bin_of(teacher[img].max_score(loc));
      if (oracle.locations[static_cast<std::size_t>(loc)].verdict == Verdict::Positive) {
        ++h.positives[static_cast<std::size_t>(b)];
      } else {
        ++h.negatives[static_cast<std::size_t>(b)];
      }
    }
  }
  return h;
}

std::vector<SweepPoint> threshold_sweep(std::span<const ScoreMap> teacher,
                                        const std::vector<std::vector<GtObject>>& gt,
                                        std::span<const double> sigmas, double nms_threshold) {
  if (teacher.size() != gt.size()) throw ConfigError("threshold_sweep: one GT list per map required");
  std::vector<SweepPoint> out;
  for (double sigma : sigmas) {
    SweepPoint p{sigma, {}};
    for (std::size_t img = 0; img < teacher.size(); ++img) {
      const auto boxes = pseudo_boxes(teacher[img], sigma, nms_threshold);
      const AssignmentResult a =
          assign_box_baseline(boxes, teacher[img].grid, teacher[img].num_classes, HeadMode::Jce);
      p.counts += assignment_ambiguity_report(a, gt[img]);
    }
    out.push_back(p);
  }
  return out;
}

AmbiguityCounts tsa_ambiguity(std::span<const ScoreMap> teacher, const std::vector<std::vector<GtObject>>& gt,
                              const TsaConfig& config) {
  if (teacher.size() != gt.size()) throw ConfigError("tsa_ambiguity: one GT list per map required");
  AmbiguityCounts counts;
  for (std::size_t img = 0; img < teacher.size(); ++img) {
    counts += assignment_ambiguity_report(assign_tsa(teacher[img], config), gt[img]);
  }
  return counts;
}

DiagnosticsReport diagnose(const ModelParams& params, const std::vector<Sample>& dataset,
                           const TsaConfig& config, double score_threshold, double nms_threshold,
                           std::span<const double> sigmas) {
  DiagnosticsReport report;
  try {
    report.selection = selection_report(params, dataset, 5, score_threshold, nms_threshold);
  } catch (const UndefinedError& e) {
    report.selection_defined = false;
    report.selection_error = e.what();
  }
  std::vector<ScoreMap> maps;
  std::vector<std::vector<GtObject>> gt;
  for (const Sample& s : dataset) {
    maps.push_back(score_map(forward(params, s.image)));
    gt.push_back(s.gt);
  }
  const double baseline_sigma[] = {config.sigma};
  report.box_baseline = threshold_sweep(maps, gt, baseline_sigma, nms_threshold).front().counts;
  TsaConfig off = config;
  off.mining = false;
  TsaConfig on = config;
  on.mining = true;
  report.tsa_without_mining = tsa_ambiguity(maps, gt, off);
  report.tsa_with_mining = tsa_ambiguity(maps, gt, on);
  report.histogram = confidence_histogram(maps, gt);
  report.sweep = threshold_sweep(maps, gt, sigmas, nms_threshold);
  return report;
}

namespace {

nlohmann::ordered_json counts_json(const AmbiguityCounts& c) {
  nlohmann::ordered_json j;
  j["true_positives"] = c.true_positives;
  j["false_positives"] = c.false_positives;
  j["false_negatives"] = c.false_negatives;
  j["oracle_positives"] = c.oracle_positives;
  return j;
}

}  // namespace

std::string DiagnosticsReport::to_json() const {
  nlohmann::ordered_json j;
  if (selection_defined) {
    j["selection"] = {{"mean_iou", selection.mean_iou},
                      {"topk_iou", selection.topk_iou},
                      {"k", selection.k},
                      {"pcc", selection.pcc},
                      {"detections", selection.detections}};
  } else {
    j["selection"] = {{"error", selection_error}};
  }
  j["assignment"]["box_baseline"] = counts_json(box_baseline);
  j["assignment"]["tsa_without_mining"] = counts_json(tsa_without_mining);
  j["assignment"]["tsa_with_mining"] = counts_json(tsa_with_mining);
  nlohmann::ordered_json bins = nlohmann::json::array();
  for (int b = 0; b < ConfidenceHistogram::kBins; ++b) {
    bins.push_back({{"lo", b / 10.0},
                    {"hi", (b + 1) / 10.0},
                    {"positives", histogram.positives[static_cast<std::size_t>(b)]},
                    {"negatives", histogram.negatives[static_cast<std::size_t>(b)]},
                    {"positive_fraction", histogram.positive_fraction(b)},
                    {"negative_fraction", histogram.negative_fraction(b)}});
  }
  j["confidence_histogram"] = bins;
  nlohmann::ordered_json sweep_json = nlohmann::json::array();
  for (const SweepPoint& p : sweep) {
    auto entry = counts_json(p.counts);
    entry["sigma"] = p.sigma;
    sweep_json.push_back(entry);
  }
  j["threshold_sweep"] = sweep_json;
  return j.dump(2);
}

std::string DiagnosticsReport::to_table() const {
  std::ostringstream out;
  char line[160];
  out << "selection\n";
  if (selection_defined) {
    std::snprintf(line, sizeof line, "  mean IoU %.4f  top-%d IoU %.4f  PCC %.4f  (%d detections)\n",
                  selection.mean_iou, selection.k, selection.topk_iou, selection.pcc, selection.detections);
    out << line;
  } else {
    out << "  undefined: " << selection_error << '\n';
  }
  out << "assignment          TP        FP        FN\n";
  auto row = [&](const char* name, const AmbiguityCounts& c) {
    std::snprintf(line, sizeof line, "  %-16s %-9ld %-9ld %-9ld\n", name, c.true_positives, c.false_positives,
                  c.false_negatives);
    out << line;
  };
  row("box", box_baseline);
  row("tsa w/o mining", tsa_without_mining);
  row("tsa w/ mining", tsa_with_mining);
  out << "joint confidence   pos%     neg%\n";
  for (int b = 0; b < ConfidenceHistogram::kBins; ++b) {
    std::snprintf(line, sizeof line, "  [%.1f, %.1f)       %-8.3f %-8.3f\n", b / 10.0, (b + 1) / 10.0,
                  histogram.positive_fraction(b), histogram.negative_fraction(b));
    out << line;
  }
  out << "sigma sweep  TP        FP        FN\n";
  for (const SweepPoint& p : sweep) {
    std::snprintf(line, sizeof line, "  %-9.2f %-9ld %-9ld %-9ld\n", p.sigma, p.counts.true_positives,
                  p.counts.false_positives, p.counts.false_negatives);
    out << line;
  }
  return out.str();
}

std::string DiagnosticsReport::plot_data() const {
  std::ostringstream out;
  out << "# series\tx\ty\n";
  for (const SweepPoint& p : sweep) {
    out << "sweep_tp\t" << p.sigma << '\t' << p.counts.true_positives << '\n';
    out << "sweep_fp\t" << p.sigma << '\t' << p.counts.false_positives << '\n';
    out << "sweep_fn\t" << p.sigma << '\t' << p.counts.false_negatives << '\n';
  }
  for (int b = 0; b < ConfidenceHistogram::kBins; ++b) {
    const double mid = (b + 0.5) / 10.0;
    out << "hist_pos_fraction\t" << mid << '\t' << histogram.positive_fraction(b) << '\n';
    out << "hist_neg_fraction\t" << mid << '\t' << histogram.negative_fraction(b) << '\n';
  }
  return out.str();
}

}  // namespace arsl
