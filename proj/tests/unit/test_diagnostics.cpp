// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <json.hpp>

#include "arsl/diagnostics.hpp"
#include "arsl/errors.hpp"
#include "arsl/rng.hpp"
#include "oracles.hpp"

using namespace arsl;

namespace {

/// Teacher map that scores each location by its distance to the nearest
/// object center and predicts that object's box, with random clutter.
ScoreMap synthetic_teacher(Rng& rng, const std::vector<GtObject>& gt, int nc) {
  ScoreMap m;
  m.grid = {8, 8, 8.0};
  m.num_classes = nc;
  for (int loc = 0; loc < 64; ++loc) {
    const GridLocation gl = m.grid.at(loc);
    std::vector<double> s(static_cast<std::size_t>(nc), rng.uniform(0.0, 0.15));
    Box b{gl.cx() - 4, gl.cy() - 4, gl.cx() + 4, gl.cy() + 4};
    for (const GtObject& o : gt) {
      if (!center_inside(gl, o.box)) continue;
      const double cx = (o.box.x1 + o.box.x2) / 2, cy = (o.box.y1 + o.box.y2) / 2;
      const double d = std::hypot(gl.cx() - cx, gl.cy() - cy) / std::max(o.box.width(), o.box.height());
      s[static_cast<std::size_t>(o.cls)] = std::max(s[static_cast<std::size_t>(o.cls)],
                                                    std::clamp(0.95 - d + rng.uniform(-0.2, 0.2), 0.0, 1.0));
      const double j = rng.uniform(-2, 2);
      b = {o.box.x1 + j, o.box.y1 - j, o.box.x2 + j, o.box.y2 + j};
    }
    m.joint.insert(m.joint.end(), s.begin(), s.end());
    m.boxes.push_back(b);
  }
  return m;
}

std::vector<GtObject> random_gt(Rng& rng) {
  std::vector<GtObject> gt;
  for (int k = rng.uniform_int(1, 3); k > 0; --k) {
    const double x = rng.uniform(0, 40), y = rng.uniform(0, 40), s = rng.uniform(10, 24);
    gt.push_back({{x, y, x + s, y + s}, rng.uniform_int(0, 2)});
  }
  return gt;
}

}  // namespace

TEST_CASE("pearson correlation") {
  const std::vector<double> x{1, 2, 3, 4};
  CHECK(pearson_cc(x, std::vector<double>{2, 4, 6, 8}) == doctest::Approx(1.0));
  CHECK(pearson_cc(x, std::vector<double>{4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(pearson_cc(x, std::vector<double>{1, 1, 1, 1}), UndefinedError);
  CHECK_THROWS_AS(pearson_cc(std::vector<double>{1}, std::vector<double>{2}), UndefinedError);
  CHECK_THROWS_AS(pearson_cc(x, std::vector<double>{1, 2}), UndefinedError);

  Rng rng(51);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a, b;
    for (int k = 0; k < 20; ++k) {
      a.push_back(rng.normal());
      b.push_back(0.5 * a.back() + rng.normal());
    }
    const double r = pearson_cc(a, b);
    CHECK(r == doctest::Approx(oracle::pcc(a, b)).epsilon(1e-12));
    const double scale = rng.uniform(0.1, 10.0), shift = rng.uniform(-5, 5);
    std::vector<double> affine, negated;
    for (double v : a) {
      affine.push_back(scale * v + shift);
      negated.push_back(-v);
    }
    CHECK(pearson_cc(affine, b) == doctest::Approx(r).epsilon(1e-9));
    CHECK(pearson_cc(negated, b) == doctest::Approx(-r).epsilon(1e-9));
    CHECK(pearson_cc(b, a) == doctest::Approx(r).epsilon(1e-12));
  }
}

TEST_CASE("selection report") {
  const std::vector<std::vector<GtObject>> gt{{{{0, 0, 10, 10}, 0}}};
  const std::vector<std::vector<Detection>> dets{
      {{{0, 0, 10, 10}, 0, 0.9}, {{0, 0, 10, 5}, 0, 0.6}, {{0, 0, 10, 10}, 1, 0.3}}};
  const SelectionReport r = selection_report(dets, gt, 5);
  CHECK(r.detections == 3);
  CHECK(r.mean_iou == doctest::Approx(0.5));
  CHECK(r.topk_iou == doctest::Approx(0.5));
  CHECK(r.pcc == doctest::Approx(oracle::pcc({0.9, 0.6, 0.3}, {1.0, 0.5, 0.0})));
  CHECK(selection_report(dets, gt, 1).topk_iou == doctest::Approx(1.0));
  CHECK(localization_quality({{0, 0, 10, 5}, 0, 0.1}, gt[0]) == doctest::Approx(0.5));
  CHECK(localization_quality({{0, 0, 10, 5}, 2, 0.1}, gt[0]) == 0.0);
  CHECK_THROWS_AS(selection_report({{}}, gt, 5), UndefinedError);
  CHECK_THROWS_AS(selection_report(std::vector<std::vector<Detection>>{{{{0, 0, 10, 10}, 0, 0.9}}}, gt, 5),
                  UndefinedError);
}

TEST_CASE("assignment ambiguity") {
  const Grid grid{8, 8, 8.0};
  const std::vector<GtObject> gt{{{2, 2, 30, 30}, 0}, {{36, 36, 60, 60}, 2}};
  const AssignmentResult oracle = assign_boxes(gt, grid, 3, HeadMode::Jce);
  const int positives = oracle.counts().positive;
  REQUIRE(positives > 0);

  SUBCASE("the oracle assigner is exact") {
    const AmbiguityCounts c = assignment_ambiguity_report(oracle, gt);
    CHECK(c.true_positives == positives);
    CHECK(c.false_positives == 0);
    CHECK(c.false_negatives == 0);
    CHECK(c.oracle_positives == positives);
  }
  SUBCASE("an all-negative assigner misses everything") {
    const AmbiguityCounts c = assignment_ambiguity_report(assign_boxes({}, grid, 3, HeadMode::Jce), gt);
    CHECK(c.true_positives == 0);
    CHECK(c.false_positives == 0);
    CHECK(c.false_negatives == positives);
  }
  SUBCASE("a missed object shows up as false negatives") {
    const std::vector<GtObject> first{gt[0]};
    const AmbiguityCounts c = assignment_ambiguity_report(assign_boxes(first, grid, 3, HeadMode::Jce), gt);
    const int missed = assign_boxes(std::vector<GtObject>{gt[1]}, grid, 3, HeadMode::Jce).counts().positive;
    CHECK(c.false_negatives == missed);
    CHECK(c.false_positives == 0);
  }
  SUBCASE("a wrong class is both a false positive and a false negative") {
    std::vector<GtObject> wrong = gt;
    wrong[0].cls = 1;
    const AmbiguityCounts c = assignment_ambiguity_report(assign_boxes(wrong, grid, 3, HeadMode::Jce), gt);
    const int first = assign_boxes(std::vector<GtObject>{gt[0]}, grid, 3, HeadMode::Jce).counts().positive;
    CHECK(c.false_positives == first);
    CHECK(c.false_negatives == first);
    CHECK(c.true_positives == positives - first);
  }
  SUBCASE("counts add up for any assigner") {
    Rng rng(53);
    for (int trial = 0; trial < 100; ++trial) {
      const auto g = random_gt(rng);
      const ScoreMap m = synthetic_teacher(rng, g, 3);
      for (const AssignmentResult& a :
           {assign_tsa(m, TsaConfig{}), assign_box_baseline(pseudo_boxes(m, 0.5, 0.6), m.grid, 3, HeadMode::Jce)}) {
        const AmbiguityCounts c = assignment_ambiguity_report(a, g);
        CHECK(c.true_positives + c.false_negatives == c.oracle_positives);
        long assigned = 0;
        for (const auto& l : a.locations) assigned += l.assigned_positive() ? 1 : 0;
        CHECK(c.true_positives + c.false_positives == assigned);
      }
    }
  }
}

TEST_CASE("confidence histogram") {
  CHECK(ConfidenceHistogram::bin_of(0.0) == 0);
  CHECK(ConfidenceHistogram::bin_of(0.1) == 1);
  CHECK(ConfidenceHistogram::bin_of(0.95) == 9);
  CHECK(ConfidenceHistogram::bin_of(1.0) == 9);
  CHECK(ConfidenceHistogram::bin_of(-0.2) == 0);

  ScoreMap m;
  m.grid = {1, 2, 8.0};
  m.num_classes = 2;
  m.joint = {0.05, 0.93, 0.31, 0.02};
  m.boxes.assign(2, Box{0, 0, 8, 8});
  const std::vector<ScoreMap> maps{m};
  const std::vector<std::vector<GtObject>> gt{{{{0, 0, 8, 8}, 1}}};
  const ConfidenceHistogram h = confidence_histogram(maps, gt);
  CHECK(h.positives[9] == 1);
  CHECK(h.negatives[3] == 1);
  CHECK(h.positive_fraction(9) == 1.0);
  CHECK(h.negative_fraction(3) == 1.0);
  CHECK(h.positive_fraction(5) == 0.0);
}

TEST_CASE("threshold sweep") {
  Rng rng(57);
  std::vector<ScoreMap> maps;
  std::vector<std::vector<GtObject>> gt;
  for (int k = 0; k < 30; ++k) {
    gt.push_back(random_gt(rng));
    maps.push_back(synthetic_teacher(rng, gt.back(), 3));
  }
  std::vector<double> sigmas;
  for (int k = 0; k <= 10; ++k) sigmas.push_back(k / 10.0);
  const auto sweep = threshold_sweep(maps, gt, sigmas, 0.6);
  REQUIRE(sweep.size() == 11);
  for (std::size_t k = 1; k < sweep.size(); ++k) {
    const auto& a = sweep[k - 1].counts;
    const auto& b = sweep[k].counts;
    CHECK(b.true_positives + b.false_positives <= a.true_positives + a.false_positives);
  }
  CHECK(sweep.back().counts.true_positives == 0);
  CHECK(sweep.back().counts.false_positives == 0);
  CHECK(sweep.back().counts.false_negatives == sweep.back().counts.oracle_positives);
  CHECK(sweep.front().counts.true_positives > 0);
}

TEST_CASE("diagnose produces a consistent report") {
  const auto data = generate_dataset(6, 1.0, 3, SceneSpec{});
  const std::vector<double> sigmas{0.0, 0.5, 1.0};
  ModelParams p = init_params(3, 3);
  for (double& v : p.block("cls.bias")) v = 0.0;
  const DiagnosticsReport r = diagnose(p, data, TsaConfig{}, 0.05, 0.6, sigmas);
  CHECK(r.selection_defined);
  CHECK(r.sweep.size() == 3);
  CHECK(r.sweep[1].counts.true_positives == r.box_baseline.true_positives);
  CHECK(r.tsa_with_mining.oracle_positives == r.box_baseline.oracle_positives);
  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j.at("confidence_histogram").size() == 10);
  CHECK(j.at("threshold_sweep").size() == 3);
  CHECK(r.to_table().find("sigma sweep") != std::string::npos);
  CHECK(r.plot_data().rfind("# series\tx\ty\n", 0) == 0);

  const auto empty = generate_dataset(0, 1.0, 3, SceneSpec{});
  const DiagnosticsReport none = diagnose(p, empty, TsaConfig{}, 0.05, 0.6, sigmas);
  CHECK_FALSE(none.selection_defined);
  CHECK(nlohmann::json::parse(none.to_json()).at("selection").contains("error"));
}
