// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>

#include "arsl/assignment.hpp"
#include "arsl/rng.hpp"
#include "assign_oracles.hpp"

using namespace arsl;

using oracle::make_map;
using oracle::NaiveLoc;
using oracle::naive_tsa;
using oracle::random_map;

TEST_CASE("dynamic positive threshold") {
  CHECK(dynamic_positive_threshold(std::vector<double>{0.2, 0.4, 0.6}) == doctest::Approx(0.563299).epsilon(1e-6));
  CHECK(dynamic_positive_threshold(std::vector<double>{0.5}) == 0.5);
  CHECK(std::isinf(dynamic_positive_threshold(std::vector<double>{})));
}

TEST_CASE("tsa partition") {
  const auto v = tsa_partition(std::vector<double>{0.05, 0.3, 0.7}, 0.1, 0.563299);
  CHECK(v == std::vector<Verdict>{Verdict::Negative, Verdict::Candidate, Verdict::Positive});
  CHECK(tsa_partition(std::vector<double>{0.1}, 0.1, 0.5)[0] == Verdict::Candidate);
  CHECK(tsa_partition(std::vector<double>{0.5}, 0.1, 0.5)[0] == Verdict::Candidate);
}

TEST_CASE("partition counts are monotone in the thresholds") {
  Rng rng(4);
  for (int n = 0; n < 200; ++n) {
    std::vector<double> v(30);
    for (double& x : v) x = rng.uniform();
    const double tn = rng.uniform(0, 0.5), tp = rng.uniform(0.5, 1.0);
    auto count = [](const std::vector<Verdict>& vs, Verdict k) { return std::count(vs.begin(), vs.end(), k); };
    const auto base = tsa_partition(v, tn, tp);
    CHECK(count(tsa_partition(v, tn, tp + 0.1), Verdict::Positive) <= count(base, Verdict::Positive));
    CHECK(count(tsa_partition(v, tn * 0.5, tp), Verdict::Negative) <= count(base, Verdict::Negative));
    CHECK(count(base, Verdict::Negative) + count(base, Verdict::Candidate) + count(base, Verdict::Positive) == 30);
  }
}

TEST_CASE("classification mining") {
  const ScoreMap m = make_map(1, 2, 3, {0.1, 0.3, 0.2, 0.9, 0.0, 0.0}, {{0, 0, 8, 8}, {8, 0, 16, 8}});
  const auto t = mine_classification(std::vector<int>{0}, m);
  REQUIRE(t.size() == 1);
  CHECK(t[0].values == std::vector<double>{0, 0.3, 0});
  CHECK(mine_classification(std::vector<int>{}, m).empty());
  const auto same = mine_classification(std::vector<int>{1}, m);
  CHECK(same[0].values == unlabeled_target(m.scores(1)).values);
}

TEST_CASE("weighted box") {
  CHECK(weighted_box(std::vector<Box>{{0, 0, 2, 2}}, std::vector<double>{0.3}) == Box{0, 0, 2, 2});
  const Box b = weighted_box(std::vector<Box>{{0, 0, 2, 2}, {0, 0, 4, 4}}, std::vector<double>{0.8, 0.2});
  CHECK(b.x1 == 0.0);
  CHECK(b.x2 == doctest::Approx(2.4));
  CHECK(b.y2 == doctest::Approx(2.4));
}

TEST_CASE("weighted box stays in the corner hull") {
  Rng rng(9);
  for (int n = 0; n < 300; ++n) {
    std::vector<Box> boxes;
    std::vector<double> w;
    const int k = rng.uniform_int(1, 6);
    for (int i = 0; i < k; ++i) {
      const double x = rng.uniform(0, 30), y = rng.uniform(0, 30);
      boxes.push_back({x, y, x + rng.uniform(1, 20), y + rng.uniform(1, 20)});
      w.push_back(rng.uniform(0.01, 1));
    }
    const Box b = weighted_box(boxes, w);
    double lo = 1e9, hi = -1e9;
    for (const Box& x : boxes) {
      lo = std::min(lo, x.x1);
      hi = std::max(hi, x.x1);
    }
    CHECK(b.x1 >= lo - 1e-12);
    CHECK(b.x1 <= hi + 1e-12);
  }
}

TEST_CASE("localization mining criteria") {
  // Location 0 is a candidate at center (4, 4); location 1 is a positive.
  SUBCASE("matching class, overlap and containment") {
    const ScoreMap m = make_map(1, 2, 2, {0.3, 0.0, 0.8, 0.0}, {{0, 0, 9, 9}, {0, 0, 10, 10}});
    const auto r = mine_localization(std::vector<int>{0}, std::vector<int>{1}, m, 0.6);
    REQUIRE(r[0].target.has_value());
    CHECK(*r[0].target == Box{0, 0, 10, 10});
    CHECK(r[0].matched == std::vector<int>{1});
  }
  SUBCASE("wrong class") {
    const ScoreMap m = make_map(1, 2, 2, {0.0, 0.3, 0.8, 0.0}, {{0, 0, 9, 9}, {0, 0, 10, 10}});
    CHECK_FALSE(mine_localization(std::vector<int>{0}, std::vector<int>{1}, m, 0.6)[0].target.has_value());
  }
  SUBCASE("low overlap") {
    const ScoreMap m = make_map(1, 2, 2, {0.3, 0.0, 0.8, 0.0}, {{0, 0, 5, 5}, {0, 0, 10, 10}});
    CHECK_FALSE(mine_localization(std::vector<int>{0}, std::vector<int>{1}, m, 0.6)[0].target.has_value());
  }
  SUBCASE("center outside the positive box") {
    const ScoreMap m = make_map(1, 2, 2, {0.3, 0.0, 0.8, 0.0}, {{4, 0, 13, 9}, {4, 0, 14, 10}});
    CHECK_FALSE(mine_localization(std::vector<int>{0}, std::vector<int>{1}, m, 0.6)[0].target.has_value());
  }
  SUBCASE("no positives") {
    const ScoreMap m = make_map(1, 2, 2, {0.3, 0.0, 0.8, 0.0}, {{0, 0, 9, 9}, {0, 0, 10, 10}});
    CHECK_FALSE(mine_localization(std::vector<int>{0}, std::vector<int>{}, m, 0.6)[0].target.has_value());
  }
}

TEST_CASE("assign_tsa edge cases") {
  SUBCASE("nothing above tau_neg") {
    const ScoreMap m = make_map(1, 3, 2, std::vector<double>(6, 0.05), std::vector<Box>(3, Box{0, 0, 8, 8}));
    const AssignmentResult r = assign_tsa(m, {});
    CHECK(std::isinf(r.tau_pos));
    for (const auto& a : r.locations) {
      CHECK(a.verdict == Verdict::Negative);
      CHECK(a.cls_active);
      CHECK_FALSE(a.loc_active);
      CHECK(a.cls_target->values == std::vector<double>{0, 0});
    }
  }
}

TEST_CASE("assign_tsa with one pooled maximum keeps it a candidate") {
  std::vector<double> joint(8, 0.01);
  joint[2 * 2 + 1] = 0.9;
  const ScoreMap m = make_map(2, 2, 2, joint, std::vector<Box>(4, Box{0, 0, 8, 8}));
  const AssignmentResult r = assign_tsa(m, {});
  CHECK(r.tau_pos == 0.9);
  CHECK(r.locations[2].verdict == Verdict::Candidate);
}

TEST_CASE("single peak above a weaker pooled value is positive with its own box") {
  std::vector<double> joint(8, 0.01);
  joint[2 * 2 + 1] = 0.9;
  joint[0] = 0.2;
  joint[3 * 2] = 0.2;
  std::vector<Box> boxes(4, Box{0, 0, 8, 8});
  boxes[2] = {1, 9, 7, 15};
  const ScoreMap m = make_map(2, 2, 2, joint, boxes);
  const AssignmentResult r = assign_tsa(m, {});
  const LocationAssignment& peak = r.locations[2];
  CHECK(peak.verdict == Verdict::Positive);
  CHECK(peak.loc_active);
  CHECK(*peak.loc_target == boxes[2]);
  CHECK(peak.cls_target->values == std::vector<double>{0, 0.9});
}

TEST_CASE("assign_tsa agrees with a brute-force transcription") {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const ScoreMap m = random_map(rng, 8, 8, 3);
    for (bool mining : {false, true}) {
      TsaConfig cfg;
      cfg.mining = mining;
      const AssignmentResult r = assign_tsa(m, cfg);
      const auto expect = naive_tsa(m, 0.1, 0.6, mining);
      for (int i = 0; i < m.size(); ++i) {
        const LocationAssignment& a = r.locations[static_cast<std::size_t>(i)];
        const NaiveLoc& e = expect[static_cast<std::size_t>(i)];
        CHECK(static_cast<int>(a.verdict) == (e.verdict == 0 ? 0 : e.verdict == 1 ? 1 : 2));
        CHECK(a.cls_active == e.cls_active);
        CHECK(a.loc_active == e.loc_active);
        if (a.cls_active) CHECK(a.cls_target->values == e.cls);
        if (a.loc_active) {
          CHECK(a.loc_target->x1 == doctest::Approx(e.box.x1).epsilon(1e-12));
          CHECK(a.loc_target->y2 == doctest::Approx(e.box.y2).epsilon(1e-12));
        }
        if (a.verdict == Verdict::Negative) {
          CHECK_FALSE(a.loc_active);
          CHECK(a.cls_target->channel() == -1);
        }
        // Mined localization targets come only from candidates.
        if (a.loc_active && a.verdict != Verdict::Positive) CHECK(a.verdict == Verdict::Candidate);
      }
    }
  }
}

TEST_CASE("mined localization matches satisfy all three criteria") {
  Rng rng(37);
  for (int trial = 0; trial < 200; ++trial) {
    const ScoreMap m = random_map(rng, 8, 8, 3);
    const AssignmentResult r = assign_tsa(m, {});
    std::vector<int> cands, pos;
    for (int i = 0; i < m.size(); ++i) {
      if (r.locations[static_cast<std::size_t>(i)].verdict == Verdict::Candidate) cands.push_back(i);
      if (r.locations[static_cast<std::size_t>(i)].verdict == Verdict::Positive) pos.push_back(i);
    }
    const auto matches = mine_localization(cands, pos, m, 0.6);
    for (std::size_t k = 0; k < cands.size(); ++k) {
      for (int p : matches[k].matched) {
        CHECK(m.argmax(p) == m.argmax(cands[k]));
        CHECK(iou(m.boxes[static_cast<std::size_t>(p)], m.boxes[static_cast<std::size_t>(cands[k])]) > 0.6);
        CHECK(center_inside(m.grid.at(cands[k]), m.boxes[static_cast<std::size_t>(p)]));
      }
    }
  }
}

TEST_CASE("box assignment") {
  const Grid g{8, 8, 8.0};
  SUBCASE("one box covering a 2x2 block of centers") {
    const std::vector<GtObject> boxes{{{2, 2, 18, 18}, 1}};
    const auto c = assign_boxes(boxes, g, 3, HeadMode::Jce).counts();
    CHECK(c.positive == 4);
    CHECK(c.loc_active == 4);
    CHECK(c.cls_active == 64);
  }
  SUBCASE("nested boxes go to the smaller one") {
    const std::vector<GtObject> boxes{{{0, 0, 40, 40}, 0}, {{2, 2, 18, 18}, 2}};
    const AssignmentResult r = assign_boxes(boxes, g, 3, HeadMode::Jce);
    const auto& inner = r.locations[static_cast<std::size_t>(1 * 8 + 1)];
    CHECK(inner.cls_target->channel() == 2);
    CHECK(*inner.loc_target == Box{2, 2, 18, 18});
    const auto& outer = r.locations[static_cast<std::size_t>(3 * 8 + 3)];
    CHECK(outer.cls_target->channel() == 0);
  }
  SUBCASE("no pseudo boxes means all negative") {
    const auto c = assign_box_baseline(std::vector<Detection>{}, g, 3, HeadMode::Jce).counts();
    CHECK(c.negative == 64);
    CHECK(c.loc_active == 0);
  }
}

TEST_CASE("pseudo boxes filter strictly above sigma") {
  const ScoreMap m = make_map(1, 3, 1, {0.5, 0.6, 0.2}, {{0, 0, 8, 8}, {8, 0, 16, 8}, {16, 0, 24, 8}});
  const auto kept = pseudo_boxes(m, 0.5, 0.6);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].score == 0.6);
  CHECK(pseudo_boxes(m, 1.0, 0.6).empty());
  CHECK(pseudo_boxes(m, 0.0, 0.6).size() == 3);
}

TEST_CASE("materialized targets") {
  const Grid g{2, 2, 8.0};
  DenseMap student;
  student.grid = g;
  student.num_classes = 2;
  student.cls_logits.assign(8, 0.0);
  student.iou_logits.assign(4, 0.0);
  student.ltrb.assign(16, 4.0);  // every location predicts its own 8x8 cell
  const std::vector<GtObject> gt{{{0, 0, 8, 16}, 1}};
  AssignmentResult r = assign_boxes(gt, g, 2, HeadMode::Jce);
  materialize_targets(r, student, HeadMode::Jce);
  const auto& a = r.locations[0];
  REQUIRE(a.loc_active);
  CHECK(*a.iou_target == doctest::Approx(0.5));
  CHECK(a.cls_target->values == std::vector<double>{0, 0.5});
  for (const auto& l : r.locations) {
    if (l.loc_active) CHECK(l.iou_target.has_value());
  }
  AssignmentResult rc = assign_boxes(gt, g, 2, HeadMode::Centerness);
  materialize_targets(rc, student, HeadMode::Centerness);
  // Center (4, 4) in [0, 0, 8, 16]: l = r = 4, t = 4, b = 12.
  CHECK(*rc.locations[0].iou_target == doctest::Approx(std::sqrt(4.0 / 12.0)));
  CHECK(rc.locations[0].cls_target->values == std::vector<double>{0, 1});
}

TEST_CASE("box baseline agrees with a brute-force transcription") {
  Rng rng(59);
  for (int trial = 0; trial < 300; ++trial) {
    const ScoreMap m = random_map(rng, 8, 8, 3);
    for (double sigma : {0.0, 0.3, 0.5, 0.8}) {
      const AssignmentResult r = assign_box_baseline(pseudo_boxes(m, sigma, 0.6), m.grid, 3, HeadMode::Jce);
      const auto expect = oracle::naive_box_baseline(m, sigma, 0.6);
      for (int i = 0; i < m.size(); ++i) {
        const LocationAssignment& a = r.locations[static_cast<std::size_t>(i)];
        const oracle::NaiveBoxLoc& e = expect[static_cast<std::size_t>(i)];
        CHECK((a.verdict == Verdict::Positive) == e.positive);
        CHECK(a.cls_active);
        CHECK(a.loc_active == e.positive);
        if (!e.positive) continue;
        CHECK(a.cls_target->channel() == e.cls);
        CHECK(a.loc_target->x1 == e.box.x1);
        CHECK(a.loc_target->y2 == e.box.y2);
      }
    }
  }
}
