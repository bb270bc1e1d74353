// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <vector>

namespace arsl {

/// Axis-aligned rectangle in image pixel coordinates, x1 < x2 and y1 < y2.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const;

  friend bool operator==(const Box&, const Box&) = default;
};

/// Distances from a location center to the left, top, right and bottom sides.
struct Ltrb {
  double l = 0.0;
  double t = 0.0;
  double r = 0.0;
  double b = 0.0;

  friend bool operator==(const Ltrb&, const Ltrb&) = default;
};

/// One cell of a dense prediction grid; row i, column j.
struct GridLocation {
  int level = 0;
  int i = 0;
  int j = 0;
  double stride = 8.0;

  double cx() const { return (j + 0.5) * stride; }
  double cy() const { return (i + 0.5) * stride; }
};

/// Geometry of one dense prediction level.
struct Grid {
  int height = 0;
  int width = 0;
  double stride = 8.0;

  int size() const { return height * width; }
  GridLocation at(int index) const { return {0, index / width, index % width, stride}; }
  friend bool operator==(const Grid&, const Grid&) = default;
};

double iou(const Box& a, const Box& b);
double giou(const Box& a, const Box& b);

Box decode_ltrb(const GridLocation& loc, const Ltrb& d);
Ltrb encode_ltrb(const GridLocation& loc, const Box& box);
bool center_inside(const GridLocation& loc, const Box& box);

struct GiouLossGrad {
  double loss = 0.0;
  /// d loss / d (l, t, r, b).
  std::array<double, 4> grad{};
};

/// 1 - giou(decode(pred), target) and its exact partial derivatives.
GiouLossGrad giou_loss_and_grad(const Ltrb& pred, const Box& target, const GridLocation& loc);

struct Detection {
  Box box;
  int cls = 0;
  double score = 0.0;
};

/// Class-wise greedy NMS. Output is sorted by descending score, ties by input index.
std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold);

}  // namespace arsl
