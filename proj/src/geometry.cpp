// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "arsl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "arsl/errors.hpp"

namespace arsl {

bool Box::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
         x1 < x2 && y1 < y2;
}

namespace {

double intersection(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

}  // namespace

double iou(const Box& a, const Box& b) {
  const double inter = intersection(a, b);
  if (inter <= 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

double giou(const Box& a, const Box& b) {
  const double inter = intersection(a, b);
  const double uni = a.area() + b.area() - inter;
  const double enclose = (std::max(a.x2, b.x2) - std::min(a.x1, b.x1)) *
                         (std::max(a.y2, b.y2) - std::min(a.y1, b.y1));
  return inter / uni - (enclose - uni) / enclose;
}

Box decode_ltrb(const GridLocation& loc, const Ltrb& d) {
  if (d.l + d.r <= 0.0 || d.t + d.b <= 0.0) {
    throw GeometryError("decode_ltrb: degenerate box (zero width or height)");
  }
  return {loc.cx() - d.l, loc.cy() - d.t, loc.cx() + d.r, loc.cy() + d.b};
}

Ltrb encode_ltrb(const GridLocation& loc, const Box& box) {
  if (!center_inside(loc, box)) {
    throw GeometryError("encode_ltrb: location center is not inside the box");
  }
  return {loc.cx() - box.x1, loc.cy() - box.y1, box.x2 - loc.cx(), box.y2 - loc.cy()};
}

bool center_inside(const GridLocation& loc, const Box& box) {
  const double cx = loc.cx();
  const double cy = loc.cy();
  return box.x1 < cx && cx < box.x2 && box.y1 < cy && cy < box.y2;
}

GiouLossGrad giou_loss_and_grad(const Ltrb& pred, const Box& target, const GridLocation& loc) {
  const Box p = decode_ltrb(loc, pred);
  const Box& g = target;

  // Intersection extents. On ties the target owns the edge, which makes the
  // gradient vanish at a perfect match.
  const double ix1 = std::max(p.x1, g.x1);
  const double iy1 = std::max(p.y1, g.y1);
  const double ix2 = std::min(p.x2, g.x2);
  const double iy2 = std::min(p.y2, g.y2);
  const double iw = ix2 - ix1;
  const double ih = iy2 - iy1;
  const bool overlap = iw > 0.0 && ih > 0.0;
  const double inter = overlap ? iw * ih : 0.0;

  const double pw = p.width();
  const double ph = p.height();
  const double uni = pw * ph + g.area() - inter;

  const double cw = std::max(p.x2, g.x2) - std::min(p.x1, g.x1);
  const double ch = std::max(p.y2, g.y2) - std::min(p.y1, g.y1);
  const double enclose = cw * ch;

  GiouLossGrad out;
  out.loss = 2.0 - inter / uni - uni / enclose;

  // Partials with respect to the predicted corners (x1, y1, x2, y2).
  std::array<double, 4> d_inter{0.0, 0.0, 0.0, 0.0};
  if (overlap) {
    if (p.x1 > g.x1) d_inter[0] = -ih;
    if (p.y1 > g.y1) d_inter[1] = -iw;
    if (p.x2 < g.x2) d_inter[2] = ih;
    if (p.y2 < g.y2) d_inter[3] = iw;
  }
  const std::array<double, 4> d_area{-ph, -pw, ph, pw};
  std::array<double, 4> d_enclose{0.0, 0.0, 0.0, 0.0};
  if (p.x1 < g.x1) d_enclose[0] = -ch;
  if (p.y1 < g.y1) d_enclose[1] = -cw;
  if (p.x2 > g.x2) d_enclose[2] = ch;
  if (p.y2 > g.y2) d_enclose[3] = cw;

  std::array<double, 4> d_corner{};
  for (int k = 0; k < 4; ++k) {
    const double d_uni = d_area[k] - d_inter[k];
    const double d_iou = (d_inter[k] * uni - inter * d_uni) / (uni * uni);
    const double d_ratio = (d_uni * enclose - uni * d_enclose[k]) / (enclose * enclose);
    d_corner[k] = -d_iou - d_ratio;
  }
  // x1 = cx - l, y1 = cy - t, x2 = cx + r, y2 = cy + b.
  out.grad = {-d_corner[0], -d_corner[1], d_corner[2], d_corner[3]};
  return out;
}

std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });

  std::vector<Detection> kept;
  for (std::size_t idx : order) {
    const Detection& d = dets[idx];
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (k.cls == d.cls && iou(k.box, d.box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

}  // namespace arsl
