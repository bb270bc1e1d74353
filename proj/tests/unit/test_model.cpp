// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "arsl/checkpoint.hpp"
#include "arsl/data.hpp"
#include "arsl/errors.hpp"
#include "arsl/jce.hpp"
#include "arsl/model.hpp"
#include "arsl/rng.hpp"
#include "model_fixtures.hpp"
#include "oracles.hpp"

using namespace arsl;
using oracle::analytic_output_grads;
using oracle::lively_params;
using oracle::oracle_loss;
using oracle::random_image;
using oracle::random_targets;
using oracle::Targets;

TEST_CASE("zero parameters give neutral outputs") {
  const ModelParams p = zero_params(ModelConfig{});
  const DenseMap m = forward(p, random_image(1, 64, 64));
  CHECK(m.grid.height == 8);
  CHECK(m.grid.width == 8);
  for (double v : m.cls_logits) CHECK(sigmoid(v) == 0.5);
  for (double v : m.iou_logits) CHECK(sigmoid(v) == 0.5);
  for (double v : m.ltrb) CHECK(v == 8.0);
}

TEST_CASE("forward is deterministic and validates shapes") {
  const ModelParams p = init_params(3, 3);
  const Image img = random_image(2, 64, 64);
  CHECK(forward(p, img) == forward(p, img));
  CHECK_THROWS_AS(forward(p, random_image(2, 60, 64)), ConfigError);
  CHECK_THROWS_AS(forward(p, Image(1, 64, 64)), ConfigError);
  for (double v : forward(p, img).ltrb) CHECK(v > 0.0);
}

TEST_CASE("init params") {
  const ModelParams a = init_params(7, 3), b = init_params(7, 3), c = init_params(8, 3);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);
  for (double v : a.block("cls.bias")) CHECK(v == doctest::Approx(-4.59512).epsilon(1e-5));
  for (double v : a.block("conv1.bias")) CHECK(v == 0.0);
  // He scaling: conv2 weights have variance close to 2 / fan_in.
  const auto w = a.block("conv2.weight");
  double ss = 0.0;
  for (double v : w) ss += v * v;
  CHECK(ss / static_cast<double>(w.size()) == doctest::Approx(2.0 / (16 * 9)).epsilon(0.15));
}

TEST_CASE("zero output gradients give zero parameter gradients") {
  const ModelParams p = init_params(3, 3);
  const Image img = random_image(5, 32, 32);
  const DenseMap m = forward(p, img);
  for (double g : backward(p, img, OutputGrads::zeros(m))) CHECK(g == 0.0);
}

TEST_CASE("full network gradient matches central differences") {
  ModelConfig cfg;
  const ModelParams p = lively_params(11, cfg);
  const Image img = random_image(12, 16, 16);
  const DenseMap m = forward(p, img);
  const Targets t = random_targets(m.grid, cfg.num_classes, 13);
  const std::vector<double> grads = backward(p, img, analytic_output_grads(m, t));

  const double h = 1e-6;
  int checked = 0, within = 0;
  for (std::size_t k = 0; k < p.values.size(); ++k) {
    ModelParams up = p, dn = p;
    up.values[k] += h;
    dn.values[k] -= h;
    const double fd = (oracle_loss(forward(up, img), t) - oracle_loss(forward(dn, img), t)) / (2 * h);
    if (std::abs(fd) < 1e-7 && std::abs(grads[k]) < 1e-7) continue;
    ++checked;
    if (oracle::rel_err(fd, grads[k]) < 1e-3) ++within;
  }
  CHECK(checked > 1000);
  // ReLU kinks crossed by the perturbation can spoil a handful of entries.
  CHECK(within >= checked - 3);
}

TEST_CASE("gradients depend only on pixels inside the receptive field") {
  const ModelParams p = init_params(4, 3);
  Image img = random_image(6, 64, 64);
  DenseMap m = forward(p, img);
  OutputGrads og = OutputGrads::zeros(m);
  og.cls_logits[0] = 1.0;
  og.ltrb[2] = 0.5;
  const std::vector<double> before = backward(p, img, og);
  // Location (0, 0) sees at most the top-left 16 x 16 pixels with strides 2, 2, 2.
  for (int y = 24; y < 64; ++y) {
    for (int x = 24; x < 64; ++x) img.at(0, y, x) = 1.0 - img.at(0, y, x);
  }
  CHECK(backward(p, img, og) == before);
  img.at(1, 3, 3) += 0.3;
  CHECK(backward(p, img, og) != before);
}

TEST_CASE("flip equivariance on a mirror-symmetric stride-1 trunk") {
  ModelConfig cfg;
  cfg.strides = {1, 1, 1};
  ModelParams p = lively_params(19, cfg);
  for (const char* name : {"conv1.weight", "conv2.weight", "conv3.weight"}) {
    auto w = p.block(name);
    for (std::size_t k = 0; k < w.size(); k += 3) w[k + 2] = w[k];
  }
  auto wl = p.block("ltrb.weight");
  auto bl = p.block("ltrb.bias");
  const std::size_t fc = 16;
  for (std::size_t k = 0; k < fc; ++k) wl[2 * fc + k] = wl[k];
  bl[2] = bl[0];

  const Image img = random_image(20, 12, 12);
  const DenseMap direct = forward(p, flip_image(img));
  const DenseMap mirrored = mirror_map(forward(p, img));
  REQUIRE(direct.size() == mirrored.size());
  for (std::size_t k = 0; k < direct.cls_logits.size(); ++k) {
    CHECK(direct.cls_logits[k] == doctest::Approx(mirrored.cls_logits[k]).epsilon(1e-12));
  }
  for (std::size_t k = 0; k < direct.ltrb.size(); ++k) {
    CHECK(direct.ltrb[k] == doctest::Approx(mirrored.ltrb[k]).epsilon(1e-12));
  }
  CHECK(mirror_map(mirror_map(direct)) == direct);
}

TEST_CASE("sgd step") {
  ModelParams p = init_params(1, 3);
  const std::vector<double> g(p.values.size(), 0.5);
  SUBCASE("zero learning rate") {
    const auto before = p.values;
    OptState opt = make_opt_state(p, 0.0, 0.9, 1e-4);
    sgd_step(p, g, opt);
    CHECK(p.values == before);
  }
  SUBCASE("plain gradient descent") {
    const auto before = p.values;
    OptState opt = make_opt_state(p, 0.1, 0.0, 0.0);
    sgd_step(p, g, opt);
    for (std::size_t k = 0; k < p.values.size(); ++k) CHECK(p.values[k] == doctest::Approx(before[k] - 0.05));
  }
  SUBCASE("momentum makes the second update 1.9 times the first") {
    const auto v0 = p.values;
    OptState opt = make_opt_state(p, 0.1, 0.9, 0.0);
    sgd_step(p, g, opt);
    const auto v1 = p.values;
    sgd_step(p, g, opt);
    for (std::size_t k = 0; k < p.values.size(); k += 97) {
      CHECK((v1[k] - p.values[k]) == doctest::Approx(1.9 * (v0[k] - v1[k])).epsilon(1e-9));
    }
  }
  SUBCASE("coupled weight decay") {
    const auto before = p.values;
    OptState opt = make_opt_state(p, 0.1, 0.9, 0.01);
    sgd_step(p, g, opt);
    for (std::size_t k = 0; k < p.values.size(); k += 53) {
      CHECK(p.values[k] == doctest::Approx(before[k] - 0.1 * (0.5 + 0.01 * before[k])).epsilon(1e-12));
    }
  }
  SUBCASE("non-finite gradients abort without side effects") {
    const auto before = p.values;
    OptState opt = make_opt_state(p, 0.1, 0.9, 0.0);
    std::vector<double> bad = g;
    bad[5] = std::nan("");
    CHECK_THROWS_AS(sgd_step(p, bad, opt), NumericError);
    CHECK(p.values == before);
    for (double v : opt.momentum) CHECK(v == 0.0);
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  Checkpoint c{42, init_params(1, 3), init_params(2, 3), {}};
  c.momentum.assign(c.student.values.size(), 0.0);
  c.momentum[3] = -1.25e-300;
  c.student.values[0] = std::nextafter(1.0, 2.0);
  const std::string bytes = serialize_checkpoint(c);
  CHECK(parse_checkpoint(bytes) == c);
  CHECK(serialize_checkpoint(parse_checkpoint(bytes)) == bytes);

  std::string flipped = bytes;
  flipped[bytes.size() / 2] = static_cast<char>(flipped[bytes.size() / 2] ^ 0x10);
  CHECK_THROWS_AS(parse_checkpoint(flipped), FormatError);
  CHECK_THROWS_AS(parse_checkpoint(bytes.substr(0, bytes.size() - 9)), FormatError);
  CHECK_THROWS_AS(parse_checkpoint("ARSLCKPT"), FormatError);
  CHECK_THROWS_AS(parse_checkpoint(bytes + "x"), FormatError);
  std::string wrong_magic = bytes;
  wrong_magic[0] = 'X';
  CHECK_THROWS_AS(parse_checkpoint(wrong_magic), FormatError);
  std::string version = bytes;
  version[8] = 9;
  CHECK_THROWS_WITH_AS(parse_checkpoint(version), doctest::Contains("version"), FormatError);
}
