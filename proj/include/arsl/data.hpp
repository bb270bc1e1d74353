// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "arsl/geometry.hpp"
#include "arsl/model.hpp"
#include "arsl/tensor.hpp"

namespace arsl {

using Color = std::array<double, 3>;

/// Parameters of the synthetic shape scenes. Class 0 is a disk, 1 a square,
/// 2 an upright triangle.
struct SceneSpec {
  int image_size = 64;
  int num_classes = 3;
  int min_objects = 1;
  int max_objects = 4;
  double min_size = 8.0;
  double max_size = 32.0;
  double noise = 0.06;
  double max_pair_iou = 0.5;
  /// Per-class candidate colors; an object picks one and jitters it.
  std::vector<std::vector<Color>> palette = default_palette();
  double color_jitter = 0.08;

  static std::vector<std::vector<Color>> default_palette();
  void validate() const;
};

struct GtObject {
  Box box;
  int cls = 0;

  friend bool operator==(const GtObject&, const GtObject&) = default;
};

enum class Split { Labeled, Unlabeled };

struct Sample {
  Image image;
  std::vector<GtObject> gt;
  Split split = Split::Labeled;
  std::uint64_t seed = 0;
};

/// Deterministic from `seed`. Pixels are multiples of 1/255 so that the
/// 8-bit dump format round-trips exactly.
Sample generate_scene(std::uint64_t seed, const SceneSpec& spec);

struct Splits {
  std::vector<int> labeled;
  std::vector<int> unlabeled;
};

/// Disjoint and exhaustive; |labeled| = round(n * fraction). Both lists sorted.
Splits make_splits(int n_scenes, double labeled_fraction, std::uint64_t seed);

/// n scenes with per-scene seeds derived from `seed`, tagged by make_splits.
std::vector<Sample> generate_dataset(int n_scenes, double labeled_fraction, std::uint64_t seed,
                                     const SceneSpec& spec);

struct AugmentedView {
  Image image;
  std::vector<GtObject> gt;
  bool flipped = false;
};

Image flip_image(const Image& image);
std::vector<GtObject> flip_gt(const std::vector<GtObject>& gt, int width);
AugmentedView flip_view(const AugmentedView& view);

/// Horizontal flip with probability 0.5.
AugmentedView weak_augment(const Image& image, const std::vector<GtObject>& gt, std::uint64_t seed);

struct StrongAugConfig {
  double scale_lo = 0.6;
  double scale_hi = 1.4;
  double shift = 0.2;
  bool cutout = true;
  int cutout_min = 8;
  int cutout_max = 24;
  /// Re-sample a flip on top of the weak view instead of sharing its geometry.
  bool independent_flip = false;
};

struct StrongView {
  Image image;
  /// True when the strong view is mirrored relative to the weak view.
  bool mirrored = false;
};

/// Per-channel affine color jitter clamped to [0, 1], then one cutout square
/// filled with 0.5.
StrongView strong_augment(const AugmentedView& weak, std::uint64_t seed, const StrongAugConfig& cfg);

/// Brings a teacher map computed on the weak view onto the student's grid.
DenseMap align_teacher_to_student(const DenseMap& teacher, bool mirrored);

/// Images as binary PPM plus annotations.jsonl with boxes, classes and splits.
void save_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples);
std::vector<Sample> load_dataset(const std::filesystem::path& dir);

void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);

}  // namespace arsl
