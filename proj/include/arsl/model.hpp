// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "arsl/geometry.hpp"
#include "arsl/tensor.hpp"

namespace arsl {

/// Three 3x3 convolutions with ReLU followed by 1x1 projections for class
/// logits, one quality logit and four ltrb distances.
struct ModelConfig {
  int num_classes = 3;
  std::array<int, 4> channels{3, 16, 16, 16};
  std::array<int, 3> strides{2, 2, 2};

  int total_stride() const { return strides[0] * strides[1] * strides[2]; }
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ParamBlock {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

std::vector<ParamBlock> param_layout(const ModelConfig& config);

/// All weights of the detector in one flat array, addressed through blocks.
struct ModelParams {
  ModelConfig config;
  std::vector<double> values;

  std::span<double> block(std::string_view name);
  std::span<const double> block(std::string_view name) const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// He-style fan-in initialisation for the trunk, small normal weights for the
/// head, focal prior on the class bias.
ModelParams init_params(std::uint64_t seed, const ModelConfig& config);
ModelParams init_params(std::uint64_t seed, int num_classes);

/// Zeroed parameters with the layout of `config`.
ModelParams zero_params(const ModelConfig& config);

/// Per-location outputs of a forward pass, location index = i * grid.width + j.
struct DenseMap {
  Grid grid;
  int num_classes = 0;
  std::vector<double> cls_logits;  // size * num_classes
  std::vector<double> iou_logits;  // size
  std::vector<double> ltrb;        // size * 4, pixels, strictly positive

  int size() const { return grid.size(); }
  std::span<const double> cls(int loc) const {
    return {cls_logits.data() + static_cast<std::size_t>(loc) * num_classes,
            static_cast<std::size_t>(num_classes)};
  }
  Ltrb distances(int loc) const;
  Box box(int loc) const;

  friend bool operator==(const DenseMap&, const DenseMap&) = default;
};

/// Loss gradients with respect to the DenseMap outputs (ltrb in pixels).
struct OutputGrads {
  std::vector<double> cls_logits;
  std::vector<double> iou_logits;
  std::vector<double> ltrb;

  static OutputGrads zeros(const DenseMap& like);
};

struct ForwardCache {
  std::vector<Tensor3> activations;  // input image then each trunk output
};

DenseMap forward(const ModelParams& params, const Image& image);
DenseMap forward(const ModelParams& params, const Image& image, ForwardCache& cache);

/// Reverse-mode gradients; `grads` accumulates into a buffer shaped like params.values.
void backward(const ModelParams& params, const ForwardCache& cache, const DenseMap& out,
              const OutputGrads& output_grads, std::vector<double>& grads);
std::vector<double> backward(const ModelParams& params, const Image& image,
                             const OutputGrads& output_grads);

struct OptState {
  std::vector<double> momentum;
  double lr = 0.01;
  double mu = 0.9;
  double weight_decay = 1e-4;
};

OptState make_opt_state(const ModelParams& params, double lr, double mu, double weight_decay);

/// v <- mu v + g + wd theta; theta <- theta - lr v. Throws NumericError on
/// non-finite gradients without touching params or state.
void sgd_step(ModelParams& params, std::span<const double> grads, OptState& opt);

/// Flip the map horizontally: column j <-> width-1-j, l <-> r.
DenseMap mirror_map(const DenseMap& map);

}  // namespace arsl
