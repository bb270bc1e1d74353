// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "arsl/model.hpp"

#include <algorithm>
#include <cmath>

#include "arsl/errors.hpp"
#include "arsl/rng.hpp"

namespace arsl {

namespace {

constexpr int kLayers = 3;
constexpr int kKernel = 3;
constexpr double kFocalPrior = 0.01;
constexpr double kHeadInitStd = 0.01;
// exp() argument bound for the ltrb activation.
constexpr double kRawLimit = 8.0;

std::string conv_name(int layer, const char* what) {
  return "conv" + std::to_string(layer + 1) + "." + what;
}

int conv_out(int in, int stride) { return (in + 2 - kKernel) / stride + 1; }

void conv_forward(const Tensor3& in, std::span<const double> weight, std::span<const double> bias,
                  int out_channels, int stride, Tensor3& out) {
  const int ho = conv_out(in.height, stride);
  const int wo = conv_out(in.width, stride);
  out = Tensor3(out_channels, ho, wo);
  const int cin = in.channels;
  for (int oc = 0; oc < out_channels; ++oc) {
    double* dst = out.data.data() + out.index(oc, 0, 0);
    std::fill(dst, dst + static_cast<std::size_t>(ho) * wo, bias[static_cast<std::size_t>(oc)]);
    for (int ic = 0; ic < cin; ++ic) {
      const double* src = in.data.data() + in.index(ic, 0, 0);
      for (int ky = 0; ky < kKernel; ++ky) {
        for (int kx = 0; kx < kKernel; ++kx) {
          const double w =
              weight[((static_cast<std::size_t>(oc) * cin + ic) * kKernel + ky) * kKernel + kx];
          const int ox_lo = kx == 0 ? 1 : 0;
          const int ox_hi = std::min(wo - 1, (in.width - kx) / stride);
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride + ky - 1;
            if (iy < 0 || iy >= in.height) continue;
            const double* row = src + static_cast<std::size_t>(iy) * in.width;
            double* orow = dst + static_cast<std::size_t>(oy) * wo;
            for (int ox = ox_lo; ox <= ox_hi; ++ox) {
              orow[ox] += w * row[ox * stride + kx - 1];
            }
          }
        }
      }
    }
  }
}

/// Accumulates weight/bias gradients and, when `din` is non-null, input gradients.
void conv_backward(const Tensor3& in, std::span<const double> weight, const Tensor3& dout,
                   int stride, std::span<double> dweight, std::span<double> dbias, Tensor3* din) {
  const int cin = in.channels;
  const int ho = dout.height;
  const int wo = dout.width;
  if (din != nullptr) *din = Tensor3(cin, in.height, in.width);
  for (int oc = 0; oc < dout.channels; ++oc) {
    const double* g = dout.data.data() + dout.index(oc, 0, 0);
    double bsum = 0.0;
    for (std::size_t k = 0; k < static_cast<std::size_t>(ho) * wo; ++k) bsum += g[k];
    dbias[static_cast<std::size_t>(oc)] += bsum;
    for (int ic = 0; ic < cin; ++ic) {
      const double* src = in.data.data() + in.index(ic, 0, 0);
      double* dsrc = din != nullptr ? din->data.data() + din->index(ic, 0, 0) : nullptr;
      for (int ky = 0; ky < kKernel; ++ky) {
        for (int kx = 0; kx < kKernel; ++kx) {
          const std::size_t widx =
              ((static_cast<std::size_t>(oc) * cin + ic) * kKernel + ky) * kKernel + kx;
          const double w = weight[widx];
          const int ox_lo = kx == 0 ? 1 : 0;
          const int ox_hi = std::min(wo - 1, (in.width - kx) / stride);
          double acc = 0.0;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride + ky - 1;
            if (iy < 0 || iy >= in.height) continue;
            const double* row = src + static_cast<std::size_t>(iy) * in.width;
            const double* grow = g + static_cast<std::size_t>(oy) * wo;
            for (int ox = ox_lo; ox <= ox_hi; ++ox) acc += grow[ox] * row[ox * stride + kx - 1];
            if (dsrc != nullptr) {
              double* drow = dsrc + static_cast<std::size_t>(iy) * in.width;
              for (int ox = ox_lo; ox <= ox_hi; ++ox) drow[ox * stride + kx - 1] += w * grow[ox];
            }
          }
          dweight[widx] += acc;
        }
      }
    }
  }
}

void relu_inplace(Tensor3& t) {
  for (double& v : t.data) v = v > 0.0 ? v : 0.0;
}

}  // namespace

void ModelConfig::validate() const {
  if (num_classes < 1) throw ConfigError("model: num_classes must be >= 1");
  for (int c : channels) {
    if (c < 1) throw ConfigError("model: channel counts must be >= 1");
  }
  for (int s : strides) {
    if (s < 1) throw ConfigError("model: strides must be >= 1");
  }
}

std::vector<ParamBlock> param_layout(const ModelConfig& config) {
  config.validate();
  std::vector<ParamBlock> blocks;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::vector<int> shape) {
    std::size_t size = 1;
    for (int d : shape) size *= static_cast<std::size_t>(d);
    blocks.push_back({std::move(name), std::move(shape), offset, size});
    offset += size;
  };
  for (int l = 0; l < kLayers; ++l) {
    const int cin = config.channels[static_cast<std::size_t>(l)];
    const int cout = config.channels[static_cast<std::size_t>(l) + 1];
    add(conv_name(l, "weight"), {cout, cin, kKernel, kKernel});
    add(conv_name(l, "bias"), {cout});
  }
  const int feat = config.channels[kLayers];
  add("cls.weight", {config.num_classes, feat});
  add("cls.bias", {config.num_classes});
  add("iou.weight", {1, feat});
  add("iou.bias", {1});
  add("ltrb.weight", {4, feat});
  add("ltrb.bias", {4});
  return blocks;
}

std::span<double> ModelParams::block(std::string_view name) {
  for (const ParamBlock& b : param_layout(config)) {
    if (b.name == name) return {values.data() + b.offset, b.size};
  }
  throw ConfigError("unknown parameter block: " + std::string(name));
}

std::span<const double> ModelParams::block(std::string_view name) const {
  for (const ParamBlock& b : param_layout(config)) {
    if (b.name == name) return {values.data() + b.offset, b.size};
  }
  throw ConfigError("unknown parameter block: " + std::string(name));
}

ModelParams zero_params(const ModelConfig& config) {
  const auto blocks = param_layout(config);
  return {config, std::vector<double>(blocks.back().offset + blocks.back().size, 0.0)};
}

ModelParams init_params(std::uint64_t seed, const ModelConfig& config) {
  ModelParams p = zero_params(config);
  Rng rng(seed);
  for (const ParamBlock& b : param_layout(config)) {
    std::span<double> v{p.values.data() + b.offset, b.size};
    if (b.name.ends_with(".weight")) {
      double std_dev = kHeadInitStd;
      if (b.name.starts_with("conv")) {
        const int fan_in = b.shape[1] * b.shape[2] * b.shape[3];
        std_dev = std::sqrt(2.0 / fan_in);
      }
      for (double& x : v) x = std_dev * rng.normal();
    } else if (b.name == "cls.bias") {
      std::fill(v.begin(), v.end(), -std::log((1.0 - kFocalPrior) / kFocalPrior));
    }
  }
  return p;
}

ModelParams init_params(std::uint64_t seed, int num_classes) {
  ModelConfig config;
  config.num_classes = num_classes;
  return init_params(seed, config);
}

Ltrb DenseMap::distances(int loc) const {
  const double* d = ltrb.data() + static_cast<std::size_t>(loc) * 4;
  return {d[0], d[1], d[2], d[3]};
}

Box DenseMap::box(int loc) const { return decode_ltrb(grid.at(loc), distances(loc)); }

OutputGrads OutputGrads::zeros(const DenseMap& like) {
  return {std::vector<double>(like.cls_logits.size(), 0.0),
          std::vector<double>(like.iou_logits.size(), 0.0),
          std::vector<double>(like.ltrb.size(), 0.0)};
}

DenseMap forward(const ModelParams& params, const Image& image, ForwardCache& cache) {
  const ModelConfig& cfg = params.config;
  const int stride = cfg.total_stride();
  if (image.channels != cfg.channels[0]) {
    throw ConfigError("forward: image has " + std::to_string(image.channels) +
                      " channels, model expects " + std::to_string(cfg.channels[0]));
  }
  if (image.height % stride != 0 || image.width % stride != 0) {
    throw ConfigError("forward: image size " + std::to_string(image.height) + "x" +
                      std::to_string(image.width) + " is not divisible by stride " +
                      std::to_string(stride));
  }
  cache.activations.assign(kLayers + 1, Tensor3{});
  cache.activations[0] = image;
  for (int l = 0; l < kLayers; ++l) {
    conv_forward(cache.activations[static_cast<std::size_t>(l)], params.block(conv_name(l, "weight")),
                 params.block(conv_name(l, "bias")), cfg.channels[static_cast<std::size_t>(l) + 1],
                 cfg.strides[static_cast<std::size_t>(l)],
                 cache.activations[static_cast<std::size_t>(l) + 1]);
    relu_inplace(cache.activations[static_cast<std::size_t>(l) + 1]);
  }
  const Tensor3& feat = cache.activations[kLayers];

  DenseMap out;
  out.grid = {feat.height, feat.width, static_cast<double>(stride)};
  out.num_classes = cfg.num_classes;
  const int n = out.grid.size();
  const int fc = feat.channels;
  const int nc = cfg.num_classes;
  out.cls_logits.assign(static_cast<std::size_t>(n) * nc, 0.0);
  out.iou_logits.assign(static_cast<std::size_t>(n), 0.0);
  out.ltrb.assign(static_cast<std::size_t>(n) * 4, 0.0);

  const auto wc = params.block("cls.weight");
  const auto bc = params.block("cls.bias");
  const auto wi = params.block("iou.weight");
  const auto bi = params.block("iou.bias");
  const auto wl = params.block("ltrb.weight");
  const auto bl = params.block("ltrb.bias");
  const std::size_t plane = static_cast<std::size_t>(n);
  for (int loc = 0; loc < n; ++loc) {
    auto f = [&](int k) { return feat.data[static_cast<std::size_t>(k) * plane + loc]; };
    for (int c = 0; c < nc; ++c) {
      double acc = bc[static_cast<std::size_t>(c)];
      for (int k = 0; k < fc; ++k) acc += wc[static_cast<std::size_t>(c) * fc + k] * f(k);
      out.cls_logits[static_cast<std::size_t>(loc) * nc + c] = acc;
    }
    double acc = bi[0];
    for (int k = 0; k < fc; ++k) acc += wi[static_cast<std::size_t>(k)] * f(k);
    out.iou_logits[static_cast<std::size_t>(loc)] = acc;
    for (int s = 0; s < 4; ++s) {
      double raw = bl[static_cast<std::size_t>(s)];
      for (int k = 0; k < fc; ++k) raw += wl[static_cast<std::size_t>(s) * fc + k] * f(k);
      raw = std::clamp(raw, -kRawLimit, kRawLimit);
      out.ltrb[static_cast<std::size_t>(loc) * 4 + s] = stride * std::exp(raw);
    }
  }
  return out;
}

DenseMap forward(const ModelParams& params, const Image& image) {
  ForwardCache cache;
  return forward(params, image, cache);
}

void backward(const ModelParams& params, const ForwardCache& cache, const DenseMap& out,
              const OutputGrads& og, std::vector<double>& grads) {
  const ModelConfig& cfg = params.config;
  if (grads.size() != params.values.size()) grads.assign(params.values.size(), 0.0);
  if (og.cls_logits.size() != out.cls_logits.size() || og.iou_logits.size() != out.iou_logits.size() ||
      og.ltrb.size() != out.ltrb.size()) {
    throw ConfigError("backward: output gradients do not match the forward output shape");
  }
  auto grad_block = [&](std::string_view name) {
    for (const ParamBlock& b : param_layout(cfg)) {
      if (b.name == name) return std::span<double>{grads.data() + b.offset, b.size};
    }
    throw ConfigError("unknown parameter block");
  };

  const Tensor3& feat = cache.activations[kLayers];
  const int n = out.size();
  const int fc = feat.channels;
  const int nc = cfg.num_classes;
  const std::size_t plane = static_cast<std::size_t>(n);

  const auto wc = params.block("cls.weight");
  const auto wi = params.block("iou.weight");
  const auto wl = params.block("ltrb.weight");
  auto gwc = grad_block("cls.weight");
  auto gbc = grad_block("cls.bias");
  auto gwi = grad_block("iou.weight");
  auto gbi = grad_block("iou.bias");
  auto gwl = grad_block("ltrb.weight");
  auto gbl = grad_block("ltrb.bias");

  Tensor3 dfeat(fc, feat.height, feat.width);
  for (int loc = 0; loc < n; ++loc) {
    auto f = [&](int k) { return feat.data[static_cast<std::size_t>(k) * plane + loc]; };
    auto df = [&](int k) -> double& { return dfeat.data[static_cast<std::size_t>(k) * plane + loc]; };
    for (int c = 0; c < nc; ++c) {
      const double g = og.cls_logits[static_cast<std::size_t>(loc) * nc + c];
      if (g == 0.0) continue;
      gbc[static_cast<std::size_t>(c)] += g;
      for (int k = 0; k < fc; ++k) {
        gwc[static_cast<std::size_t>(c) * fc + k] += g * f(k);
        df(k) += g * wc[static_cast<std::size_t>(c) * fc + k];
      }
    }
    const double gi = og.iou_logits[static_cast<std::size_t>(loc)];
    if (gi != 0.0) {
      gbi[0] += gi;
      for (int k = 0; k < fc; ++k) {
        gwi[static_cast<std::size_t>(k)] += gi * f(k);
        df(k) += gi * wi[static_cast<std::size_t>(k)];
      }
    }
    for (int s = 0; s < 4; ++s) {
      const std::size_t idx = static_cast<std::size_t>(loc) * 4 + s;
      const double d = out.ltrb[idx];
      const double raw = std::log(d / out.grid.stride);
      // The clamp has zero derivative outside its range.
      if (og.ltrb[idx] == 0.0 || raw >= kRawLimit || raw <= -kRawLimit) continue;
      const double g = og.ltrb[idx] * d;
      gbl[static_cast<std::size_t>(s)] += g;
      for (int k = 0; k < fc; ++k) {
        gwl[static_cast<std::size_t>(s) * fc + k] += g * f(k);
        df(k) += g * wl[static_cast<std::size_t>(s) * fc + k];
      }
    }
  }

  Tensor3 dact = std::move(dfeat);
  for (int l = kLayers - 1; l >= 0; --l) {
    const Tensor3& act = cache.activations[static_cast<std::size_t>(l) + 1];
    for (std::size_t k = 0; k < dact.data.size(); ++k) {
      if (act.data[k] <= 0.0) dact.data[k] = 0.0;
    }
    Tensor3 din;
    conv_backward(cache.activations[static_cast<std::size_t>(l)], params.block(conv_name(l, "weight")),
                  dact, cfg.strides[static_cast<std::size_t>(l)], grad_block(conv_name(l, "weight")),
                  grad_block(conv_name(l, "bias")), l > 0 ? &din : nullptr);
    dact = std::move(din);
  }
}

std::vector<double> backward(const ModelParams& params, const Image& image,
                             const OutputGrads& output_grads) {
  ForwardCache cache;
  const DenseMap out = forward(params, image, cache);
  std::vector<double> grads(params.values.size(), 0.0);
  backward(params, cache, out, output_grads, grads);
  return grads;
}

OptState make_opt_state(const ModelParams& params, double lr, double mu, double weight_decay) {
  return {std::vector<double>(params.values.size(), 0.0), lr, mu, weight_decay};
}

void sgd_step(ModelParams& params, std::span<const double> grads, OptState& opt) {
  if (grads.size() != params.values.size() || opt.momentum.size() != params.values.size()) {
    throw ConfigError("sgd_step: gradient or momentum shape does not match parameters");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) throw NumericError("sgd_step: non-finite gradient");
  }
  for (std::size_t k = 0; k < grads.size(); ++k) {
    double& v = opt.momentum[k];
    v = opt.mu * v + grads[k] + opt.weight_decay * params.values[k];
    params.values[k] -= opt.lr * v;
  }
}

DenseMap mirror_map(const DenseMap& map) {
  DenseMap out = map;
  const int h = map.grid.height;
  const int w = map.grid.width;
  const int nc = map.num_classes;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const std::size_t src = static_cast<std::size_t>(i) * w + j;
      const std::size_t dst = static_cast<std::size_t>(i) * w + (w - 1 - j);
      for (int c = 0; c < nc; ++c) out.cls_logits[dst * nc + c] = map.cls_logits[src * nc + c];
      out.iou_logits[dst] = map.iou_logits[src];
      out.ltrb[dst * 4 + 0] = map.ltrb[src * 4 + 2];
      out.ltrb[dst * 4 + 1] = map.ltrb[src * 4 + 1];
      out.ltrb[dst * 4 + 2] = map.ltrb[src * 4 + 0];
      out.ltrb[dst * 4 + 3] = map.ltrb[src * 4 + 3];
    }
  }
  return out;
}

}  // namespace arsl
