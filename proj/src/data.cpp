// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "arsl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "arsl/errors.hpp"
#include "arsl/rng.hpp"

namespace arsl {

namespace {

double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

/// Pixel-center membership test for one shape.
bool shape_contains(int cls, double x0, double y0, double size, double px, double py) {
  switch (cls) {
    case 0: {
      const double r = size / 2.0;
      const double dx = px - (x0 + r);
      const double dy = py - (y0 + r);
      return dx * dx + dy * dy <= r * r;
    }
    case 1:
      return px >= x0 && px < x0 + size && py >= y0 && py < y0 + size;
    default: {
      // Apex at the top center, base along the bottom edge.
      if (py < y0 || py >= y0 + size) return false;
      const double half = (py - y0) / size * (size / 2.0);
      const double mid = x0 + size / 2.0;
      return px >= mid - half && px < mid + half;
    }
  }
}

}  // namespace

std::vector<std::vector<Color>> SceneSpec::default_palette() {
  const Color red{0.85, 0.25, 0.25};
  const Color green{0.25, 0.8, 0.3};
  const Color blue{0.25, 0.45, 0.9};
  const Color yellow{0.9, 0.8, 0.2};
  return {{red, yellow, blue}, {green, red, yellow}, {blue, green, red}};
}

void SceneSpec::validate() const {
  if (image_size < 8) throw ConfigError("scene: image_size must be >= 8");
  if (num_classes < 1 || num_classes > 3) throw ConfigError("scene: num_classes must be in [1, 3]");
  if (min_objects < 1 || max_objects < min_objects) {
    throw ConfigError("scene: need 1 <= min_objects <= max_objects");
  }
  if (min_size < 2.0 || max_size < min_size || max_size > image_size) {
    throw ConfigError("scene: need 2 <= min_size <= max_size <= image_size");
  }
  if (noise < 0.0) throw ConfigError("scene: noise must be >= 0");
  if (static_cast<int>(palette.size()) < num_classes) {
    throw ConfigError("scene: palette needs one entry per class");
  }
  for (const auto& colors : palette) {
    if (colors.empty()) throw ConfigError("scene: empty class palette");
  }
}

Sample generate_scene(std::uint64_t seed, const SceneSpec& spec) {
  spec.validate();
  Rng rng(seed);
  const int n = spec.image_size;
  Sample sample;
  sample.seed = seed;
  sample.image = Image(3, n, n);

  const double base = rng.uniform(0.15, 0.55);
  const Color tint{rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05)};
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) sample.image.at(c, y, x) = base + tint[static_cast<std::size_t>(c)];
    }
  }

  const int count = rng.uniform_int(spec.min_objects, spec.max_objects);
  constexpr int kMaxTries = 200;
  for (int k = 0; k < count; ++k) {
    const int cls = rng.uniform_int(0, spec.num_classes - 1);
    for (int attempt = 0; attempt < kMaxTries; ++attempt) {
      const double size = rng.uniform(spec.min_size, spec.max_size);
      const double x0 = rng.uniform(0.0, n - size);
      const double y0 = rng.uniform(0.0, n - size);

      int minx = n, miny = n, maxx = -1, maxy = -1;
      const int xs = std::max(0, static_cast<int>(std::floor(x0)));
      const int ys = std::max(0, static_cast<int>(std::floor(y0)));
      const int xe = std::min(n - 1, static_cast<int>(std::ceil(x0 + size)));
      const int ye = std::min(n - 1, static_cast<int>(std::ceil(y0 + size)));
      for (int y = ys; y <= ye; ++y) {
        for (int x = xs; x <= xe; ++x) {
          if (shape_contains(cls, x0, y0, size, x + 0.5, y + 0.5)) {
            minx = std::min(minx, x);
            maxx = std::max(maxx, x);
            miny = std::min(miny, y);
            maxy = std::max(maxy, y);
          }
        }
      }
      if (maxx < minx || maxy < miny) continue;
      const Box box{static_cast<double>(minx), static_cast<double>(miny),
                    static_cast<double>(maxx + 1), static_cast<double>(maxy + 1)};
      const bool crowded = std::any_of(sample.gt.begin(), sample.gt.end(), [&](const GtObject& o) {
        return iou(o.box, box) >= spec.max_pair_iou;
      });
      if (crowded) continue;

      const auto& colors = spec.palette[static_cast<std::size_t>(cls)];
      const Color& pick = colors[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(colors.size()) - 1))];
      Color color;
      for (int c = 0; c < 3; ++c) {
        color[static_cast<std::size_t>(c)] =
            pick[static_cast<std::size_t>(c)] + rng.uniform(-spec.color_jitter, spec.color_jitter);
      }
      for (int y = miny; y <= maxy; ++y) {
        for (int x = minx; x <= maxx; ++x) {
          if (shape_contains(cls, x0, y0, size, x + 0.5, y + 0.5)) {
            for (int c = 0; c < 3; ++c) sample.image.at(c, y, x) = color[static_cast<std::size_t>(c)];
          }
        }
      }
      sample.gt.push_back({box, cls});
      break;
    }
  }

  for (double& v : sample.image.data) v = quantize(v + spec.noise * rng.normal());
  return sample;
}

Splits make_splits(int n_scenes, double labeled_fraction, std::uint64_t seed) {
  if (n_scenes < 0) throw ConfigError("make_splits: n_scenes must be >= 0");
  if (!(labeled_fraction >= 0.0 && labeled_fraction <= 1.0)) {
    throw ConfigError("make_splits: labeled_fraction must be in [0, 1]");
  }
  std::vector<int> ids(static_cast<std::size_t>(n_scenes));
  for (int k = 0; k < n_scenes; ++k) ids[static_cast<std::size_t>(k)] = k;
  Rng rng(mix_seed(seed, 0x5b1175));
  rng.shuffle(ids);
  const auto n_labeled = static_cast<std::size_t>(std::llround(n_scenes * labeled_fraction));
  Splits s;
  s.labeled.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_labeled));
  s.unlabeled.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_labeled), ids.end());
  std::sort(s.labeled.begin(), s.labeled.end());
  std::sort(s.unlabeled.begin(), s.unlabeled.end());
  return s;
}

std::vector<Sample> generate_dataset(int n_scenes, double labeled_fraction, std::uint64_t seed,
                                     const SceneSpec& spec) {
  const Splits splits = make_splits(n_scenes, labeled_fraction, seed);
  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(n_scenes));
  for (int k = 0; k < n_scenes; ++k) {
    samples.push_back(generate_scene(mix_seed(seed, static_cast<std::uint64_t>(k)), spec));
  }
  for (int k : splits.unlabeled) samples[static_cast<std::size_t>(k)].split = Split::Unlabeled;
  return samples;
}

Image flip_image(const Image& image) {
  Image out(image.channels, image.height, image.width);
  for (int c = 0; c < image.channels; ++c) {
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) out.at(c, y, image.width - 1 - x) = image.at(c, y, x);
    }
  }
  return out;
}

std::vector<GtObject> flip_gt(const std::vector<GtObject>& gt, int width) {
  std::vector<GtObject> out = gt;
  for (GtObject& o : out) {
    const Box b = o.box;
    o.box.x1 = width - b.x2;
    o.box.x2 = width - b.x1;
  }
  return out;
}

AugmentedView flip_view(const AugmentedView& view) {
  return {flip_image(view.image), flip_gt(view.gt, view.image.width), !view.flipped};
}

AugmentedView weak_augment(const Image& image, const std::vector<GtObject>& gt, std::uint64_t seed) {
  Rng rng(seed);
  AugmentedView view{image, gt, false};
  if (rng.bernoulli(0.5)) return flip_view(view);
  return view;
}

StrongView strong_augment(const AugmentedView& weak, std::uint64_t seed, const StrongAugConfig& cfg) {
  Rng rng(mix_seed(seed, 0x57a0));
  StrongView out{weak.image, false};
  if (cfg.independent_flip && rng.bernoulli(0.5)) {
    out.image = flip_image(out.image);
    out.mirrored = true;
  }
  Image& img = out.image;
  const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
  for (int c = 0; c < img.channels; ++c) {
    const double scale = rng.uniform(cfg.scale_lo, cfg.scale_hi);
    const double shift = rng.uniform(-cfg.shift, cfg.shift);
    if (scale == 1.0 && shift == 0.0) continue;
    double* p = img.data.data() + static_cast<std::size_t>(c) * plane;
    for (std::size_t k = 0; k < plane; ++k) p[k] = std::clamp(p[k] * scale + shift, 0.0, 1.0);
  }
  if (cfg.cutout) {
    const int side = std::min({rng.uniform_int(cfg.cutout_min, cfg.cutout_max), img.width, img.height});
    const int x0 = rng.uniform_int(0, img.width - side);
    const int y0 = rng.uniform_int(0, img.height - side);
    for (int c = 0; c < img.channels; ++c) {
      for (int y = y0; y < y0 + side; ++y) {
        for (int x = x0; x < x0 + side; ++x) img.at(c, y, x) = 0.5;
      }
    }
  }
  return out;
}

DenseMap align_teacher_to_student(const DenseMap& teacher, bool mirrored) {
  return mirrored ? mirror_map(teacher) : teacher;
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 3) throw ConfigError("write_ppm: expected a 3-channel image");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::string row(static_cast<std::size_t>(image.width) * 3, '\0');
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const long v = std::lround(std::clamp(image.at(c, y, x), 0.0, 1.0) * 255.0);
        row[static_cast<std::size_t>(x) * 3 + c] = static_cast<char>(static_cast<unsigned char>(v));
      }
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) {
    throw FormatError(path.string() + ": not an 8-bit binary PPM");
  }
  in.get();
  Image img(3, h, w);
  std::string row(static_cast<std::size_t>(w) * 3, '\0');
  for (int y = 0; y < h; ++y) {
    if (!in.read(row.data(), static_cast<std::streamsize>(row.size()))) {
      throw FormatError(path.string() + ": truncated pixel data");
    }
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.at(c, y, x) = static_cast<unsigned char>(row[static_cast<std::size_t>(x) * 3 + c]) / 255.0;
      }
    }
  }
  return img;
}

void save_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples) {
  std::filesystem::create_directories(dir / "images");
  std::ofstream index(dir / "annotations.jsonl", std::ios::trunc);
  if (!index) throw FormatError("cannot write " + (dir / "annotations.jsonl").string());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const Sample& s = samples[k];
    char name[32];
    std::snprintf(name, sizeof name, "scene_%05zu.ppm", k);
    write_ppm(dir / "images" / name, s.image);
    nlohmann::ordered_json rec;
    rec["id"] = k;
    rec["file"] = std::string("images/") + name;
    rec["split"] = s.split == Split::Labeled ? "labeled" : "unlabeled";
    rec["seed"] = s.seed;
    rec["width"] = s.image.width;
    rec["height"] = s.image.height;
    rec["objects"] = nlohmann::json::array();
    for (const GtObject& o : s.gt) {
      rec["objects"].push_back({{"class", o.cls}, {"box", {o.box.x1, o.box.y1, o.box.x2, o.box.y2}}});
    }
    index << rec.dump() << '\n';
  }
}

std::vector<Sample> load_dataset(const std::filesystem::path& dir) {
  std::ifstream index(dir / "annotations.jsonl");
  if (!index) throw FormatError("cannot open " + (dir / "annotations.jsonl").string());
  std::vector<Sample> samples;
  std::string line;
  int lineno = 0;
  while (std::getline(index, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      Sample s;
      s.image = read_ppm(dir / rec.at("file").get<std::string>());
      const std::string split = rec.at("split").get<std::string>();
      if (split != "labeled" && split != "unlabeled") throw ParseError("unknown split '" + split + "'");
      s.split = split == "labeled" ? Split::Labeled : Split::Unlabeled;
      s.seed = rec.at("seed").get<std::uint64_t>();
      for (const auto& o : rec.at("objects")) {
        const auto& b = o.at("box");
        s.gt.push_back({{b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                         b.at(3).get<double>()},
                        o.at("class").get<int>()});
      }
      samples.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("annotations.jsonl line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("annotations.jsonl line " + std::to_string(lineno) + ": " + e.what());
    } catch (const FormatError& e) {
      throw ParseError("annotations.jsonl line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return samples;
}

}  // namespace arsl
