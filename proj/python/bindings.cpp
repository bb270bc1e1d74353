// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "arsl/assignment.hpp"
#include "arsl/cli.hpp"
#include "arsl/config.hpp"
#include "arsl/data.hpp"
#include "arsl/diagnostics.hpp"
#include "arsl/errors.hpp"
#include "arsl/eval.hpp"
#include "arsl/geometry.hpp"
#include "arsl/jce.hpp"
#include "arsl/model.hpp"

namespace py = pybind11;
using namespace arsl;

namespace {

py::array_t<double> image_to_array(const Image& img) {
  py::array_t<double> out({img.height, img.width, img.channels});
  auto v = out.mutable_unchecked<3>();
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) v(y, x, c) = img.at(c, y, x);
    }
  }
  return out;
}

Image array_to_image(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 3) throw ConfigError("image must have shape (height, width, channels)");
  const auto v = arr.unchecked<3>();
  Image img(static_cast<int>(arr.shape(2)), static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) img.at(c, y, x) = v(y, x, c);
    }
  }
  return img;
}

py::array_t<double> reshape(const std::vector<double>& values, std::vector<py::ssize_t> shape) {
  py::array_t<double> out(shape);
  std::copy(values.begin(), values.end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Dense semi-supervised detection toolkit";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<GeometryError>(m, "GeometryError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<UndefinedError>(m, "UndefinedError", base.ptr());

  py::class_<Box>(m, "Box")
      .def(py::init<>())
      .def(py::init<double, double, double, double>(), py::arg("x1"), py::arg("y1"), py::arg("x2"), py::arg("y2"))
      .def_readwrite("x1", &Box::x1)
      .def_readwrite("y1", &Box::y1)
      .def_readwrite("x2", &Box::x2)
      .def_readwrite("y2", &Box::y2)
      .def_property_readonly("area", &Box::area)
      .def("__repr__", [](const Box& b) {
        return "Box(" + std::to_string(b.x1) + ", " + std::to_string(b.y1) + ", " + std::to_string(b.x2) + ", " +
               std::to_string(b.y2) + ")";
      });

  py::class_<GtObject>(m, "GtObject")
      .def(py::init<>())
      .def(py::init([](const Box& b, int cls) { return GtObject{b, cls}; }), py::arg("box"), py::arg("cls"))
      .def_readwrite("box", &GtObject::box)
      .def_readwrite("cls", &GtObject::cls);

  py::class_<Detection>(m, "Detection")
      .def(py::init([](const Box& b, int cls, double score) { return Detection{b, cls, score}; }), py::arg("box"),
           py::arg("cls"), py::arg("score"))
      .def_readwrite("box", &Detection::box)
      .def_readwrite("cls", &Detection::cls)
      .def_readwrite("score", &Detection::score);

  m.def("iou", &iou, py::arg("a"), py::arg("b"));
  m.def("giou", &giou, py::arg("a"), py::arg("b"));
  m.def("nms", &nms, py::arg("detections"), py::arg("iou_threshold"));
  m.def("sigmoid", &sigmoid);

  m.def("joint_confidence", [](const std::vector<double>& cls, double q) { return joint_confidence(cls, q); },
        py::arg("cls_scores"), py::arg("iou_score"));
  m.def(
      "united_focal_loss",
      [](const std::vector<double>& cls_logits, double iou_logit, const std::vector<double>& target, double gamma) {
        ClassTarget t{target, TargetSource::UnlabeledTeacher};
        const FocalLossGrad f = united_focal_loss(cls_logits, iou_logit, t, gamma);
        return py::make_tuple(f.loss, f.grad_cls_logits, f.grad_iou_logit);
      },
      py::arg("cls_logits"), py::arg("iou_logit"), py::arg("target"), py::arg("gamma") = 2.0,
      "Returns (loss, grad_cls_logits, grad_iou_logit).");
  m.def(
      "iou_branch_loss",
      [](double p, double t) {
        const BceLossGrad b = iou_branch_loss(p, t);
        return py::make_tuple(b.loss, b.grad_logit);
      },
      py::arg("pred_iou"), py::arg("target_iou"));
  m.def("unlabeled_target", [](const std::vector<double>& s) { return unlabeled_target(s).values; });

  m.def("dynamic_positive_threshold", [](const std::vector<double>& v) { return dynamic_positive_threshold(v); });
  m.def(
      "tsa_partition",
      [](const std::vector<double>& maxes, double tau_neg, double tau_pos) {
        std::vector<std::string> out;
        for (Verdict v : tsa_partition(maxes, tau_neg, tau_pos)) {
          out.push_back(v == Verdict::Negative ? "negative" : v == Verdict::Positive ? "positive" : "candidate");
        }
        return out;
      },
      py::arg("maxes"), py::arg("tau_neg"), py::arg("tau_pos"));
  m.def(
      "assign_tsa",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& joint,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& boxes, double stride, double tau_neg,
         double iou_match_threshold, bool mining) {
        if (joint.ndim() != 3 || boxes.ndim() != 3 || boxes.shape(2) != 4 || boxes.shape(0) != joint.shape(0) ||
            boxes.shape(1) != joint.shape(1)) {
          throw ConfigError("joint must be (H, W, C) and boxes (H, W, 4) on the same grid");
        }
        ScoreMap map;
        map.grid = {static_cast<int>(joint.shape(0)), static_cast<int>(joint.shape(1)), stride};
        map.num_classes = static_cast<int>(joint.shape(2));
        map.joint.assign(joint.data(), joint.data() + joint.size());
        const double* b = boxes.data();
        for (int k = 0; k < map.size(); ++k) map.boxes.push_back({b[4 * k], b[4 * k + 1], b[4 * k + 2], b[4 * k + 3]});
        TsaConfig cfg;
        cfg.tau_neg = tau_neg;
        cfg.iou_match_threshold = iou_match_threshold;
        cfg.mining = mining;
        const AssignmentResult r = assign_tsa(map, cfg);
        py::list verdicts, cls_active, loc_active, loc_targets;
        for (const LocationAssignment& a : r.locations) {
          verdicts.append(a.verdict == Verdict::Negative   ? "negative"
                          : a.verdict == Verdict::Positive ? "positive"
                                                           : "candidate");
          cls_active.append(a.cls_active);
          loc_active.append(a.loc_active);
          if (a.loc_target) {
            loc_targets.append(*a.loc_target);
          } else {
            loc_targets.append(py::none());
          }
        }
        py::dict out;
        out["tau_pos"] = r.tau_pos;
        out["verdicts"] = verdicts;
        out["cls_active"] = cls_active;
        out["loc_active"] = loc_active;
        out["loc_targets"] = loc_targets;
        return out;
      },
      py::arg("joint"), py::arg("boxes"), py::arg("stride") = 8.0, py::arg("tau_neg") = 0.1,
      py::arg("iou_match_threshold") = 0.6, py::arg("mining") = true,
      "Task-separation assignment of one teacher map; per-location lists in row-major order.");
  m.def("weighted_box", [](const std::vector<Box>& b, const std::vector<double>& w) { return weighted_box(b, w); },
        py::arg("boxes"), py::arg("weights"));

  m.def(
      "generate_scene",
      [](std::uint64_t seed) {
        const Sample s = generate_scene(seed, SceneSpec{});
        return py::make_tuple(image_to_array(s.image), s.gt);
      },
      py::arg("seed"), "Returns (image HxWx3, list of GtObject).");

  py::class_<ModelParams>(m, "ModelParams")
      .def_property_readonly("num_classes", [](const ModelParams& p) { return p.config.num_classes; })
      .def_property_readonly("size", [](const ModelParams& p) { return p.values.size(); })
      .def_property(
          "values", [](const ModelParams& p) { return reshape(p.values, {static_cast<py::ssize_t>(p.values.size())}); },
          [](ModelParams& p, const std::vector<double>& v) {
            if (v.size() != p.values.size()) throw ConfigError("parameter vector has the wrong length");
            p.values = v;
          });
  m.def(
      "init_params", [](std::uint64_t seed, int num_classes) { return init_params(seed, num_classes); },
      py::arg("seed"), py::arg("num_classes") = 3);
  m.def(
      "forward",
      [](const ModelParams& params, const py::array_t<double, py::array::c_style | py::array::forcecast>& image) {
        const DenseMap map = forward(params, array_to_image(image));
        const py::ssize_t h = map.grid.height, w = map.grid.width;
        py::dict out;
        out["cls_logits"] = reshape(map.cls_logits, {h, w, map.num_classes});
        out["iou_logits"] = reshape(map.iou_logits, {h, w});
        out["ltrb"] = reshape(map.ltrb, {h, w, 4});
        const ScoreMap scores = score_map(map);
        out["joint"] = reshape(scores.joint, {h, w, map.num_classes});
        std::vector<double> corners;
        for (const Box& b : scores.boxes) corners.insert(corners.end(), {b.x1, b.y1, b.x2, b.y2});
        out["boxes"] = reshape(corners, {h, w, 4});
        return out;
      },
      py::arg("params"), py::arg("image"));
  m.def(
      "predict",
      [](const ModelParams& params, const py::array_t<double, py::array::c_style | py::array::forcecast>& image,
         double score_threshold, double nms_threshold) {
        return predict(params, array_to_image(image), score_threshold, nms_threshold);
      },
      py::arg("params"), py::arg("image"), py::arg("score_threshold") = 0.05, py::arg("nms_threshold") = 0.6);

  m.def(
      "average_precision",
      [](const std::vector<std::tuple<int, Detection>>& dets, const std::vector<std::tuple<int, GtObject>>& gts,
         double iou_threshold, int num_classes) {
        std::vector<ImageDetection> d;
        for (const auto& [img, det] : dets) d.push_back({img, det});
        std::vector<ImageGt> g;
        for (const auto& [img, obj] : gts) g.push_back({img, obj});
        const ApResult r = average_precision(d, g, iou_threshold, num_classes);
        return py::make_tuple(r.mean, r.per_class);
      },
      py::arg("detections"), py::arg("ground_truth"), py::arg("iou_threshold"), py::arg("num_classes") = 3,
      "Detections and ground truth are (image id, object) pairs. Returns (mean, per-class list).");

  m.def("pearson_cc", [](const std::vector<double>& x, const std::vector<double>& y) { return pearson_cc(x, y); });

  m.def("default_config", []() { return echo_config(ExperimentConfig{}); });
  m.def("normalize_config", [](const std::string& text) { return echo_config(parse_config(text)); },
        py::arg("text"), "Parses a config and returns its canonical form.");
  m.def(
      "run_cli", [](const std::vector<std::string>& args) { return run_cli(args); }, py::arg("args"),
      "Runs an arsl command and returns its exit code.");
}
