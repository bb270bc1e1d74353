// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "arsl/records.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "arsl/errors.hpp"

namespace arsl {

using nlohmann::ordered_json;

namespace {

ordered_json box_json(const Box& b) { return ordered_json::array({b.x1, b.y1, b.x2, b.y2}); }

Box parse_box(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw ParseError("box must be an array of 4 numbers");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

template <typename Fn>
auto for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    } catch (const GeometryError& e) {
      throw ParseError(path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Negative: return "negative";
    case Verdict::Candidate: return "candidate";
    case Verdict::Positive: return "positive";
  }
  return "negative";
}

std::string prediction_record(int image, const ScoreMap& map) {
  ordered_json j;
  j["image"] = image;
  j["height"] = map.grid.height;
  j["width"] = map.grid.width;
  j["stride"] = map.grid.stride;
  j["num_classes"] = map.num_classes;
  j["joint"] = map.joint;
  ordered_json boxes = ordered_json::array();
  for (const Box& b : map.boxes) boxes.push_back(box_json(b));
  j["boxes"] = boxes;
  return j.dump();
}

ScoreMap parse_prediction_record(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  if (!j.is_object()) throw ParseError("expected a JSON object");
  ScoreMap map;
  map.grid.height = j.at("height").get<int>();
  map.grid.width = j.at("width").get<int>();
  map.grid.stride = j.at("stride").get<double>();
  map.num_classes = j.at("num_classes").get<int>();
  if (map.grid.height < 1 || map.grid.width < 1 || !(map.grid.stride > 0.0) || map.num_classes < 1) {
    throw ParseError("grid dimensions and num_classes must be positive");
  }
  map.joint = j.at("joint").get<std::vector<double>>();
  const std::size_t n = static_cast<std::size_t>(map.grid.size());
  if (map.joint.size() != n * static_cast<std::size_t>(map.num_classes)) {
    throw ParseError("joint holds " + std::to_string(map.joint.size()) + " values, expected " +
                     std::to_string(n * static_cast<std::size_t>(map.num_classes)));
  }
  for (double v : map.joint) {
    if (!(v >= 0.0 && v <= 1.0)) throw ParseError("joint scores must lie in [0, 1]");
  }
  const auto& boxes = j.at("boxes");
  if (!boxes.is_array() || boxes.size() != n) throw ParseError("boxes must hold one box per location");
  for (const auto& b : boxes) map.boxes.push_back(parse_box(b));
  return map;
}

void write_predictions(const std::filesystem::path& path, const std::vector<ScoreMap>& maps) {
  std::string text;
  for (std::size_t k = 0; k < maps.size(); ++k) text += prediction_record(static_cast<int>(k), maps[k]) + '\n';
  write_text(path, text);
}

std::vector<ScoreMap> read_predictions(const std::filesystem::path& path) {
  std::vector<ScoreMap> maps;
  for_each_line(path, [&](const std::string& line) { maps.push_back(parse_prediction_record(line)); });
  return maps;
}

std::string gt_record(int image, const std::vector<GtObject>& gt) {
  ordered_json j;
  j["image"] = image;
  j["objects"] = ordered_json::array();
  for (const GtObject& o : gt) j["objects"].push_back({{"class", o.cls}, {"box", box_json(o.box)}});
  return j.dump();
}

void write_gt(const std::filesystem::path& path, const std::vector<std::vector<GtObject>>& gt) {
  std::string text;
  for (std::size_t k = 0; k < gt.size(); ++k) text += gt_record(static_cast<int>(k), gt[k]) + '\n';
  write_text(path, text);
}

std::vector<std::vector<GtObject>> read_gt(const std::filesystem::path& path) {
  std::vector<std::vector<GtObject>> out;
  for_each_line(path, [&](const std::string& line) {
    const auto j = nlohmann::json::parse(line);
    if (!j.is_object()) throw ParseError("expected a JSON object");
    std::vector<GtObject> gt;
    for (const auto& o : j.at("objects")) {
      GtObject obj{parse_box(o.at("box")), o.at("class").get<int>()};
      if (obj.cls < 0) throw ParseError("class must be >= 0");
      if (!obj.box.valid()) throw ParseError("degenerate box");
      gt.push_back(obj);
    }
    out.push_back(std::move(gt));
  });
  return out;
}

std::string assignment_records(int image, const AssignmentResult& result) {
  std::string out;
  for (std::size_t k = 0; k < result.locations.size(); ++k) {
    const LocationAssignment& a = result.locations[k];
    const GridLocation g = result.grid.at(static_cast<int>(k));
    ordered_json j;
    j["image"] = image;
    j["location"] = k;
    j["row"] = g.i;
    j["col"] = g.j;
    j["verdict"] = to_string(a.verdict);
    j["cls_active"] = a.cls_active;
    j["loc_active"] = a.loc_active;
    j["cls_target"] = a.cls_target ? ordered_json(a.cls_target->values) : ordered_json(nullptr);
    j["loc_target"] = a.loc_target ? box_json(*a.loc_target) : ordered_json(nullptr);
    out += j.dump() + '\n';
  }
  return out;
}

namespace {

ordered_json parts_json(const LossParts& p) {
  return {{"cls", p.cls}, {"loc", p.loc}, {"iou", p.iou}, {"n_cls", p.n_cls}, {"n_loc", p.n_loc}};
}

}  // namespace

std::string step_record_json(const StepRecord& r) {
  ordered_json j;
  j["iteration"] = r.iteration;
  j["phase"] = r.burn_in ? "burn_in" : "self_training";
  j["sup"] = parts_json(r.sup);
  j["sup_total"] = r.sup_total;
  j["unsup"] = parts_json(r.unsup);
  j["unsup_total"] = r.unsup_total;
  j["total"] = r.total;
  j["tau_pos_mean"] = std::isfinite(r.tau_pos_mean) ? ordered_json(r.tau_pos_mean) : ordered_json(nullptr);
  j["tau_pos_infinite"] = r.tau_pos_infinite;
  j["verdicts"] = {{"negative", r.negatives}, {"candidate", r.candidates}, {"positive", r.positives}};
  j["pseudo_boxes"] = r.pseudo_boxes;
  return j.dump();
}

std::string ambiguity_json(const AmbiguityCounts& c) {
  ordered_json j;
  j["true_positives"] = c.true_positives;
  j["false_positives"] = c.false_positives;
  j["false_negatives"] = c.false_negatives;
  j["oracle_positives"] = c.oracle_positives;
  return j.dump(2);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
  if (!out) throw FormatError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace arsl
