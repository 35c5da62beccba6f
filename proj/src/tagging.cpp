/* Copyright 2026 The RoadAudit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "roadaudit/tagging.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"

namespace roadaudit {

std::string_view threshold_unit_name(ThresholdUnit unit) {
  return unit == ThresholdUnit::kPixels ? "pixels" : "fraction";
}

ThresholdUnit threshold_unit_from_name(std::string_view name) {
  if (name == "pixels") return ThresholdUnit::kPixels;
  if (name == "fraction") return ThresholdUnit::kFraction;
  fail(ErrorKind::kConfig, "unknown threshold unit '" + std::string(name) + "'");
}

ThresholdTable ThresholdTable::uniform(double value, ThresholdUnit unit) {
  ThresholdTable t(unit);
  for (int c = 1; c < kNumClasses; ++c) t.set(class_from_id(c), value);
  return t;
}

void ThresholdTable::set(ClassLabel c, double value) {
  const int id = static_cast<int>(c);
  if (id == kVoidId) fail(ErrorKind::kInvalidLabel, "void cannot carry a tag threshold");
  if (std::isnan(value) || value < 0.0 || (std::isinf(value) && value != kNeverTag)) {
    fail(ErrorKind::kConfig, "threshold for '" + std::string(class_name(c)) +
                                 "' must be finite and >= 0");
  }
  values_[id] = value;
}

bool ThresholdTable::has(ClassLabel c) const { return values_[static_cast<int>(c)].has_value(); }

double ThresholdTable::at(ClassLabel c) const {
  const auto& v = values_[static_cast<int>(c)];
  if (!v) fail(ErrorKind::kConfig, "no threshold for class '" + std::string(class_name(c)) + "'");
  return *v;
}

bool ThresholdTable::complete() const {
  for (int c = 1; c < kNumClasses; ++c) {
    if (!values_[c]) return false;
  }
  return true;
}

std::string threshold_table_to_json(const ThresholdTable& table) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (int c = 1; c < kNumClasses; ++c) {
    const auto label = class_from_id(c);
    if (!table.has(label)) continue;
    const double v = table.at(label);
    nlohmann::ordered_json entry;
    entry["value"] = v == kNeverTag ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v);
    entry["unit"] = threshold_unit_name(table.unit());
    j[std::string(class_name(label))] = entry;
  }
  return j.dump(2);
}

ThresholdTable threshold_table_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, std::string("malformed threshold table: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::kConfig, "threshold table must be a JSON object");
  std::optional<ThresholdUnit> unit;
  std::vector<std::pair<ClassLabel, double>> entries;
  for (const auto& [name, entry] : j.items()) {
    const auto label = class_from_name(name);
    if (!entry.is_object() || !entry.contains("value") || !entry.contains("unit") ||
        !entry["unit"].is_string()) {
      fail(ErrorKind::kConfig, "threshold entry '" + name + "' needs value and unit");
    }
    const auto u = threshold_unit_from_name(entry["unit"].get<std::string>());
    if (unit && *unit != u) fail(ErrorKind::kConfig, "threshold table mixes units");
    unit = u;
    if (entry["value"].is_null()) {
      entries.emplace_back(label, kNeverTag);
    } else if (entry["value"].is_number()) {
      entries.emplace_back(label, entry["value"].get<double>());
    } else {
      fail(ErrorKind::kConfig, "threshold value for '" + name + "' must be a number or null");
    }
  }
  ThresholdTable table(unit.value_or(ThresholdUnit::kPixels));
  for (const auto& [label, value] : entries) table.set(label, value);
  return table;
}

ClassCounts class_pixel_counts(const Mask& mask) {
  ClassCounts counts{};
  for (auto v : mask.values()) {
    if (v >= kNumClasses) validate_class_mask(mask);
    ++counts[v];
  }
  return counts;
}

FrameTags tag_counts(const ClassCounts& counts, std::int64_t area, const ThresholdTable& thresholds) {
  FrameTags tags;
  for (int c = 1; c < kNumClasses; ++c) {
    const auto label = class_from_id(c);
    const double t = thresholds.at(label);
    const bool hit = thresholds.unit() == ThresholdUnit::kPixels
                         ? static_cast<double>(counts[c]) >= t
                         : area > 0 && static_cast<double>(counts[c]) / static_cast<double>(area) >= t;
    if (hit) tags.insert(label);
  }
  return tags;
}

FrameTags tag_frame(const Mask& mask, const ThresholdTable& thresholds) {
  return tag_counts(class_pixel_counts(mask), static_cast<std::int64_t>(mask.values().size()),
                    thresholds);
}

FrameTags frame_tags_from_mask(const Mask& gt) {
  const auto counts = class_pixel_counts(gt);
  FrameTags tags;
  for (int c = 1; c < kNumClasses; ++c) {
    if (counts[c] > 0) tags.insert(class_from_id(c));
  }
  return tags;
}

std::string frame_tags_to_json(std::span<const FrameTags> tags) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& t : tags) {
    auto row = nlohmann::json::array();
    for (auto c : t) row.push_back(class_name(c));
    j.push_back(row);
  }
  return j.dump();
}

std::vector<FrameTags> frame_tags_from_json(const std::string& text) {
  std::vector<FrameTags> out;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_array()) fail(ErrorKind::kData, "tag file must hold a JSON array");
    for (const auto& row : j) {
      FrameTags t;
      for (const auto& name : row) {
        const auto label = class_from_name(name.get<std::string>());
        if (static_cast<int>(label) == kVoidId) fail(ErrorKind::kInvalidLabel, "void is not a tag");
        t.insert(label);
      }
      out.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, std::string("malformed tag file: ") + e.what());
  }
  return out;
}

ThresholdGrid ThresholdGrid::pixels() {
  ThresholdGrid g;
  for (int k = 0; k <= 20; ++k) g.values.push_back(std::ldexp(1.0, k));
  return g;
}

ThresholdGrid ThresholdGrid::fractions() {
  return ThresholdGrid{ThresholdUnit::kFraction, {0.001, 0.002, 0.005, 0.01, 0.02, 0.05}};
}

void validate_threshold_grid(const ThresholdGrid& grid) {
  if (grid.values.empty()) fail(ErrorKind::kConfig, "threshold grid is empty");
  for (double v : grid.values) {
    if (!std::isfinite(v) || v < 0.0) fail(ErrorKind::kConfig, "threshold grid values must be finite and >= 0");
  }
}

FrameCounts frame_counts(const Mask& predicted) {
  return FrameCounts{class_pixel_counts(predicted), static_cast<std::int64_t>(predicted.values().size())};
}

namespace {

// 2TP / (2TP + FP + FN): equal to 2PR / (P + R) and exactly comparable
// between grid points.
double f1_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  if (tp == 0) return 0.0;
  return static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
}

bool reaches(std::int64_t count, std::int64_t area, double t, ThresholdUnit unit) {
  if (unit == ThresholdUnit::kPixels) return static_cast<double>(count) >= t;
  return area > 0 && static_cast<double>(count) / static_cast<double>(area) >= t;
}

}  // namespace

ThresholdSearch search_thresholds(std::span<const FrameCounts> predictions,
                                  std::span<const FrameTags> gt_tags, const ThresholdGrid& grid) {
  if (predictions.size() != gt_tags.size()) {
    fail(ErrorKind::kShape, "threshold search: " + std::to_string(predictions.size()) +
                                " predictions vs " + std::to_string(gt_tags.size()) + " tag sets");
  }
  validate_threshold_grid(grid);
  std::vector<double> values = grid.values;
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());

  ThresholdSearch result{ThresholdTable(grid.unit), {}, {}};
  for (int c = 1; c < kNumClasses; ++c) {
    const auto label = class_from_id(c);
    std::int64_t positives = 0;
    for (const auto& t : gt_tags) positives += t.contains(label);
    if (positives == 0) {
      result.table.set(label, kNeverTag);
      result.warnings.push_back("class '" + std::string(class_name(label)) +
                                "' has no positive validation frame; it will never be tagged");
      continue;
    }
    double best = -1.0;
    double chosen = values.front();
    for (double t : values) {
      std::int64_t tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool pred = reaches(predictions[i].counts[c], predictions[i].area, t, grid.unit);
        const bool truth = gt_tags[i].contains(label);
        tp += pred && truth;
        fp += pred && !truth;
        fn += !pred && truth;
      }
      const double f1 = f1_from_counts(tp, fp, fn);
      if (f1 >= best) {  // ascending scan, so ties keep the larger value
        best = f1;
        chosen = t;
      }
    }
    result.table.set(label, chosen);
    result.best_f1[c] = best;
  }
  return result;
}

TagScores tag_prf(std::span<const FrameTags> predicted, std::span<const FrameTags> gt) {
  if (predicted.size() != gt.size()) {
    fail(ErrorKind::kShape, "tag scoring: " + std::to_string(predicted.size()) +
                                " predicted frames vs " + std::to_string(gt.size()) + " ground-truth");
  }
  TagScores s;
  double f1_sum = 0.0;
  int present = 0;
  for (int c = 1; c < kNumClasses; ++c) {
    const auto label = class_from_id(c);
    auto& r = s.per_class[c];
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const bool p = predicted[i].contains(label);
      const bool g = gt[i].contains(label);
      r.tp += p && g;
      r.fp += p && !g;
      r.fn += !p && g;
    }
    r.precision = r.tp + r.fp > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp) : 0.0;
    r.recall = r.tp + r.fn > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
    r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    if (r.support() > 0) {
      f1_sum += r.f1;
      ++present;
    }
  }
  if (present > 0) s.macro_f1 = f1_sum / present;
  return s;
}

std::string tag_scores_to_json(const TagScores& scores, const std::string& model_name) {
  nlohmann::ordered_json j;
  j["model"] = model_name;
  j["classes"] = nlohmann::ordered_json::object();
  for (int c = 1; c < kNumClasses; ++c) {
    const auto& r = scores.per_class[c];
    nlohmann::ordered_json e;
    e["precision"] = r.precision;
    e["recall"] = r.recall;
    e["f1"] = r.f1;
    e["tp"] = r.tp;
    e["fp"] = r.fp;
    e["fn"] = r.fn;
    e["support"] = r.support();
    j["classes"][std::string(class_name(class_from_id(c)))] = e;
  }
  j["macro_f1"] = scores.macro_f1 ? nlohmann::ordered_json(*scores.macro_f1) : nlohmann::ordered_json(nullptr);
  return j.dump(2);
}

std::string tag_scores_to_table(const TagScores& scores, const std::string& model_name) {
  std::string out = "Model: " + model_name + "\n";
  char line[128];
  std::snprintf(line, sizeof(line), "%-14s | %13s | %10s | %6s | %7s\n", "Class", "Precision (%)",
                "Recall (%)", "F1 (%)", "Support");
  out += line;
  out += std::string(62, '-') + "\n";
  for (int c = 1; c < kNumClasses; ++c) {
    const auto& r = scores.per_class[c];
    std::snprintf(line, sizeof(line), "%-14s | %13.1f | %10.1f | %6.1f | %7lld\n",
                  std::string(class_name(class_from_id(c))).c_str(), r.precision * 100.0,
                  r.recall * 100.0, r.f1 * 100.0, static_cast<long long>(r.support()));
    out += line;
  }
  if (scores.macro_f1) {
    std::snprintf(line, sizeof(line), "macro-F1: %.1f %%\n", *scores.macro_f1 * 100.0);
  } else {
    std::snprintf(line, sizeof(line), "macro-F1: undefined (no ground-truth positives)\n");
  }
  out += line;
  return out;
}

}  // namespace roadaudit
