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

#include "roadaudit/metrics.hpp"

#include <cstdio>

#include "json.hpp"

namespace roadaudit {

ConfusionMatrix::ConfusionMatrix(int num_labels, std::optional<int> void_label)
    : k_(num_labels), void_(void_label) {
  if (num_labels < 1) fail(ErrorKind::kConfig, "confusion matrix needs >= 1 label");
  if (void_ && (*void_ < 0 || *void_ >= num_labels)) {
    fail(ErrorKind::kConfig, "void label outside the label range");
  }
  counts_.assign(static_cast<std::size_t>(k_) * k_, 0);
}

ConfusionMatrix ConfusionMatrix::for_level(HierarchyLevel level) {
  return ConfusionMatrix(level_size(level), kVoidId);
}

void ConfusionMatrix::accumulate(const Mask& pred, const Mask& gt) {
  require_same_shape(pred, gt, "confusion accumulate");
  auto p = pred.values();
  auto g = gt.values();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] >= k_ || p[i] >= k_) {
      const int bad = g[i] >= k_ ? g[i] : p[i];
      fail(ErrorKind::kInvalidLabel, "label id " + std::to_string(bad) + " at pixel " +
                                         std::to_string(i) + " outside [0, " +
                                         std::to_string(k_ - 1) + "]");
    }
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (void_ && g[i] == *void_) continue;
    ++counts_[static_cast<std::size_t>(g[i]) * k_ + p[i]];
  }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.k_ != k_ || other.void_ != void_) {
    fail(ErrorKind::kShape, "cannot merge confusion matrices over different label spaces");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

std::int64_t ConfusionMatrix::row_sum(int c) const {
  std::int64_t s = 0;
  for (int j = 0; j < k_; ++j) s += at(c, j);
  return s;
}

std::int64_t ConfusionMatrix::col_sum(int c) const {
  std::int64_t s = 0;
  for (int i = 0; i < k_; ++i) s += at(i, c);
  return s;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t s = 0;
  for (auto v : counts_) s += v;
  return s;
}

std::optional<double> iou(const ConfusionMatrix& cm, int c) {
  if (c < 0 || c >= cm.num_labels()) {
    fail(ErrorKind::kInvalidLabel, "IoU requested for label " + std::to_string(c));
  }
  const std::int64_t tp = cm.at(c, c);
  const std::int64_t denom = cm.row_sum(c) + cm.col_sum(c) - tp;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(denom);
}

double mean_iou(const ConfusionMatrix& cm, std::span<const int> evaluated) {
  double sum = 0.0;
  int present = 0;
  for (int c : evaluated) {
    if (auto v = iou(cm, c)) {
      sum += *v;
      ++present;
    }
  }
  if (present == 0) fail(ErrorKind::kData, "mean IoU undefined: no evaluated class present");
  return sum / present;
}

double weighted_iou(const ConfusionMatrix& cm, std::span<const int> evaluated) {
  std::int64_t gt_total = 0;
  for (int c : evaluated) gt_total += cm.row_sum(c);
  if (gt_total == 0) {
    fail(ErrorKind::kData, "weighted IoU undefined: no evaluated ground-truth pixels");
  }
  double sum = 0.0;
  for (int c : evaluated) {
    const std::int64_t gt = cm.row_sum(c);
    if (gt == 0) continue;
    sum += *iou(cm, c) * static_cast<double>(gt) / static_cast<double>(gt_total);
  }
  return sum;
}

EvalReport make_report(const ConfusionMatrix& cm, HierarchyLevel level) {
  EvalReport r;
  r.level = level;
  r.confusion = cm;
  for (int c = 0; c < cm.num_labels(); ++c) {
    r.per_class_iou.push_back(c == kVoidId ? std::nullopt : iou(cm, c));
  }
  const auto evaluated = evaluated_ids(level);
  try {
    r.mean_iou = mean_iou(cm, evaluated);
  } catch (const Error&) {
    r.mean_iou.reset();
  }
  try {
    r.weighted_iou = weighted_iou(cm, evaluated);
  } catch (const Error&) {
    r.weighted_iou.reset();
  }
  if (level == HierarchyLevel::kRoot) {
    r.road_defect_iou = iou(cm, static_cast<int>(RootLabel::kRoadDefect));
  }
  return r;
}

HierarchyEvaluator::HierarchyEvaluator() {
  for (auto level : kAllLevels) cms_.emplace(level, ConfusionMatrix::for_level(level));
}

void HierarchyEvaluator::accumulate(const Mask& pred_classes, const Mask& gt_classes) {
  require_same_shape(pred_classes, gt_classes, "evaluate_hierarchy");
  for (auto level : kAllLevels) {
    cms_.at(level).accumulate(rollup_mask(pred_classes, level), rollup_mask(gt_classes, level));
  }
}

const ConfusionMatrix& HierarchyEvaluator::confusion(HierarchyLevel level) const {
  return cms_.at(level);
}

std::map<HierarchyLevel, EvalReport> HierarchyEvaluator::reports() const {
  std::map<HierarchyLevel, EvalReport> out;
  for (const auto& [level, cm] : cms_) out.emplace(level, make_report(cm, level));
  return out;
}

std::map<HierarchyLevel, EvalReport> evaluate_hierarchy(const std::vector<Mask>& pred,
                                                        const std::vector<Mask>& gt) {
  if (pred.size() != gt.size()) {
    fail(ErrorKind::kShape, "evaluate_hierarchy: " + std::to_string(pred.size()) +
                                " predictions vs " + std::to_string(gt.size()) + " targets");
  }
  HierarchyEvaluator ev;
  for (std::size_t i = 0; i < pred.size(); ++i) ev.accumulate(pred[i], gt[i]);
  return ev.reports();
}

namespace {

nlohmann::ordered_json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string reports_to_json(const std::map<HierarchyLevel, EvalReport>& reports,
                            const std::string& model_name) {
  nlohmann::ordered_json doc;
  doc["model"] = model_name;
  doc["levels"] = nlohmann::ordered_json::object();
  for (auto level : kAllLevels) {
    auto it = reports.find(level);
    if (it == reports.end()) continue;
    const auto& r = it->second;
    nlohmann::ordered_json j;
    j["level"] = level_name(level);
    j["labels"] = nlohmann::ordered_json::array();
    for (int c = 0; c < r.confusion.num_labels(); ++c) j["labels"].push_back(level_label_name(level, c));
    j["evaluated"] = nlohmann::ordered_json::array();
    for (int c : evaluated_ids(level)) j["evaluated"].push_back(level_label_name(level, c));
    j["per_class_iou"] = nlohmann::ordered_json::object();
    for (int c = 1; c < r.confusion.num_labels(); ++c) {
      j["per_class_iou"][std::string(level_label_name(level, c))] = optional_number(r.per_class_iou[c]);
    }
    j["mean_iou"] = optional_number(r.mean_iou);
    j["weighted_iou"] = optional_number(r.weighted_iou);
    if (level == HierarchyLevel::kRoot) j["road_defect_iou"] = optional_number(r.road_defect_iou);
    j["confusion"] = nlohmann::ordered_json::array();
    for (int g = 0; g < r.confusion.num_labels(); ++g) {
      auto row = nlohmann::ordered_json::array();
      for (int p = 0; p < r.confusion.num_labels(); ++p) row.push_back(r.confusion.at(g, p));
      j["confusion"].push_back(row);
    }
    doc["levels"][std::string(level_name(level))] = j;
  }
  return doc.dump(2);
}

std::string reports_to_table(const std::map<HierarchyLevel, EvalReport>& reports,
                             const std::string& model_name) {
  std::string out;
  char line[128];
  auto pct = [](const std::optional<double>& v) {
    char buf[32];
    if (v) {
      std::snprintf(buf, sizeof(buf), "%6.1f", *v * 100.0);
    } else {
      std::snprintf(buf, sizeof(buf), "%6s", "-");
    }
    return std::string(buf);
  };
  std::snprintf(line, sizeof(line), "%-20s | %8s | %8s\n", "Level", "IoU (%)", "wIoU (%)");
  out += "Model: " + model_name + "\n" + line;
  out += std::string(42, '-') + "\n";
  for (auto level : kAllLevels) {
    auto it = reports.find(level);
    if (it == reports.end()) continue;
    std::snprintf(line, sizeof(line), "%-20s | %8s | %8s\n", std::string(level_name(level)).c_str(),
                  pct(it->second.mean_iou).c_str(), pct(it->second.weighted_iou).c_str());
    out += line;
  }
  if (auto it = reports.find(HierarchyLevel::kRoot); it != reports.end()) {
    std::snprintf(line, sizeof(line), "%-20s | %8s |\n", "road_defect (label)",
                  pct(it->second.road_defect_iou).c_str());
    out += line;
  }
  if (auto it = reports.find(HierarchyLevel::kClassFull); it != reports.end()) {
    out += "\n";
    std::snprintf(line, sizeof(line), "%-20s | %8s\n", "Class", "IoU (%)");
    out += line;
    out += std::string(31, '-') + "\n";
    for (int c = 1; c < kNumClasses; ++c) {
      std::snprintf(line, sizeof(line), "%-20s | %8s\n",
                    std::string(class_name(class_from_id(c))).c_str(),
                    pct(it->second.per_class_iou[c]).c_str());
      out += line;
    }
  }
  return out;
}

}  // namespace roadaudit
