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

#ifndef ROADAUDIT_METRICS_HPP_
#define ROADAUDIT_METRICS_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "roadaudit/grid.hpp"
#include "roadaudit/taxonomy.hpp"

namespace roadaudit {

// Pixel confusion counts; rows are ground truth, columns predictions.
// Ground-truth pixels equal to the void label are skipped; void predictions
// on evaluated pixels land in the void column (pure false negatives).
class ConfusionMatrix {
 public:
  ConfusionMatrix(int num_labels, std::optional<int> void_label);
  static ConfusionMatrix for_level(HierarchyLevel level);

  void accumulate(const Mask& pred, const Mask& gt);
  // Entrywise sum; both matrices must have the same label space.
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  int num_labels() const { return k_; }
  std::optional<int> void_label() const { return void_; }
  std::int64_t at(int gt, int pred) const { return counts_[static_cast<std::size_t>(gt) * k_ + pred]; }
  std::int64_t& at(int gt, int pred) { return counts_[static_cast<std::size_t>(gt) * k_ + pred]; }
  std::int64_t row_sum(int c) const;
  std::int64_t col_sum(int c) const;
  std::int64_t total() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  int k_;
  std::optional<int> void_;
  std::vector<std::int64_t> counts_;
};

// IoU of class c; nullopt when c is absent from both prediction and ground
// truth (denominator 0).
std::optional<double> iou(const ConfusionMatrix& cm, int c);

// Unweighted mean over the present classes in `evaluated`. Throws kData
// (undefined metric) when none is present.
double mean_iou(const ConfusionMatrix& cm, std::span<const int> evaluated);
// Sum of IoU(c) * gt_pixels(c) / sum gt_pixels over present evaluated
// classes. Throws kData when no evaluated ground-truth pixel exists.
double weighted_iou(const ConfusionMatrix& cm, std::span<const int> evaluated);

struct EvalReport {
  HierarchyLevel level = HierarchyLevel::kClassFull;
  ConfusionMatrix confusion = ConfusionMatrix::for_level(HierarchyLevel::kClassFull);
  std::vector<std::optional<double>> per_class_iou;  // indexed by label id
  std::optional<double> mean_iou;
  std::optional<double> weighted_iou;
  // Root level only: IoU of the road_defect label on its own.
  std::optional<double> road_defect_iou;
};

EvalReport make_report(const ConfusionMatrix& cm, HierarchyLevel level);

// Accumulates class-level predictions and ground truth at every hierarchy
// level. Both masks are rolled up before counting.
class HierarchyEvaluator {
 public:
  HierarchyEvaluator();
  void accumulate(const Mask& pred_classes, const Mask& gt_classes);
  const ConfusionMatrix& confusion(HierarchyLevel level) const;
  std::map<HierarchyLevel, EvalReport> reports() const;

 private:
  std::map<HierarchyLevel, ConfusionMatrix> cms_;
};

std::map<HierarchyLevel, EvalReport> evaluate_hierarchy(const std::vector<Mask>& pred,
                                                        const std::vector<Mask>& gt);

std::string reports_to_json(const std::map<HierarchyLevel, EvalReport>& reports,
                            const std::string& model_name);
// Fixed-width "label | IoU (%)" tables, one block per level.
std::string reports_to_table(const std::map<HierarchyLevel, EvalReport>& reports,
                             const std::string& model_name);

}  // namespace roadaudit

#endif  // ROADAUDIT_METRICS_HPP_
