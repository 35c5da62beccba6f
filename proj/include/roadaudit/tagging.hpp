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

#ifndef ROADAUDIT_TAGGING_HPP_
#define ROADAUDIT_TAGGING_HPP_

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "roadaudit/grid.hpp"
#include "roadaudit/taxonomy.hpp"

namespace roadaudit {

// Frame-level labels: a subset of the ten non-void classes.
using FrameTags = std::set<ClassLabel>;

enum class ThresholdUnit { kPixels, kFraction };

std::string_view threshold_unit_name(ThresholdUnit unit);
ThresholdUnit threshold_unit_from_name(std::string_view name);

// A threshold that no count reaches; the class is never tagged.
inline constexpr double kNeverTag = std::numeric_limits<double>::infinity();

class ThresholdTable {
 public:
  explicit ThresholdTable(ThresholdUnit unit = ThresholdUnit::kPixels) : unit_(unit) {}
  // Every non-void class set to `value`.
  static ThresholdTable uniform(double value, ThresholdUnit unit = ThresholdUnit::kPixels);

  ThresholdUnit unit() const { return unit_; }
  // value must be >= 0 and finite, or kNeverTag. kConfig otherwise.
  void set(ClassLabel c, double value);
  bool has(ClassLabel c) const;
  // kConfig naming the class when the entry is missing.
  double at(ClassLabel c) const;
  bool complete() const;

  friend bool operator==(const ThresholdTable&, const ThresholdTable&) = default;

 private:
  ThresholdUnit unit_;
  std::array<std::optional<double>, kNumClasses> values_{};
};

// {class_name: {"value": v | null, "unit": "pixels" | "fraction"}}; null
// stands for kNeverTag.
std::string threshold_table_to_json(const ThresholdTable& table);
ThresholdTable threshold_table_from_json(const std::string& text);

using ClassCounts = std::array<std::int64_t, kNumClasses>;
ClassCounts class_pixel_counts(const Mask& mask);

// c is tagged iff count(c) >= threshold(c); fraction thresholds compare
// against count / area.
FrameTags tag_frame(const Mask& mask, const ThresholdTable& thresholds);
FrameTags tag_counts(const ClassCounts& counts, std::int64_t area, const ThresholdTable& thresholds);
// Classes with at least one pixel.
FrameTags frame_tags_from_mask(const Mask& gt);

// Explicit tag lists: [["pothole", "bump"], [], ...], one entry per frame.
std::string frame_tags_to_json(std::span<const FrameTags> tags);
std::vector<FrameTags> frame_tags_from_json(const std::string& text);

struct ThresholdGrid {
  ThresholdUnit unit = ThresholdUnit::kPixels;
  std::vector<double> values;

  // 1, 2, 4, ... 2^20 pixels.
  static ThresholdGrid pixels();
  static ThresholdGrid fractions();
};

void validate_threshold_grid(const ThresholdGrid& grid);

// Predicted per-class counts of one frame.
struct FrameCounts {
  ClassCounts counts{};
  std::int64_t area = 0;
};
FrameCounts frame_counts(const Mask& predicted);

struct ThresholdSearch {
  ThresholdTable table;
  std::array<double, kNumClasses> best_f1{};  // index 0 unused
  std::vector<std::string> warnings;
};

// Per class, the grid value with the highest F1 on the given frames; ties go
// to the larger threshold. Classes without a positive frame get kNeverTag
// and a warning.
ThresholdSearch search_thresholds(std::span<const FrameCounts> predictions,
                                  std::span<const FrameTags> gt_tags, const ThresholdGrid& grid);

struct ClassTagScore {
  std::int64_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support() const { return tp + fn; }
};

struct TagScores {
  std::array<ClassTagScore, kNumClasses> per_class{};  // index 0 unused
  // Unweighted mean F1 over classes with a ground-truth positive.
  std::optional<double> macro_f1;
};

// Zero conventions: P = 0 when nothing is predicted, R = 0 without positives,
// F1 = 0 when P + R = 0.
TagScores tag_prf(std::span<const FrameTags> predicted, std::span<const FrameTags> gt);

std::string tag_scores_to_json(const TagScores& scores, const std::string& model_name);
std::string tag_scores_to_table(const TagScores& scores, const std::string& model_name);

}  // namespace roadaudit

#endif  // ROADAUDIT_TAGGING_HPP_
