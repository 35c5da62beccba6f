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

#ifndef ROADAUDIT_TAXONOMY_HPP_
#define ROADAUDIT_TAXONOMY_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "roadaudit/grid.hpp"

namespace roadaudit {

// Leaf labels. The numeric order is the on-disk mask encoding and must not
// change.
enum class ClassLabel : std::uint8_t {
  kVoid = 0,
  kTarRoad = 1,
  kCementRoad = 2,
  kShoulder = 3,
  kPothole = 4,
  kWaterLog = 5,
  kWetRoad = 6,
  kMuddyRoad = 7,
  kRoughRoad = 8,
  kObstruction = 9,
  kBump = 10,
};

enum class CategoryLabel : std::uint8_t {
  kVoid = 0,
  kRoadSurface = 1,
  kCategory1 = 2,
  kCategory2 = 3,
  kCategory3 = 4,
  kCategory4 = 5,
};

enum class RootLabel : std::uint8_t {
  kVoid = 0,
  kRoad = 1,
  kRoadDefect = 2,
};

enum class HierarchyLevel { kRoot, kCategory, kClassFull, kClassMinusCat4 };

inline constexpr int kNumClasses = 11;     // including void
inline constexpr int kNumCategories = 6;   // including void
inline constexpr int kNumRoots = 3;        // including void
inline constexpr std::uint8_t kVoidId = 0;

inline constexpr std::array<HierarchyLevel, 4> kAllLevels = {
    HierarchyLevel::kRoot, HierarchyLevel::kCategory,
    HierarchyLevel::kClassMinusCat4, HierarchyLevel::kClassFull};

bool is_valid_class_id(int id);

// Throws ErrorKind::kInvalidLabel for ids outside [0, 10].
ClassLabel class_from_id(int id);
ClassLabel class_from_name(std::string_view name);
std::string_view class_name(ClassLabel c);
std::string_view category_name(CategoryLabel c);
std::string_view root_name(RootLabel r);

CategoryLabel class_to_category(ClassLabel c);
RootLabel class_to_root(ClassLabel c);
RootLabel category_to_root(CategoryLabel c);

// Convenience overloads on raw ids.
CategoryLabel class_to_category(int class_id);
RootLabel class_to_root(int class_id);

// Number of ids (including void) in the label space of a level.
int level_size(HierarchyLevel level);
std::string_view level_name(HierarchyLevel level);
HierarchyLevel level_from_name(std::string_view name);
std::string_view level_label_name(HierarchyLevel level, int id);

// Ids that participate in the mean IoU at a level. Void never does; at the
// category level road_surface is tracked but excluded from the mean.
std::span<const int> evaluated_ids(HierarchyLevel level);

// Maps every pixel of a class-id mask to the label space of `level`. Throws
// kInvalidLabel naming the first offending pixel.
Mask rollup_mask(const Mask& class_mask, HierarchyLevel level);

// Maps a category-level mask to root level.
Mask rollup_category_to_root(const Mask& category_mask);

// Throws kInvalidLabel with the coordinate of the first id > 10.
void validate_class_mask(const Mask& mask);

// id/name/category/root table as JSON text.
std::string labels_json();

}  // namespace roadaudit

#endif  // ROADAUDIT_TAXONOMY_HPP_
