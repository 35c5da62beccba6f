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

#include "roadaudit/taxonomy.hpp"

#include <string>

#include "json.hpp"

namespace roadaudit {
namespace {

struct ClassRow {
  std::string_view name;
  CategoryLabel category;
};

constexpr std::array<ClassRow, kNumClasses> kClassTable = {{
    {"void", CategoryLabel::kVoid},
    {"tar_road", CategoryLabel::kRoadSurface},
    {"cement_road", CategoryLabel::kRoadSurface},
    {"shoulder", CategoryLabel::kRoadSurface},
    {"pothole", CategoryLabel::kCategory1},
    {"water_log", CategoryLabel::kCategory1},
    {"wet_road", CategoryLabel::kCategory1},
    {"muddy_road", CategoryLabel::kCategory2},
    {"rough_road", CategoryLabel::kCategory3},
    {"obstruction", CategoryLabel::kCategory4},
    {"bump", CategoryLabel::kCategory4},
}};

constexpr std::array<std::string_view, kNumCategories> kCategoryNames = {
    "void", "road_surface", "category_1", "category_2", "category_3", "category_4"};

constexpr std::array<std::string_view, kNumRoots> kRootNames = {"void", "road",
                                                                "road_defect"};

constexpr std::array<int, 2> kRootEvaluated = {1, 2};
constexpr std::array<int, 4> kCategoryEvaluated = {2, 3, 4, 5};
constexpr std::array<int, 10> kClassEvaluated = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
constexpr std::array<int, 8> kClassMinusCat4Evaluated = {1, 2, 3, 4, 5, 6, 7, 8};

// Per-level lookup tables indexed by class id.
struct RollupTables {
  std::array<std::uint8_t, kNumClasses> root{};
  std::array<std::uint8_t, kNumClasses> category{};
  std::array<std::uint8_t, kNumClasses> class_full{};
  std::array<std::uint8_t, kNumClasses> class_minus_cat4{};

  constexpr RollupTables() {
    for (int id = 0; id < kNumClasses; ++id) {
      const auto cat = kClassTable[id].category;
      category[id] = static_cast<std::uint8_t>(cat);
      root[id] = cat == CategoryLabel::kVoid          ? 0
                 : cat == CategoryLabel::kRoadSurface ? 1
                                                      : 2;
      class_full[id] = static_cast<std::uint8_t>(id);
      class_minus_cat4[id] =
          cat == CategoryLabel::kCategory4 ? 0 : static_cast<std::uint8_t>(id);
    }
  }

  const std::array<std::uint8_t, kNumClasses>& for_level(HierarchyLevel level) const {
    switch (level) {
      case HierarchyLevel::kRoot:
        return root;
      case HierarchyLevel::kCategory:
        return category;
      case HierarchyLevel::kClassFull:
        return class_full;
      case HierarchyLevel::kClassMinusCat4:
        return class_minus_cat4;
    }
    return class_full;
  }
};

constexpr RollupTables kRollup{};

}  // namespace

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidLabel:
      return "invalid_label";
    case ErrorKind::kShape:
      return "shape";
    case ErrorKind::kConfig:
      return "config";
    case ErrorKind::kData:
      return "data";
    case ErrorKind::kNumerical:
      return "numerical";
    case ErrorKind::kIo:
      return "io";
    case ErrorKind::kInfeasible:
      return "infeasible";
    case ErrorKind::kContract:
      return "contract";
  }
  return "unknown";
}

bool is_valid_class_id(int id) { return id >= 0 && id < kNumClasses; }

ClassLabel class_from_id(int id) {
  if (!is_valid_class_id(id)) {
    fail(ErrorKind::kInvalidLabel, "invalid class id " + std::to_string(id));
  }
  return static_cast<ClassLabel>(id);
}

ClassLabel class_from_name(std::string_view name) {
  for (int id = 0; id < kNumClasses; ++id) {
    if (kClassTable[id].name == name) return static_cast<ClassLabel>(id);
  }
  fail(ErrorKind::kInvalidLabel, "unknown class name '" + std::string(name) + "'");
}

std::string_view class_name(ClassLabel c) {
  return kClassTable[static_cast<int>(class_from_id(static_cast<int>(c)))].name;
}

std::string_view category_name(CategoryLabel c) {
  const int id = static_cast<int>(c);
  if (id < 0 || id >= kNumCategories) {
    fail(ErrorKind::kInvalidLabel, "invalid category id " + std::to_string(id));
  }
  return kCategoryNames[id];
}

std::string_view root_name(RootLabel r) {
  const int id = static_cast<int>(r);
  if (id < 0 || id >= kNumRoots) {
    fail(ErrorKind::kInvalidLabel, "invalid root id " + std::to_string(id));
  }
  return kRootNames[id];
}

CategoryLabel class_to_category(ClassLabel c) {
  return kClassTable[static_cast<int>(class_from_id(static_cast<int>(c)))].category;
}

CategoryLabel class_to_category(int class_id) {
  return class_to_category(class_from_id(class_id));
}

RootLabel class_to_root(ClassLabel c) {
  return static_cast<RootLabel>(kRollup.root[static_cast<int>(class_from_id(static_cast<int>(c)))]);
}

RootLabel class_to_root(int class_id) { return class_to_root(class_from_id(class_id)); }

RootLabel category_to_root(CategoryLabel c) {
  switch (c) {
    case CategoryLabel::kVoid:
      return RootLabel::kVoid;
    case CategoryLabel::kRoadSurface:
      return RootLabel::kRoad;
    case CategoryLabel::kCategory1:
    case CategoryLabel::kCategory2:
    case CategoryLabel::kCategory3:
    case CategoryLabel::kCategory4:
      return RootLabel::kRoadDefect;
  }
  fail(ErrorKind::kInvalidLabel,
       "invalid category id " + std::to_string(static_cast<int>(c)));
}

int level_size(HierarchyLevel level) {
  switch (level) {
    case HierarchyLevel::kRoot:
      return kNumRoots;
    case HierarchyLevel::kCategory:
      return kNumCategories;
    case HierarchyLevel::kClassFull:
    case HierarchyLevel::kClassMinusCat4:
      return kNumClasses;
  }
  return kNumClasses;
}

std::string_view level_name(HierarchyLevel level) {
  switch (level) {
    case HierarchyLevel::kRoot:
      return "root";
    case HierarchyLevel::kCategory:
      return "category";
    case HierarchyLevel::kClassFull:
      return "class";
    case HierarchyLevel::kClassMinusCat4:
      return "class_minus_cat4";
  }
  return "class";
}

HierarchyLevel level_from_name(std::string_view name) {
  for (const auto level : kAllLevels) {
    if (level_name(level) == name) return level;
  }
  fail(ErrorKind::kConfig, "unknown hierarchy level '" + std::string(name) + "'");
}

std::string_view level_label_name(HierarchyLevel level, int id) {
  switch (level) {
    case HierarchyLevel::kRoot:
      return root_name(static_cast<RootLabel>(id));
    case HierarchyLevel::kCategory:
      return category_name(static_cast<CategoryLabel>(id));
    case HierarchyLevel::kClassFull:
    case HierarchyLevel::kClassMinusCat4:
      return class_name(class_from_id(id));
  }
  return "";
}

std::span<const int> evaluated_ids(HierarchyLevel level) {
  switch (level) {
    case HierarchyLevel::kRoot:
      return kRootEvaluated;
    case HierarchyLevel::kCategory:
      return kCategoryEvaluated;
    case HierarchyLevel::kClassFull:
      return kClassEvaluated;
    case HierarchyLevel::kClassMinusCat4:
      return kClassMinusCat4Evaluated;
  }
  return kClassEvaluated;
}

void validate_class_mask(const Mask& mask) {
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      const int id = mask(y, x);
      if (!is_valid_class_id(id)) {
        fail(ErrorKind::kInvalidLabel, "invalid class id " + std::to_string(id) +
                                           " at pixel (row " + std::to_string(y) +
                                           ", col " + std::to_string(x) + ")");
      }
    }
  }
}

Mask rollup_mask(const Mask& class_mask, HierarchyLevel level) {
  validate_class_mask(class_mask);
  const auto& table = kRollup.for_level(level);
  Mask out(class_mask.height(), class_mask.width());
  auto src = class_mask.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = table[src[i]];
  return out;
}

Mask rollup_category_to_root(const Mask& category_mask) {
  Mask out(category_mask.height(), category_mask.width());
  for (int y = 0; y < category_mask.height(); ++y) {
    for (int x = 0; x < category_mask.width(); ++x) {
      const int id = category_mask(y, x);
      if (id >= kNumCategories) {
        fail(ErrorKind::kInvalidLabel, "invalid category id " + std::to_string(id) +
                                           " at pixel (row " + std::to_string(y) +
                                           ", col " + std::to_string(x) + ")");
      }
      out(y, x) = static_cast<std::uint8_t>(category_to_root(static_cast<CategoryLabel>(id)));
    }
  }
  return out;
}

std::string labels_json() {
  nlohmann::ordered_json doc;
  doc["classes"] = nlohmann::ordered_json::array();
  for (int id = 0; id < kNumClasses; ++id) {
    const auto cat = kClassTable[id].category;
    const auto root = category_to_root(cat);
    doc["classes"].push_back({{"id", id},
                              {"name", kClassTable[id].name},
                              {"category_id", static_cast<int>(cat)},
                              {"category", category_name(cat)},
                              {"root_id", static_cast<int>(root)},
                              {"root", root_name(root)}});
  }
  doc["categories"] = nlohmann::ordered_json::array();
  for (int id = 0; id < kNumCategories; ++id) {
    const auto root = category_to_root(static_cast<CategoryLabel>(id));
    doc["categories"].push_back({{"id", id},
                                 {"name", kCategoryNames[id]},
                                 {"root_id", static_cast<int>(root)},
                                 {"root", root_name(root)}});
  }
  doc["roots"] = nlohmann::ordered_json::array();
  for (int id = 0; id < kNumRoots; ++id) {
    doc["roots"].push_back({{"id", id}, {"name", kRootNames[id]}});
  }
  return doc.dump(2);
}

}  // namespace roadaudit
