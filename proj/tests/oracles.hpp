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

// Brute-force reference implementations used by the tests. Written from the
// label tables and formulas directly, without calling library code.
#ifndef ROADAUDIT_TESTS_ORACLES_HPP_
#define ROADAUDIT_TESTS_ORACLES_HPP_

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "roadaudit/grid.hpp"

namespace oracle {

// Class id -> category id (void 0, road_surface 1, category_1..4 = 2..5).
inline constexpr int kCategoryOf[11] = {0, 1, 1, 1, 2, 2, 2, 3, 4, 5, 5};
// Category id -> root id (void 0, road 1, road_defect 2).
inline constexpr int kRootOfCategory[6] = {0, 1, 2, 2, 2, 2};

inline int root_of_class(int c) { return kRootOfCategory[kCategoryOf[c]]; }

inline roadaudit::Mask random_mask(std::mt19937_64& gen, int h, int w, int labels) {
  roadaudit::Mask m(h, w);
  std::uniform_int_distribution<int> d(0, labels - 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m(y, x) = static_cast<std::uint8_t>(d(gen));
  }
  return m;
}

// counts[g][p] over pixels whose ground truth is not `void_label`.
inline std::vector<std::vector<long long>> confusion(const roadaudit::Mask& pred,
                                                     const roadaudit::Mask& gt, int k,
                                                     std::optional<int> void_label) {
  std::vector<std::vector<long long>> cm(k, std::vector<long long>(k, 0));
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      const int g = gt(y, x);
      if (void_label && g == *void_label) continue;
      cm[g][pred(y, x)] += 1;
    }
  }
  return cm;
}

// Per-pixel intersection and union counts; nullopt when the union is empty.
inline std::optional<double> iou(const std::vector<const roadaudit::Mask*>& preds,
                                 const std::vector<const roadaudit::Mask*>& gts, int c,
                                 std::optional<int> void_label) {
  long long inter = 0, uni = 0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const auto& p = *preds[i];
    const auto& g = *gts[i];
    for (int y = 0; y < g.height(); ++y) {
      for (int x = 0; x < g.width(); ++x) {
        if (void_label && g(y, x) == *void_label) continue;
        const bool in_p = p(y, x) == c, in_g = g(y, x) == c;
        inter += in_p && in_g;
        uni += in_p || in_g;
      }
    }
  }
  if (uni == 0) return std::nullopt;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline long long gt_pixels(const std::vector<const roadaudit::Mask*>& gts, int c) {
  long long n = 0;
  for (const auto* g : gts) {
    for (auto v : g->values()) n += v == c;
  }
  return n;
}

inline long long count_of(const roadaudit::Mask& m, int c) {
  long long n = 0;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) n += m(y, x) == c;
  }
  return n;
}

// F1 = 2PR / (P + R) with the zero conventions.
inline double f1(long long tp, long long fp, long long fn) {
  const double p = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  const double r = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

}  // namespace oracle

#endif  // ROADAUDIT_TESTS_ORACLES_HPP_
