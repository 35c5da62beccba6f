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

#include <algorithm>
#include <cmath>
#include <limits>

#include "roadaudit/dataset.hpp"
#include "roadaudit/rng.hpp"

namespace roadaudit {
namespace {

using Counts = std::array<std::int64_t, kNumClasses>;

std::array<double, kNumClasses> shares(const Counts& counts) {
  std::int64_t total = 0;
  for (int c = 1; c < kNumClasses; ++c) total += counts[c];
  std::array<double, kNumClasses> s{};
  if (total == 0) return s;
  for (int c = 1; c < kNumClasses; ++c) {
    s[c] = static_cast<double>(counts[c]) / static_cast<double>(total);
  }
  return s;
}

Counts sum_counts(const std::vector<FrameStats>& frames) {
  Counts total{};
  for (const auto& f : frames) {
    for (int c = 0; c < kNumClasses; ++c) total[c] += f.counts[c];
  }
  return total;
}

double deviation(const Counts& train, const Counts& test,
                 const std::array<double, kNumClasses>& overall, int* worst_class) {
  const auto st = shares(train);
  const auto se = shares(test);
  double worst = 0.0;
  int worst_c = 0;
  for (int c = 1; c < kNumClasses; ++c) {
    if (overall[c] <= 0.0) continue;
    const double d = std::abs(st[c] - se[c]) / std::max(overall[c], kShareEpsilon);
    if (d > worst) {
      worst = d;
      worst_c = c;
    }
  }
  if (worst_class) *worst_class = worst_c;
  return worst;
}

}  // namespace

void validate_split_spec(const SplitSpec& spec) {
  if (!(spec.train > 0.0) || !(spec.val > 0.0) || !(spec.test > 0.0)) {
    fail(ErrorKind::kConfig, "split fractions must be positive");
  }
  if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
    fail(ErrorKind::kConfig, "split fractions must sum to 1");
  }
  if (!(spec.tolerance > 0.0) || spec.tolerance > 1.0) {
    fail(ErrorKind::kConfig, "split tolerance must lie in (0, 1]");
  }
  if (spec.search_budget < 1) fail(ErrorKind::kConfig, "split search budget must be >= 1");
}

std::array<int, 3> split_sizes(const SplitSpec& spec, int total) {
  const std::array<double, 3> fractions = {spec.train, spec.val, spec.test};
  std::array<int, 3> sizes{};
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    // The small nudge keeps e.g. 0.7 * 20 from flooring to 13.
    sizes[i] = static_cast<int>(std::floor(fractions[i] * total + 1e-9));
    assigned += sizes[i];
  }
  for (int i = 0; assigned < total; i = (i + 1) % 3, ++assigned) ++sizes[i];
  return sizes;
}

FrameStats frame_stats(const Frame& frame) {
  FrameStats s;
  s.key = {frame.sequence_id, frame.index};
  for (const auto v : frame.mask.values()) {
    if (v >= kNumClasses) {
      fail(ErrorKind::kInvalidLabel, "invalid class id " + std::to_string(v) + " in frame " +
                                         frame.sequence_id + "/" + std::to_string(frame.index));
    }
    ++s.counts[v];
  }
  return s;
}

double share_deviation(const std::vector<FrameStats>& train,
                       const std::vector<FrameStats>& test,
                       const std::vector<FrameStats>& all, int* worst_class) {
  return deviation(sum_counts(train), sum_counts(test), shares(sum_counts(all)), worst_class);
}

SplitResult stratified_split(const std::vector<FrameStats>& frames, const SplitSpec& spec,
                             std::uint64_t seed) {
  validate_split_spec(spec);
  const int n = static_cast<int>(frames.size());
  if (n < 3) fail(ErrorKind::kData, "stratified split needs at least 3 frames");
  const auto sizes = split_sizes(spec, n);
  for (int i = 0; i < 3; ++i) {
    if (sizes[i] < 1) {
      fail(ErrorKind::kConfig, "split fractions leave an empty split for " +
                                   std::to_string(n) + " frames");
    }
  }
  const auto overall = shares(sum_counts(frames));
  const int n_train = sizes[0];
  const int n_val = sizes[1];

  Rng rng(seed);
  std::vector<int> best_order;
  double best_dev = std::numeric_limits<double>::infinity();
  int best_class = 0;

  std::vector<int> order(n);
  for (int attempt = 0; attempt < spec.search_budget; ++attempt) {
    for (int i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);

    // Running per-split totals; train is [0, n_train), test is [n_train + n_val, n).
    Counts train{}, test{};
    for (int i = 0; i < n; ++i) {
      if (i >= n_train && i < n_train + n_val) continue;
      Counts& dst = i < n_train ? train : test;
      for (int c = 0; c < kNumClasses; ++c) dst[c] += frames[order[i]].counts[c];
    }
    int worst_c = 0;
    double dev = deviation(train, test, overall, &worst_c);

    // Hill-climb with random swaps between any two splits.
    const int proposals = 40 * n;
    for (int p = 0; p < proposals && dev > spec.tolerance; ++p) {
      const int a = static_cast<int>(rng.below(n));
      const int b = static_cast<int>(rng.below(n));
      auto split_of = [&](int pos) { return pos < n_train ? 0 : (pos < n_train + n_val ? 1 : 2); };
      const int sa = split_of(a);
      const int sb = split_of(b);
      if (sa == sb) continue;
      Counts t2 = train, e2 = test;
      auto move = [&](int pos, int from, int to) {
        const auto& cnt = frames[order[pos]].counts;
        for (int c = 0; c < kNumClasses; ++c) {
          if (from == 0) t2[c] -= cnt[c];
          if (from == 2) e2[c] -= cnt[c];
          if (to == 0) t2[c] += cnt[c];
          if (to == 2) e2[c] += cnt[c];
        }
      };
      move(a, sa, sb);
      move(b, sb, sa);
      int wc = 0;
      const double d2 = deviation(t2, e2, overall, &wc);
      if (d2 < dev) {
        std::swap(order[a], order[b]);
        train = t2;
        test = e2;
        dev = d2;
        worst_c = wc;
      }
    }
    if (dev < best_dev) {
      best_dev = dev;
      best_order = order;
      best_class = worst_c;
    }
    if (best_dev <= spec.tolerance) break;
  }

  if (best_dev > spec.tolerance) {
    fail(ErrorKind::kInfeasible,
         "stratified split infeasible within budget: worst class " +
             std::string(class_name(class_from_id(best_class))) + " deviates by " +
             std::to_string(best_dev) + " > tolerance " + std::to_string(spec.tolerance));
  }

  SplitResult result;
  result.worst_deviation = best_dev;
  result.worst_class = best_class;
  for (int i = 0; i < n; ++i) {
    const auto& key = frames[best_order[i]].key;
    if (i < n_train) {
      result.train.push_back(key);
    } else if (i < n_train + n_val) {
      result.val.push_back(key);
    } else {
      result.test.push_back(key);
    }
  }
  std::sort(result.train.begin(), result.train.end());
  std::sort(result.val.begin(), result.val.end());
  std::sort(result.test.begin(), result.test.end());
  return result;
}

SplitResult stratified_split(const std::vector<DriveSequence>& sequences,
                             const SplitSpec& spec, std::uint64_t seed) {
  std::vector<FrameStats> stats;
  for (const auto& seq : sequences) {
    for (const auto& f : seq.frames) stats.push_back(frame_stats(f));
  }
  return stratified_split(stats, spec, seed);
}

}  // namespace roadaudit
