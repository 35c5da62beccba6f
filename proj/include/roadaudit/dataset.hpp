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

#ifndef ROADAUDIT_DATASET_HPP_
#define ROADAUDIT_DATASET_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "roadaudit/grid.hpp"
#include "roadaudit/taxonomy.hpp"

namespace roadaudit {

struct GpsFix {
  double lat = 0.0;
  double lon = 0.0;

  friend bool operator==(const GpsFix&, const GpsFix&) = default;
};

// Throws kData for non-finite or out-of-range coordinates.
void validate_gps(const GpsFix& fix);

struct Frame {
  std::string sequence_id;
  int index = 0;
  Image image;
  Mask mask;  // class ids
  GpsFix gps;

  friend bool operator==(const Frame&, const Frame&) = default;
};

struct DriveSequence {
  std::string sequence_id;
  std::vector<Frame> frames;

  friend bool operator==(const DriveSequence&, const DriveSequence&) = default;
};

// Scene parameters for the synthetic road generator. `frequency[c]` is the
// probability that a frame contains class c (index 0, void, is ignored).
// Road surface is tar or cement, chosen in proportion to their frequencies.
struct SynthConfig {
  std::string sequence_id = "seq_000";
  int frames = 10;
  int width = 128;
  int height = 64;
  std::array<double, kNumClasses> frequency = {0.0, 0.7, 0.3, 0.5, 0.4, 0.35, 0.35,
                                               0.35, 0.35, 0.3, 0.3};
  GpsFix start = {17.4474, 78.3762};
  double step_lat = 1.0e-4;
  double step_lon = 5.0e-5;
  // All road classes share one base color and differ only in texture.
  bool texture_only = false;
};

void validate_synth_config(const SynthConfig& config);

// Deterministic in (config, seed). Each frame is rendered from its own
// sub-seed mix_seed(seed, index), so frames are order-independent.
DriveSequence generate_synthetic_sequence(const SynthConfig& config, std::uint64_t seed);
Frame generate_synthetic_frame(const SynthConfig& config, std::uint64_t seed, int index);

// Per-pixel verdict from an external road-scene segmenter: non-zero marks a
// non-road object pixel (vehicle, pedestrian, ...).
using ObjectMask = Grid<std::uint8_t>;

// Built-in provider for when no segmenter is available.
ObjectMask everything_is_road(int height, int width);

// Object pixels become void; every other pixel keeps its annotation.
Mask combine_masks(const Mask& annotation, const ObjectMask& object_mask);

// ---------------------------------------------------------------------------
// Train/val/test splitting.

struct SplitSpec {
  double train = 0.7;
  double val = 0.15;
  double test = 0.15;
  // Maximum |share_train(c) - share_test(c)| / max(share_overall(c), eps).
  double tolerance = 0.5;
  int search_budget = 200;  // random restarts
};

inline constexpr double kShareEpsilon = 1e-9;

void validate_split_spec(const SplitSpec& spec);

struct FrameKey {
  std::string sequence_id;
  int index = 0;

  friend bool operator==(const FrameKey&, const FrameKey&) = default;
  friend auto operator<=>(const FrameKey&, const FrameKey&) = default;
};

struct FrameStats {
  FrameKey key;
  std::array<std::int64_t, kNumClasses> counts{};
};

FrameStats frame_stats(const Frame& frame);

struct SplitResult {
  std::vector<FrameKey> train;
  std::vector<FrameKey> val;
  std::vector<FrameKey> test;
  double worst_deviation = 0.0;
  int worst_class = 0;
};

// Floor each fraction, then hand remainder frames out train -> val -> test.
std::array<int, 3> split_sizes(const SplitSpec& spec, int total);

// Worst relative train/test share deviation over classes present overall.
double share_deviation(const std::vector<FrameStats>& train,
                       const std::vector<FrameStats>& test,
                       const std::vector<FrameStats>& all, int* worst_class = nullptr);

// Throws kInfeasible (naming the worst class) when no partition within the
// search budget meets the tolerance.
SplitResult stratified_split(const std::vector<FrameStats>& frames, const SplitSpec& spec,
                             std::uint64_t seed);
SplitResult stratified_split(const std::vector<DriveSequence>& sequences,
                             const SplitSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// On-disk layout: <root>/<sequence_id>/manifest.json, img/<index>.png,
// mask/<index>.png.

struct ManifestEntry {
  int index = 0;
  GpsFix gps;
};

struct Manifest {
  std::string sequence_id;
  std::vector<ManifestEntry> frames;
};

void save_sequence(const DriveSequence& sequence, const std::filesystem::path& root);
DriveSequence load_sequence(const std::filesystem::path& sequence_dir);

Manifest read_manifest(const std::filesystem::path& sequence_dir);
void write_manifest(const Manifest& manifest, const std::filesystem::path& sequence_dir);

// Loads one frame described by a manifest entry. Used for streaming.
Frame load_frame(const std::filesystem::path& sequence_dir, const std::string& sequence_id,
                 const ManifestEntry& entry);

// Sequence directories (those holding a manifest) under `root`, sorted.
std::vector<std::filesystem::path> list_sequences(const std::filesystem::path& root);

}  // namespace roadaudit

#endif  // ROADAUDIT_DATASET_HPP_
