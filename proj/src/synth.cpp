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
#include <numbers>

#include "roadaudit/dataset.hpp"
#include "roadaudit/rng.hpp"

namespace roadaudit {
namespace {

struct Texture {
  std::array<double, 3> base;
  double stripe_amplitude;
  double stripe_period;  // pixels
  double stripe_angle;   // degrees
  double noise_amplitude;
};

// Distinct color + texture per class.
constexpr std::array<Texture, kNumClasses> kColorTextures = {{
    {{0, 0, 0}, 0, 1, 0, 0},  // void: background is rendered separately
    {{60, 60, 66}, 0, 1, 0, 8},
    {{172, 170, 160}, 0, 1, 0, 8},
    {{140, 110, 80}, 6, 6, 0, 10},
    {{35, 30, 25}, 10, 4, 45, 12},
    {{70, 95, 150}, 6, 8, 0, 6},
    {{40, 48, 78}, 4, 3, 90, 6},
    {{125, 85, 45}, 8, 5, 30, 14},
    {{105, 105, 105}, 0, 1, 0, 40},
    {{205, 120, 30}, 20, 6, 135, 10},
    {{225, 210, 60}, 25, 4, 0, 6},
}};

// Same base color everywhere; only the procedural texture differs.
constexpr std::array<Texture, kNumClasses> kTextureOnly = {{
    {{0, 0, 0}, 0, 1, 0, 0},
    {{110, 110, 110}, 0, 1, 0, 4},
    {{110, 110, 110}, 28, 8, 0, 4},
    {{110, 110, 110}, 28, 8, 90, 4},
    {{110, 110, 110}, 28, 4, 0, 4},
    {{110, 110, 110}, 28, 4, 90, 4},
    {{110, 110, 110}, 28, 6, 45, 4},
    {{110, 110, 110}, 28, 6, 135, 4},
    {{110, 110, 110}, 0, 1, 0, 45},
    {{110, 110, 110}, 28, 3, 0, 4},
    {{110, 110, 110}, 28, 10, 45, 4},
}};

constexpr int kFirstDefect = static_cast<int>(ClassLabel::kPothole);

std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

void paint_pixel(Image& img, int y, int x, const Texture& t, double phase, Rng& rng) {
  const double theta = t.stripe_angle * std::numbers::pi / 180.0;
  const double stripe =
      t.stripe_amplitude *
      std::sin(2.0 * std::numbers::pi * (x * std::cos(theta) + y * std::sin(theta)) /
                   t.stripe_period +
               phase);
  const double noise = t.noise_amplitude * (2.0 * rng.uniform() - 1.0);
  for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = clamp_u8(t.base[ch] + stripe + noise);
}

}  // namespace

void validate_gps(const GpsFix& fix) {
  if (!std::isfinite(fix.lat) || !std::isfinite(fix.lon) || fix.lat < -90.0 ||
      fix.lat > 90.0 || fix.lon < -180.0 || fix.lon > 180.0) {
    fail(ErrorKind::kData, "GPS fix out of range (lat " + std::to_string(fix.lat) + ", lon " +
                               std::to_string(fix.lon) + ")");
  }
}

void validate_synth_config(const SynthConfig& config) {
  if (config.frames < 1) fail(ErrorKind::kConfig, "synthetic frame count must be >= 1");
  if (config.width <= 0 || config.height <= 0) {
    fail(ErrorKind::kConfig, "synthetic image dimensions must be positive");
  }
  if (config.width < 16 || config.height < 16) {
    fail(ErrorKind::kConfig, "synthetic images must be at least 16x16");
  }
  for (int c = 1; c < kNumClasses; ++c) {
    const double f = config.frequency[c];
    if (!std::isfinite(f) || f < 0.0 || f > 1.0) {
      fail(ErrorKind::kConfig, "frequency of " + std::string(class_name(class_from_id(c))) +
                                   " must lie in [0, 1]");
    }
  }
  if (config.frequency[1] + config.frequency[2] <= 0.0) {
    fail(ErrorKind::kConfig, "tar_road or cement_road needs a positive frequency");
  }
  if (config.sequence_id.empty()) fail(ErrorKind::kConfig, "sequence id must not be empty");
  validate_gps(config.start);
}

Frame generate_synthetic_frame(const SynthConfig& config, std::uint64_t seed, int index) {
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(index)));
  const int h = config.height;
  const int w = config.width;
  const auto& textures = config.texture_only ? kTextureOnly : kColorTextures;

  Frame frame;
  frame.sequence_id = config.sequence_id;
  frame.index = index;
  frame.image = Image(h, w);
  frame.mask = Mask(h, w, kVoidId);
  frame.gps = {config.start.lat + index * config.step_lat,
               config.start.lon + index * config.step_lon};

  // Frame-level decisions are drawn first so they do not depend on the
  // number of pixel draws.
  const double tar = config.frequency[1];
  const double cement = config.frequency[2];
  const auto surface = rng.uniform() * (tar + cement) < tar ? ClassLabel::kTarRoad
                                                            : ClassLabel::kCementRoad;
  const bool shoulder = rng.bernoulli(config.frequency[3]);
  const int horizon = static_cast<int>(std::lround(0.3 * h));
  const double center = w / 2.0 + rng.uniform(-0.1, 0.1) * w;

  struct Blob {
    int id;
    double cy, cx, ry, rx;
  };
  std::vector<Blob> blobs;
  for (int c = kFirstDefect; c < kNumClasses; ++c) {
    if (!rng.bernoulli(config.frequency[c])) continue;
    Blob b;
    b.id = c;
    const double road_rows = h - horizon;
    b.cy = rng.uniform(horizon + 0.35 * road_rows, h - 1.0);
    const double t = (b.cy - horizon) / std::max(1.0, road_rows - 1.0);
    const double half_width = (0.08 + 0.40 * t) * w;
    b.cx = center + rng.uniform(-0.6, 0.6) * half_width;
    b.ry = rng.uniform(0.07, 0.16) * h;
    b.rx = rng.uniform(0.08, 0.22) * w;
    blobs.push_back(b);
  }
  std::array<double, kNumClasses> phase{};
  for (auto& p : phase) p = rng.uniform(0.0, 2.0 * std::numbers::pi);

  for (int y = 0; y < h; ++y) {
    const double t = y < horizon ? 0.0 : (y - horizon) / std::max(1.0, h - 1.0 - horizon);
    const double half_width = (0.08 + 0.40 * t) * w;
    for (int x = 0; x < w; ++x) {
      const bool on_road = y >= horizon && std::abs(x + 0.5 - center) <= half_width;
      if (!on_road) {
        // Sky above the horizon, vegetation beside the road.
        const double n = 12.0 * (2.0 * rng.uniform() - 1.0);
        const std::array<double, 3> bg =
            y < horizon ? std::array<double, 3>{150, 185, 225} : std::array<double, 3>{85, 125, 55};
        for (int ch = 0; ch < 3; ++ch) frame.image.at(y, x, ch) = clamp_u8(bg[ch] + n);
        continue;
      }
      int id = static_cast<int>(surface);
      if (shoulder && std::abs(x + 0.5 - center) > 0.8 * half_width) {
        id = static_cast<int>(ClassLabel::kShoulder);
      }
      for (const auto& b : blobs) {
        const double dy = (y - b.cy) / b.ry;
        const double dx = (x - b.cx) / b.rx;
        if (dy * dy + dx * dx <= 1.0) id = b.id;
      }
      frame.mask(y, x) = static_cast<std::uint8_t>(id);
      paint_pixel(frame.image, y, x, textures[id], phase[id], rng);
    }
  }
  return frame;
}

DriveSequence generate_synthetic_sequence(const SynthConfig& config, std::uint64_t seed) {
  validate_synth_config(config);
  DriveSequence seq;
  seq.sequence_id = config.sequence_id;
  seq.frames.reserve(config.frames);
  for (int i = 0; i < config.frames; ++i) {
    seq.frames.push_back(generate_synthetic_frame(config, seed, i));
  }
  return seq;
}

ObjectMask everything_is_road(int height, int width) { return ObjectMask(height, width, 0); }

Mask combine_masks(const Mask& annotation, const ObjectMask& object_mask) {
  require_same_shape(annotation, object_mask, "combine_masks");
  Mask out = annotation;
  auto dst = out.values();
  auto obj = object_mask.values();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (obj[i] != 0) dst[i] = kVoidId;
  }
  return out;
}

}  // namespace roadaudit
