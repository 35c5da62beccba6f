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

#ifndef ROADAUDIT_AUDIT_HPP_
#define ROADAUDIT_AUDIT_HPP_

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "roadaudit/dataset.hpp"
#include "roadaudit/predictor.hpp"
#include "roadaudit/tagging.hpp"

namespace roadaudit {

// Pixel share per class id; entry 0 is the void share, so entries sum to 1.
using ClassSeverity = std::array<double, kNumClasses>;

ClassSeverity severity(const Mask& mask);

struct SeverityRecord {
  GpsFix gps;
  int frame_index = 0;
  ClassSeverity severity{};

  friend bool operator==(const SeverityRecord&, const SeverityRecord&) = default;
};

struct AuditTrack {
  std::string sequence_id;
  std::vector<SeverityRecord> records;  // ascending frame_index
  int window = 1;

  friend bool operator==(const AuditTrack&, const AuditTrack&) = default;
};

void validate_window(int window);

// Centered moving average over `window` records per class; the window is
// clipped at both ends of the track.
AuditTrack smooth_track(const AuditTrack& track, int window);

struct GradeCuts {
  double medium = 0.01;  // low below this
  double high = 0.05;
};

std::string_view severity_grade(double value, const GradeCuts& cuts);

struct MapOptions {
  double severity_floor = 0.001;
  GradeCuts cuts;
};

void validate_map_options(const MapOptions& options);

// True when a smoothed severity becomes a map feature: positive and at least
// the floor.
bool emits_feature(double smoothed, double floor);

// RFC 7946 FeatureCollection of Points ([lon, lat]) for every (frame, class)
// that qualifies. `raw` tracks, when given, must align with `smoothed` and
// add a raw_severity property.
std::string emit_map(std::span<const AuditTrack> smoothed, const MapOptions& options,
                     std::span<const AuditTrack> raw = {});

// sequence_id,frame_index,lat,lon,class,raw,smoothed; ten rows per frame.
std::string severity_csv(const AuditTrack& raw, const AuditTrack& smoothed);

// Yields a sequence's frames one at a time.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual const std::string& sequence_id() const = 0;
  // Frames remaining, including any that fail to load.
  virtual bool done() const = 0;
  // Index of the frame the next call to next() returns.
  virtual int peek_index() const = 0;
  // Advances past the frame even when loading throws.
  virtual Frame next() = 0;
};

// Reads frames lazily from a sequence directory on disk.
class SequenceDirSource : public FrameSource {
 public:
  explicit SequenceDirSource(std::filesystem::path sequence_dir);
  const std::string& sequence_id() const override { return manifest_.sequence_id; }
  bool done() const override { return pos_ >= manifest_.frames.size(); }
  int peek_index() const override;
  Frame next() override;

 private:
  std::filesystem::path dir_;
  Manifest manifest_;
  std::size_t pos_ = 0;
};

// Serves frames from an in-memory sequence.
class MemorySource : public FrameSource {
 public:
  explicit MemorySource(const DriveSequence& sequence) : seq_(sequence) {}
  const std::string& sequence_id() const override { return seq_.sequence_id; }
  bool done() const override { return pos_ >= seq_.frames.size(); }
  int peek_index() const override;
  Frame next() override;

 private:
  const DriveSequence& seq_;
  std::size_t pos_ = 0;
};

struct AuditOptions {
  int window = 5;
  MapOptions map;
};

struct FrameGap {
  int frame_index = 0;
  std::string reason;
};

struct AuditResult {
  std::string sequence_id;
  std::vector<int> frame_indices;  // frames that produced a record
  std::vector<FrameTags> tags;     // aligned with frame_indices
  std::vector<FrameTags> gt_tags;  // from frame masks; empty if frames lack them
  AuditTrack raw;
  AuditTrack smoothed;
  std::vector<FrameGap> gaps;
  std::string geojson;
};

using GapCallback = std::function<void(const FrameGap&)>;

// One pass over the source: predict, tag and score each frame, then release
// it. A frame whose load or prediction throws becomes a gap.
AuditResult run_audit(FrameSource& source, Predictor& predictor, const ThresholdTable& thresholds,
                      const AuditOptions& options, const GapCallback& on_gap = nullptr);

// {"sequence_id", "frames": [{"frame_index", "tags": [...]}], "gaps": [...]}
std::string audit_tags_json(const AuditResult& result);

}  // namespace roadaudit

#endif  // ROADAUDIT_AUDIT_HPP_
