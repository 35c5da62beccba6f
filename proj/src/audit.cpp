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

#include "roadaudit/audit.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"

namespace roadaudit {

ClassSeverity severity(const Mask& mask) {
  const auto counts = class_pixel_counts(mask);
  const double area = static_cast<double>(mask.values().size());
  ClassSeverity s{};
  if (area == 0.0) return s;
  for (int c = 0; c < kNumClasses; ++c) s[c] = static_cast<double>(counts[c]) / area;
  return s;
}

void validate_window(int window) {
  if (window < 1 || window % 2 == 0) {
    fail(ErrorKind::kConfig, "smoothing window must be a positive odd integer, got " +
                                 std::to_string(window));
  }
}

AuditTrack smooth_track(const AuditTrack& track, int window) {
  validate_window(window);
  AuditTrack out = track;
  out.window = window;
  if (window == 1) return out;
  const int n = static_cast<int>(track.records.size());
  const int half = window / 2;
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    for (int c = 0; c < kNumClasses; ++c) {
      // Shifted mean, so a constant window reproduces its value exactly.
      const double base = track.records[i].severity[c];
      double offset = 0.0;
      for (int j = lo; j <= hi; ++j) offset += track.records[j].severity[c] - base;
      out.records[i].severity[c] = base + offset / static_cast<double>(hi - lo + 1);
    }
  }
  return out;
}

std::string_view severity_grade(double value, const GradeCuts& cuts) {
  if (value >= cuts.high) return "high";
  if (value >= cuts.medium) return "medium";
  return "low";
}

void validate_map_options(const MapOptions& o) {
  if (!(o.severity_floor >= 0.0 && o.severity_floor <= 1.0)) {
    fail(ErrorKind::kConfig, "severity floor must lie in [0, 1]");
  }
  if (!(o.cuts.medium >= 0.0 && o.cuts.medium <= o.cuts.high && o.cuts.high <= 1.0)) {
    fail(ErrorKind::kConfig, "grade cut points must satisfy 0 <= medium <= high <= 1");
  }
}

bool emits_feature(double smoothed, double floor) { return smoothed > 0.0 && smoothed >= floor; }

std::string emit_map(std::span<const AuditTrack> smoothed, const MapOptions& options,
                     std::span<const AuditTrack> raw) {
  validate_map_options(options);
  if (!raw.empty() && raw.size() != smoothed.size()) {
    fail(ErrorKind::kShape, "raw and smoothed track lists differ in length");
  }
  nlohmann::ordered_json fc;
  fc["type"] = "FeatureCollection";
  fc["features"] = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < smoothed.size(); ++t) {
    const auto& track = smoothed[t];
    if (!raw.empty() && raw[t].records.size() != track.records.size()) {
      fail(ErrorKind::kShape, "raw and smoothed tracks of '" + track.sequence_id + "' differ in length");
    }
    for (std::size_t i = 0; i < track.records.size(); ++i) {
      const auto& rec = track.records[i];
      if (!std::isfinite(rec.gps.lat) || !std::isfinite(rec.gps.lon)) {
        fail(ErrorKind::kData, "non-finite GPS fix at frame " + std::to_string(rec.frame_index) +
                                   " of '" + track.sequence_id + "'");
      }
      for (int c = 1; c < kNumClasses; ++c) {
        const double s = rec.severity[c];
        if (!emits_feature(s, options.severity_floor)) continue;
        nlohmann::ordered_json f;
        f["type"] = "Feature";
        f["geometry"] = {{"type", "Point"}, {"coordinates", {rec.gps.lon, rec.gps.lat}}};
        nlohmann::ordered_json props;
        props["class"] = class_name(class_from_id(c));
        props["severity"] = s;
        if (!raw.empty()) props["raw_severity"] = raw[t].records[i].severity[c];
        props["grade"] = severity_grade(s, options.cuts);
        props["sequence_id"] = track.sequence_id;
        props["frame_index"] = rec.frame_index;
        f["properties"] = props;
        fc["features"].push_back(std::move(f));
      }
    }
  }
  return fc.dump();
}

std::string severity_csv(const AuditTrack& raw, const AuditTrack& smoothed) {
  if (raw.records.size() != smoothed.records.size()) {
    fail(ErrorKind::kShape, "raw and smoothed tracks differ in length");
  }
  std::ostringstream out;
  out.precision(17);
  out << "sequence_id,frame_index,lat,lon,class,raw,smoothed\n";
  for (std::size_t i = 0; i < raw.records.size(); ++i) {
    const auto& r = raw.records[i];
    for (int c = 1; c < kNumClasses; ++c) {
      out << raw.sequence_id << ',' << r.frame_index << ',' << r.gps.lat << ',' << r.gps.lon << ','
          << class_name(class_from_id(c)) << ',' << r.severity[c] << ','
          << smoothed.records[i].severity[c] << '\n';
    }
  }
  return out.str();
}

SequenceDirSource::SequenceDirSource(std::filesystem::path sequence_dir)
    : dir_(std::move(sequence_dir)), manifest_(read_manifest(dir_)) {}

int SequenceDirSource::peek_index() const {
  return done() ? -1 : manifest_.frames[pos_].index;
}

Frame SequenceDirSource::next() {
  if (done()) fail(ErrorKind::kContract, "frame source exhausted");
  const auto& entry = manifest_.frames[pos_++];
  return load_frame(dir_, manifest_.sequence_id, entry);
}

int MemorySource::peek_index() const { return done() ? -1 : seq_.frames[pos_].index; }

Frame MemorySource::next() {
  if (done()) fail(ErrorKind::kContract, "frame source exhausted");
  return seq_.frames[pos_++];
}

AuditResult run_audit(FrameSource& source, Predictor& predictor, const ThresholdTable& thresholds,
                      const AuditOptions& options, const GapCallback& on_gap) {
  validate_window(options.window);
  validate_map_options(options.map);
  if (!thresholds.complete()) fail(ErrorKind::kConfig, "threshold table does not cover all ten classes");
  AuditResult result;
  result.sequence_id = source.sequence_id();
  result.raw.sequence_id = result.sequence_id;
  while (!source.done()) {
    const int index = source.peek_index();
    try {
      const Frame frame = source.next();
      validate_gps(frame.gps);
      const Mask pred = predictor.predict(frame);
      result.tags.push_back(tag_frame(pred, thresholds));
      result.raw.records.push_back(SeverityRecord{frame.gps, frame.index, severity(pred)});
      result.frame_indices.push_back(frame.index);
      if (frame.mask.height() > 0) result.gt_tags.push_back(frame_tags_from_mask(frame.mask));
    } catch (const Error& e) {
      FrameGap gap{index, e.what()};
      if (on_gap) on_gap(gap);
      result.gaps.push_back(std::move(gap));
    }
  }
  if (result.gt_tags.size() != result.tags.size()) result.gt_tags.clear();
  result.smoothed = smooth_track(result.raw, options.window);
  result.geojson = emit_map(std::span<const AuditTrack>(&result.smoothed, 1), options.map,
                            std::span<const AuditTrack>(&result.raw, 1));
  return result;
}

std::string audit_tags_json(const AuditResult& result) {
  nlohmann::ordered_json j;
  j["sequence_id"] = result.sequence_id;
  j["frames"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < result.tags.size(); ++i) {
    auto tags = nlohmann::ordered_json::array();
    for (auto c : result.tags[i]) tags.push_back(class_name(c));
    j["frames"].push_back({{"frame_index", result.frame_indices[i]}, {"tags", tags}});
  }
  j["gaps"] = nlohmann::ordered_json::array();
  for (const auto& g : result.gaps) j["gaps"].push_back({{"frame_index", g.frame_index}, {"reason", g.reason}});
  return j.dump(2);
}

}  // namespace roadaudit
