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
#include <fstream>

#include "json.hpp"
#include "roadaudit/dataset.hpp"
#include "roadaudit/image_io.hpp"

namespace roadaudit {
namespace fs = std::filesystem;

namespace {

fs::path image_path(const fs::path& dir, int index) {
  return dir / "img" / (std::to_string(index) + ".png");
}

fs::path mask_path(const fs::path& dir, int index) {
  return dir / "mask" / (std::to_string(index) + ".png");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    fail(ErrorKind::kIo, "cannot create directory '" + dir.string() + "'");
  }
}

}  // namespace

void write_manifest(const Manifest& manifest, const fs::path& sequence_dir) {
  nlohmann::ordered_json doc;
  doc["sequence_id"] = manifest.sequence_id;
  doc["frames"] = nlohmann::ordered_json::array();
  for (const auto& e : manifest.frames) {
    doc["frames"].push_back({{"index", e.index}, {"gps", {{"lat", e.gps.lat}, {"lon", e.gps.lon}}}});
  }
  std::ofstream out(sequence_dir / "manifest.json");
  if (!out) fail(ErrorKind::kIo, "cannot write manifest in '" + sequence_dir.string() + "'");
  out << doc.dump(2) << "\n";
}

Manifest read_manifest(const fs::path& sequence_dir) {
  const auto path = sequence_dir / "manifest.json";
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kData, "missing manifest '" + path.string() + "'");
  Manifest m;
  try {
    const auto doc = nlohmann::json::parse(in);
    m.sequence_id = doc.at("sequence_id").get<std::string>();
    for (const auto& f : doc.at("frames")) {
      ManifestEntry e;
      e.index = f.at("index").get<int>();
      e.gps.lat = f.at("gps").at("lat").get<double>();
      e.gps.lon = f.at("gps").at("lon").get<double>();
      validate_gps(e.gps);
      m.frames.push_back(e);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, "malformed manifest '" + path.string() + "': " + e.what());
  }
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    if (m.frames[i].index != static_cast<int>(i)) {
      fail(ErrorKind::kData, "manifest '" + path.string() +
                                 "' frame indices must be contiguous from 0; got " +
                                 std::to_string(m.frames[i].index) + " at position " +
                                 std::to_string(i));
    }
  }
  return m;
}

void save_sequence(const DriveSequence& sequence, const fs::path& root) {
  const fs::path dir = root / sequence.sequence_id;
  ensure_dir(dir / "img");
  ensure_dir(dir / "mask");
  Manifest m;
  m.sequence_id = sequence.sequence_id;
  for (std::size_t i = 0; i < sequence.frames.size(); ++i) {
    const auto& f = sequence.frames[i];
    if (f.index != static_cast<int>(i)) {
      fail(ErrorKind::kData, "frame indices must be contiguous from 0");
    }
    if (f.image.height != f.mask.height() || f.image.width != f.mask.width()) {
      fail(ErrorKind::kShape, "image and mask of frame " + std::to_string(i) + " differ in size");
    }
    validate_gps(f.gps);
    write_png_rgb(image_path(dir, f.index), f.image);
    write_png_gray(mask_path(dir, f.index), f.mask);
    m.frames.push_back({f.index, f.gps});
  }
  write_manifest(m, dir);
}

Frame load_frame(const fs::path& sequence_dir, const std::string& sequence_id,
                 const ManifestEntry& entry) {
  const auto img_file = image_path(sequence_dir, entry.index);
  const auto mask_file = mask_path(sequence_dir, entry.index);
  if (!fs::exists(img_file) || !fs::exists(mask_file)) {
    fail(ErrorKind::kData, "sequence '" + sequence_id + "' is missing frame index " +
                               std::to_string(entry.index));
  }
  Frame f;
  f.sequence_id = sequence_id;
  f.index = entry.index;
  f.gps = entry.gps;
  f.image = read_png_rgb(img_file);
  f.mask = read_png_gray(mask_file);
  if (f.image.height != f.mask.height() || f.image.width != f.mask.width()) {
    fail(ErrorKind::kData, "frame " + std::to_string(entry.index) + " image and mask sizes differ");
  }
  try {
    validate_class_mask(f.mask);
  } catch (const Error& e) {
    fail(ErrorKind::kData, "out-of-range class id in '" + mask_file.string() + "': " + e.what());
  }
  return f;
}

DriveSequence load_sequence(const fs::path& sequence_dir) {
  const auto manifest = read_manifest(sequence_dir);
  // Files present on disk but absent from the manifest are a count mismatch too.
  std::size_t on_disk = 0;
  if (fs::is_directory(sequence_dir / "img")) {
    for (const auto& e : fs::directory_iterator(sequence_dir / "img")) {
      if (e.path().extension() == ".png") ++on_disk;
    }
  }
  DriveSequence seq;
  seq.sequence_id = manifest.sequence_id;
  for (const auto& entry : manifest.frames) {
    seq.frames.push_back(load_frame(sequence_dir, manifest.sequence_id, entry));
  }
  if (on_disk != manifest.frames.size()) {
    fail(ErrorKind::kData, "manifest lists " + std::to_string(manifest.frames.size()) +
                               " frames but directory holds " + std::to_string(on_disk));
  }
  return seq;
}

std::vector<fs::path> list_sequences(const fs::path& root) {
  if (!fs::is_directory(root)) {
    fail(ErrorKind::kData, "dataset root '" + root.string() + "' does not exist");
  }
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::exists(e.path() / "manifest.json")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) fail(ErrorKind::kData, "no sequences found under '" + root.string() + "'");
  return out;
}

}  // namespace roadaudit
