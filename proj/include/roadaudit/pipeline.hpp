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

#ifndef ROADAUDIT_PIPELINE_HPP_
#define ROADAUDIT_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "roadaudit/audit.hpp"
#include "roadaudit/dataset.hpp"
#include "roadaudit/metrics.hpp"
#include "roadaudit/segnet.hpp"
#include "roadaudit/tagging.hpp"
#include "roadaudit/training.hpp"

namespace roadaudit {

enum class SplitMode {
  kStratified,
  kNone,  // every frame is both train and val (overfit runs)
};

struct PipelineConfig {
  std::uint64_t seed = 7;  // copied into the model, split and training seeds
  int sequences = 1;
  SynthConfig synth;
  SplitSpec split;
  SplitMode split_mode = SplitMode::kStratified;
  ModelConfig model = ModelConfig::toy();
  TrainConfig train = TrainConfig::toy();
  ThresholdGrid grid = ThresholdGrid::pixels();
  // Optional {sequence_id: [[tag, ...] per frame index]} overriding the
  // mask-derived ground-truth tags.
  std::optional<std::filesystem::path> tag_file;
  AuditOptions audit;
};

// Sections: seed, synth, split, model, train, tagging, audit. Missing keys
// keep their defaults.
PipelineConfig pipeline_config_from_json(const std::string& text);
std::string pipeline_config_to_json(const PipelineConfig& config);
void validate_pipeline_config(const PipelineConfig& config);

// One JSON object per call, already serialized.
using LogSink = std::function<void(const std::string& json_line)>;

// Writes `sequences` synthetic sequences (seq_000, seq_001, ...) under
// `out_dir`. Frame sizes must be multiples of 8.
void run_synth(const PipelineConfig& config, const std::filesystem::path& out_dir,
               const LogSink& log = nullptr);

struct DatasetSplit {
  std::vector<FrameKey> train, val, test;
};

// Stratified (or pass-through) split of the dataset under `data_root`.
DatasetSplit split_dataset(const PipelineConfig& config, const std::filesystem::path& data_root);
std::vector<FrameKey> select_split(const DatasetSplit& split, const std::string& name);

// Trains and writes model.ckpt, history.csv and split.json into out_dir.
// On divergence the last completed epoch is kept as model.partial.ckpt and
// the kNumerical error propagates.
TrainHistory run_train(const PipelineConfig& config, const std::filesystem::path& data_root,
                       const std::filesystem::path& out_dir, const LogSink& log = nullptr);

// Writes eval_report.json and eval_report.txt. `split` is train, val, test
// or all.
std::map<HierarchyLevel, EvalReport> run_eval(const PipelineConfig& config, Predictor& predictor,
                                              const std::filesystem::path& data_root,
                                              const std::string& split,
                                              const std::filesystem::path& out_dir,
                                              const LogSink& log = nullptr);

struct FitResult {
  ThresholdSearch search;
  TagScores scores;  // on the fitting split with the fitted table
};

// Writes thresholds.json, tag_report.json and tag_report.txt.
FitResult run_fit_thresholds(const PipelineConfig& config, Predictor& predictor,
                             const std::filesystem::path& data_root, const std::string& split,
                             const std::filesystem::path& out_dir, const LogSink& log = nullptr);

struct AuditRun {
  AuditResult result;
  std::optional<TagScores> scores;  // against ground-truth tags when available
};

// Writes audit_tags.json, map.geojson, severity.csv and, when ground truth
// is available, tag_report.json.
AuditRun run_audit_command(const PipelineConfig& config, Predictor& predictor,
                           const ThresholdTable& thresholds,
                           const std::filesystem::path& sequence_dir,
                           const std::filesystem::path& out_dir, const LogSink& log = nullptr);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace roadaudit

#endif  // ROADAUDIT_PIPELINE_HPP_
