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

#include "roadaudit/pipeline.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace roadaudit {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void emit(const LogSink& log, const char* level, const char* event, ordered_json fields = {}) {
  if (!log) return;
  ordered_json line;
  line["level"] = level;
  line["event"] = event;
  if (fields.is_object()) {
    for (auto& [k, v] : fields.items()) line[k] = v;
  }
  log(line.dump());
}

template <typename V>
void read_key(const json& j, const char* key, V& field) {
  if (j.contains(key)) field = j.at(key).get<V>();
}

json section(const json& root, const char* key) {
  if (!root.contains(key)) return json::object();
  const auto& s = root.at(key);
  if (!s.is_object()) fail(ErrorKind::kConfig, std::string("config section '") + key + "' must be an object");
  return s;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail(ErrorKind::kIo, "failed writing '" + path.string() + "'");
}

PipelineConfig pipeline_config_from_json(const std::string& text) {
  PipelineConfig c;
  json root;
  try {
    root = text.empty() ? json::object() : json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, std::string("malformed pipeline config: ") + e.what());
  }
  if (!root.is_object()) fail(ErrorKind::kConfig, "pipeline config must be a JSON object");
  try {
    read_key(root, "seed", c.seed);

    const auto synth = section(root, "synth");
    read_key(synth, "sequences", c.sequences);
    read_key(synth, "frames", c.synth.frames);
    read_key(synth, "width", c.synth.width);
    read_key(synth, "height", c.synth.height);
    read_key(synth, "texture_only", c.synth.texture_only);
    read_key(synth, "frequency", c.synth.frequency);
    read_key(synth, "start_lat", c.synth.start.lat);
    read_key(synth, "start_lon", c.synth.start.lon);
    read_key(synth, "step_lat", c.synth.step_lat);
    read_key(synth, "step_lon", c.synth.step_lon);

    const auto split = section(root, "split");
    read_key(split, "train", c.split.train);
    read_key(split, "val", c.split.val);
    read_key(split, "test", c.split.test);
    read_key(split, "tolerance", c.split.tolerance);
    read_key(split, "search_budget", c.split.search_budget);
    if (split.contains("mode")) {
      const auto mode = split.at("mode").get<std::string>();
      if (mode == "stratified") {
        c.split_mode = SplitMode::kStratified;
      } else if (mode == "none") {
        c.split_mode = SplitMode::kNone;
      } else {
        fail(ErrorKind::kConfig, "unknown split mode '" + mode + "'");
      }
    }

    if (root.contains("model")) c.model = model_config_from_json(section(root, "model").dump());
    if (root.contains("train")) c.train = train_config_from_json(section(root, "train").dump(), c.train);

    const auto tagging = section(root, "tagging");
    if (tagging.contains("unit")) {
      c.grid.unit = threshold_unit_from_name(tagging.at("unit").get<std::string>());
      c.grid = c.grid.unit == ThresholdUnit::kPixels ? ThresholdGrid::pixels() : ThresholdGrid::fractions();
    }
    read_key(tagging, "grid", c.grid.values);
    if (tagging.contains("tag_file")) c.tag_file = tagging.at("tag_file").get<std::string>();

    const auto audit = section(root, "audit");
    read_key(audit, "window", c.audit.window);
    read_key(audit, "severity_floor", c.audit.map.severity_floor);
    read_key(audit, "grade_medium", c.audit.map.cuts.medium);
    read_key(audit, "grade_high", c.audit.map.cuts.high);
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, std::string("malformed pipeline config: ") + e.what());
  }
  c.model.seed = c.seed;
  c.train.seed = c.seed;
  validate_pipeline_config(c);
  return c;
}

std::string pipeline_config_to_json(const PipelineConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["synth"] = {{"sequences", c.sequences},
                {"frames", c.synth.frames},
                {"width", c.synth.width},
                {"height", c.synth.height},
                {"texture_only", c.synth.texture_only},
                {"frequency", c.synth.frequency},
                {"start_lat", c.synth.start.lat},
                {"start_lon", c.synth.start.lon},
                {"step_lat", c.synth.step_lat},
                {"step_lon", c.synth.step_lon}};
  j["split"] = {{"train", c.split.train},
                {"val", c.split.val},
                {"test", c.split.test},
                {"tolerance", c.split.tolerance},
                {"search_budget", c.split.search_budget},
                {"mode", c.split_mode == SplitMode::kNone ? "none" : "stratified"}};
  j["model"] = ordered_json::parse(model_config_to_json(c.model));
  j["train"] = ordered_json::parse(train_config_to_json(c.train));
  j["tagging"] = {{"unit", threshold_unit_name(c.grid.unit)}, {"grid", c.grid.values}};
  if (c.tag_file) j["tagging"]["tag_file"] = c.tag_file->string();
  j["audit"] = {{"window", c.audit.window},
                {"severity_floor", c.audit.map.severity_floor},
                {"grade_medium", c.audit.map.cuts.medium},
                {"grade_high", c.audit.map.cuts.high}};
  return j.dump(2);
}

void validate_pipeline_config(const PipelineConfig& c) {
  if (c.sequences < 1) fail(ErrorKind::kConfig, "sequences must be >= 1");
  validate_synth_config(c.synth);
  if (c.synth.width % kDownsampleFactor != 0 || c.synth.height % kDownsampleFactor != 0) {
    const auto round = [](int v) { return std::max(kDownsampleFactor, (v / kDownsampleFactor) * kDownsampleFactor); };
    fail(ErrorKind::kConfig, "frame size " + std::to_string(c.synth.width) + "x" +
                                 std::to_string(c.synth.height) +
                                 " is not divisible by 8 (the network downsamples three times); try " +
                                 std::to_string(round(c.synth.width)) + "x" +
                                 std::to_string(round(c.synth.height)));
  }
  if (c.split_mode == SplitMode::kStratified) validate_split_spec(c.split);
  validate_model_config(c.model);
  validate_train_config(c.train);
  validate_threshold_grid(c.grid);
  validate_window(c.audit.window);
  validate_map_options(c.audit.map);
}

// ---------------------------------------------------------------------------

void run_synth(const PipelineConfig& config, const std::filesystem::path& out_dir,
               const LogSink& log) {
  validate_pipeline_config(config);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create '" + out_dir.string() + "': " + ec.message());
  for (int s = 0; s < config.sequences; ++s) {
    SynthConfig sc = config.synth;
    char id[32];
    std::snprintf(id, sizeof(id), "seq_%03d", s);
    sc.sequence_id = id;
    // Sequences start at staggered positions so their tracks do not overlap.
    sc.start.lat += s * 0.01;
    const auto seq = generate_synthetic_sequence(sc, mix_seed(config.seed, static_cast<std::uint64_t>(s)));
    save_sequence(seq, out_dir);
    emit(log, "info", "sequence_written", {{"sequence_id", sc.sequence_id}, {"frames", sc.frames}});
  }
}

namespace {

struct DatasetIndex {
  std::map<std::string, std::filesystem::path> dirs;
  std::map<std::string, Manifest> manifests;

  explicit DatasetIndex(const std::filesystem::path& root) {
    for (const auto& dir : list_sequences(root)) {
      auto m = read_manifest(dir);
      if (dirs.count(m.sequence_id)) {
        fail(ErrorKind::kData, "duplicate sequence id '" + m.sequence_id + "'");
      }
      dirs[m.sequence_id] = dir;
      manifests[m.sequence_id] = std::move(m);
    }
  }

  std::vector<FrameKey> keys() const {
    std::vector<FrameKey> out;
    for (const auto& [id, m] : manifests) {
      for (const auto& e : m.frames) out.push_back(FrameKey{id, e.index});
    }
    return out;
  }

  Frame load(const FrameKey& key) const {
    const auto it = manifests.find(key.sequence_id);
    if (it == manifests.end()) fail(ErrorKind::kData, "unknown sequence '" + key.sequence_id + "'");
    for (const auto& e : it->second.frames) {
      if (e.index == key.index) return load_frame(dirs.at(key.sequence_id), key.sequence_id, e);
    }
    fail(ErrorKind::kData, "sequence '" + key.sequence_id + "' has no frame " + std::to_string(key.index));
  }
};

ordered_json keys_json(const std::vector<FrameKey>& keys) {
  auto a = ordered_json::array();
  for (const auto& k : keys) a.push_back({{"sequence_id", k.sequence_id}, {"index", k.index}});
  return a;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create '" + dir.string() + "': " + ec.message());
}

using TagFile = std::map<std::string, std::vector<FrameTags>>;

TagFile read_tag_file(const std::filesystem::path& path) {
  TagFile out;
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::kData, "malformed tag file '" + path.string() + "': " + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::kData, "tag file must map sequence ids to tag lists");
  for (const auto& [id, list] : j.items()) out[id] = frame_tags_from_json(list.dump());
  return out;
}

FrameTags ground_truth_tags(const Frame& frame, const TagFile* tags) {
  if (!tags) return frame_tags_from_mask(frame.mask);
  const auto it = tags->find(frame.sequence_id);
  if (it == tags->end() || frame.index < 0 || frame.index >= static_cast<int>(it->second.size())) {
    fail(ErrorKind::kData, "tag file has no entry for frame " + std::to_string(frame.index) +
                               " of '" + frame.sequence_id + "'");
  }
  return it->second[frame.index];
}

}  // namespace

DatasetSplit split_dataset(const PipelineConfig& config, const std::filesystem::path& data_root) {
  const DatasetIndex index(data_root);
  DatasetSplit out;
  if (config.split_mode == SplitMode::kNone) {
    out.train = out.val = out.test = index.keys();
    return out;
  }
  std::vector<FrameStats> stats;
  for (const auto& key : index.keys()) stats.push_back(frame_stats(index.load(key)));
  auto r = stratified_split(stats, config.split, config.seed);
  out.train = std::move(r.train);
  out.val = std::move(r.val);
  out.test = std::move(r.test);
  return out;
}

std::vector<FrameKey> select_split(const DatasetSplit& split, const std::string& name) {
  if (name == "train") return split.train;
  if (name == "val") return split.val;
  if (name == "test") return split.test;
  if (name == "all") {
    std::vector<FrameKey> all = split.train;
    for (const auto* part : {&split.val, &split.test}) {
      for (const auto& k : *part) {
        if (std::find(all.begin(), all.end(), k) == all.end()) all.push_back(k);
      }
    }
    std::sort(all.begin(), all.end());
    return all;
  }
  fail(ErrorKind::kConfig, "unknown split '" + name + "' (expected train, val, test or all)");
}

TrainHistory run_train(const PipelineConfig& config, const std::filesystem::path& data_root,
                       const std::filesystem::path& out_dir, const LogSink& log) {
  validate_pipeline_config(config);
  if (!std::filesystem::is_directory(data_root)) {
    fail(ErrorKind::kData, "dataset '" + data_root.string() + "' does not exist");
  }
  const DatasetIndex index(data_root);
  const DatasetSplit split = split_dataset(config, data_root);
  ensure_dir(out_dir);
  write_text_file(out_dir / "split.json", ordered_json{{"mode", config.split_mode == SplitMode::kNone ? "none" : "stratified"},
                                                       {"train", keys_json(split.train)},
                                                       {"val", keys_json(split.val)},
                                                       {"test", keys_json(split.test)}}
                                              .dump(2));
  std::vector<Frame> train_frames, val_frames;
  for (const auto& k : split.train) train_frames.push_back(index.load(k));
  for (const auto& k : split.val) val_frames.push_back(index.load(k));
  TrainData data;
  for (const auto& f : train_frames) data.train.push_back(&f);
  for (const auto& f : val_frames) data.val.push_back(&f);

  SegModel<float> model(config.model);
  emit(log, "info", "train_start",
       {{"model", model_kind_name(config.model.kind)},
        {"parameters", model.parameter_count()},
        {"train_frames", data.train.size()},
        {"val_frames", data.val.size()}});

  auto params = model.parameters();
  std::vector<std::vector<float>> snapshot;
  auto take_snapshot = [&] {
    snapshot.clear();
    for (const auto* p : params) snapshot.emplace_back(p->value.data(), p->value.data() + p->value.size());
  };
  take_snapshot();
  TrainHistory partial;
  auto extra = [&](int epochs) {
    return ordered_json{{"input_width", config.train.input_width},
                        {"input_height", config.train.input_height},
                        {"model", model_kind_name(config.model.kind)},
                        {"epochs", epochs}}
        .dump();
  };

  auto on_epoch = [&](const EpochRecord& r, SegModel<float>& m) {
    partial.epochs.push_back(r);
    take_snapshot();
    ordered_json f{{"epoch", r.epoch}, {"step", r.step}, {"road_loss", r.road_loss}, {"defect_loss", r.defect_loss}};
    f["val_road_miou"] = r.val_road_miou ? ordered_json(*r.val_road_miou) : ordered_json(nullptr);
    f["val_defect_miou"] = r.val_defect_miou ? ordered_json(*r.val_defect_miou) : ordered_json(nullptr);
    f["train_defect_miou"] = r.train_defect_miou ? ordered_json(*r.train_defect_miou) : ordered_json(nullptr);
    f["seconds"] = r.seconds;
    emit(log, "info", "epoch", f);
    if (config.train.checkpoint_every > 0 && r.epoch % config.train.checkpoint_every == 0) {
      save_checkpoint(m, out_dir / "model.last.ckpt", extra(r.epoch));
    }
  };

  TrainHistory history;
  try {
    history = train_model(model, data, config.train, on_epoch);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNumerical) throw;
    for (std::size_t i = 0; i < params.size(); ++i) {
      std::copy(snapshot[i].begin(), snapshot[i].end(), params[i]->value.data());
    }
    const int done = partial.epochs.empty() ? 0 : partial.epochs.back().epoch;
    save_checkpoint(model, out_dir / "model.partial.ckpt", extra(done));
    write_text_file(out_dir / "history.csv", partial.to_csv());
    emit(log, "error", "diverged", {{"message", e.what()}, {"last_good_epoch", done}});
    throw;
  }
  for (const auto& w : history.warnings) emit(log, "warning", "train_warning", {{"message", w}});
  const int epochs = history.epochs.empty() ? 0 : history.epochs.back().epoch;
  save_checkpoint(model, out_dir / "model.ckpt", extra(epochs));
  write_text_file(out_dir / "history.csv", history.to_csv());
  const auto final_miou = history.final_train_defect_miou();
  emit(log, "info", "train_done",
       {{"epochs", epochs},
        {"road_target_reached", history.road_target_reached},
        {"final_train_defect_miou", final_miou ? ordered_json(*final_miou) : ordered_json(nullptr)}});
  return history;
}

std::map<HierarchyLevel, EvalReport> run_eval(const PipelineConfig& config, Predictor& predictor,
                                              const std::filesystem::path& data_root,
                                              const std::string& split_name,
                                              const std::filesystem::path& out_dir,
                                              const LogSink& log) {
  const DatasetIndex index(data_root);
  const auto keys = select_split(split_dataset(config, data_root), split_name);
  if (keys.empty()) fail(ErrorKind::kData, "split '" + split_name + "' is empty");
  HierarchyEvaluator evaluator;
  for (const auto& k : keys) {
    const Frame frame = index.load(k);
    evaluator.accumulate(predictor.predict(frame), frame.mask);
  }
  const auto reports = evaluator.reports();
  ensure_dir(out_dir);
  write_text_file(out_dir / "eval_report.json", reports_to_json(reports, predictor.name()));
  write_text_file(out_dir / "eval_report.txt", reports_to_table(reports, predictor.name()));
  ordered_json f{{"split", split_name}, {"frames", keys.size()}};
  for (const auto& [level, r] : reports) {
    f[std::string(level_name(level)) + "_miou"] = r.mean_iou ? ordered_json(*r.mean_iou) : ordered_json(nullptr);
  }
  emit(log, "info", "eval_done", f);
  return reports;
}

FitResult run_fit_thresholds(const PipelineConfig& config, Predictor& predictor,
                             const std::filesystem::path& data_root, const std::string& split_name,
                             const std::filesystem::path& out_dir, const LogSink& log) {
  const DatasetIndex index(data_root);
  const auto keys = select_split(split_dataset(config, data_root), split_name);
  if (keys.empty()) fail(ErrorKind::kData, "split '" + split_name + "' is empty");
  std::optional<TagFile> tag_file;
  if (config.tag_file) tag_file = read_tag_file(*config.tag_file);
  std::vector<FrameCounts> counts;
  std::vector<FrameTags> gt;
  for (const auto& k : keys) {
    const Frame frame = index.load(k);
    counts.push_back(frame_counts(predictor.predict(frame)));
    gt.push_back(ground_truth_tags(frame, tag_file ? &*tag_file : nullptr));
  }
  FitResult r{search_thresholds(counts, gt, config.grid), {}};
  for (const auto& w : r.search.warnings) emit(log, "warning", "threshold_warning", {{"message", w}});
  std::vector<FrameTags> predicted;
  for (const auto& c : counts) predicted.push_back(tag_counts(c.counts, c.area, r.search.table));
  r.scores = tag_prf(predicted, gt);
  ensure_dir(out_dir);
  write_text_file(out_dir / "thresholds.json", threshold_table_to_json(r.search.table));
  write_text_file(out_dir / "tag_report.json", tag_scores_to_json(r.scores, predictor.name()));
  write_text_file(out_dir / "tag_report.txt", tag_scores_to_table(r.scores, predictor.name()));
  emit(log, "info", "thresholds_fitted",
       {{"split", split_name},
        {"frames", keys.size()},
        {"macro_f1", r.scores.macro_f1 ? ordered_json(*r.scores.macro_f1) : ordered_json(nullptr)}});
  return r;
}

AuditRun run_audit_command(const PipelineConfig& config, Predictor& predictor,
                           const ThresholdTable& thresholds,
                           const std::filesystem::path& sequence_dir,
                           const std::filesystem::path& out_dir, const LogSink& log) {
  SequenceDirSource source(sequence_dir);
  AuditRun run;
  run.result = run_audit(source, predictor, thresholds, config.audit, [&](const FrameGap& g) {
    emit(log, "warning", "frame_gap", {{"frame_index", g.frame_index}, {"reason", g.reason}});
  });
  const auto& res = run.result;
  std::vector<FrameTags> gt = res.gt_tags;
  if (config.tag_file) {
    const auto tag_file = read_tag_file(*config.tag_file);
    gt.clear();
    const auto it = tag_file.find(res.sequence_id);
    if (it == tag_file.end()) fail(ErrorKind::kData, "tag file lacks sequence '" + res.sequence_id + "'");
    for (int idx : res.frame_indices) {
      if (idx < 0 || idx >= static_cast<int>(it->second.size())) {
        fail(ErrorKind::kData, "tag file lacks frame " + std::to_string(idx));
      }
      gt.push_back(it->second[idx]);
    }
  }
  ensure_dir(out_dir);
  write_text_file(out_dir / "audit_tags.json", audit_tags_json(res));
  write_text_file(out_dir / "map.geojson", res.geojson);
  write_text_file(out_dir / "severity.csv", severity_csv(res.raw, res.smoothed));
  if (!gt.empty() && gt.size() == res.tags.size()) {
    run.scores = tag_prf(res.tags, gt);
    write_text_file(out_dir / "tag_report.json", tag_scores_to_json(*run.scores, predictor.name()));
  }
  ordered_json f{{"sequence_id", res.sequence_id},
                 {"frames", res.frame_indices.size()},
                 {"gaps", res.gaps.size()}};
  if (run.scores) {
    f["macro_f1"] = run.scores->macro_f1 ? ordered_json(*run.scores->macro_f1) : ordered_json(nullptr);
  }
  emit(log, "info", "audit_done", f);
  return run;
}

}  // namespace roadaudit
