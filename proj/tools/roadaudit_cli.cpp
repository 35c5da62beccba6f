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

// roadaudit: synth | train | eval | fit-thresholds | audit | labels.
// Links only the C interface. Logs go to stderr, one JSON object per line.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "roadaudit/roadaudit.h"

namespace {

using nlohmann::json;

void log_line(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

int report_failure(ra_status status) {
  nlohmann::ordered_json j{{"level", "error"}, {"event", "failed"}, {"status", static_cast<int>(status)},
         {"message", ra_last_error()}};
  std::fprintf(stderr, "%s\n", j.dump().c_str());
  return static_cast<int>(status);
}

int usage_failure(const std::string& message) {
  nlohmann::ordered_json j{{"level", "error"}, {"event", "usage"}, {"message", message}};
  std::fprintf(stderr, "%s\n", j.dump().c_str());
  return RA_ERR_CONFIG;
}

struct ConfigFlags {
  std::string path;
  std::optional<std::uint64_t> seed;
};

// Loads --config (if any) and applies the global seed override.
json load_config(const ConfigFlags& flags) {
  json j = json::object();
  if (!flags.path.empty()) {
    std::ifstream in(flags.path);
    if (!in) throw std::runtime_error("cannot read config '" + flags.path + "'");
    std::stringstream s;
    s << in.rdbuf();
    j = json::parse(s.str());
    if (!j.is_object()) throw std::runtime_error("config must be a JSON object");
  }
  if (flags.seed) j["seed"] = *flags.seed;
  return j;
}

template <typename V>
void override_key(json& j, const char* section, const char* key, const std::optional<V>& v) {
  if (v) j[section][key] = *v;
}

bool parse_size(const std::string& text, int& width, int& height) {
  const auto x = text.find('x');
  if (x == std::string::npos) return false;
  try {
    std::size_t used = 0;
    width = std::stoi(text.substr(0, x), &used);
    if (used != x) return false;
    const auto rest = text.substr(x + 1);
    height = std::stoi(rest, &used);
    return used == rest.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Road-audit toolkit: synthesize, train, evaluate, tag and map road defects"};
  app.require_subcommand(1);
  ConfigFlags cfg;
  std::string out_dir;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", cfg.path, "pipeline config JSON");
    sub->add_option("--seed", cfg.seed, "seed for every stochastic component");
    sub->add_option("--out", out_dir, "output directory")->required();
  };

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic dataset");
  add_common(synth);
  std::optional<int> sequences, frames;
  std::string size;
  bool texture_only = false;
  synth->add_option("--sequences", sequences, "number of sequences");
  synth->add_option("--frames", frames, "frames per sequence");
  synth->add_option("--size", size, "frame size WxH, both multiples of 8");
  synth->add_flag("--texture-only", texture_only, "classes differ only in texture");

  // train
  auto* train = app.add_subcommand("train", "train a cascade or baseline model");
  add_common(train);
  std::string data_root, model_kind;
  std::optional<int> epochs_road, epochs_joint, batch;
  std::optional<double> lr, target_miou;
  std::string split_mode, schedule;
  train->add_option("--data", data_root, "dataset root")->required();
  train->add_option("--model", model_kind, "cascade or baseline")->check(CLI::IsMember({"cascade", "baseline"}));
  train->add_option("--epochs-road", epochs_road, "step-1 epoch limit");
  train->add_option("--epochs-joint", epochs_joint, "step-2 epoch limit");
  train->add_option("--batch", batch, "batch size");
  train->add_option("--lr", lr, "learning rate");
  train->add_option("--target-train-miou", target_miou, "stop once train defect mIoU reaches this");
  train->add_option("--schedule", schedule, "two_step or joint")->check(CLI::IsMember({"two_step", "joint"}));
  train->add_option("--split-mode", split_mode, "stratified or none")->check(CLI::IsMember({"stratified", "none"}));

  // eval
  auto* eval = app.add_subcommand("eval", "score a model at every hierarchy level");
  add_common(eval);
  std::string checkpoint, split = "test";
  eval->add_option("--checkpoint", checkpoint, "checkpoint path or 'oracle'")->required();
  eval->add_option("--data", data_root, "dataset root")->required();
  eval->add_option("--split", split, "train, val, test or all");
  eval->add_option("--split-mode", split_mode, "stratified or none")->check(CLI::IsMember({"stratified", "none"}));

  // fit-thresholds
  auto* fit = app.add_subcommand("fit-thresholds", "search per-class tagging thresholds");
  add_common(fit);
  std::string fit_split = "val", unit;
  fit->add_option("--checkpoint", checkpoint, "checkpoint path or 'oracle'")->required();
  fit->add_option("--data", data_root, "dataset root")->required();
  fit->add_option("--split", fit_split, "train, val, test or all");
  fit->add_option("--unit", unit, "pixels or fraction")->check(CLI::IsMember({"pixels", "fraction"}));
  fit->add_option("--split-mode", split_mode, "stratified or none")->check(CLI::IsMember({"stratified", "none"}));

  // audit
  auto* audit = app.add_subcommand("audit", "tag frames and write the severity map");
  add_common(audit);
  std::string thresholds, sequence;
  std::optional<int> window;
  std::optional<double> floor;
  audit->add_option("--checkpoint", checkpoint, "checkpoint path or 'oracle'")->required();
  audit->add_option("--thresholds", thresholds, "threshold table JSON")->required();
  audit->add_option("--sequence", sequence, "sequence directory")->required();
  audit->add_option("--window", window, "odd smoothing window in frames");
  audit->add_option("--floor", floor, "minimum smoothed severity to map");

  auto* labels = app.add_subcommand("labels", "print the label taxonomy as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return RA_ERR_CONFIG;
  }

  ra_set_log_callback(log_line, nullptr);

  if (labels->parsed()) {
    char* text = nullptr;
    if (const auto s = ra_labels_json(&text); s != RA_OK) return report_failure(s);
    std::printf("%s\n", text);
    ra_string_free(text);
    return 0;
  }

  json config;
  try {
    config = load_config(cfg);
    if (!split_mode.empty()) config["split"]["mode"] = split_mode;
    if (synth->parsed()) {
      override_key(config, "synth", "sequences", sequences);
      override_key(config, "synth", "frames", frames);
      if (!size.empty()) {
        int w = 0, h = 0;
        if (!parse_size(size, w, h)) return usage_failure("--size expects WxH, e.g. 256x128");
        config["synth"]["width"] = w;
        config["synth"]["height"] = h;
      }
      if (texture_only) config["synth"]["texture_only"] = true;
    }
    if (train->parsed()) {
      if (!model_kind.empty()) config["model"]["kind"] = model_kind;
      override_key(config, "train", "max_epochs_road", epochs_road);
      override_key(config, "train", "max_epochs_joint", epochs_joint);
      override_key(config, "train", "batch_size", batch);
      override_key(config, "train", "learning_rate", lr);
      override_key(config, "train", "target_train_miou", target_miou);
      if (!schedule.empty()) config["train"]["schedule"] = schedule;
    }
    if (fit->parsed() && !unit.empty()) config["tagging"]["unit"] = unit;
    if (audit->parsed()) {
      override_key(config, "audit", "window", window);
      override_key(config, "audit", "severity_floor", floor);
    }
  } catch (const std::exception& e) {
    return usage_failure(e.what());
  }
  const std::string text = config.dump();

  ra_status status = RA_OK;
  if (synth->parsed()) {
    status = ra_synth(text.c_str(), out_dir.c_str());
  } else if (train->parsed()) {
    status = ra_train(text.c_str(), data_root.c_str(), out_dir.c_str());
  } else if (eval->parsed()) {
    status = ra_eval(text.c_str(), checkpoint.c_str(), data_root.c_str(), split.c_str(), out_dir.c_str());
  } else if (fit->parsed()) {
    status = ra_fit_thresholds(text.c_str(), checkpoint.c_str(), data_root.c_str(), fit_split.c_str(),
                               out_dir.c_str());
  } else if (audit->parsed()) {
    status = ra_audit(text.c_str(), checkpoint.c_str(), thresholds.c_str(), sequence.c_str(),
                      out_dir.c_str());
  }
  return status == RA_OK ? 0 : report_failure(status);
}
