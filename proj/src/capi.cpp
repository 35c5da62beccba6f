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

#include <cstring>
#include <exception>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>

#include "roadaudit/pipeline.hpp"
#include "roadaudit/predictor.hpp"
#include "roadaudit/roadaudit.h"

struct ra_model {
  std::unique_ptr<roadaudit::Predictor> predictor;
};

namespace {

thread_local std::string g_last_error;

std::mutex g_log_mutex;
ra_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

ra_status status_for(roadaudit::ErrorKind kind) {
  using roadaudit::ErrorKind;
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kShape:
    case ErrorKind::kInfeasible:
      return RA_ERR_CONFIG;
    case ErrorKind::kData:
    case ErrorKind::kInvalidLabel:
      return RA_ERR_DATA;
    case ErrorKind::kNumerical:
      return RA_ERR_NUMERICAL;
    case ErrorKind::kIo:
      return RA_ERR_IO;
    case ErrorKind::kContract:
      return RA_ERR_INTERNAL;
  }
  return RA_ERR_INTERNAL;
}

template <typename F>
ra_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return RA_OK;
  } catch (const roadaudit::Error& e) {
    g_last_error = std::string(roadaudit::error_kind_name(e.kind())) + ": " + e.what();
    return status_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = std::string("io: ") + e.what();
    return RA_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = std::string("internal: ") + e.what();
    return RA_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "internal: unknown failure";
    return RA_ERR_INTERNAL;
  }
}

ra_status bad_argument(const char* what) {
  g_last_error = std::string("argument: ") + what;
  return RA_ERR_ARGUMENT;
}

roadaudit::LogSink sink() {
  return [](const std::string& line) {
    std::lock_guard<std::mutex> lock(g_log_mutex);
    if (g_log_fn) g_log_fn(line.c_str(), g_log_user);
  };
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

roadaudit::PipelineConfig config_of(const char* json) {
  return roadaudit::pipeline_config_from_json(json ? json : "");
}

}  // namespace

extern "C" {

const char* ra_version(void) { return "0.1.0"; }

const char* ra_last_error(void) { return g_last_error.c_str(); }

void ra_set_log_callback(ra_log_fn fn, void* user) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  g_log_fn = fn;
  g_log_user = user;
}

void ra_string_free(char* s) { std::free(s); }

ra_status ra_labels_json(char** out_json) {
  if (!out_json) return bad_argument("out_json is NULL");
  return guarded([&] { *out_json = dup_string(roadaudit::labels_json()); });
}

ra_status ra_config_resolve(const char* config_json, char** out_json) {
  if (!out_json) return bad_argument("out_json is NULL");
  return guarded([&] { *out_json = dup_string(roadaudit::pipeline_config_to_json(config_of(config_json))); });
}

ra_status ra_synth(const char* config_json, const char* out_dir) {
  if (!out_dir) return bad_argument("out_dir is NULL");
  return guarded([&] { roadaudit::run_synth(config_of(config_json), out_dir, sink()); });
}

ra_status ra_train(const char* config_json, const char* data_root, const char* out_dir) {
  if (!data_root || !out_dir) return bad_argument("data_root and out_dir are required");
  return guarded([&] { roadaudit::run_train(config_of(config_json), data_root, out_dir, sink()); });
}

ra_status ra_eval(const char* config_json, const char* model_spec, const char* data_root,
                  const char* split, const char* out_dir) {
  if (!model_spec || !data_root || !split || !out_dir) return bad_argument("missing argument");
  return guarded([&] {
    const auto config = config_of(config_json);
    auto predictor = roadaudit::open_predictor(model_spec);
    roadaudit::run_eval(config, *predictor, data_root, split, out_dir, sink());
  });
}

ra_status ra_fit_thresholds(const char* config_json, const char* model_spec, const char* data_root,
                            const char* split, const char* out_dir) {
  if (!model_spec || !data_root || !split || !out_dir) return bad_argument("missing argument");
  return guarded([&] {
    const auto config = config_of(config_json);
    auto predictor = roadaudit::open_predictor(model_spec);
    roadaudit::run_fit_thresholds(config, *predictor, data_root, split, out_dir, sink());
  });
}

ra_status ra_audit(const char* config_json, const char* model_spec, const char* thresholds_path,
                   const char* sequence_dir, const char* out_dir) {
  if (!model_spec || !thresholds_path || !sequence_dir || !out_dir) {
    return bad_argument("missing argument");
  }
  return guarded([&] {
    const auto config = config_of(config_json);
    const auto table =
        roadaudit::threshold_table_from_json(roadaudit::read_text_file(thresholds_path));
    auto predictor = roadaudit::open_predictor(model_spec);
    roadaudit::run_audit_command(config, *predictor, table, sequence_dir, out_dir, sink());
  });
}

ra_status ra_model_open(const char* model_spec, ra_model** out_model) {
  if (!model_spec || !out_model) return bad_argument("model_spec and out_model are required");
  *out_model = nullptr;
  return guarded([&] {
    auto m = std::make_unique<ra_model>();
    m->predictor = roadaudit::open_predictor(model_spec);
    *out_model = m.release();
  });
}

void ra_model_free(ra_model* model) { delete model; }

ra_status ra_model_infer(ra_model* model, const uint8_t* rgb, int height, int width,
                         uint8_t* out_mask) {
  if (!model || !rgb || !out_mask) return bad_argument("model, rgb and out_mask are required");
  if (height <= 0 || width <= 0) return bad_argument("image size must be positive");
  return guarded([&] {
    if (model->predictor->name() == "oracle") {
      roadaudit::fail(roadaudit::ErrorKind::kConfig, "the oracle model needs ground-truth masks");
    }
    roadaudit::Frame frame;
    frame.image = roadaudit::Image(height, width);
    std::memcpy(frame.image.rgb.data(), rgb, frame.image.rgb.size());
    const auto mask = model->predictor->predict(frame);
    const auto values = mask.values();
    std::memcpy(out_mask, values.data(), values.size());
  });
}

}  // extern "C"
