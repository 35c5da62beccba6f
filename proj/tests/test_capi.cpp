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

#include <gtest/gtest.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "roadaudit/roadaudit.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  ra_string_free(s);
  return out;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::path(::testing::TempDir()) / "roadaudit_capi" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kSmall =
    R"({"seed":11,"synth":{"sequences":1,"frames":6,"width":64,"height":32},)"
    R"("model":{"widths":[4,6,8],"mid_blocks":1,"deep_blocks":1,"decoder_blocks":1,"pool_scales":[1,2]},)"
    R"("split":{"mode":"none"},)"
    R"("train":{"max_epochs_road":1,"max_epochs_joint":1,"input_width":64,"input_height":32}})";

TEST(CApi, VersionAndLabels) {
  EXPECT_STRNE(ra_version(), "");
  char* out = nullptr;
  ASSERT_EQ(ra_labels_json(&out), RA_OK);
  const auto doc = json::parse(take(out));
  EXPECT_EQ(doc["classes"].size(), 11u);
}

TEST(CApi, NullArgumentsAreRejected) {
  EXPECT_EQ(ra_labels_json(nullptr), RA_ERR_ARGUMENT);
  EXPECT_EQ(ra_synth(nullptr, nullptr), RA_ERR_ARGUMENT);
  EXPECT_EQ(ra_model_open(nullptr, nullptr), RA_ERR_ARGUMENT);
  std::uint8_t px[3] = {0, 0, 0};
  EXPECT_EQ(ra_model_infer(nullptr, px, 1, 1, px), RA_ERR_ARGUMENT);
  EXPECT_STRNE(ra_last_error(), "");
  ra_model_free(nullptr);
}

TEST(CApi, ConfigResolveFillsDefaultsAndKeepsOverrides) {
  char* out = nullptr;
  ASSERT_EQ(ra_config_resolve(R"({"train":{"learning_rate":0.01}})", &out), RA_OK);
  const auto doc = json::parse(take(out));
  EXPECT_EQ(doc["train"]["learning_rate"], 0.01);
  EXPECT_EQ(doc["model"]["kind"], "cascade");
  EXPECT_EQ(doc["audit"]["window"], 5);
}

TEST(CApi, ErrorKindsMapToDistinctStatuses) {
  char* out = nullptr;
  EXPECT_EQ(ra_config_resolve("{not json", &out), RA_ERR_CONFIG);
  EXPECT_EQ(ra_config_resolve(R"({"synth":{"width":250,"height":130}})", &out), RA_ERR_CONFIG);
  EXPECT_NE(std::string(ra_last_error()).find("8"), std::string::npos);
  const auto dir = scratch("errors");
  EXPECT_EQ(ra_eval("{}", "oracle", (dir / "missing").c_str(), "all", (dir / "ev").c_str()),
            RA_ERR_DATA);
  EXPECT_EQ(ra_model_open((dir / "missing.ckpt").c_str(), reinterpret_cast<ra_model**>(&out)),
            RA_ERR_DATA);
}

struct Lines {
  std::vector<std::string> items;
};

void collect(const char* line, void* user) { static_cast<Lines*>(user)->items.emplace_back(line); }

TEST(CApi, EndToEndThroughTheLibrary) {
  const auto dir = scratch("e2e");
  Lines log;
  ra_set_log_callback(&collect, &log);
  ASSERT_EQ(ra_synth(kSmall, (dir / "ds").c_str()), RA_OK) << ra_last_error();
  ASSERT_EQ(ra_train(kSmall, (dir / "ds").c_str(), (dir / "tr").c_str()), RA_OK) << ra_last_error();
  ra_set_log_callback(nullptr, nullptr);
  ASSERT_FALSE(log.items.empty());
  for (const auto& l : log.items) EXPECT_TRUE(json::parse(l).contains("event")) << l;

  const auto ckpt = (dir / "tr" / "model.ckpt").string();
  ASSERT_EQ(ra_eval(kSmall, ckpt.c_str(), (dir / "ds").c_str(), "all", (dir / "ev").c_str()), RA_OK)
      << ra_last_error();
  EXPECT_TRUE(fs::exists(dir / "ev" / "eval_report.json"));
  ASSERT_EQ(ra_fit_thresholds(kSmall, "oracle", (dir / "ds").c_str(), "all", (dir / "fit").c_str()),
            RA_OK)
      << ra_last_error();
  const auto seq = fs::directory_iterator(dir / "ds")->path();
  ASSERT_EQ(ra_audit(kSmall, ckpt.c_str(), (dir / "fit" / "thresholds.json").c_str(), seq.c_str(),
                     (dir / "au").c_str()),
            RA_OK)
      << ra_last_error();
  EXPECT_TRUE(fs::exists(dir / "au" / "map.geojson"));

  ra_model* model = nullptr;
  ASSERT_EQ(ra_model_open(ckpt.c_str(), &model), RA_OK) << ra_last_error();
  const int h = 32, w = 64;
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(h) * w * 3);
  for (std::size_t i = 0; i < rgb.size(); ++i) rgb[i] = static_cast<std::uint8_t>((i * 37) % 251);
  std::vector<std::uint8_t> m1(static_cast<std::size_t>(h) * w), m2(m1.size());
  ASSERT_EQ(ra_model_infer(model, rgb.data(), h, w, m1.data()), RA_OK) << ra_last_error();
  ASSERT_EQ(ra_model_infer(model, rgb.data(), h, w, m2.data()), RA_OK);
  EXPECT_EQ(m1, m2);
  for (auto v : m1) EXPECT_LE(v, 10);
  ra_model_free(model);

  ASSERT_EQ(ra_model_open("oracle", &model), RA_OK);
  EXPECT_EQ(ra_model_infer(model, rgb.data(), h, w, m1.data()), RA_ERR_CONFIG);
  ra_model_free(model);
}

}  // namespace
