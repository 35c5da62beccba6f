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

#include <filesystem>
#include <map>

#include "geojson_check.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "process.hpp"
#include "schema_check.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = ROADAUDIT_CLI_PATH;
const fs::path kSchemaDir = ROADAUDIT_SCHEMA_DIR;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::path(::testing::TempDir()) / "roadaudit_cli" / info->name();
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  testutil::RunResult run(std::vector<std::string> args) {
    args.insert(args.begin(), kCli);
    return testutil::run_process(args, dir_ / ("proc" + std::to_string(calls_++)));
  }

  std::string path(const std::string& rel) const { return (dir_ / rel).string(); }

  // Small network and one epoch per step keep training in the sub-second range.
  std::string small_config() {
    const auto p = dir_ / "small.json";
    std::ofstream(p) << R"({"model":{"widths":[4,6,8],"mid_blocks":1,"deep_blocks":1,)"
                     << R"("decoder_blocks":1,"pool_scales":[1,2]},)"
                     << R"("train":{"max_epochs_road":1,"max_epochs_joint":1,)"
                     << R"("input_width":128,"input_height":64}})";
    return p.string();
  }

  void synth(const std::string& out, int sequences, int frames, const std::string& size = "128x64") {
    const auto r = run({"synth", "--sequences", std::to_string(sequences), "--frames",
                        std::to_string(frames), "--size", size, "--seed", "7", "--out", out});
    ASSERT_EQ(r.exit_code, 0) << r.err;
  }

  fs::path dir_;
  int calls_ = 0;
};

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = testutil::slurp(e.path());
  }
  return out;
}

TEST_F(Cli, SynthWritesRequestedLayout) {
  synth(path("ds"), 2, 10, "256x128");
  int manifests = 0, images = 0, masks = 0;
  for (const auto& e : fs::recursive_directory_iterator(path("ds"))) {
    if (!e.is_regular_file()) continue;
    const auto parent = e.path().parent_path().filename().string();
    if (e.path().filename() == "manifest.json") ++manifests;
    if (parent == "img" && e.path().extension() == ".png") ++images;
    if (parent == "mask" && e.path().extension() == ".png") ++masks;
  }
  EXPECT_EQ(manifests, 2);
  EXPECT_EQ(images, 20);
  EXPECT_EQ(masks, 20);
}

TEST_F(Cli, SynthRerunIsByteIdentical) {
  synth(path("a"), 2, 10, "256x128");
  synth(path("b"), 2, 10, "256x128");
  const auto a = tree_contents(path("a"));
  const auto b = tree_contents(path("b"));
  ASSERT_EQ(a.size(), 42u);
  EXPECT_TRUE(a == b);
}

TEST_F(Cli, SizeNotDivisibleByEightIsConfigError) {
  const auto r = run({"synth", "--size", "250x130", "--out", path("ds")});
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("divisible by 8"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("248x128"), std::string::npos) << r.err;
}

TEST_F(Cli, MalformedConfigIsConfigError) {
  std::ofstream(path("bad.json")) << "{bad";
  EXPECT_EQ(run({"synth", "--config", path("bad.json"), "--out", path("ds")}).exit_code, 2);
}

TEST_F(Cli, MissingDatasetIsDataError) {
  const auto r = run({"eval", "--checkpoint", "oracle", "--data", path("nowhere"), "--out", path("ev")});
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_NE(r.err.find("does not exist"), std::string::npos) << r.err;
  EXPECT_EQ(run({"train", "--data", path("nowhere"), "--out", path("tr")}).exit_code, 3);
}

TEST_F(Cli, DivergenceIsNumericalErrorAndKeepsPartialCheckpoint) {
  synth(path("ds"), 2, 10);
  const auto r = run({"train", "--config", small_config(), "--data", path("ds"), "--lr", "1e30",
                      "--out", path("tr")});
  EXPECT_EQ(r.exit_code, 4) << r.out;
  EXPECT_TRUE(fs::exists(path("tr/model.partial.ckpt")));
  EXPECT_FALSE(fs::exists(path("tr/model.ckpt")));
}

TEST_F(Cli, BaselineCheckpointIsTaggedAndEvaluable) {
  synth(path("ds"), 2, 10);
  const auto t = run({"train", "--config", small_config(), "--data", path("ds"), "--model",
                      "baseline", "--out", path("tr")});
  ASSERT_EQ(t.exit_code, 0) << t.out;
  EXPECT_NE(testutil::slurp(path("tr/model.ckpt")).find("\"kind\":\"baseline\""), std::string::npos);
  EXPECT_TRUE(fs::exists(path("tr/history.csv")));
  const auto e = run({"eval", "--checkpoint", path("tr/model.ckpt"), "--data", path("ds"),
                      "--out", path("ev")});
  ASSERT_EQ(e.exit_code, 0) << e.out;
  const auto doc = json::parse(testutil::slurp(path("ev/eval_report.json")));
  EXPECT_EQ(doc["model"], "baseline");

  // Category confusion equals the class confusion summed by membership.
  const auto& fine = doc["levels"]["class"]["confusion"];
  const auto& coarse = doc["levels"]["category"]["confusion"];
  std::vector<std::vector<long long>> rolled(6, std::vector<long long>(6, 0));
  for (int a = 0; a < 11; ++a)
    for (int b = 0; b < 11; ++b)
      rolled[oracle::kCategoryOf[a]][oracle::kCategoryOf[b]] += fine[a][b].get<long long>();
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) EXPECT_EQ(coarse[a][b].get<long long>(), rolled[a][b]);
}

TEST_F(Cli, OracleEvalScoresOneAndMatchesSchema) {
  synth(path("ds"), 2, 10);
  const auto r = run({"eval", "--checkpoint", "oracle", "--data", path("ds"), "--split", "all",
                      "--out", path("ev")});
  ASSERT_EQ(r.exit_code, 0) << r.out;
  const auto doc = json::parse(testutil::slurp(path("ev/eval_report.json")));
  for (const char* level : {"root", "category", "class", "class_minus_cat4"})
    EXPECT_EQ(doc["levels"][level]["mean_iou"], 1.0) << level;
  const testutil::SchemaChecker schema(
      json::parse(testutil::slurp(kSchemaDir / "eval_report.schema.json")));
  EXPECT_EQ(schema.check(doc), "");

  auto broken = doc;
  broken["levels"].erase("class");
  EXPECT_NE(schema.check(broken), "");
  broken = doc;
  broken["levels"]["root"]["mean_iou"] = 1.5;
  EXPECT_NE(schema.check(broken), "");
}

TEST_F(Cli, OracleFitAndAuditGiveMacroF1OneAndManifestCoordinates) {
  synth(path("ds"), 2, 10);
  const auto f = run({"fit-thresholds", "--checkpoint", "oracle", "--data", path("ds"),
                      "--split", "all", "--out", path("fit")});
  ASSERT_EQ(f.exit_code, 0) << f.out;
  EXPECT_EQ(json::parse(testutil::slurp(path("fit/tag_report.json")))["macro_f1"], 1.0);

  const auto seq = path("ds/seq_000");
  const auto a = run({"audit", "--checkpoint", "oracle", "--thresholds", path("fit/thresholds.json"),
                      "--sequence", seq, "--out", path("au")});
  ASSERT_EQ(a.exit_code, 0) << a.out;
  EXPECT_EQ(json::parse(testutil::slurp(path("au/tag_report.json")))["macro_f1"], 1.0);

  const auto manifest = json::parse(testutil::slurp(fs::path(seq) / "manifest.json"));
  std::map<int, std::pair<double, double>> gps;
  std::vector<int> order;
  for (const auto& fr : manifest["frames"]) {
    gps[fr["index"]] = {fr["gps"]["lon"], fr["gps"]["lat"]};
    order.push_back(fr["index"]);
  }
  const auto map = json::parse(testutil::slurp(path("au/map.geojson")));
  EXPECT_EQ(testutil::geojson_problem(map), "");
  ASSERT_FALSE(map["features"].empty());
  std::size_t cursor = 0;
  for (const auto& feat : map["features"]) {
    const int idx = feat["properties"]["frame_index"];
    const auto& c = feat["geometry"]["coordinates"];
    EXPECT_EQ(c[0].get<double>(), gps.at(idx).first);
    EXPECT_EQ(c[1].get<double>(), gps.at(idx).second);
    while (cursor < order.size() && order[cursor] != idx) ++cursor;
    EXPECT_LT(cursor, order.size()) << "features out of manifest order at frame " << idx;
  }
}

TEST_F(Cli, LabelsListsElevenClasses) {
  const auto r = run({"labels"});
  ASSERT_EQ(r.exit_code, 0);
  const auto doc = json::parse(r.out);
  ASSERT_EQ(doc["classes"].size(), 11u);
  EXPECT_EQ(doc["classes"][4]["name"], "pothole");
}

// Streaming audit: peak memory must not grow with sequence length.
TEST_F(Cli, AuditPeakMemoryIndependentOfSequenceLength) {
  synth(path("ds"), 1, 10);
  const auto t = run({"train", "--config", small_config(), "--data", path("ds"), "--split-mode",
                      "none", "--out", path("tr")});
  ASSERT_EQ(t.exit_code, 0) << t.out;
  const auto f = run({"fit-thresholds", "--checkpoint", path("tr/model.ckpt"), "--data", path("ds"),
                      "--split", "all", "--split-mode", "none", "--out", path("fit")});
  ASSERT_EQ(f.exit_code, 0) << f.out;

  long peak[2] = {0, 0};
  const int lengths[2] = {50, 500};
  for (int i = 0; i < 2; ++i) {
    const auto root = path("long" + std::to_string(lengths[i]));
    synth(root, 1, lengths[i]);
    const auto a = run({"audit", "--checkpoint", path("tr/model.ckpt"), "--thresholds",
                        path("fit/thresholds.json"), "--sequence", root + "/seq_000", "--out",
                        path("au" + std::to_string(i))});
    ASSERT_EQ(a.exit_code, 0) << a.out;
    peak[i] = a.peak_rss_kb;
  }
  RecordProperty("peak_rss_kb_50", std::to_string(peak[0]));
  RecordProperty("peak_rss_kb_500", std::to_string(peak[1]));
  // Output documents grow linearly and are allowed for; frames must not be retained.
  EXPECT_LT(peak[1], peak[0] * 5 / 4 + 8 * 1024) << "50 frames: " << peak[0] << " kB, 500 frames: " << peak[1] << " kB";
}

}  // namespace
