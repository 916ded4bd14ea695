#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "tod/pipeline.hpp"

using namespace tod;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tod_test_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Synthesizes the demo scenario once per test binary, shortened to keep the
// suite quick.
const fs::path& demo_dir() {
  static const fs::path dir = [] {
    const fs::path d = scratch("demo");
    auto j = nlohmann::json::parse(detail::read_file(fs::path(TOD_CONFIG_DIR) / "synth_demo.json"));
    for (auto& s : j["synth"]["scenes"]) s["frames"] = 40;
    write(d / "synth.json", j.dump());
    write_report_set(run_pipeline(load_run_config(d / "synth.json"), Mode::Synth), d);
    return d;
  }();
  return dir;
}

}  // namespace

TEST(Pipeline, SynthWritesLoadableDataset) {
  const auto& d = demo_dir();
  EXPECT_TRUE(fs::exists(d / "small-slow" / "gt.txt"));
  EXPECT_TRUE(fs::exists(d / "large-fast" / "det_yolov4-tiny-288.txt"));
  EXPECT_TRUE(fs::exists(d / "manifest.json"));
  const auto cfg = load_run_config(d / "config.json");
  EXPECT_EQ(cfg.detectors.size(), 4u);
  ASSERT_EQ(cfg.sequences.size(), 2u);
  EXPECT_EQ(cfg.sequences[0].stream.frame_count, 40);
  ASSERT_TRUE(cfg.policy);
  EXPECT_EQ(cfg.policy->thresholds, (std::vector<double>{0.007, 0.03, 0.04}));
}

TEST(Pipeline, AllModesProduceReports) {
  const auto cfg = load_run_config(demo_dir() / "config.json");
  const auto offline = run_pipeline(cfg, Mode::OfflineEval);
  EXPECT_EQ(lines(offline.at("offline_ap.csv")).size(), 1u + 2 * 4);
  const auto realtime = run_pipeline(cfg, Mode::RealtimeEval);
  EXPECT_EQ(lines(realtime.at("realtime_ap.csv")).size(), 1u + 2 * 4);
  const auto tod = run_pipeline(cfg, Mode::Tod);
  EXPECT_EQ(lines(tod.at("tod_ap.csv")).size(), 3u);
  EXPECT_EQ(lines(tod.at("tod_frequency.csv")).size(), 1u + 3 * 4);
  EXPECT_TRUE(tod.contains("tod_resource.csv"));
  EXPECT_TRUE(tod.contains("tod_schedule_small-slow.csv"));
  const auto s = run_pipeline(cfg, Mode::Search);
  EXPECT_EQ(lines(s.at("search.csv")).size(), 1u + 8);
  const auto manifest = nlohmann::json::parse(s.at("manifest.json"));
  EXPECT_EQ(manifest.at("mode"), "search");
  EXPECT_EQ(manifest.at("seed"), 2024u);
  EXPECT_TRUE(manifest.at("inputs").contains("small-slow/gt.txt"));
}

TEST(Pipeline, RerunsAreByteIdentical) {
  const auto cfg = load_run_config(demo_dir() / "config.json");
  for (auto mode : {Mode::Tod, Mode::Search}) EXPECT_EQ(run_pipeline(cfg, mode), run_pipeline(cfg, mode));
  const auto again = load_run_config(demo_dir() / "config.json");
  EXPECT_EQ(run_pipeline(cfg, Mode::Tod), run_pipeline(again, Mode::Tod));
}

TEST(Pipeline, SeedOverrideChangesSynthesis) {
  const auto& d = demo_dir();
  const auto a = run_pipeline(load_run_config(d / "synth.json"), Mode::Synth);
  const auto b = run_pipeline(load_run_config(d / "synth.json", 7), Mode::Synth);
  EXPECT_NE(a.at("small-slow/gt.txt"), b.at("small-slow/gt.txt"));
  EXPECT_EQ(a, run_pipeline(load_run_config(d / "synth.json"), Mode::Synth));
}

TEST(Pipeline, SingleDetectorTodMatchesRealtime) {
  const fs::path d = scratch("single");
  write(d / "gt.txt", "1,1,10,10,20,40,1,1,1\n2,1,14,10,20,40,1,1,1\n3,1,18,10,20,40,1,1,1\n4,1,22,10,20,40,1,1,1\n");
  write(d / "det.txt", "1,-1,10,10,20,40,0.9,1,-1\n2,-1,14,10,20,40,0.8,1,-1\n3,-1,18,10,20,40,0.9,1,-1\n"
                       "4,-1,22,10,20,40,0.7,1,-1\n4,-1,60,60,5,5,0.5,1,-1\n");
  write(d / "config.json", R"({
    "detectors": [{"id": "only", "latency": 0.15}],
    "policy": {"thresholds": []},
    "sequences": [{"name": "s", "info": {"width": 100, "height": 100, "fps": 10, "frames": 4},
                   "ground_truth": "gt.txt", "traces": {"only": "det.txt"}}]
  })");
  const auto cfg = load_run_config(d / "config.json");
  const auto rt = nlohmann::json::parse(run_pipeline(cfg, Mode::RealtimeEval).at("realtime_ap.json"));
  const auto tod = nlohmann::json::parse(run_pipeline(cfg, Mode::Tod).at("tod.json"));
  const auto& a = rt.at("reports").at(0);
  const auto& b = tod.at("reports").at(0);
  for (const char* key : {"average_precision", "true_positives", "false_positives", "processed_frames",
                          "dropped_frames", "curve"}) {
    EXPECT_EQ(a.at(key), b.at(key)) << key;
  }
  EXPECT_EQ(a.at("dropped_frames"), 1);  // frames 1, 2, 4
}

TEST(Pipeline, ErrorsAreReported) {
  const fs::path d = scratch("errors");
  write(d / "gt.txt", "1,1,10,10,20,40,1,1,1\n");
  write(d / "bad.txt", "1,-1,10,10,20\n");
  write(d / "config.json", R"({
    "detectors": [{"id": "a", "latency": 0.01}],
    "sequences": [{"name": "s", "info": {"width": 100, "height": 100, "fps": 10, "frames": 1},
                   "ground_truth": "gt.txt", "traces": {"a": "bad.txt"}}]
  })");
  try {
    load_run_config(d / "config.json");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.txt"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
  }
  EXPECT_THROW(load_run_config(d / "missing.json"), ConfigError);
  write(d / "nopolicy.json", R"({"detectors": [{"id": "a", "latency": 0.01}],
    "sequences": [{"name": "s", "info": {"width": 100, "height": 100, "fps": 10, "frames": 1},
                   "ground_truth": "gt.txt", "traces": {"a": "gt.txt"}}]})");
  EXPECT_THROW(run_pipeline(load_run_config(d / "nopolicy.json"), Mode::Tod), ConfigError);
  EXPECT_THROW(run_pipeline(load_run_config(d / "nopolicy.json"), Mode::Search), ConfigError);
  EXPECT_THROW(mode_from_string("fast"), ConfigError);
}
