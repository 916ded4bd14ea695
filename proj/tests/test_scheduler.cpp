#include <algorithm>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "tod/scheduler.hpp"

using namespace tod;

namespace {

const SchedulerPolicy kPaperPolicy{{"yolov4-416", "yolov4-288", "yolov4-tiny-416", "yolov4-tiny-288"},
                                   {0.007, 0.03, 0.04}};

DetectionRecord det(double conf, int cls = kPersonClass, BoundingBox box = {0, 0, 10, 10}) {
  return {1, box, conf, cls};
}

}  // namespace

TEST(FilterDetections, ThresholdIsStrict) {
  const std::vector<DetectionRecord> raw{det(0.35), det(0.3500001), det(0.9)};
  const auto out = filter_detections(raw, FilterConfig{});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].confidence, 0.3500001);
  EXPECT_EQ(out[1].confidence, 0.9);
}

TEST(FilterDetections, PersonClassOnly) {
  const std::vector<DetectionRecord> raw{det(0.9, kPersonClass), det(0.9, 3)};
  const auto out = filter_detections(raw, FilterConfig{});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].class_id, kPersonClass);
}

TEST(FilterDetections, EmptyClassSetKeepsAllClasses) {
  FilterConfig cfg;
  cfg.classes.clear();
  const std::vector<DetectionRecord> raw{det(0.9, 1), det(0.9, 3), det(0.1, 3)};
  EXPECT_EQ(filter_detections(raw, cfg).size(), 2u);
}

TEST(FilterDetections, IdempotentAndOrderPreserving) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> conf(0.0, 1.0);
  std::uniform_int_distribution<int> cls(1, 3);
  std::vector<DetectionRecord> raw;
  for (int i = 0; i < 500; ++i) raw.push_back(det(conf(gen), cls(gen), {double(i), 0, 1, 1}));
  const auto once = filter_detections(raw, FilterConfig{});
  EXPECT_EQ(filter_detections(once, FilterConfig{}), once);
  EXPECT_TRUE(std::is_sorted(once.begin(), once.end(),
                             [](const auto& a, const auto& b) { return a.box.left < b.box.left; }));
}

TEST(ComputeMbbs, EmptyIsZero) { EXPECT_EQ(compute_mbbs({}, {100, 100}), 0.0); }

TEST(ComputeMbbs, SingleBox) {
  // 20x20 in 100x100 = 4%
  const std::vector<DetectionRecord> d{det(0.9, 1, {0, 0, 20, 20})};
  EXPECT_DOUBLE_EQ(compute_mbbs(d, {100, 100}), 0.04);
}

TEST(ComputeMbbs, RobustToOutlier) {
  const std::vector<DetectionRecord> d{det(0.9, 1, {0, 0, 10, 10}), det(0.9, 1, {0, 0, 10, 20}),
                                       det(0.9, 1, {0, 0, 100, 40})};
  EXPECT_DOUBLE_EQ(compute_mbbs(d, {100, 100}), 0.02);
}

TEST(ComputeMbbs, PermutationInvariant) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> s(1.0, 300.0);
  std::vector<DetectionRecord> d;
  for (int i = 0; i < 30; ++i) d.push_back(det(0.9, 1, {0, 0, s(gen), s(gen)}));
  const double m = compute_mbbs(d, {640, 480});
  for (int i = 0; i < 20; ++i) {
    std::shuffle(d.begin(), d.end(), gen);
    EXPECT_EQ(compute_mbbs(d, {640, 480}), m);
  }
}

TEST(SelectDetector, PaperPolicyExamples) {
  EXPECT_EQ(select_detector(0.05, kPaperPolicy), "yolov4-tiny-288");
  EXPECT_EQ(select_detector(0.0, kPaperPolicy), "yolov4-416");
  EXPECT_EQ(select_detector(0.03, kPaperPolicy), "yolov4-288");
}

TEST(SelectDetector, TotalAndMonotone) {
  std::size_t prev = 0;
  for (int i = 0; i <= 100000; ++i) {
    const double m = i / 100000.0;
    const std::size_t idx = select_detector_index(m, kPaperPolicy);
    ASSERT_LT(idx, kPaperPolicy.detectors.size());
    EXPECT_GE(idx, prev);
    prev = idx;
  }
  EXPECT_EQ(prev, 3u);
}

TEST(SelectDetector, SingleDetectorPolicyIsConstant) {
  const SchedulerPolicy p{{"only"}, {}};
  p.validate();
  for (double m : {0.0, 0.5, 1.0, 7.0}) EXPECT_EQ(select_detector(m, p), "only");
}

TEST(SchedulerPolicy, Validation) {
  EXPECT_NO_THROW(kPaperPolicy.validate());
  EXPECT_THROW((SchedulerPolicy{{"a", "b"}, {}}).validate(), ConfigError);
  EXPECT_THROW((SchedulerPolicy{{"a", "b", "c"}, {0.2, 0.1}}).validate(), ConfigError);
  EXPECT_THROW((SchedulerPolicy{{"a", "b", "c"}, {0.1, 0.1}}).validate(), ConfigError);
  EXPECT_THROW((SchedulerPolicy{{"a", "b"}, {1.0}}).validate(), ConfigError);
  EXPECT_THROW((SchedulerPolicy{{"a", "b"}, {0.0}}).validate(), ConfigError);
  EXPECT_THROW((SchedulerPolicy{{"a", "a"}, {0.5}}).validate(), ConfigError);
  EXPECT_THROW((SchedulerPolicy{{}, {}}).validate(), ConfigError);
}

TEST(SchedulerPolicy, JsonRoundTrip) {
  const auto p = policy_from_json(to_json(kPaperPolicy));
  EXPECT_EQ(p.detectors, kPaperPolicy.detectors);
  EXPECT_EQ(p.thresholds, kPaperPolicy.thresholds);
  const auto f = filter_config_from_json({{"confidence", 0.5}, {"classes", {1, 2}}});
  EXPECT_EQ(f.confidence_threshold, 0.5);
  EXPECT_EQ(f.classes, (std::set<int>{1, 2}));
  EXPECT_THROW(filter_config_from_json({{"confidence", 1.5}}), ConfigError);
}
