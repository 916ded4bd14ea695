#pragma once

#include <algorithm>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tod/error.hpp"
#include "tod/geom.hpp"
#include "tod/mot_io.hpp"

namespace tod {

using DetectorId = std::string;

// Class id of "person" in MOT-format traces.
inline constexpr int kPersonClass = 1;

struct FilterConfig {
  double confidence_threshold = 0.35;  // strict: keep conf > threshold
  std::set<int> classes{kPersonClass};  // empty set disables class filtering

  void validate() const {
    if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
      throw ConfigError("filter confidence threshold must lie in [0, 1]");
    }
  }

  bool keeps(const DetectionRecord& d) const noexcept {
    return d.confidence > confidence_threshold && (classes.empty() || classes.contains(d.class_id));
  }
};

// Maps MBBS onto one of n detectors using n - 1 increasing thresholds.
// detectors[0] is the heaviest and serves as the default; band i is
// (thresholds[i-1], thresholds[i]] and the last band is open above.
struct SchedulerPolicy {
  std::vector<DetectorId> detectors;
  std::vector<double> thresholds;

  const DetectorId& default_detector() const { return detectors.front(); }
  const DetectorId& lightest() const { return detectors.back(); }

  void validate() const {
    if (detectors.empty()) throw ConfigError("policy needs at least one detector");
    if (thresholds.size() + 1 != detectors.size()) {
      throw ConfigError("policy with " + std::to_string(detectors.size()) + " detectors needs " +
                        std::to_string(detectors.size() - 1) + " thresholds, got " +
                        std::to_string(thresholds.size()));
    }
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      if (!(thresholds[i] > 0.0 && thresholds[i] < 1.0)) {
        throw ConfigError("policy thresholds must lie in (0, 1)");
      }
      if (i > 0 && !(thresholds[i - 1] < thresholds[i])) {
        throw ConfigError("policy thresholds must be strictly increasing");
      }
    }
    std::set<DetectorId> seen;
    for (const auto& id : detectors) {
      if (!seen.insert(id).second) throw ConfigError("duplicate detector id '" + id + "' in policy");
    }
  }
};

inline FrameDetections filter_detections(std::span<const DetectionRecord> raw, const FilterConfig& cfg) {
  FrameDetections out;
  for (const auto& d : raw) {
    if (cfg.keeps(d)) out.push_back(d);
  }
  return out;
}

// Median of Bounding Box Sizes: median area fraction over the given boxes,
// 0 when there are none.
inline double compute_mbbs(std::span<const DetectionRecord> detections, const ImageDims& dims) {
  require_valid(dims);
  std::vector<double> sizes;
  sizes.reserve(detections.size());
  for (const auto& d : detections) sizes.push_back(area_fraction(d.box, dims));
  return median(sizes);
}

inline std::size_t select_detector_index(double mbbs, const SchedulerPolicy& policy) {
  const auto& h = policy.thresholds;
  return static_cast<std::size_t>(std::lower_bound(h.begin(), h.end(), mbbs) - h.begin());
}

inline const DetectorId& select_detector(double mbbs, const SchedulerPolicy& policy) {
  return policy.detectors[select_detector_index(mbbs, policy)];
}

inline FilterConfig filter_config_from_json(const nlohmann::json& j) {
  FilterConfig cfg;
  cfg.confidence_threshold = j.value("confidence", cfg.confidence_threshold);
  if (j.contains("classes")) cfg.classes = j.at("classes").get<std::set<int>>();
  cfg.validate();
  return cfg;
}

inline nlohmann::json to_json(const FilterConfig& cfg) {
  return {{"confidence", cfg.confidence_threshold}, {"classes", cfg.classes}};
}

inline SchedulerPolicy policy_from_json(const nlohmann::json& j) {
  SchedulerPolicy p;
  p.detectors = j.at("detectors").get<std::vector<DetectorId>>();
  p.thresholds = j.value("thresholds", std::vector<double>{});
  p.validate();
  return p;
}

inline nlohmann::json to_json(const SchedulerPolicy& p) {
  return {{"detectors", p.detectors}, {"thresholds", p.thresholds}};
}

}  // namespace tod
