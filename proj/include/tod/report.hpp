#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tod/error.hpp"
#include "tod/stream_sim.hpp"

namespace tod {

// Fraction of processed frames handled by each detector. Dropped frames ran
// no detector and are not counted.
inline std::map<DetectorId, double> deployment_frequency(const SimResult& result) {
  std::map<DetectorId, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& f : result.frames) {
    if (!f.processed) continue;
    ++counts[*f.detector];
    ++total;
  }
  if (total == 0) throw ConfigError("deployment frequency needs at least one processed frame");
  std::map<DetectorId, double> out;
  for (const auto& [id, c] : counts) out[id] = static_cast<double>(c) / static_cast<double>(total);
  return out;
}

struct DetectorCost {
  double power_watts = 0.0;
  std::optional<double> gpu_utilization;  // fraction of GPU busy time
  std::optional<double> memory_gb;
};

struct CostProfile {
  std::map<DetectorId, DetectorCost> detectors;
  double baseline_memory_gb = 0.0;

  void validate() const {
    if (baseline_memory_gb < 0.0) throw ConfigError("baseline memory must be non-negative");
    for (const auto& [id, c] : detectors) {
      if (c.power_watts < 0.0 || c.gpu_utilization.value_or(0.0) < 0.0 || c.memory_gb.value_or(0.0) < 0.0) {
        throw ConfigError("cost entries for '" + id + "' must be non-negative");
      }
    }
  }
};

struct ResourceEstimate {
  double power_watts = 0.0;
  std::optional<double> gpu_utilization;  // only when every weighted detector has one
  std::optional<double> memory_gb;        // baseline + largest preloaded model
};

// Frequency-weighted averages of the per-detector costs. Memory is not
// weighted: all detectors are resident at once, so the estimate is the
// baseline plus the largest model in the profile.
inline ResourceEstimate resource_estimate(const std::map<DetectorId, double>& freq, const CostProfile& cost) {
  if (freq.empty()) throw ConfigError("resource estimate needs a non-empty frequency map");
  cost.validate();
  ResourceEstimate est;
  double util = 0.0;
  bool have_util = true;
  for (const auto& [id, f] : freq) {
    const auto it = cost.detectors.find(id);
    if (it == cost.detectors.end()) throw ConfigError("cost profile has no entry for detector '" + id + "'");
    est.power_watts += f * it->second.power_watts;
    if (it->second.gpu_utilization) {
      util += f * *it->second.gpu_utilization;
    } else {
      have_util = false;
    }
  }
  if (have_util) est.gpu_utilization = util;
  std::optional<double> largest;
  for (const auto& [id, c] : cost.detectors) {
    if (c.memory_gb) largest = std::max(largest.value_or(0.0), *c.memory_gb);
  }
  if (largest) est.memory_gb = cost.baseline_memory_gb + *largest;
  return est;
}

inline CostProfile cost_profile_from_json(const nlohmann::json& j) {
  CostProfile cp;
  cp.baseline_memory_gb = j.value("baseline_memory_gb", 0.0);
  for (const auto& [id, v] : j.at("detectors").items()) {
    DetectorCost c;
    c.power_watts = v.at("power_watts").get<double>();
    if (v.contains("gpu_utilization")) c.gpu_utilization = v.at("gpu_utilization").get<double>();
    if (v.contains("memory_gb")) c.memory_gb = v.at("memory_gb").get<double>();
    cp.detectors[id] = c;
  }
  cp.validate();
  return cp;
}

inline nlohmann::json to_json(const ResourceEstimate& e) {
  nlohmann::json j{{"power_watts", e.power_watts}};
  j["gpu_utilization"] = e.gpu_utilization ? nlohmann::json(*e.gpu_utilization) : nlohmann::json(nullptr);
  j["memory_gb"] = e.memory_gb ? nlohmann::json(*e.memory_gb) : nlohmann::json(nullptr);
  return j;
}

}  // namespace tod
