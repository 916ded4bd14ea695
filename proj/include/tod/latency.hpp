#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tod/error.hpp"
#include "tod/rng.hpp"

namespace tod {

using Micros = std::int64_t;

struct ConstantLatency {
  double seconds = 0.0;
};

struct PerFrameLatency {
  std::vector<double> seconds;
};

// Log-normal with the given arithmetic mean (seconds) and log-space sigma.
struct LogNormalLatency {
  double mean = 0.0;
  double sigma = 0.0;
  std::optional<std::uint64_t> seed;  // filled from the run seed when absent
};

using LatencyModel = std::variant<ConstantLatency, PerFrameLatency, LogNormalLatency>;

inline Micros to_micros(double seconds) {
  if (!std::isfinite(seconds) || !(seconds > 0.0)) {
    throw ConfigError("latency must be positive and finite, got " + std::to_string(seconds));
  }
  const auto us = static_cast<Micros>(std::llround(seconds * 1e6));
  return us < 1 ? 1 : us;
}

// Per-frame latencies for frames 1..frame_count, rounded to whole microseconds
// (minimum 1 us).
inline std::vector<Micros> materialize(const LatencyModel& model, std::size_t frame_count,
                                       std::uint64_t fallback_seed = 0) {
  std::vector<Micros> out;
  out.reserve(frame_count);
  if (const auto* c = std::get_if<ConstantLatency>(&model)) {
    out.assign(frame_count, to_micros(c->seconds));
  } else if (const auto* p = std::get_if<PerFrameLatency>(&model)) {
    if (p->seconds.size() < frame_count) {
      throw ConfigError("per-frame latency list covers " + std::to_string(p->seconds.size()) +
                        " frames, sequence has " + std::to_string(frame_count));
    }
    for (std::size_t i = 0; i < frame_count; ++i) out.push_back(to_micros(p->seconds[i]));
  } else {
    const auto& ln = std::get<LogNormalLatency>(model);
    if (!(ln.mean > 0.0) || !(ln.sigma >= 0.0) || !std::isfinite(ln.mean) || !std::isfinite(ln.sigma)) {
      throw ConfigError("log-normal latency needs mean > 0 and sigma >= 0");
    }
    Rng rng(ln.seed.value_or(fallback_seed), stream_id("latency"));
    const double mu = std::log(ln.mean) - 0.5 * ln.sigma * ln.sigma;
    for (std::size_t i = 0; i < frame_count; ++i) {
      out.push_back(to_micros(std::exp(mu + ln.sigma * rng.normal())));
    }
  }
  return out;
}

inline LatencyModel latency_from_json(const nlohmann::json& j) {
  if (j.is_number()) return ConstantLatency{j.get<double>()};
  if (j.contains("constant")) return ConstantLatency{j.at("constant").get<double>()};
  if (j.contains("per_frame")) return PerFrameLatency{j.at("per_frame").get<std::vector<double>>()};
  if (j.contains("lognormal")) {
    const auto& l = j.at("lognormal");
    LogNormalLatency m{l.at("mean").get<double>(), l.at("sigma").get<double>(), std::nullopt};
    if (l.contains("seed")) m.seed = l.at("seed").get<std::uint64_t>();
    return m;
  }
  throw ConfigError("latency model must be one of constant, per_frame, lognormal: " + j.dump());
}

inline nlohmann::json to_json(const LatencyModel& model) {
  if (const auto* c = std::get_if<ConstantLatency>(&model)) return {{"constant", c->seconds}};
  if (const auto* p = std::get_if<PerFrameLatency>(&model)) return {{"per_frame", p->seconds}};
  const auto& ln = std::get<LogNormalLatency>(model);
  nlohmann::json body{{"mean", ln.mean}, {"sigma", ln.sigma}};
  if (ln.seed) body["seed"] = *ln.seed;
  return {{"lognormal", body}};
}

}  // namespace tod
