#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tod/error.hpp"
#include "tod/geom.hpp"
#include "tod/latency.hpp"
#include "tod/mot_io.hpp"
#include "tod/rng.hpp"
#include "tod/scheduler.hpp"

namespace tod {

struct SceneObject {
  BoundingBox box;  // at frame 1
  double vx = 0.0;  // pixels per frame
  double vy = 0.0;
  double grow_w = 0.0;  // pixels per frame added to width / height
  double grow_h = 0.0;
};

// Objects spawned from the seed in addition to the explicit ones. Area is
// log-uniform in [area_min, area_max] (fractions of the image), height/width
// ratio uniform in [aspect_min, aspect_max], speed uniform in
// [speed_min, speed_max] pixels/frame along a uniform direction.
struct RandomObjects {
  int count = 0;
  double area_min = 0.001;
  double area_max = 0.01;
  double aspect_min = 2.0;
  double aspect_max = 3.0;
  double speed_min = 0.0;
  double speed_max = 1.0;
};

struct SceneSpec {
  std::string name = "synthetic";
  ImageDims dims{1920, 1080};
  double fps = 30.0;
  int frame_count = 1;
  std::vector<SceneObject> objects;
  RandomObjects random;
};

struct ConfidenceModel {
  double tp_min = 0.6;
  double tp_max = 0.95;
  double fp_min = 0.1;
  double fp_max = 0.5;
};

// Generative stand-in for one detector variant.
struct DetectorModel {
  DetectorId id;
  // (area fraction, detection probability) knots, areas non-decreasing; a
  // repeated area makes a step. Flat extrapolation outside the knots.
  std::vector<std::pair<double, double>> recall_curve{{0.0, 1.0}};
  double noise_px = 0.0;  // std of each edge's displacement
  double fp_rate = 0.0;   // expected false positives per frame
  double fp_area_min = 0.001;
  double fp_area_max = 0.05;
  double fp_aspect_min = 1.0;
  double fp_aspect_max = 3.0;
  double fp_full_frame_prob = 0.0;
  ConfidenceModel confidence;
  LatencyModel latency = ConstantLatency{0.033};
  int class_id = kPersonClass;

  void validate() const {
    if (recall_curve.empty()) throw ConfigError("detector model '" + id + "' needs a recall curve");
    for (std::size_t i = 0; i < recall_curve.size(); ++i) {
      const auto [a, p] = recall_curve[i];
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("recall probabilities must lie in [0, 1]");
      if (i > 0 && (a < recall_curve[i - 1].first || p < recall_curve[i - 1].second)) {
        throw ConfigError("recall curve of '" + id + "' must be non-decreasing in area and probability");
      }
    }
    if (noise_px < 0.0 || fp_rate < 0.0) throw ConfigError("noise and false-positive rate must be non-negative");
    if (!(fp_area_min > 0.0 && fp_area_min <= fp_area_max)) throw ConfigError("invalid false-positive area range");
    if (!(fp_aspect_min > 0.0 && fp_aspect_min <= fp_aspect_max)) throw ConfigError("invalid false-positive aspect range");
    if (!(fp_full_frame_prob >= 0.0 && fp_full_frame_prob <= 1.0)) throw ConfigError("invalid full-frame probability");
    const auto& c = confidence;
    if (!(0.0 <= c.tp_min && c.tp_min <= c.tp_max && c.tp_max <= 1.0 && 0.0 <= c.fp_min && c.fp_min <= c.fp_max &&
          c.fp_max <= 1.0)) {
      throw ConfigError("confidence ranges must be ordered within [0, 1]");
    }
  }

  double recall_at(double area) const {
    const auto& k = recall_curve;
    if (area < k.front().first) return k.front().second;
    for (std::size_t i = 0; i + 1 < k.size(); ++i) {
      const auto [x0, y0] = k[i];
      const auto [x1, y1] = k[i + 1];
      if (x0 <= area && area < x1) return y0 + (y1 - y0) * (area - x0) / (x1 - x0);
    }
    return k.back().second;
  }
};

// Ground truth for a scene: every object advances linearly and leaves the
// scene for good once it lies fully outside the image or its size collapses.
// Rows are frame-major; track ids are 1-based object indices; all rows are
// active pedestrians with visibility 1.
inline std::vector<GroundTruthEntry> generate_ground_truth(const SceneSpec& spec, std::uint64_t seed) {
  require_valid(spec.dims);
  if (spec.frame_count < 1) throw ConfigError("scene needs at least one frame");
  std::vector<SceneObject> objects = spec.objects;
  for (const auto& o : objects) {
    if (!o.box.valid()) throw ConfigError("scene object has an invalid initial box");
  }

  const auto& r = spec.random;
  if (r.count > 0) {
    if (!(r.area_min > 0.0 && r.area_min <= r.area_max && r.aspect_min > 0.0 && r.aspect_min <= r.aspect_max &&
          r.speed_min >= 0.0 && r.speed_min <= r.speed_max)) {
      throw ConfigError("invalid random object ranges");
    }
    Rng rng(seed, stream_id("scene"));
    const double W = spec.dims.width;
    const double H = spec.dims.height;
    for (int i = 0; i < r.count; ++i) {
      const double area = std::exp(rng.uniform(std::log(r.area_min), std::log(r.area_max))) * spec.dims.area();
      const double aspect = rng.uniform(r.aspect_min, r.aspect_max);
      const double w = std::sqrt(area / aspect);
      const double h = w * aspect;
      const double left = rng.uniform(0.0, std::max(0.0, W - w));
      const double top = rng.uniform(0.0, std::max(0.0, H - h));
      const double speed = rng.uniform(r.speed_min, r.speed_max);
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      objects.push_back({{left, top, w, h}, speed * std::cos(angle), speed * std::sin(angle), 0.0, 0.0});
    }
  }

  std::vector<GroundTruthEntry> out;
  std::vector<bool> gone(objects.size(), false);
  for (int k = 1; k <= spec.frame_count; ++k) {
    const double t = k - 1;
    for (std::size_t i = 0; i < objects.size(); ++i) {
      if (gone[i]) continue;
      const auto& o = objects[i];
      const BoundingBox b{o.box.left + o.vx * t, o.box.top + o.vy * t, o.box.width + o.grow_w * t,
                          o.box.height + o.grow_h * t};
      const bool outside = b.right() <= 0.0 || b.bottom() <= 0.0 || b.left >= spec.dims.width ||
                           b.top >= spec.dims.height;
      if (outside || !b.valid()) {
        gone[i] = true;
        continue;
      }
      out.push_back({k, static_cast<int>(i + 1), b, 1, 1, 1.0});
    }
  }
  return out;
}

// Offline detections of one modeled detector. Each ground-truth box is found
// with the recall curve's probability at its area fraction and jittered edge
// by edge; false positives are added per frame. Every ground-truth row and
// every false positive consumes a fixed number of draws whether or not it is
// emitted, so changing the recall curve never shifts the other draws. The
// random stream is (seed, "detector:" + id).
inline DetectionTrace synthesize_detector_trace(std::span<const GroundTruthEntry> gt, const DetectorModel& model,
                                                const ImageDims& dims, int frame_count, std::uint64_t seed,
                                                std::string name = {}) {
  model.validate();
  require_valid(dims);
  if (frame_count < 1) throw ConfigError("trace needs at least one frame");
  const auto by_frame = group_by_frame(gt, static_cast<std::size_t>(frame_count));
  Rng rng(seed, stream_id("detector:" + model.id));
  const double W = dims.width;
  const double H = dims.height;
  const auto& c = model.confidence;

  DetectionTrace trace;
  trace.name = std::move(name);
  trace.dims = dims;
  trace.frames.resize(static_cast<std::size_t>(frame_count));
  for (int k = 1; k <= frame_count; ++k) {
    auto& frame = trace.at(k);
    for (const auto& e : by_frame[static_cast<std::size_t>(k - 1)]) {
      const double u = rng.uniform();
      const double dl = model.noise_px * rng.normal();
      const double dt = model.noise_px * rng.normal();
      const double dr = model.noise_px * rng.normal();
      const double db = model.noise_px * rng.normal();
      const double conf = rng.uniform(c.tp_min, c.tp_max);
      if (!(u < model.recall_at(area_fraction(e.box, dims)))) continue;
      // width from edge offsets so a noiseless box is reproduced bit for bit
      const double w = std::max(1.0, e.box.width + (dr - dl));
      const double h = std::max(1.0, e.box.height + (db - dt));
      frame.push_back({k, {e.box.left + dl, e.box.top + dt, w, h}, conf, model.class_id});
    }

    const double whole = std::floor(model.fp_rate);
    const int n_fp = static_cast<int>(whole) + (rng.bernoulli(model.fp_rate - whole) ? 1 : 0);
    for (int i = 0; i < n_fp; ++i) {
      const bool full = rng.bernoulli(model.fp_full_frame_prob);
      const double area = std::exp(rng.uniform(std::log(model.fp_area_min), std::log(model.fp_area_max))) * W * H;
      const double aspect = rng.uniform(model.fp_aspect_min, model.fp_aspect_max);
      const double ux = rng.uniform();
      const double uy = rng.uniform();
      const double conf = rng.uniform(c.fp_min, c.fp_max);
      BoundingBox box{0.0, 0.0, W, H};
      if (!full) {
        const double w = std::sqrt(area / aspect);
        const double h = w * aspect;
        box = {ux * std::max(0.0, W - w), uy * std::max(0.0, H - h), w, h};
      }
      frame.push_back({k, box, conf, model.class_id});
    }
  }
  return trace;
}

inline SceneSpec scene_from_json(const nlohmann::json& j) {
  SceneSpec s;
  s.name = j.value("name", s.name);
  s.dims = {j.at("width").get<int>(), j.at("height").get<int>()};
  s.fps = j.value("fps", s.fps);
  s.frame_count = j.at("frames").get<int>();
  for (const auto& o : j.value("objects", nlohmann::json::array())) {
    const auto box = o.at("box").get<std::vector<double>>();
    if (box.size() != 4) throw ConfigError("scene object box must be [left, top, width, height]");
    const auto vel = o.value("velocity", std::vector<double>{0.0, 0.0});
    const auto grow = o.value("growth", std::vector<double>{0.0, 0.0});
    if (vel.size() != 2 || grow.size() != 2) throw ConfigError("velocity and growth must have two components");
    s.objects.push_back({{box[0], box[1], box[2], box[3]}, vel[0], vel[1], grow[0], grow[1]});
  }
  if (j.contains("random_objects")) {
    const auto& r = j.at("random_objects");
    s.random.count = r.value("count", 0);
    s.random.area_min = r.value("area_min", s.random.area_min);
    s.random.area_max = r.value("area_max", s.random.area_max);
    s.random.aspect_min = r.value("aspect_min", s.random.aspect_min);
    s.random.aspect_max = r.value("aspect_max", s.random.aspect_max);
    s.random.speed_min = r.value("speed_min", s.random.speed_min);
    s.random.speed_max = r.value("speed_max", s.random.speed_max);
  }
  require_valid(s.dims);
  return s;
}

inline DetectorModel detector_model_from_json(const nlohmann::json& j) {
  DetectorModel m;
  m.id = j.at("id").get<std::string>();
  if (j.contains("recall_curve")) {
    m.recall_curve.clear();
    for (const auto& knot : j.at("recall_curve")) {
      m.recall_curve.emplace_back(knot.at(0).get<double>(), knot.at(1).get<double>());
    }
  }
  m.noise_px = j.value("noise_px", m.noise_px);
  m.fp_rate = j.value("fp_rate", m.fp_rate);
  m.fp_area_min = j.value("fp_area_min", m.fp_area_min);
  m.fp_area_max = j.value("fp_area_max", m.fp_area_max);
  m.fp_aspect_min = j.value("fp_aspect_min", m.fp_aspect_min);
  m.fp_aspect_max = j.value("fp_aspect_max", m.fp_aspect_max);
  m.fp_full_frame_prob = j.value("fp_full_frame_prob", m.fp_full_frame_prob);
  m.class_id = j.value("class_id", m.class_id);
  if (j.contains("confidence")) {
    const auto& c = j.at("confidence");
    m.confidence.tp_min = c.value("tp_min", m.confidence.tp_min);
    m.confidence.tp_max = c.value("tp_max", m.confidence.tp_max);
    m.confidence.fp_min = c.value("fp_min", m.confidence.fp_min);
    m.confidence.fp_max = c.value("fp_max", m.confidence.fp_max);
  }
  if (j.contains("latency")) m.latency = latency_from_json(j.at("latency"));
  m.validate();
  return m;
}

}  // namespace tod
