#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tod/error.hpp"
#include "tod/geom.hpp"
#include "tod/mot_io.hpp"
#include "tod/stream_sim.hpp"

namespace tod {

enum class MatchKind { TruePositive, FalsePositive, Ignored };

struct MatchLabel {
  std::size_t detection = 0;  // index into the frame's detection list
  MatchKind kind = MatchKind::FalsePositive;
  double confidence = 0.0;

  friend bool operator==(const MatchLabel&, const MatchLabel&) = default;
};

enum class ApInterpolation { ElevenPoint, AllPoints };

struct EvalConfig {
  double iou_threshold = 0.5;
  ApInterpolation interpolation = ApInterpolation::ElevenPoint;
};

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct APReport {
  std::string sequence;
  std::string detector;  // free-form label: detector id, "tod", ...
  double average_precision = 0.0;
  std::vector<PrPoint> curve;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t ignored = 0;
  std::size_t active_ground_truth = 0;
  double iou_threshold = 0.5;
  double confidence_prefilter = 0.0;
  ApInterpolation interpolation = ApInterpolation::ElevenPoint;
};

// Greedy one-to-one matching for a single frame. Detections are visited by
// descending confidence (ties keep input order); each takes the unmatched
// active ground truth with the highest IoU at or above the threshold. A
// detection that finds none but overlaps an ignore-flagged entry at the
// threshold is Ignored, otherwise it is a false positive. Labels come back in
// input order.
inline std::vector<MatchLabel> match_frame(std::span<const DetectionRecord> dets,
                                           std::span<const GroundTruthEntry> gts, double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });

  std::vector<MatchLabel> labels(dets.size());
  std::vector<bool> taken(gts.size(), false);
  for (const std::size_t di : order) {
    const auto& det = dets[di];
    labels[di] = {di, MatchKind::FalsePositive, det.confidence};

    std::ptrdiff_t best = -1;
    double best_iou = iou_threshold;
    bool overlaps_ignored = false;
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      const double o = iou(det.box, gts[gi].box);
      if (o < iou_threshold) continue;
      if (!gts[gi].active()) {
        overlaps_ignored = true;
      } else if (!taken[gi] && (best < 0 || o > best_iou)) {
        best = static_cast<std::ptrdiff_t>(gi);
        best_iou = o;
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = true;
      labels[di].kind = MatchKind::TruePositive;
    } else if (overlaps_ignored) {
      labels[di].kind = MatchKind::Ignored;
    }
  }
  return labels;
}

// Precision/recall after each scored detection, highest confidence first.
// Ignored labels are dropped before the sweep.
inline std::vector<PrPoint> pr_curve(std::span<const MatchLabel> labels, std::size_t active_gt) {
  std::vector<MatchLabel> scored;
  for (const auto& l : labels) {
    if (l.kind != MatchKind::Ignored) scored.push_back(l);
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const MatchLabel& a, const MatchLabel& b) { return a.confidence > b.confidence; });
  std::vector<PrPoint> curve;
  curve.reserve(scored.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (scored[i].kind == MatchKind::TruePositive) ++tp;
    const double recall = active_gt ? static_cast<double>(tp) / static_cast<double>(active_gt) : 0.0;
    curve.push_back({recall, static_cast<double>(tp) / static_cast<double>(i + 1)});
  }
  return curve;
}

inline double average_precision(std::span<const MatchLabel> labels, long long active_gt_count,
                                ApInterpolation interpolation = ApInterpolation::ElevenPoint) {
  if (active_gt_count < 0) throw ConfigError("active ground-truth count must be non-negative");
  const auto g = static_cast<std::size_t>(active_gt_count);

  std::vector<MatchLabel> scored;
  for (const auto& l : labels) {
    if (l.kind != MatchKind::Ignored) scored.push_back(l);
  }
  if (g == 0) return scored.empty() ? 1.0 : 0.0;

  std::stable_sort(scored.begin(), scored.end(),
                   [](const MatchLabel& a, const MatchLabel& b) { return a.confidence > b.confidence; });
  std::vector<std::size_t> tp_at(scored.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (scored[i].kind == MatchKind::TruePositive) ++tp;
    tp_at[i] = tp;
  }
  auto precision = [&](std::size_t i) { return static_cast<double>(tp_at[i]) / static_cast<double>(i + 1); };

  if (interpolation == ApInterpolation::ElevenPoint) {
    double sum = 0.0;
    for (std::size_t level = 0; level <= 10; ++level) {
      // recall >= level/10, compared exactly as tp * 10 >= level * g
      double best = 0.0;
      for (std::size_t i = 0; i < scored.size(); ++i) {
        if (tp_at[i] * 10 >= level * g) best = std::max(best, precision(i));
      }
      sum += best;
    }
    return sum / 11.0;
  }

  // All-points: area under the monotone precision envelope.
  std::vector<double> envelope(scored.size());
  double running = 0.0;
  for (std::size_t i = scored.size(); i-- > 0;) {
    running = std::max(running, precision(i));
    envelope[i] = running;
  }
  double area = 0.0;
  std::size_t prev_tp = 0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (tp_at[i] != prev_tp) {
      area += envelope[i] * static_cast<double>(tp_at[i] - prev_tp) / static_cast<double>(g);
      prev_tp = tp_at[i];
    }
  }
  return area;
}

// Scores per-frame effective detections against ground truth. frames[k - 1]
// holds frame k; ground truth beyond the last frame is an error.
inline APReport evaluate_sequence(std::span<const FrameDetections> frames, std::span<const GroundTruthEntry> gt,
                                  const EvalConfig& cfg = {}) {
  const auto gt_by_frame = group_by_frame(gt, frames.size());
  APReport report;
  report.iou_threshold = cfg.iou_threshold;
  report.interpolation = cfg.interpolation;

  std::vector<MatchLabel> all;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    for (const auto& e : gt_by_frame[k]) {
      if (e.active()) ++report.active_ground_truth;
    }
    for (const auto& l : match_frame(frames[k], gt_by_frame[k], cfg.iou_threshold)) {
      switch (l.kind) {
        case MatchKind::TruePositive: ++report.true_positives; break;
        case MatchKind::FalsePositive: ++report.false_positives; break;
        case MatchKind::Ignored: ++report.ignored; break;
      }
      all.push_back(l);
    }
  }
  report.average_precision =
      average_precision(all, static_cast<long long>(report.active_ground_truth), cfg.interpolation);
  report.curve = pr_curve(all, report.active_ground_truth);
  return report;
}

inline APReport evaluate_sequence(const SimResult& result, std::span<const GroundTruthEntry> gt,
                                  const EvalConfig& cfg = {}) {
  const auto frames = result.effective_detections();
  auto report = evaluate_sequence(std::span<const FrameDetections>(frames), gt, cfg);
  report.sequence = result.sequence;
  return report;
}

inline APReport evaluate_sequence(const DetectionTrace& trace, std::span<const GroundTruthEntry> gt,
                                  const EvalConfig& cfg = {}) {
  auto report = evaluate_sequence(std::span<const FrameDetections>(trace.frames), gt, cfg);
  report.sequence = trace.name;
  return report;
}

inline const char* to_string(ApInterpolation i) {
  return i == ApInterpolation::ElevenPoint ? "11-point" : "all-points";
}

inline ApInterpolation interpolation_from_string(const std::string& s) {
  if (s == "11-point") return ApInterpolation::ElevenPoint;
  if (s == "all-points") return ApInterpolation::AllPoints;
  throw ConfigError("unknown AP interpolation '" + s + "' (expected 11-point or all-points)");
}

inline nlohmann::json to_json(const APReport& r) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& p : r.curve) curve.push_back({p.recall, p.precision});
  return {{"sequence", r.sequence},
          {"detector", r.detector},
          {"average_precision", r.average_precision},
          {"true_positives", r.true_positives},
          {"false_positives", r.false_positives},
          {"ignored", r.ignored},
          {"active_ground_truth", r.active_ground_truth},
          {"iou_threshold", r.iou_threshold},
          {"confidence_prefilter", r.confidence_prefilter},
          {"interpolation", to_string(r.interpolation)},
          {"curve", curve}};
}

// Curve as "recall,precision" rows under a header.
inline void write_curve_csv(std::ostream& out, const APReport& r) {
  out << "recall,precision\n";
  for (const auto& p : r.curve) {
    out << detail::format_real(p.recall) << ',' << detail::format_real(p.precision) << '\n';
  }
}

}  // namespace tod
