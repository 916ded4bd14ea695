#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tod/error.hpp"
#include "tod/latency.hpp"
#include "tod/mot_io.hpp"
#include "tod/scheduler.hpp"

namespace tod {

// Frame rate as an exact fraction num/den frames per second.
struct FrameRate {
  std::int64_t num = 30;
  std::int64_t den = 1;

  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }

  // Finds the smallest denominator (up to 1001, which covers NTSC rates such
  // as 30000/1001) that reproduces the value to 1e-9 relative error.
  static FrameRate from_double(double fps) {
    if (!std::isfinite(fps) || !(fps > 0.0)) {
      throw ConfigError("fps must be positive and finite, got " + std::to_string(fps));
    }
    for (std::int64_t den = 1; den <= 1001; ++den) {
      const double num = std::round(fps * static_cast<double>(den));
      if (num >= 1.0 && std::fabs(num / static_cast<double>(den) - fps) <= 1e-9 * fps) {
        return {static_cast<std::int64_t>(num), den};
      }
    }
    return {std::llround(fps * 1e6), 1'000'000};
  }
};

// Time on the stream is counted in ticks of 1 / (1e6 * fps.num) seconds. A
// whole microsecond is fps.num ticks and a frame period is 1e6 * fps.den
// ticks, so latencies, frame arrivals and floor(t * fps) are all exact
// integer arithmetic.
class StreamClock {
 public:
  explicit StreamClock(FrameRate fps) : fps_(fps) {
    if (fps.num <= 0 || fps.den <= 0) throw ConfigError("fps must be positive");
  }

  FrameRate fps() const noexcept { return fps_; }
  std::int64_t ticks_per_micro() const noexcept { return fps_.num; }
  std::int64_t ticks_per_frame() const noexcept { return 1'000'000 * fps_.den; }

  std::int64_t from_micros(Micros us) const noexcept { return us * ticks_per_micro(); }

  // k / fps seconds, i.e. the arrival time of frame k + 1.
  std::int64_t frame_boundary(std::int64_t k) const noexcept { return k * ticks_per_frame(); }

  // floor(t * fps) + 1: the newest frame that has arrived by time t.
  std::int64_t newest_frame_at(std::int64_t ticks) const noexcept { return ticks / ticks_per_frame() + 1; }

  double to_seconds(std::int64_t ticks) const noexcept {
    return static_cast<double>(ticks) / (1e6 * static_cast<double>(fps_.num));
  }

 private:
  FrameRate fps_;
};

// Which boundary the fast-inference clamp compares against after a frame is
// processed. Literal uses frame/fps as written in the dropped-frame
// pseudocode (the arrival of the next frame under 1-based indexing);
// PreviousArrival uses (frame - 1)/fps, under which the clamp never fires.
enum class ClampMode { Literal, PreviousArrival };

struct SimState {
  std::int64_t acc_ticks = 0;  // accumulated inference time
  int next_frame = 1;          // first frame the detector can take
  FrameDetections prev_result;
};

enum class StepDecision { Processed, Dropped };

inline StepDecision step(SimState& state, int frame, Micros latency, const StreamClock& clock,
                         ClampMode clamp = ClampMode::Literal) {
  if (frame < 1) throw ConfigError("frame index must be >= 1");
  if (latency <= 0) throw ConfigError("latency must be positive");
  if (frame < state.next_frame) return StepDecision::Dropped;

  state.acc_ticks += clock.from_micros(latency);
  state.next_frame = static_cast<int>(clock.newest_frame_at(state.acc_ticks));
  const std::int64_t boundary = clock.frame_boundary(clamp == ClampMode::Literal ? frame : frame - 1);
  if (state.acc_ticks < boundary) {
    state.acc_ticks = boundary;
    state.next_frame = static_cast<int>(clock.newest_frame_at(state.acc_ticks));
  }
  return StepDecision::Processed;
}

// Seconds/fps convenience form.
inline StepDecision step(SimState& state, int frame, double latency_seconds, double fps,
                         ClampMode clamp = ClampMode::Literal) {
  return step(state, frame, to_micros(latency_seconds), StreamClock(FrameRate::from_double(fps)), clamp);
}

struct StreamSpec {
  double fps = 30.0;
  int frame_count = 1;

  void validate() const {
    if (!std::isfinite(fps) || !(fps > 0.0)) throw ConfigError("stream fps must be positive");
    if (frame_count < 1) throw ConfigError("stream needs at least one frame");
  }
};

struct SimOptions {
  ClampMode clamp = ClampMode::Literal;
  Micros switch_penalty = 0;  // added when the chosen detector changes
  std::uint64_t latency_seed = 0;  // for latency models without their own seed
};

// A detector variant replayed from its offline trace.
struct DetectorProfile {
  DetectorId id;
  DetectionTrace trace;
  LatencyModel latency = ConstantLatency{0.0};
};

struct FrameOutcome {
  int frame = 1;
  std::optional<DetectorId> detector;  // empty when dropped
  bool processed = false;
  FrameDetections detections;  // effective (filtered, carried forward when dropped)
  std::optional<double> mbbs;  // decision input, processed frames only

  friend bool operator==(const FrameOutcome&, const FrameOutcome&) = default;
};

struct SimResult {
  std::string sequence;
  std::vector<FrameOutcome> frames;
  std::size_t processed_count = 0;
  std::size_t dropped_count = 0;

  std::vector<FrameDetections> effective_detections() const {
    std::vector<FrameDetections> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(f.detections);
    return out;
  }

  std::vector<int> processed_frames() const {
    std::vector<int> out;
    for (const auto& f : frames) {
      if (f.processed) out.push_back(f.frame);
    }
    return out;
  }

  friend bool operator==(const SimResult&, const SimResult&) = default;
};

namespace detail {

inline void check_profile(const DetectorProfile& p, const StreamSpec& spec, const ImageDims& dims) {
  if (p.trace.frame_count() < static_cast<std::size_t>(spec.frame_count)) {
    throw ConfigError("trace for detector '" + p.id + "' covers " + std::to_string(p.trace.frame_count()) +
                      " frames, stream has " + std::to_string(spec.frame_count));
  }
  if (!(p.trace.dims == dims)) {
    throw ConfigError("trace for detector '" + p.id + "' has image dims differing from the other detectors");
  }
}

// One pass over frames 1..N. Dropped frames reuse the previous result and
// consume no detector time; processed frames pick a detector from the MBBS of
// the previous frame's effective detections.
inline SimResult run_stream(std::span<const DetectorProfile* const> profiles, const SchedulerPolicy& policy,
                            const StreamSpec& spec, const FilterConfig& cfg, const SimOptions& opts) {
  spec.validate();
  policy.validate();
  cfg.validate();
  const ImageDims dims = profiles.front()->trace.dims;
  require_valid(dims);
  const StreamClock clock(FrameRate::from_double(spec.fps));
  const auto n = static_cast<std::size_t>(spec.frame_count);

  std::vector<std::vector<Micros>> latencies;
  for (const auto* p : profiles) {
    check_profile(*p, spec, dims);
    latencies.push_back(materialize(p->latency, n, Rng::mix(opts.latency_seed, stream_id(p->id))));
  }

  SimResult result;
  result.sequence = profiles.front()->trace.name;
  result.frames.reserve(n);
  SimState state;
  std::optional<std::size_t> last_detector;

  for (int k = 1; k <= spec.frame_count; ++k) {
    FrameOutcome out;
    out.frame = k;
    if (k < state.next_frame) {
      out.detections = state.prev_result;
      ++result.dropped_count;
      result.frames.push_back(std::move(out));
      continue;
    }
    const double mbbs = compute_mbbs(state.prev_result, dims);
    const std::size_t idx = select_detector_index(mbbs, policy);
    Micros latency = latencies[idx][static_cast<std::size_t>(k - 1)];
    if (last_detector && *last_detector != idx) latency += opts.switch_penalty;
    step(state, k, latency, clock, opts.clamp);

    out.detector = profiles[idx]->id;
    out.processed = true;
    out.mbbs = mbbs;
    out.detections = filter_detections(profiles[idx]->trace.at(k), cfg);
    state.prev_result = out.detections;
    last_detector = idx;
    ++result.processed_count;
    result.frames.push_back(std::move(out));
  }
  return result;
}

}  // namespace detail

inline SimResult simulate_fixed_detector(const DetectorProfile& profile, const StreamSpec& spec,
                                         const FilterConfig& cfg, const SimOptions& opts = {}) {
  const SchedulerPolicy single{{profile.id}, {}};
  const DetectorProfile* ptr = &profile;
  return detail::run_stream(std::span<const DetectorProfile* const>(&ptr, 1), single, spec, cfg, opts);
}

// Transprecise run: each processed frame's detector comes from the policy.
inline SimResult simulate_tod(std::span<const DetectorProfile> profiles, const SchedulerPolicy& policy,
                              const StreamSpec& spec, const FilterConfig& cfg, const SimOptions& opts = {}) {
  policy.validate();
  std::vector<const DetectorProfile*> ordered;
  for (const auto& id : policy.detectors) {
    const DetectorProfile* found = nullptr;
    for (const auto& p : profiles) {
      if (p.id == id) found = &p;
    }
    if (!found) throw ConfigError("policy names unknown detector '" + id + "'");
    ordered.push_back(found);
  }
  return detail::run_stream(ordered, policy, spec, cfg, opts);
}

}  // namespace tod
