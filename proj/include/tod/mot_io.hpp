#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "tod/error.hpp"
#include "tod/geom.hpp"

namespace tod {

// MOT class ids treated as people when preprocessing ground truth:
// 1 = pedestrian, 7 = static person.
inline const std::set<int> kDefaultPersonClasses{1, 7};

struct GroundTruthEntry {
  int frame = 1;
  int track_id = -1;
  BoundingBox box;
  int flag = 1;  // 1 active, 0 ignore
  int class_id = 1;
  double visibility = 1.0;

  bool active() const noexcept { return flag == 1; }
  friend bool operator==(const GroundTruthEntry&, const GroundTruthEntry&) = default;
};

struct DetectionRecord {
  int frame = 1;
  BoundingBox box;
  double confidence = 0.0;
  int class_id = 1;

  friend bool operator==(const DetectionRecord&, const DetectionRecord&) = default;
};

using FrameDetections = std::vector<DetectionRecord>;

// Detections for frames 1..N. frames[k - 1] holds frame k; empty frames are
// kept so indexing stays dense.
struct DetectionTrace {
  std::string name;
  ImageDims dims;
  std::vector<FrameDetections> frames;

  std::size_t frame_count() const noexcept { return frames.size(); }
  const FrameDetections& at(int frame) const { return frames.at(static_cast<std::size_t>(frame - 1)); }
  FrameDetections& at(int frame) { return frames.at(static_cast<std::size_t>(frame - 1)); }

  std::size_t detection_count() const noexcept {
    std::size_t n = 0;
    for (const auto& f : frames) n += f.size();
    return n;
  }

  // Extends with empty frames; never truncates.
  void pad_to(std::size_t n) {
    if (frames.size() < n) frames.resize(n);
  }

  friend bool operator==(const DetectionTrace&, const DetectionTrace&) = default;
};

// Sidecar sequence description; MOT text files carry no image size.
struct SequenceInfo {
  std::string name;
  ImageDims dims;
  double fps = 30.0;
  int frame_count = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_real(std::string_view field, std::size_t line, std::size_t col) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (field.empty() || ec != std::errc{} || ptr != last || !std::isfinite(v)) {
    throw ParseError("expected a number, got '" + std::string(field) + "'", line, col);
  }
  return v;
}

inline int parse_int(std::string_view field, std::size_t line, std::size_t col) {
  const double v = parse_real(field, line, col);
  if (v != std::floor(v) || std::fabs(v) > 2e9) {
    throw ParseError("expected an integer, got '" + std::string(field) + "'", line, col);
  }
  return static_cast<int>(v);
}

// Shortest decimal form that parses back to the same double.
inline std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general);
  return std::string(buf, ptr);
}

struct Row {
  std::size_t line;
  std::vector<std::string_view> fields;
};

template <typename Fn>
void for_each_row(std::istream& in, Fn&& fn) {
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (trim(text).empty()) continue;
    auto fields = split_fields(text);
    if (fields.size() < 9) {
      throw ParseError("expected at least 9 columns, got " + std::to_string(fields.size()), line_no, 0);
    }
    fn(Row{line_no, std::move(fields)});
  }
}

inline BoundingBox parse_box(const Row& r) {
  BoundingBox b{parse_real(r.fields[2], r.line, 3), parse_real(r.fields[3], r.line, 4),
                parse_real(r.fields[4], r.line, 5), parse_real(r.fields[5], r.line, 6)};
  if (!(b.width > 0.0)) throw ParseError("box width must be positive", r.line, 5);
  if (!(b.height > 0.0)) throw ParseError("box height must be positive", r.line, 6);
  return b;
}

}  // namespace detail

// Nine-column MOT ground truth: frame, id, left, top, width, height, flag,
// class, visibility. Extra columns are ignored.
inline std::vector<GroundTruthEntry> parse_ground_truth(std::istream& in) {
  std::vector<GroundTruthEntry> out;
  detail::for_each_row(in, [&](const detail::Row& r) {
    GroundTruthEntry e;
    e.frame = detail::parse_int(r.fields[0], r.line, 1);
    if (e.frame < 1) throw ParseError("frame index must be >= 1", r.line, 1);
    e.track_id = detail::parse_int(r.fields[1], r.line, 2);
    e.box = detail::parse_box(r);
    e.flag = detail::parse_int(r.fields[6], r.line, 7);
    if (e.flag != 0 && e.flag != 1) throw ParseError("flag must be 0 or 1", r.line, 7);
    e.class_id = detail::parse_int(r.fields[7], r.line, 8);
    e.visibility = detail::parse_real(r.fields[8], r.line, 9);
    out.push_back(e);
  });
  return out;
}

inline std::vector<GroundTruthEntry> parse_ground_truth(const std::string& text) {
  std::istringstream in(text);
  return parse_ground_truth(in);
}

// Entries whose class is not a person class get flag 0 so evaluation ignores
// them. Geometry, order and count are untouched.
inline std::vector<GroundTruthEntry> preprocess_ground_truth(std::vector<GroundTruthEntry> entries,
                                                             const std::set<int>& person_classes = kDefaultPersonClasses) {
  for (auto& e : entries) {
    if (!person_classes.contains(e.class_id)) e.flag = 0;
  }
  return entries;
}

// Detection rows: frame, -1, left, top, width, height, confidence, class, -1.
// The trace is dense from frame 1 to the largest frame seen.
inline DetectionTrace parse_detection_trace(std::istream& in, const ImageDims& dims, std::string name = {}) {
  DetectionTrace trace;
  trace.name = std::move(name);
  trace.dims = dims;
  detail::for_each_row(in, [&](const detail::Row& r) {
    DetectionRecord d;
    d.frame = detail::parse_int(r.fields[0], r.line, 1);
    if (d.frame < 1) throw ParseError("frame index must be >= 1", r.line, 1);
    d.box = detail::parse_box(r);
    d.confidence = detail::parse_real(r.fields[6], r.line, 7);
    if (d.confidence < 0.0 || d.confidence > 1.0) {
      throw ParseError("confidence must lie in [0, 1]", r.line, 7);
    }
    d.class_id = detail::parse_int(r.fields[7], r.line, 8);
    trace.pad_to(static_cast<std::size_t>(d.frame));
    trace.at(d.frame).push_back(d);
  });
  return trace;
}

inline DetectionTrace parse_detection_trace(const std::string& text, const ImageDims& dims, std::string name = {}) {
  std::istringstream in(text);
  return parse_detection_trace(in, dims, std::move(name));
}

inline void write_detection_row(std::ostream& out, const DetectionRecord& d) {
  using detail::format_real;
  out << d.frame << ",-1," << format_real(d.box.left) << ',' << format_real(d.box.top) << ','
      << format_real(d.box.width) << ',' << format_real(d.box.height) << ','
      << format_real(d.confidence) << ',' << d.class_id << ",-1\n";
}

inline void serialize_detections(std::ostream& out, std::span<const FrameDetections> frames) {
  for (const auto& frame : frames) {
    for (const auto& d : frame) write_detection_row(out, d);
  }
}

inline std::string serialize_detections(std::span<const FrameDetections> frames) {
  std::ostringstream out;
  serialize_detections(out, frames);
  return out.str();
}

inline std::string serialize_detections(const DetectionTrace& trace) {
  return serialize_detections(std::span<const FrameDetections>(trace.frames));
}

inline std::string serialize_ground_truth(std::span<const GroundTruthEntry> entries) {
  using detail::format_real;
  std::ostringstream out;
  for (const auto& e : entries) {
    out << e.frame << ',' << e.track_id << ',' << format_real(e.box.left) << ','
        << format_real(e.box.top) << ',' << format_real(e.box.width) << ','
        << format_real(e.box.height) << ',' << e.flag << ',' << e.class_id << ','
        << format_real(e.visibility) << '\n';
  }
  return out.str();
}

// Groups entries by frame over 1..frame_count. Entries past frame_count raise.
inline std::vector<std::vector<GroundTruthEntry>> group_by_frame(std::span<const GroundTruthEntry> entries,
                                                                 std::size_t frame_count) {
  std::vector<std::vector<GroundTruthEntry>> out(frame_count);
  for (const auto& e : entries) {
    if (e.frame < 1 || static_cast<std::size_t>(e.frame) > frame_count) {
      throw ConfigError("ground-truth frame " + std::to_string(e.frame) + " outside 1.." +
                        std::to_string(frame_count));
    }
    out[static_cast<std::size_t>(e.frame - 1)].push_back(e);
  }
  return out;
}

inline SequenceInfo sequence_info_from_json(const nlohmann::json& j) {
  SequenceInfo info;
  info.name = j.value("name", std::string{});
  info.dims = {j.at("width").get<int>(), j.at("height").get<int>()};
  info.fps = j.value("fps", 30.0);
  info.frame_count = j.value("frames", 0);
  require_valid(info.dims);
  if (!(info.fps > 0.0)) throw ConfigError("sequence fps must be positive");
  if (info.frame_count < 0) throw ConfigError("sequence frame count must be non-negative");
  return info;
}

inline nlohmann::json to_json(const SequenceInfo& info) {
  return {{"name", info.name}, {"width", info.dims.width}, {"height", info.dims.height},
          {"fps", info.fps}, {"frames", info.frame_count}};
}

// MOTChallenge seqinfo.ini ([Sequence] name, imWidth, imHeight, frameRate,
// seqLength).
inline SequenceInfo parse_seqinfo_ini(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '[' || t.front() == ';' || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) continue;
    kv[std::string(detail::trim(t.substr(0, eq)))] = std::string(detail::trim(t.substr(eq + 1)));
  }
  auto need = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError(std::string("seqinfo.ini is missing '") + key + "'");
    return it->second;
  };
  SequenceInfo info;
  info.name = kv.contains("name") ? kv["name"] : std::string{};
  try {
    info.dims = {std::stoi(need("imWidth")), std::stoi(need("imHeight"))};
    info.fps = std::stod(need("frameRate"));
    info.frame_count = std::stoi(need("seqLength"));
  } catch (const std::logic_error& e) {
    throw ConfigError(std::string("seqinfo.ini has a non-numeric value: ") + e.what());
  }
  require_valid(info.dims);
  return info;
}

inline SequenceInfo load_sequence_info(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open sequence info '" + path + "'");
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".ini") return parse_seqinfo_ini(in);
  try {
    return sequence_info_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("sequence info '" + path + "': " + e.what());
  }
}

}  // namespace tod
