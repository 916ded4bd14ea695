#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tod/detection_eval.hpp"
#include "tod/error.hpp"
#include "tod/hypersearch.hpp"
#include "tod/latency.hpp"
#include "tod/mot_io.hpp"
#include "tod/report.hpp"
#include "tod/scheduler.hpp"
#include "tod/stream_sim.hpp"
#include "tod/synth.hpp"

namespace tod {

namespace fs = std::filesystem;

enum class Mode { OfflineEval, RealtimeEval, Tod, Search, Synth };

inline Mode mode_from_string(const std::string& s) {
  if (s == "offline-eval") return Mode::OfflineEval;
  if (s == "realtime-eval") return Mode::RealtimeEval;
  if (s == "tod") return Mode::Tod;
  if (s == "search") return Mode::Search;
  if (s == "synth") return Mode::Synth;
  throw ConfigError("unknown mode '" + s + "'");
}

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::OfflineEval: return "offline-eval";
    case Mode::RealtimeEval: return "realtime-eval";
    case Mode::Tod: return "tod";
    case Mode::Search: return "search";
    case Mode::Synth: return "synth";
  }
  return "?";
}

// FNV-1a 64 of file contents, as 16 hex digits. Identifies inputs and outputs
// in the manifest; not a security hash.
inline std::string content_hash(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(stream_id(bytes)));
  return buf;
}

struct SequenceData {
  std::string name;
  SequenceInfo info;
  StreamSpec stream;
  std::vector<GroundTruthEntry> ground_truth;  // preprocessed
  std::vector<DetectorProfile> profiles;       // in detector order
};

struct RunConfig {
  fs::path base_dir;
  nlohmann::json raw;
  std::uint64_t seed = 0;
  std::vector<DetectorId> detectors;  // heaviest first
  std::vector<SequenceData> sequences;
  std::optional<SchedulerPolicy> policy;
  std::optional<SearchGrid> grid;
  double tie_epsilon = 0.005;
  unsigned threads = 0;
  FilterConfig filter;
  EvalConfig eval;
  std::set<int> person_classes = kDefaultPersonClasses;
  std::optional<CostProfile> cost;
  SimOptions sim;
  std::map<std::string, std::string> input_hashes;  // config-relative path -> hash
};

// Report files keyed by path relative to the output directory.
using ReportSet = std::map<std::string, std::string>;

namespace detail {

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string read_input(RunConfig& cfg, const std::string& rel) {
  std::string bytes = read_file(cfg.base_dir / rel);
  cfg.input_hashes[rel] = content_hash(bytes);
  return bytes;
}

inline std::map<DetectorId, LatencyModel> latency_map(const nlohmann::json& j) {
  std::map<DetectorId, LatencyModel> out;
  for (const auto& [id, model] : j.items()) out[id] = latency_from_json(model);
  return out;
}

inline SequenceData load_sequence(RunConfig& cfg, const nlohmann::json& j,
                                  const std::map<DetectorId, LatencyModel>& latency) {
  SequenceData seq;
  const auto& info_j = j.at("info");
  if (info_j.is_string()) {
    const auto rel = info_j.get<std::string>();
    const auto text = read_input(cfg, rel);
    if (rel.size() >= 4 && rel.substr(rel.size() - 4) == ".ini") {
      std::istringstream in(text);
      seq.info = parse_seqinfo_ini(in);
    } else {
      seq.info = sequence_info_from_json(nlohmann::json::parse(text));
    }
  } else {
    seq.info = sequence_info_from_json(info_j);
  }
  seq.name = j.value("name", seq.info.name);
  if (seq.name.empty()) throw ConfigError("every sequence needs a name");
  seq.info.name = seq.name;

  const auto gt_rel = j.at("ground_truth").get<std::string>();
  std::vector<GroundTruthEntry> gt;
  try {
    gt = parse_ground_truth(read_input(cfg, gt_rel));
  } catch (const ParseError& e) {
    throw ConfigError(gt_rel + ": " + e.what());
  }

  std::map<DetectorId, DetectionTrace> traces;
  const auto& traces_j = j.at("traces");
  std::size_t frames = static_cast<std::size_t>(seq.info.frame_count);
  for (const auto& id : cfg.detectors) {
    if (!traces_j.contains(id)) throw ConfigError("sequence '" + seq.name + "' has no trace for detector '" + id + "'");
    const auto rel = traces_j.at(id).get<std::string>();
    try {
      traces[id] = parse_detection_trace(read_input(cfg, rel), seq.info.dims, seq.name);
    } catch (const ParseError& e) {
      throw ConfigError(rel + ": " + e.what());
    }
    if (seq.info.frame_count > 0 && traces[id].frame_count() > frames) {
      throw ConfigError(rel + ": detections past the sequence's last frame " + std::to_string(frames));
    }
    if (seq.info.frame_count == 0) frames = std::max(frames, traces[id].frame_count());
  }
  if (seq.info.frame_count == 0) {
    for (const auto& e : gt) frames = std::max(frames, static_cast<std::size_t>(e.frame));
    seq.info.frame_count = static_cast<int>(frames);
  }
  if (frames == 0) throw ConfigError("sequence '" + seq.name + "' has no frames");

  seq.ground_truth = preprocess_ground_truth(std::move(gt), cfg.person_classes);
  group_by_frame(seq.ground_truth, frames);  // range check

  seq.stream = {j.value("fps", seq.info.fps), static_cast<int>(frames)};
  seq.stream.validate();

  std::map<DetectorId, LatencyModel> overrides;
  if (j.contains("latency")) overrides = latency_map(j.at("latency"));
  if (j.contains("latency_file")) {
    const auto rel = j.at("latency_file").get<std::string>();
    overrides = latency_map(nlohmann::json::parse(read_input(cfg, rel)));
  }
  for (const auto& id : cfg.detectors) {
    DetectorProfile p;
    p.id = id;
    p.trace = std::move(traces[id]);
    p.trace.pad_to(frames);
    if (overrides.contains(id)) {
      p.latency = overrides.at(id);
    } else if (latency.contains(id)) {
      p.latency = latency.at(id);
    } else {
      throw ConfigError("no latency model for detector '" + id + "'");
    }
    seq.profiles.push_back(std::move(p));
  }
  return seq;
}

}  // namespace detail

// Reads a run configuration. Relative paths resolve against the config
// file's directory. seed_override replaces the config's "seed".
inline RunConfig load_run_config(const fs::path& path, std::optional<std::uint64_t> seed_override = std::nullopt) {
  RunConfig cfg;
  cfg.base_dir = path.parent_path();
  try {
    cfg.raw = nlohmann::json::parse(detail::read_file(path));
    const auto& j = cfg.raw;
    cfg.seed = seed_override.value_or(j.value("seed", std::uint64_t{0}));
    cfg.sim.latency_seed = cfg.seed;

    std::map<DetectorId, LatencyModel> latency;
    for (const auto& d : j.value("detectors", nlohmann::json::array())) {
      const auto id = d.at("id").get<std::string>();
      cfg.detectors.push_back(id);
      if (d.contains("latency")) latency[id] = latency_from_json(d.at("latency"));
    }
    if (j.contains("latency_file")) {
      for (auto& [id, m] : detail::latency_map(nlohmann::json::parse(detail::read_input(cfg, j.at("latency_file").get<std::string>()))))
        latency[id] = m;
    }

    if (j.contains("filter")) cfg.filter = filter_config_from_json(j.at("filter"));
    if (j.contains("evaluation")) {
      const auto& e = j.at("evaluation");
      cfg.eval.iou_threshold = e.value("iou_threshold", cfg.eval.iou_threshold);
      if (!(cfg.eval.iou_threshold > 0.0 && cfg.eval.iou_threshold <= 1.0)) {
        throw ConfigError("iou_threshold must lie in (0, 1]");
      }
      if (e.contains("interpolation")) cfg.eval.interpolation = interpolation_from_string(e.at("interpolation"));
      if (e.contains("person_classes")) cfg.person_classes = e.at("person_classes").get<std::set<int>>();
    }
    if (j.contains("simulation")) {
      const auto& s = j.at("simulation");
      const auto clamp = s.value("clamp", std::string("literal"));
      if (clamp == "literal") {
        cfg.sim.clamp = ClampMode::Literal;
      } else if (clamp == "previous-arrival") {
        cfg.sim.clamp = ClampMode::PreviousArrival;
      } else {
        throw ConfigError("simulation.clamp must be literal or previous-arrival");
      }
      const double penalty = s.value("switch_penalty", 0.0);
      if (penalty < 0.0) throw ConfigError("switch_penalty must be non-negative");
      cfg.sim.switch_penalty = penalty > 0.0 ? to_micros(penalty) : 0;
    }
    // A synth config lists its detectors under synth, so its policy is only
    // meaningful in the generated config.
    if (j.contains("policy") && !(cfg.detectors.empty() && j.contains("synth"))) {
      auto pj = j.at("policy");
      if (!pj.contains("detectors")) pj["detectors"] = cfg.detectors;
      cfg.policy = policy_from_json(pj);
    }
    if (j.contains("search")) {
      const auto& s = j.at("search");
      cfg.grid = SearchGrid{s.at("grid").get<std::vector<std::vector<double>>>()};
      cfg.tie_epsilon = s.value("tie_epsilon", cfg.tie_epsilon);
      cfg.threads = s.value("threads", 0u);
      if (cfg.tie_epsilon < 0.0) throw ConfigError("tie_epsilon must be non-negative");
    }
    if (j.contains("cost")) cfg.cost = cost_profile_from_json(j.at("cost"));

    for (const auto& sj : j.value("sequences", nlohmann::json::array())) {
      cfg.sequences.push_back(detail::load_sequence(cfg, sj, latency));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return cfg;
}

namespace detail {

inline void require_sequences(const RunConfig& cfg) {
  if (cfg.sequences.empty()) throw ConfigError("this mode needs at least one sequence");
  if (cfg.detectors.empty()) throw ConfigError("this mode needs at least one detector");
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline const char* kApHeader = "sequence,detector,average_precision,true_positives,false_positives,ignored,active_ground_truth";

inline void ap_row(std::ostream& out, const APReport& r) {
  out << r.sequence << ',' << r.detector << ',' << format_real(r.average_precision) << ',' << r.true_positives
      << ',' << r.false_positives << ',' << r.ignored << ',' << r.active_ground_truth;
}

inline void curve_rows(std::ostream& out, const APReport& r) {
  for (const auto& p : r.curve) {
    out << r.sequence << ',' << r.detector << ',' << format_real(p.recall) << ',' << format_real(p.precision) << '\n';
  }
}

inline APReport labelled(APReport r, const std::string& sequence, const std::string& detector, const RunConfig& cfg) {
  r.sequence = sequence;
  r.detector = detector;
  r.confidence_prefilter = cfg.filter.confidence_threshold;
  return r;
}

inline nlohmann::json config_summary(const RunConfig& cfg) {
  return {{"detectors", cfg.detectors},
          {"filter", to_json(cfg.filter)},
          {"iou_threshold", cfg.eval.iou_threshold},
          {"interpolation", to_string(cfg.eval.interpolation)},
          {"person_classes", cfg.person_classes}};
}

inline void run_offline(const RunConfig& cfg, ReportSet& out) {
  require_sequences(cfg);
  std::ostringstream csv, curves;
  csv << kApHeader << '\n';
  curves << "sequence,detector,recall,precision\n";
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& seq : cfg.sequences) {
    for (const auto& p : seq.profiles) {
      std::vector<FrameDetections> frames;
      for (int k = 1; k <= seq.stream.frame_count; ++k) frames.push_back(filter_detections(p.trace.at(k), cfg.filter));
      const auto r = labelled(evaluate_sequence(std::span<const FrameDetections>(frames), seq.ground_truth, cfg.eval),
                              seq.name, p.id, cfg);
      ap_row(csv, r);
      csv << '\n';
      curve_rows(curves, r);
      reports.push_back(to_json(r));
    }
  }
  out["offline_ap.csv"] = csv.str();
  out["offline_pr_curves.csv"] = curves.str();
  out["offline_ap.json"] = dump({{"mode", "offline-eval"}, {"settings", config_summary(cfg)}, {"reports", reports}});
}

inline void run_realtime(const RunConfig& cfg, ReportSet& out) {
  require_sequences(cfg);
  std::ostringstream csv, curves;
  csv << kApHeader << ",fps,processed_frames,dropped_frames\n";
  curves << "sequence,detector,recall,precision\n";
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& seq : cfg.sequences) {
    for (const auto& p : seq.profiles) {
      const SimResult sim = simulate_fixed_detector(p, seq.stream, cfg.filter, cfg.sim);
      const auto r = labelled(evaluate_sequence(sim, seq.ground_truth, cfg.eval), seq.name, p.id, cfg);
      ap_row(csv, r);
      csv << ',' << format_real(seq.stream.fps) << ',' << sim.processed_count << ',' << sim.dropped_count << '\n';
      curve_rows(curves, r);
      auto rj = to_json(r);
      rj["fps"] = seq.stream.fps;
      rj["processed_frames"] = sim.processed_count;
      rj["dropped_frames"] = sim.dropped_count;
      reports.push_back(rj);
    }
  }
  out["realtime_ap.csv"] = csv.str();
  out["realtime_pr_curves.csv"] = curves.str();
  out["realtime_ap.json"] = dump({{"mode", "realtime-eval"}, {"settings", config_summary(cfg)}, {"reports", reports}});
}

inline nlohmann::json resource_json(const std::map<DetectorId, double>& freq, const CostProfile& cost) {
  nlohmann::json profile;
  for (const auto& [id, c] : cost.detectors) {
    profile[id] = {{"power_watts", c.power_watts},
                   {"gpu_utilization", c.gpu_utilization ? nlohmann::json(*c.gpu_utilization) : nlohmann::json()},
                   {"memory_gb", c.memory_gb ? nlohmann::json(*c.memory_gb) : nlohmann::json()}};
  }
  return {{"estimate", to_json(resource_estimate(freq, cost))},
          {"frequency", freq},
          {"cost_profile", profile},
          {"baseline_memory_gb", cost.baseline_memory_gb}};
}

inline void run_tod(const RunConfig& cfg, ReportSet& out) {
  require_sequences(cfg);
  if (!cfg.policy) throw ConfigError("tod mode needs a policy section");
  const auto& policy = *cfg.policy;

  std::ostringstream ap_csv, freq_csv, curves, res_csv;
  ap_csv << kApHeader << ",fps,processed_frames,dropped_frames,first_frame_detector\n";
  freq_csv << "sequence,detector,frequency,processed_frames\n";
  curves << "sequence,detector,recall,precision\n";
  res_csv << "sequence,power_watts,gpu_utilization,memory_gb\n";
  nlohmann::json reports = nlohmann::json::array();
  std::map<DetectorId, std::size_t> pooled;
  std::size_t pooled_total = 0;

  auto write_freq = [&](const std::string& name, const std::map<DetectorId, std::size_t>& counts, std::size_t total) {
    std::map<DetectorId, double> freq;
    for (const auto& id : policy.detectors) {
      const std::size_t c = counts.contains(id) ? counts.at(id) : 0;
      freq[id] = static_cast<double>(c) / static_cast<double>(total);
      freq_csv << name << ',' << id << ',' << format_real(freq[id]) << ',' << c << '\n';
    }
    if (cfg.cost) {
      const auto est = resource_estimate(freq, *cfg.cost);
      auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
      res_csv << name << ',' << format_real(est.power_watts) << ',' << opt(est.gpu_utilization) << ','
              << opt(est.memory_gb) << '\n';
      return resource_json(freq, *cfg.cost);
    }
    return nlohmann::json(freq);
  };

  nlohmann::json per_seq = nlohmann::json::object();
  for (const auto& seq : cfg.sequences) {
    const SimResult sim = simulate_tod(seq.profiles, policy, seq.stream, cfg.filter, cfg.sim);
    const auto r = labelled(evaluate_sequence(sim, seq.ground_truth, cfg.eval), seq.name, "tod", cfg);
    ap_row(ap_csv, r);
    ap_csv << ',' << format_real(seq.stream.fps) << ',' << sim.processed_count << ',' << sim.dropped_count << ','
           << sim.frames.front().detector.value_or("") << '\n';
    curve_rows(curves, r);

    std::map<DetectorId, std::size_t> counts;
    std::ostringstream schedule;
    schedule << "frame,processed,detector,mbbs,detections\n";
    for (const auto& f : sim.frames) {
      if (f.processed) {
        ++counts[*f.detector];
        ++pooled[*f.detector];
        ++pooled_total;
      }
      schedule << f.frame << ',' << (f.processed ? 1 : 0) << ',' << f.detector.value_or("") << ','
               << (f.mbbs ? format_real(*f.mbbs) : std::string()) << ',' << f.detections.size() << '\n';
    }
    auto rj = to_json(r);
    rj["processed_frames"] = sim.processed_count;
    rj["dropped_frames"] = sim.dropped_count;
    rj["first_frame_detector"] = sim.frames.front().detector.value_or("");
    reports.push_back(rj);
    per_seq[seq.name] = write_freq(seq.name, counts, sim.processed_count);

    const auto effective = sim.effective_detections();
    out["tod_schedule_" + seq.name + ".csv"] = schedule.str();
    out["tod_detections_" + seq.name + ".txt"] = serialize_detections(std::span<const FrameDetections>(effective));
  }
  const auto pooled_json = write_freq("ALL", pooled, pooled_total);

  out["tod_ap.csv"] = ap_csv.str();
  out["tod_frequency.csv"] = freq_csv.str();
  out["tod_pr_curves.csv"] = curves.str();
  if (cfg.cost) out["tod_resource.csv"] = res_csv.str();
  out["tod.json"] = dump({{"mode", "tod"},
                          {"settings", config_summary(cfg)},
                          {"policy", to_json(policy)},
                          {"reports", reports},
                          {"frequency", per_seq},
                          {"frequency_pooled", pooled_json},
                          {"frequency_denominator", "processed frames (first frame included; see first_frame_detector)"}});
}

inline void run_search(const RunConfig& cfg, ReportSet& out) {
  require_sequences(cfg);
  if (!cfg.grid) throw ConfigError("search mode needs a search section");
  std::vector<SearchSequence> seqs;
  for (const auto& s : cfg.sequences) seqs.push_back({s.name, s.stream, s.ground_truth, s.profiles});
  SearchSettings settings;
  settings.detectors = cfg.detectors;
  settings.filter = cfg.filter;
  settings.eval = cfg.eval;
  settings.sim = cfg.sim;
  settings.tie_epsilon = cfg.tie_epsilon;
  settings.threads = cfg.threads;
  const auto sets = enumerate_grid(*cfg.grid);
  if (cfg.grid->candidates.size() + 1 != cfg.detectors.size()) {
    throw ConfigError("search grid has " + std::to_string(cfg.grid->candidates.size()) + " threshold lists for " +
                      std::to_string(cfg.detectors.size()) + " detectors");
  }
  const auto report = search(sets, seqs, settings);

  std::ostringstream csv;
  write_search_csv(csv, report);
  out["search.csv"] = csv.str();
  auto j = to_json(report);
  j["mode"] = "search";
  j["settings"] = config_summary(cfg);
  if (cfg.cost) j["optimum_resource"] = resource_json(report.best().frequency, *cfg.cost);
  out["search.json"] = dump(j);
}

inline void run_synth(const RunConfig& cfg, ReportSet& out) {
  const auto& j = cfg.raw;
  if (!j.contains("synth")) throw ConfigError("synth mode needs a synth section");
  const auto& sj = j.at("synth");
  std::vector<DetectorModel> models;
  for (const auto& m : sj.at("detectors")) models.push_back(detector_model_from_json(m));
  if (models.empty()) throw ConfigError("synth needs at least one detector model");

  // Generated config: same sections as the input minus synth, pointing at the
  // generated files.
  nlohmann::json generated = j;
  generated.erase("synth");
  generated["seed"] = cfg.seed;
  generated["detectors"] = nlohmann::json::array();
  for (const auto& m : models) generated["detectors"].push_back({{"id", m.id}, {"latency", to_json(m.latency)}});
  generated["sequences"] = nlohmann::json::array();

  for (const auto& scene_j : sj.at("scenes")) {
    const SceneSpec scene = scene_from_json(scene_j);
    const std::uint64_t scene_seed = Rng::mix(cfg.seed, stream_id(scene.name));
    const auto gt = generate_ground_truth(scene, scene_seed);
    const std::string dir = scene.name + "/";
    out[dir + "gt.txt"] = serialize_ground_truth(gt);
    const SequenceInfo info{scene.name, scene.dims, scene.fps, scene.frame_count};
    out[dir + "seqinfo.json"] = dump(to_json(info));
    nlohmann::json traces;
    for (const auto& m : models) {
      const auto trace = synthesize_detector_trace(gt, m, scene.dims, scene.frame_count, scene_seed, scene.name);
      const std::string file = dir + "det_" + m.id + ".txt";
      out[file] = serialize_detections(trace);
      traces[m.id] = file;
    }
    nlohmann::json seq{{"name", scene.name}, {"info", dir + "seqinfo.json"}, {"ground_truth", dir + "gt.txt"},
                       {"traces", traces}};
    if (scene_j.contains("stream_fps")) seq["fps"] = scene_j.at("stream_fps");
    generated["sequences"].push_back(seq);
  }
  out["config.json"] = dump(generated);
}

}  // namespace detail

// Runs one mode and returns the report files it produces, plus a manifest
// of inputs, seed and output hashes. Nothing is written to disk here.
inline ReportSet run_pipeline(const RunConfig& cfg, Mode mode) {
  ReportSet out;
  switch (mode) {
    case Mode::OfflineEval: detail::run_offline(cfg, out); break;
    case Mode::RealtimeEval: detail::run_realtime(cfg, out); break;
    case Mode::Tod: detail::run_tod(cfg, out); break;
    case Mode::Search: detail::run_search(cfg, out); break;
    case Mode::Synth: detail::run_synth(cfg, out); break;
  }
  nlohmann::json outputs;
  for (const auto& [name, bytes] : out) outputs[name] = content_hash(bytes);
  out["manifest.json"] = detail::dump({{"mode", to_string(mode)},
                                       {"seed", cfg.seed},
                                       {"config_hash", content_hash(cfg.raw.dump())},
                                       {"inputs", cfg.input_hashes},
                                       {"outputs", outputs}});
  return out;
}

inline void write_report_set(const ReportSet& reports, const fs::path& dir) {
  for (const auto& [name, bytes] : reports) {
    const fs::path target = dir / name;
    fs::create_directories(target.parent_path());
    std::ofstream f(target, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + target.string() + "'");
    f << bytes;
  }
}

}  // namespace tod
