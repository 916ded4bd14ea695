#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "tod/detection_eval.hpp"
#include "tod/error.hpp"
#include "tod/mot_io.hpp"
#include "tod/report.hpp"
#include "tod/scheduler.hpp"
#include "tod/stream_sim.hpp"

namespace tod {

using ThresholdSet = std::vector<double>;

// Candidate values per threshold, h_1 first.
struct SearchGrid {
  std::vector<std::vector<double>> candidates;
};

// Cartesian product in lexicographic index order (last threshold varies
// fastest), keeping only strictly increasing combinations.
inline std::vector<ThresholdSet> enumerate_grid(const SearchGrid& grid) {
  for (std::size_t i = 0; i < grid.candidates.size(); ++i) {
    if (grid.candidates[i].empty()) {
      throw ConfigError("candidate list for threshold h" + std::to_string(i + 1) + " is empty");
    }
  }
  std::vector<ThresholdSet> out;
  const std::size_t dims = grid.candidates.size();
  std::vector<std::size_t> idx(dims, 0);
  while (true) {
    ThresholdSet set(dims);
    for (std::size_t d = 0; d < dims; ++d) set[d] = grid.candidates[d][idx[d]];
    if (std::adjacent_find(set.begin(), set.end(), std::greater_equal<>{}) == set.end()) out.push_back(set);

    std::size_t d = dims;
    while (d > 0) {
      --d;
      if (++idx[d] < grid.candidates[d].size()) break;
      idx[d] = 0;
      if (d == 0) return out;
    }
    if (dims == 0) return out;
  }
}

// One evaluation sequence: preprocessed ground truth, the stream it is played
// at, and one profile per detector.
struct SearchSequence {
  std::string name;
  StreamSpec stream;
  std::vector<GroundTruthEntry> ground_truth;
  std::vector<DetectorProfile> profiles;
};

struct SearchSettings {
  std::vector<DetectorId> detectors;  // heaviest first
  FilterConfig filter;
  EvalConfig eval;
  SimOptions sim;
  double tie_epsilon = 0.005;
  unsigned threads = 0;  // 0 = hardware concurrency
};

struct CandidateResult {
  ThresholdSet thresholds;
  std::vector<double> sequence_ap;
  double mean_ap = 0.0;
  std::map<DetectorId, double> frequency;  // pooled over all processed frames
  std::size_t processed_frames = 0;
};

struct SearchReport {
  std::vector<DetectorId> detectors;
  std::vector<std::string> sequences;
  std::vector<CandidateResult> candidates;
  std::size_t optimum = 0;
  double tie_epsilon = 0.0;

  const CandidateResult& best() const { return candidates.at(optimum); }
};

inline CandidateResult evaluate_candidate(const ThresholdSet& thresholds, std::span<const SearchSequence> sequences,
                                          const SearchSettings& settings) {
  const SchedulerPolicy policy{settings.detectors, thresholds};
  CandidateResult out;
  out.thresholds = thresholds;
  std::map<DetectorId, std::size_t> counts;
  for (const auto& id : settings.detectors) counts[id] = 0;
  for (const auto& seq : sequences) {
    const SimResult sim = simulate_tod(seq.profiles, policy, seq.stream, settings.filter, settings.sim);
    out.sequence_ap.push_back(evaluate_sequence(sim, seq.ground_truth, settings.eval).average_precision);
    for (const auto& f : sim.frames) {
      if (f.processed) {
        ++counts[*f.detector];
        ++out.processed_frames;
      }
    }
  }
  double sum = 0.0;
  for (const double ap : out.sequence_ap) sum += ap;
  out.mean_ap = sum / static_cast<double>(out.sequence_ap.size());
  for (const auto& [id, c] : counts) {
    out.frequency[id] = out.processed_frames ? static_cast<double>(c) / static_cast<double>(out.processed_frames) : 0.0;
  }
  return out;
}

// Index of the optimum: highest mean AP; among candidates within tie_epsilon
// of it, the one deploying the lightest detector most often; then the
// lexicographically smallest threshold vector.
inline std::size_t choose_optimum(std::span<const CandidateResult> candidates, const DetectorId& lightest,
                                  double tie_epsilon) {
  if (candidates.empty()) throw ConfigError("no candidates to choose from");
  double best_ap = candidates.front().mean_ap;
  for (const auto& c : candidates) best_ap = std::max(best_ap, c.mean_ap);

  auto light = [&](const CandidateResult& c) {
    const auto it = c.frequency.find(lightest);
    return it == c.frequency.end() ? 0.0 : it->second;
  };
  std::optional<std::size_t> chosen;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (c.mean_ap < best_ap - tie_epsilon) continue;
    if (!chosen) {
      chosen = i;
      continue;
    }
    const auto& cur = candidates[*chosen];
    if (light(c) > light(cur) || (light(c) == light(cur) && c.thresholds < cur.thresholds)) chosen = i;
  }
  return *chosen;
}

// Exhaustive search. Candidates are evaluated concurrently and stored in
// input order, so the report does not depend on scheduling.
inline SearchReport search(std::span<const ThresholdSet> sets, std::span<const SearchSequence> sequences,
                           const SearchSettings& settings) {
  if (sets.empty()) throw ConfigError("search needs at least one candidate threshold set");
  if (sequences.empty()) throw ConfigError("search needs at least one sequence");
  if (settings.detectors.empty()) throw ConfigError("search needs a detector ordering");

  SearchReport report;
  report.detectors = settings.detectors;
  report.tie_epsilon = settings.tie_epsilon;
  for (const auto& s : sequences) report.sequences.push_back(s.name);
  report.candidates.resize(sets.size());

  std::vector<std::exception_ptr> errors(sets.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < sets.size(); i = next++) {
      try {
        report.candidates[i] = evaluate_candidate(sets[i], sequences, settings);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned n_threads = settings.threads ? settings.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, sets.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (!errors[i]) continue;
    std::string label = "{";
    for (std::size_t k = 0; k < sets[i].size(); ++k) label += (k ? ", " : "") + detail::format_real(sets[i][k]);
    label += "}";
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw ConfigError("candidate " + label + ": " + e.what());
    }
  }
  report.optimum = choose_optimum(report.candidates, settings.detectors.back(), settings.tie_epsilon);
  return report;
}

// Table layout: one row per candidate set with thresholds, per-sequence AP,
// mean AP, per-detector deployment frequency and the optimum marker.
inline void write_search_csv(std::ostream& out, const SearchReport& r) {
  using detail::format_real;
  const std::size_t n_thresh = r.detectors.empty() ? 0 : r.detectors.size() - 1;
  for (std::size_t i = 0; i < n_thresh; ++i) out << 'h' << i + 1 << ',';
  for (const auto& s : r.sequences) out << "ap_" << s << ',';
  out << "mean_ap";
  for (const auto& d : r.detectors) out << ",freq_" << d;
  out << ",optimal\n";
  for (std::size_t c = 0; c < r.candidates.size(); ++c) {
    const auto& cand = r.candidates[c];
    for (const double h : cand.thresholds) out << format_real(h) << ',';
    for (const double ap : cand.sequence_ap) out << format_real(ap) << ',';
    out << format_real(cand.mean_ap);
    for (const auto& d : r.detectors) {
      const auto it = cand.frequency.find(d);
      out << ',' << format_real(it == cand.frequency.end() ? 0.0 : it->second);
    }
    out << ',' << (c == r.optimum ? 1 : 0) << '\n';
  }
}

inline nlohmann::json to_json(const SearchReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : r.candidates) {
    rows.push_back({{"thresholds", c.thresholds},
                    {"sequence_ap", c.sequence_ap},
                    {"mean_ap", c.mean_ap},
                    {"frequency", c.frequency},
                    {"processed_frames", c.processed_frames}});
  }
  return {{"detectors", r.detectors},
          {"sequences", r.sequences},
          {"candidates", rows},
          {"optimum", r.optimum},
          {"optimum_thresholds", r.best().thresholds},
          {"tie_epsilon", r.tie_epsilon}};
}

}  // namespace tod
