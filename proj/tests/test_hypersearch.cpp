#include <algorithm>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "tod/hypersearch.hpp"
#include "tod/synth.hpp"

using namespace tod;

namespace {

const SearchGrid kPaperGrid{{{0.0007, 0.007}, {0.008, 0.03}, {0.04, 0.1}}};

// Two detectors with the same detections: AP cannot depend on which runs,
// only on timing, and both are fast enough to never drop.
SearchSequence identical_detector_sequence() {
  SceneSpec scene;
  scene.name = "flat";
  scene.dims = {200, 100};
  scene.frame_count = 40;
  scene.objects = {{{10, 10, 40, 40}, 1.0, 0.0, 0.0, 0.0}, {{120, 20, 30, 50}, -0.5, 0.0, 0.0, 0.0}};
  const auto gt = generate_ground_truth(scene, 1);
  DetectorModel m;
  m.id = "model";
  m.noise_px = 1.0;
  m.fp_rate = 0.5;
  m.confidence = {0.5, 0.9, 0.36, 0.8};
  const auto trace = synthesize_detector_trace(gt, m, scene.dims, scene.frame_count, 5, "flat");
  return {"flat", {30.0, scene.frame_count}, gt,
          {{"heavy", trace, ConstantLatency{0.02}}, {"light", trace, ConstantLatency{0.01}}}};
}

// Small objects slow, large objects fast, heavy detector misses nothing but
// runs at a third of the frame rate.
std::vector<SearchSequence> mixed_sequences() {
  std::vector<SearchSequence> out;
  DetectorModel heavy;
  heavy.id = "heavy";
  heavy.recall_curve = {{0.0, 0.95}};
  heavy.noise_px = 1.0;
  heavy.confidence = {0.5, 0.95, 0.36, 0.6};
  heavy.fp_rate = 0.2;
  DetectorModel light = heavy;
  light.id = "light";
  light.recall_curve = {{0.0, 0.3}, {0.02, 0.3}, {0.02, 0.95}};
  for (const auto& [name, area, speed] : {std::tuple{"small", 0.003, 0.3}, std::tuple{"large", 0.06, 12.0}}) {
    SceneSpec scene;
    scene.name = name;
    scene.dims = {640, 480};
    scene.frame_count = 60;
    scene.random = {6, area, area, 2.0, 2.5, speed, speed};
    const auto gt = generate_ground_truth(scene, 77);
    out.push_back({name,
                   {30.0, scene.frame_count},
                   gt,
                   {{"heavy", synthesize_detector_trace(gt, heavy, scene.dims, scene.frame_count, 3, name),
                     ConstantLatency{0.1}},
                    {"light", synthesize_detector_trace(gt, light, scene.dims, scene.frame_count, 3, name),
                     ConstantLatency{0.02}}}});
  }
  return out;
}

SearchSettings settings_for(std::vector<DetectorId> ids) {
  SearchSettings s;
  s.detectors = std::move(ids);
  s.threads = 2;
  return s;
}

}  // namespace

TEST(EnumerateGrid, PaperGridHasEightSets) {
  const auto sets = enumerate_grid(kPaperGrid);
  ASSERT_EQ(sets.size(), 8u);
  EXPECT_EQ(sets.front(), (ThresholdSet{0.0007, 0.008, 0.04}));
  EXPECT_EQ(sets[1], (ThresholdSet{0.0007, 0.008, 0.1}));
  EXPECT_EQ(sets.back(), (ThresholdSet{0.007, 0.03, 0.1}));
  EXPECT_NE(std::find(sets.begin(), sets.end(), ThresholdSet{0.007, 0.03, 0.04}), sets.end());
}

TEST(EnumerateGrid, SingleCandidates) {
  EXPECT_EQ(enumerate_grid({{{0.1}, {0.2}}}).size(), 1u);
}

TEST(EnumerateGrid, DropsNonIncreasingCombinations) {
  EXPECT_TRUE(enumerate_grid({{{0.05}, {0.04}}}).empty());
  EXPECT_EQ(enumerate_grid({{{0.1, 0.3}, {0.2, 0.3}}}).size(), 2u);  // {0.1,0.2} {0.1,0.3}
}

TEST(EnumerateGrid, EmptyListIsAnError) {
  EXPECT_THROW(enumerate_grid({{{0.1}, {}}}), ConfigError);
}

TEST(EnumerateGrid, NoThresholdsGivesOneEmptySet) {
  const auto sets = enumerate_grid({});
  ASSERT_EQ(sets.size(), 1u);
  EXPECT_TRUE(sets[0].empty());
}

TEST(ChooseOptimum, NearTiePrefersLighterDeployment) {
  std::vector<CandidateResult> c(3);
  c[0] = {{0.007, 0.03, 0.1}, {0.80}, 0.800, {{"light", 0.40}}, 10};
  c[1] = {{0.007, 0.03, 0.04}, {0.798}, 0.798, {{"light", 0.70}}, 10};
  c[2] = {{0.0007, 0.008, 0.04}, {0.70}, 0.700, {{"light", 0.99}}, 10};
  EXPECT_EQ(choose_optimum(c, "light", 0.005), 1u);
  EXPECT_EQ(choose_optimum(c, "light", 0.0), 0u);
}

TEST(ChooseOptimum, FinalTieBreakIsLexicographic) {
  std::vector<CandidateResult> c(2);
  c[0] = {{0.2}, {0.5}, 0.5, {{"light", 0.5}}, 4};
  c[1] = {{0.1}, {0.5}, 0.5, {{"light", 0.5}}, 4};
  EXPECT_EQ(choose_optimum(c, "light", 0.0), 1u);
}

TEST(Search, SingleCandidateIsOptimal) {
  const std::vector<SearchSequence> seqs{identical_detector_sequence()};
  const std::vector<ThresholdSet> sets{{0.3}};
  const auto r = tod::search(sets, seqs, settings_for({"heavy", "light"}));
  EXPECT_EQ(r.optimum, 0u);
  EXPECT_EQ(r.candidates.size(), 1u);
}

TEST(Search, IdenticalApChoosesLighterPolicy) {
  const std::vector<SearchSequence> seqs{identical_detector_sequence()};
  const std::vector<ThresholdSet> sets{{0.5}, {0.01}};
  const auto r = tod::search(sets, seqs, settings_for({"heavy", "light"}));
  EXPECT_EQ(r.candidates[0].mean_ap, r.candidates[1].mean_ap);
  EXPECT_GT(r.candidates[1].frequency.at("light"), r.candidates[0].frequency.at("light"));
  EXPECT_EQ(r.optimum, 1u);
}

TEST(Search, AgreesWithIndependentReevaluation) {
  const auto seqs = mixed_sequences();
  const SearchGrid grid{{{0.001, 0.005, 0.01, 0.02, 0.04, 0.1}}};
  const auto sets = enumerate_grid(grid);
  auto settings = settings_for({"heavy", "light"});
  const auto r = tod::search(sets, seqs, settings);

  // Second pass: plain loops over policies, straight from the definitions.
  double best_ap = -1.0;
  std::vector<double> means, light_freq;
  for (const auto& set : sets) {
    double sum = 0.0;
    std::size_t light = 0, total = 0;
    for (const auto& s : seqs) {
      const auto sim = simulate_tod(s.profiles, SchedulerPolicy{{"heavy", "light"}, set}, s.stream, FilterConfig{});
      sum += evaluate_sequence(sim, s.ground_truth).average_precision;
      for (const auto& f : sim.frames) {
        total += f.processed;
        light += f.processed && *f.detector == "light";
      }
    }
    means.push_back(sum / static_cast<double>(seqs.size()));
    light_freq.push_back(static_cast<double>(light) / static_cast<double>(total));
    best_ap = std::max(best_ap, means.back());
  }
  std::size_t expect = sets.size();
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (means[i] < best_ap - settings.tie_epsilon) continue;
    if (expect == sets.size() || light_freq[i] > light_freq[expect]) expect = i;
  }
  EXPECT_EQ(r.optimum, expect);
  for (std::size_t i = 0; i < sets.size(); ++i) {
    EXPECT_EQ(r.candidates[i].mean_ap, means[i]);
    EXPECT_EQ(r.candidates[i].frequency.at("light"), light_freq[i]);
  }
  EXPECT_GE(r.best().mean_ap, best_ap - settings.tie_epsilon);
}

TEST(Search, OrderIndependentOptimum) {
  const auto seqs = mixed_sequences();
  auto sets = enumerate_grid({{{0.001, 0.005, 0.01, 0.02, 0.04, 0.1}}});
  const auto settings = settings_for({"heavy", "light"});
  const auto base = tod::search(sets, seqs, settings);
  std::mt19937_64 gen(1);
  for (int i = 0; i < 5; ++i) {
    std::shuffle(sets.begin(), sets.end(), gen);
    const auto r = tod::search(sets, seqs, settings);
    EXPECT_EQ(r.best().thresholds, base.best().thresholds);
  }
}

TEST(Search, SequenceApMatchesStandaloneEvaluation) {
  const auto seqs = mixed_sequences();
  const std::vector<ThresholdSet> sets{{0.01}, {0.05}};
  const auto r = tod::search(sets, seqs, settings_for({"heavy", "light"}));
  for (std::size_t c = 0; c < sets.size(); ++c) {
    for (std::size_t s = 0; s < seqs.size(); ++s) {
      const auto sim = simulate_tod(seqs[s].profiles, SchedulerPolicy{{"heavy", "light"}, sets[c]}, seqs[s].stream,
                                    FilterConfig{});
      EXPECT_EQ(r.candidates[c].sequence_ap[s], evaluate_sequence(sim, seqs[s].ground_truth).average_precision);
    }
  }
}

TEST(Search, ErrorsNameTheCandidate) {
  const std::vector<SearchSequence> seqs{identical_detector_sequence()};
  const std::vector<ThresholdSet> sets{{0.3}, {1.5}};
  try {
    tod::search(sets, seqs, settings_for({"heavy", "light"}));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("{1.5}"), std::string::npos);
  }
  EXPECT_THROW(tod::search({}, seqs, settings_for({"heavy", "light"})), ConfigError);
}

TEST(Search, CsvHasTableShape) {
  const std::vector<SearchSequence> seqs{identical_detector_sequence()};
  const std::vector<ThresholdSet> sets{{0.5}, {0.01}};
  const auto r = tod::search(sets, seqs, settings_for({"heavy", "light"}));
  std::ostringstream out;
  write_search_csv(out, r);
  const std::string csv = out.str();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "h1,ap_flat,mean_ap,freq_heavy,freq_light,optimal");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}
