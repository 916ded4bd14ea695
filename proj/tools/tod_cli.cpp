#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tod/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Transprecise object-detector scheduling simulator"};
  app.require_subcommand(1);

  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;

  const std::pair<const char*, const char*> verbs[] = {
      {"offline-eval", "Average precision of every detector on every frame"},
      {"realtime-eval", "Average precision of each detector under the FPS constraint"},
      {"tod", "Run the MBBS scheduler under the FPS constraint"},
      {"search", "Grid-search scheduler thresholds"},
      {"synth", "Generate a synthetic scenario and a config that uses it"},
  };
  for (const auto& [name, help] : verbs) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory")->required();
    sub->add_option("--seed", seed, "Seed overriding the config's seed");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string verb = app.get_subcommands().front()->get_name();

  try {
    const auto cfg = tod::load_run_config(config, seed);
    const auto reports = tod::run_pipeline(cfg, tod::mode_from_string(verb));
    tod::write_report_set(reports, out_dir);
    for (const auto& [name, bytes] : reports) std::cout << (std::filesystem::path(out_dir) / name).string() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "tod " << verb << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
