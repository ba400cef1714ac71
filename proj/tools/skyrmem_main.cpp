#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "skyrmem/scenario.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = 0;
  bool quiet = false;
};

skyrmem::ScenarioConfig load(const Flags& f) {
  auto cfg = skyrmem::load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out.empty()) cfg.output.dir = f.out;
  return cfg;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const skyrmem::ConfigError& e) {
    std::cerr << "config error at " << (e.path().empty() ? "<file>" : e.path()) << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const skyrmem::StageError& e) {
    std::cerr << "failed in stage '" << e.stage() << "': " << e.what() << "\n";
    return kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "failed in stage 'run': " << e.what() << "\n";
    return kExitStage;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optical skyrmion storage simulator"};
  app.require_subcommand(1);
  Flags flags;

  auto* run = app.add_subcommand("run", "Run a scenario and write results.json, sweep.csv, metadata.json");
  run->add_option("--config", flags.config, "Scenario config (JSON, // comments allowed)")->required();
  run->add_option("--seed", flags.seed, "Override the config seed");
  run->add_option("--out", flags.out, "Override output.dir");
  run->add_option("--threads", flags.threads, "Worker threads (0 = all cores)");
  run->add_flag("--quiet", flags.quiet, "Suppress per-point summaries");

  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("--config", flags.config, "Scenario config")->required();

  auto* plots = app.add_subcommand("export-plots", "Write plot data and a plotting script for a results directory");
  plots->add_option("--out", flags.out, "Results directory");
  plots->add_option("--config", flags.config, "Config whose output.dir holds the results");

  CLI11_PARSE(app, argc, argv);

  if (*run) {
    return guarded([&] {
      const auto cfg = load(flags);
      const auto result = skyrmem::run_and_write(cfg, {.threads = flags.threads});
      if (!flags.quiet) {
        for (const auto& line : result.summary_lines) std::cout << line << "\n";
      }
      std::cout << skyrmem::to_string(cfg.kind) << ": " << result.summary_lines.size() << " points -> "
                << cfg.output.dir.string() << "\n";
      return 0;
    });
  }
  if (*validate) {
    return guarded([&] {
      const auto cfg = load(flags);
      skyrmem::check_physics(cfg);
      std::cout << "OK " << skyrmem::to_string(cfg.kind) << "\n";
      return 0;
    });
  }
  return guarded([&] {
    std::filesystem::path dir = flags.out;
    if (dir.empty()) {
      if (flags.config.empty()) {
        throw skyrmem::ConfigError("", "export-plots needs --out or --config");
      }
      dir = skyrmem::load_config(flags.config).output.dir;
    }
    for (const auto& p : skyrmem::export_plots(dir)) std::cout << p.string() << "\n";
    return 0;
  });
}
