#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "wgflow/config.hpp"
#include "wgflow/errors.hpp"
#include "wgflow/oracles.hpp"
#include "wgflow/report.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFlagged = 1;
constexpr int kConfigError = 2;

int cmd_run(const std::string& path, const std::string& output, int threads, bool quiet) {
  wgflow::ExperimentConfig cfg;
  try {
    cfg = wgflow::load_config(path);
    if (!output.empty()) cfg.output = output;
  } catch (const wgflow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  try {
    const auto res = wgflow::run_experiment(cfg, {threads, quiet});
    if (!quiet) {
      std::cout << wgflow::to_string(cfg.kind) << ": " << res.files.size() << " files in " << cfg.output.string()
                << " (" << wgflow::format_double(res.wall_time) << " s)\n";
    }
    return res.status == 0 ? kOk : kFlagged;
  } catch (const wgflow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return kFlagged;
  }
}

int cmd_validate(const std::string& path) {
  try {
    const auto cfg = wgflow::load_config(path);
    std::cout << path << ": ok (" << wgflow::to_string(cfg.kind) << ")\n";
    return kOk;
  } catch (const wgflow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
}

int cmd_selftest() {
  bool all = true;
  for (const auto& item : wgflow::oracle_selftest()) {
    std::printf("%s %s (%.3e)\n", item.passed ? "PASS" : "FAIL", item.name.c_str(), item.value);
    all = all && item.passed;
  }
  return all ? kOk : kFlagged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wgflow: Wasserstein gradient flows of permanental and toric energies"};
  app.require_subcommand(1);

  std::string run_path, output;
  int threads = 0;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "run an experiment config (.json or .toml)");
  run->add_option("config", run_path, "config file")->required();
  run->add_option("-o,--output", output, "output directory (overrides the config)");
  run->add_option("-j,--threads", threads, "worker threads (default: WGFLOW_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);
  run->add_flag("-q,--quiet", quiet, "no progress output");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "parse and check a config without running it");
  validate->add_option("config", validate_path, "config file")->required();

  auto* oracles = app.add_subcommand("oracles", "reference solvers");
  oracles->require_subcommand(1);
  auto* selftest = oracles->add_subcommand("selftest", "check the oracles against closed forms");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  if (*run) return cmd_run(run_path, output, threads, quiet);
  if (*validate) return cmd_validate(validate_path);
  if (*selftest) return cmd_selftest();
  return kConfigError;
}
