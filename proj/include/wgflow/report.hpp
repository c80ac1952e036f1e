#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wgflow/config.hpp"

namespace wgflow {

struct RunOptions {
  int threads = 0;  // 0: WGFLOW_THREADS or the hardware concurrency
  bool quiet = false;
};

struct RunResult {
  int status = 0;                   // 0 ok, 1 a result was flagged
  std::vector<std::string> flags;   // why the status is 1
  std::vector<std::filesystem::path> files;
  double wall_time = 0.0;
};

// Runs the experiment and writes its files into cfg.output. Files are written
// with a .partial suffix and renamed once the experiment finishes; on an
// exception the .partial files are left in place.
RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

// 17 significant digits (%.17g), which round-trips every finite double
std::string format_double(double v);

}  // namespace wgflow
