#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace wgflow {

enum class ExperimentKind { Simulate, Jko, StaticSolve, Sticky, Repulsive, Poc, Gibbs, Threshold, Rp };
const char* to_string(ExperimentKind kind);

// A parsed and validated experiment configuration. `json` is the normalized
// document (TOML input is converted), echoed into the manifest.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Rp;
  std::filesystem::path output;
  std::optional<std::uint64_t> seed;
  std::string json;
  std::filesystem::path source;
};

enum class ConfigFormat { Json, Toml };

// Throws ConfigError with the offending line or field on any problem; builds
// every object the experiment needs, so a config that loads will not fail on
// its own contents later.
ExperimentConfig parse_config(std::string_view text, ConfigFormat format, const std::string& origin = "<string>");
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace wgflow
