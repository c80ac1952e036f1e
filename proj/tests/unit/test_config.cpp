#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <string>

#include "wgflow/config.hpp"
#include "wgflow/errors.hpp"
#include "wgflow/report.hpp"

using namespace wgflow;
namespace fs = std::filesystem;

namespace {

std::string error_of(std::string_view text, ConfigFormat format) {
  try {
    parse_config(text, format, "cfg");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("wgflow_unit_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("every shipped config loads") {
  int count = 0;
  for (const auto& entry : fs::directory_iterator(WGFLOW_CONFIG_DIR)) {
    INFO(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path()));
    ++count;
  }
  CHECK(count >= 9);
}

TEST_CASE("TOML and JSON describe the same experiment") {
  const auto a = parse_config(R"(kind = "rp"
output = "out/a"
[rp]
body = [-1.0, 2.0]
)",
                              ConfigFormat::Toml);
  const auto b = parse_config(R"({"kind": "rp", "output": "out/a", "rp": {"body": [-1.0, 2.0]}})", ConfigFormat::Json);
  CHECK(a.kind == ExperimentKind::Rp);
  CHECK(nlohmann::json::parse(a.json) == nlohmann::json::parse(b.json));
}

TEST_CASE("syntax errors carry the line") {
  const std::string toml = error_of("kind = \"rp\"\noutput = \"x\"\n[rp\nbody = [-1, 1]\n", ConfigFormat::Toml);
  CHECK(toml.find("cfg:3") != std::string::npos);
  const std::string json = error_of("{\"kind\": \"rp\",\n \"output\": }", ConfigFormat::Json);
  CHECK(json.find("line 2") != std::string::npos);
}

TEST_CASE("semantic errors name the field") {
  const auto err = [](const std::string& body) {
    return error_of(R"({"kind": "simulate", "output": "o", "seed": 1, "energy": {"type": "external", "potential": {"type": "zero"}},
                        "initial": {"type": "dirac", "at": 0}, "simulate": )" + body + "}",
                    ConfigFormat::Json);
  };
  CHECK(err(R"({"particles": 4, "dt": -1, "t_end": 1})").find("simulate.dt") != std::string::npos);
  CHECK(err(R"({"particles": 0, "dt": 0.1, "t_end": 1})").find("simulate.particles") != std::string::npos);
  CHECK(err(R"({"particles": 4, "dt": 0.1, "t_end": 1, "colour": 3})").find("simulate.colour") != std::string::npos);
  CHECK(error_of(R"({"kind": "bake", "output": "o"})", ConfigFormat::Json).find("kind") != std::string::npos);
  CHECK(error_of(R"({"kind": "rp", "output": "o", "rp": {"body": [1, 2]}})", ConfigFormat::Json).find("rp") !=
        std::string::npos);
  CHECK(error_of(R"({"kind": "rp", "output": "o"})", ConfigFormat::Json).find("missing") != std::string::npos);
  CHECK_THROWS_AS(load_config("/nonexistent/config.toml"), ConfigError);
}

TEST_CASE("format_double round-trips") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(INFINITY) == "inf");
  CHECK(format_double(-INFINITY) == "-inf");
  CHECK(format_double(NAN) == "nan");
  std::mt19937_64 gen(71);
  std::uniform_int_distribution<std::uint64_t> bits;
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t b = bits(gen);
    double v;
    std::memcpy(&v, &b, sizeof v);
    if (!std::isfinite(v)) continue;
    const std::string s = format_double(v);
    CHECK(s.size() <= 24);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
}

TEST_CASE("an rp run writes the manifest and report") {
  auto cfg = parse_config(R"({"kind": "rp", "output": "unused", "rp": {"body": [-1, 2]}})", ConfigFormat::Json);
  cfg.output = scratch("rp");
  const auto res = run_experiment(cfg, {1, true});
  CHECK(res.status == 0);
  std::ifstream in(cfg.output / "report.json");
  const auto report = nlohmann::json::parse(in);
  CHECK(report["r_invariant"].get<double>() == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  std::ifstream mi(cfg.output / "manifest.json");
  const auto manifest = nlohmann::json::parse(mi);
  CHECK(manifest["kind"] == "rp");
  CHECK(manifest["status"] == 0);
  for (const auto& f : fs::recursive_directory_iterator(cfg.output))
    CHECK(f.path().extension() != ".partial");
  fs::remove_all(cfg.output);
}

TEST_CASE("a failing static solve is flagged") {
  auto cfg = parse_config(R"({"kind": "static-solve", "output": "unused",
                              "static": {"body": [-1, 2], "gamma": 1, "nodes": 801}})",
                          ConfigFormat::Json);
  cfg.output = scratch("static");
  const auto res = run_experiment(cfg, {1, true});
  CHECK(res.status == 1);
  CHECK_FALSE(res.flags.empty());
  fs::remove_all(cfg.output);
}
