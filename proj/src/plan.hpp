#pragma once

// Typed experiment plans built from a configuration document. Shared by the
// config validator and the runner so both see exactly the same objects.

#include <functional>
#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "wgflow/chaos.hpp"
#include "wgflow/dynamics.hpp"
#include "wgflow/energies.hpp"
#include "wgflow/jko.hpp"
#include "wgflow/oracles.hpp"
#include "wgflow/singular1d.hpp"

namespace wgflow::plan {

using json = nlohmann::json;

// a JSON node with its dotted path, for diagnostics
class Node {
 public:
  Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

  const json& raw() const { return *j_; }
  const std::string& path() const { return path_; }
  std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) const;
  Node at(const std::string& key) const;
  double number(const std::string& key) const;
  double number(const std::string& key, double def) const;
  int integer(const std::string& key) const;
  int integer(const std::string& key, int def) const;
  std::string str(const std::string& key) const;
  std::string str(const std::string& key, const std::string& def) const;
  bool boolean(const std::string& key, bool def) const;
  std::vector<double> numbers(const std::string& key) const;
  std::vector<int> integers(const std::string& key) const;
  // a positive number or the string "inf"
  double beta(const std::string& key, double def) const;
  void allow_only(std::initializer_list<const char*> keys) const;

  [[noreturn]] void fail(const std::string& what) const;
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;

 private:
  const json* j_;
  std::string path_;
};

// EnergySpec for N particles (permanental kinds depend on N through the sample)
struct EnergyFactory {
  std::function<EnergySpec(int n)> make;
  std::optional<int> fixed_particles;  // lattice samples fix N
  std::shared_ptr<const Polytope> body;
  bool zero_external = false;  // pure diffusion
};

struct InitialLaw {
  std::string type;  // normal, uniform, dirac, points
  double mean = 0.0, sd = 1.0, lo = -1.0, hi = 1.0, at = 0.0;
  std::vector<double> points;
  Eigen::MatrixXd draw(const CounterRng& rng, int n, int dim) const;
  QuantileMeasure quantiles(int m) const;
};

struct SimulatePlan {
  EnergyFactory energy;
  InitialLaw initial;
  int particles = 0;
  int runs = 1;
  SdeConfig sde;
};
struct JkoPlan {
  EnergyFactory energy;
  InitialLaw initial;
  double beta = kInfiniteBeta;
  JkoConfig jko;
  int snapshot_every = 10;
  bool evi = true;
};
struct StaticPlan {
  std::shared_ptr<const Polytope> body;
  double gamma = 1.0;
  ConfiningPotential potential;
  MaStaticOptions options;
};
struct StickyPlan {
  OrderedParticles initial;
  PairPotential potential{AbsKernel{1}};
  StickyConfig sticky;
};
struct RepulsivePlan {
  Eigen::VectorXd initial;
  PairPotential potential{LogKernel{1.0}};
  RepulsiveConfig repulsive;
};
struct PocPlan {
  EnergyFactory energy;
  InitialLaw initial;
  double beta = kInfiniteBeta;
  PocConfig poc;
  int reference_m = 400;
  double reference_tau = 1e-3;
  std::uint64_t seed = 0;
};
struct GibbsPlan {
  EnergyFactory energy;
  int particles = 1;
  double beta = 1.0;
  GibbsConfig gibbs;
  Eigen::MatrixXd x0;
};
struct ThresholdPlan {
  std::shared_ptr<const Polytope> body;
  ConfiningPotential potential;
  int particles = 2;
  ThresholdConfig threshold;
};
struct RpPlan {
  std::shared_ptr<const Polytope> body;
};

using Plan = std::variant<SimulatePlan, JkoPlan, StaticPlan, StickyPlan, RepulsivePlan, PocPlan, GibbsPlan,
                          ThresholdPlan, RpPlan>;

// builds the plan for the document's kind; throws ConfigError
Plan build(const json& root);

}  // namespace wgflow::plan
