#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "wgflow/energies.hpp"
#include "wgflow/measures.hpp"
#include "wgflow/rng.hpp"

namespace wgflow {

struct SdeConfig {
  double beta = kInfiniteBeta;
  double dt = 1e-2;
  double t_end = 1.0;
  std::uint64_t seed = 0;
  int n_save = 1;  // keep every n_save-th step (and the last one)
  GradientOptions gradient;
  int max_guard_halvings = 20;

  void validate() const;
  int steps() const;
};

// Snapshots exclude t = 0; the starting state is kept in `initial`.
struct ParticleTrajectory {
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> states;
  Eigen::MatrixXd initial;
  std::uint64_t seed = 0;
  SdeConfig config;
  int guard_events = 0;    // steps split because particles would have crossed
  int guard_failures = 0;  // steps still crossing after max_guard_halvings
  bool sinkhorn_used = false;
  double max_duality_gap = 0.0;
};

// Evaluates -grad E^{(N)}; keeps Sinkhorn duals between calls as warm starts.
class DriftEvaluator {
 public:
  DriftEvaluator(const EnergySpec& spec, GradientOptions opts = {});
  Eigen::MatrixXd operator()(const Eigen::MatrixXd& x);
  double last_duality_gap() const { return last_gap_; }

 private:
  const EnergySpec& spec_;
  GradientOptions opts_;
  Eigen::VectorXd warm_;
  double last_gap_ = 0.0;
};

Eigen::MatrixXd drift_eval(const Eigen::MatrixXd& x, const EnergySpec& spec, const GradientOptions& opts = {});

ParticleTrajectory simulate_sde(const Eigen::MatrixXd& x0, const EnergySpec& spec, const SdeConfig& cfg);

// Draws the initial configuration of one run from its own generator. Stream 0
// is reserved for samplers; the noise uses streams >= 1.
using InitialSampler = std::function<Eigen::MatrixXd(const CounterRng& rng)>;

struct Ensemble {
  std::vector<double> times;
  std::vector<std::uint64_t> seeds;
  std::vector<EmpiricalMeasure> initial;                  // per run
  std::vector<std::vector<EmpiricalMeasure>> snapshots;   // [run][time]
  int guard_events = 0;
  int guard_failures = 0;
  bool sinkhorn_used = false;
  double max_duality_gap = 0.0;
};

// Run r uses seed cfg.seed + r for both its initial draw and its noise.
Ensemble ensemble_empirical(const InitialSampler& sampler, const EnergySpec& spec, const SdeConfig& cfg, int runs,
                            int threads = 0);

// WGFLOW_THREADS if set, otherwise the hardware concurrency
int default_threads();

}  // namespace wgflow
