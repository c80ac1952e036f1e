#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "wgflow/dynamics.hpp"
#include "wgflow/energies.hpp"
#include "wgflow/jko.hpp"
#include "wgflow/measures.hpp"
#include "wgflow/rng.hpp"

namespace wgflow {

// --- propagation of chaos ---------------------------------------------------

// A benchmark ties the N-particle energies to the limit flow mu_t.
struct PocBenchmark {
  std::string name;
  double beta = kInfiniteBeta;
  std::function<EnergySpec(int n)> energy;
  // n iid draws from mu0 (n x 1)
  std::function<Eigen::MatrixXd(const CounterRng& rng, int n)> sampler;
  // the limit measure at time t
  std::function<QuantileMeasure(double t)> reference;
};

struct PocConfig {
  std::vector<int> particle_counts;
  std::vector<double> times;  // checkpoints, multiples of dt
  int runs = 8;
  double dt = 1e-2;
  std::uint64_t seed = 0;
  GradientOptions gradient;
  int threads = 0;

  void validate() const;
};

struct ChaosReport {
  std::string name;
  std::vector<int> particle_counts;
  std::vector<double> times;
  std::vector<std::vector<double>> mean_w2;  // [N index][time index]
  std::vector<std::vector<double>> std_w2;
  int runs = 0;
  double dt = 0.0;
  double beta = kInfiniteBeta;
  std::vector<std::vector<std::uint64_t>> seeds;  // [N index][run]
  bool sinkhorn_used = false;
  double max_duality_gap = 0.0;
  std::vector<std::string> notes;
};

// Deterministic Newtonian benchmarks (beta = inf) are integrated by sticky
// proximal steps, which is the particle solution past collisions.
ChaosReport poc_experiment(const PocBenchmark& bench, const PocConfig& cfg);

// mean W2 nonincreasing in N at the given checkpoint, allowing
// `allowed_inversions` increases each within one pooled standard deviation
bool chaos_trend_holds(const ChaosReport& report, std::size_t time_index, int allowed_inversions = 1);

// reference flow from the JKO scheme, read off at multiples of tau
std::function<QuantileMeasure(double)> jko_reference(const QuantileMeasure& mu0, const GridFreeEnergy& f,
                                                     const JkoConfig& cfg);

// --- Gibbs sampling ---------------------------------------------------------

struct GibbsConfig {
  double step = 0.05;  // MALA step h: proposal x - h grad U + sqrt(2h) xi
  int burn_in = 2000;
  int samples = 20000;
  int thin = 1;
  std::uint64_t seed = 0;
  int blocks = 10;                 // for the divergence monitor
  double divergence_ratio = 3.0;   // last/first block mean of |x|
  double escape_radius = 1e8;

  void validate() const;
};

struct GibbsResult {
  std::vector<Eigen::MatrixXd> samples;  // thinned states after burn-in
  double acceptance = 0.0;
  bool divergence_suspected = false;
  std::string message;
  std::vector<double> block_means;  // mean |x| per block
  double geweke_z = 0.0;
};

using ScalarField = std::function<double(const Eigen::MatrixXd&)>;
using VectorField = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

// log of the Metropolis-Hastings acceptance ratio of the move x -> y for the
// target e^{-U}
double mala_log_acceptance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const ScalarField& u,
                           const VectorField& grad_u, double step);

GibbsResult mala_sample(const ScalarField& u, const VectorField& grad_u, const Eigen::MatrixXd& x0,
                        const GibbsConfig& cfg);
// targets e^{-beta E^{(N)}} dx
GibbsResult mala_gibbs(const EnergySpec& spec, double beta, const Eigen::MatrixXd& x0, const GibbsConfig& cfg);

// Geweke z-score of a scalar chain: first 10% against last 50%, with
// batch-means variances
double geweke_z(const std::vector<double>& chain);

// --- partition functions ----------------------------------------------------

enum class Finiteness { Finite, Infinite, Inconclusive };
const char* to_string(Finiteness f);

struct QuadratureConfig {
  double spacing = 0.1;          // midpoint-rule cell size
  double initial_half_width = 4.0;
  int doublings = 6;             // boxes L0, 2 L0, ..., 2^doublings L0
  double rel_tol = 1e-3;
  long long max_points = 200'000'000;

  void validate() const;
};

struct QuadratureResult {
  std::vector<double> half_widths;
  std::vector<double> log_z;  // per box, nondecreasing
  double log_z_estimate = 0.0;  // with a geometric tail correction when finite
  double free_energy = 0.0;     // -(1/(N beta)) log Z
  double relative_change = 0.0; // between the two largest boxes
  double tail_ratio = 0.0;      // ratio of the last two shell masses
  Finiteness verdict = Finiteness::Inconclusive;
};

// Z = int_{R^N} e^{-beta E(x)} dx for N <= 3 one-dimensional particles
QuadratureResult partition_quadrature(const std::function<double(const Eigen::VectorXd&)>& energy, int n,
                                      double beta, const QuadratureConfig& cfg);
QuadratureResult partition_quadrature(const EnergySpec& spec, int n, double beta, const QuadratureConfig& cfg);

struct ThresholdConfig {
  double lo = 0.0;
  double hi = 1.0;
  double target_width = 0.1;
  int max_bisections = 12;
  double beta = 1.0;
  QuadratureConfig quadrature;
};
struct ThresholdProbe {
  double gamma = 0.0;
  Finiteness verdict = Finiteness::Inconclusive;
  double log_z = 0.0;
};
struct ThresholdResult {
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool inconclusive = false;
  std::vector<ThresholdProbe> probes;
};
// sup{gamma : Z_N finite} for the weighted permanental energy of n particles
// on the midpoint sample of P, by bisection on the finiteness verdict
ThresholdResult gamma_threshold_probe(std::shared_ptr<const Polytope> body, const ConfiningPotential& v, int n,
                                      const ThresholdConfig& cfg);

// --- uniqueness of the stationary limit -------------------------------------

struct MultiStartResult {
  std::vector<StationaryResult> runs;
  double spread = 0.0;  // max pairwise W2 between limits
  bool unique = true;   // spread <= tol
};
MultiStartResult multi_start_stationary(const GridFreeEnergy& f, const JkoConfig& cfg,
                                        const std::vector<QuantileMeasure>& starts, double tol = 1e-3,
                                        double max_time = 200.0);

}  // namespace wgflow
