#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "wgflow/energies.hpp"
#include "wgflow/measures.hpp"

namespace wgflow {

// F = E + H/beta restricted to quantile grids of size M, as a function of the
// node vector X. Every 1D energy kind is a sum of a linear term, a separable
// potential term, a pair term and the entropy.
class GridFreeEnergy {
 public:
  GridFreeEnergy(const EnergySpec& spec, double beta, int m);

  int grid_size() const { return m_; }
  double beta() const { return beta_; }
  double lambda() const { return lambda_; }
  bool has_pair_term() const { return pair_.has_value(); }

  // +inf off the domain (nodes not strictly increasing when beta < inf)
  double value(const Eigen::VectorXd& x) const;
  double value(const QuantileMeasure& mu) const { return value(mu.nodes()); }
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  // Hessian on nondecreasing X: tridiagonal (diag, off) plus a dense pair part
  void hessian(const Eigen::VectorXd& x, Eigen::VectorXd& diag, Eigen::VectorXd& off,
               Eigen::MatrixXd* dense) const;

 private:
  int m_;
  double beta_;
  double lambda_;
  Eigen::VectorXd linear_;  // coefficients of X_i
  double potential_weight_ = 0.0;
  ConfiningPotential v_;
  std::optional<PairPotential> pair_;
  bool pair_self_term_ = false;
};

struct JkoConfig {
  double tau = 1e-2;
  int m = 200;
  double t_end = 1.0;
  double inner_tol = 1e-9;
  int inner_max_iters = 200;

  void validate() const;
  int steps() const;
};

struct JkoStep {
  QuantileMeasure measure;
  double objective = 0.0;
  double free_energy = 0.0;
  int iterations = 0;
  double residual = 0.0;  // sup-norm of the L^2(ds) gradient, velocity units
  bool converged = true;
};

// argmin over increasing X of |X - X_prev|^2 / (2 tau M) + F(X)
JkoStep jko_step(const QuantileMeasure& prev, const GridFreeEnergy& f, double tau, double inner_tol = 1e-9,
                 int inner_max_iters = 200);

struct JkoRecord {
  double time = 0.0;
  QuantileMeasure measure;
  double objective = 0.0;
  double free_energy = 0.0;
  int iterations = 0;
  double movement = 0.0;  // W2 distance to the previous record
};

// records start at t = 0
struct JkoTrajectory {
  std::vector<JkoRecord> steps;
  bool converged = true;
};

JkoTrajectory jko_flow(const QuantileMeasure& mu0, const GridFreeEnergy& f, const JkoConfig& cfg);

// worst signed violation of the discrete EVI over consecutive records and probes
double evi_residual(const JkoTrajectory& traj, const GridFreeEnergy& f, const std::vector<QuantileMeasure>& probes);
// initial, final, nu_P when the energy has a body, and three Gaussians around
// the final barycenter
std::vector<QuantileMeasure> default_probes(const JkoTrajectory& traj, const EnergySpec& spec);

struct StationaryResult {
  QuantileMeasure measure;
  double time = 0.0;
  int steps = 0;
  double last_movement = 0.0;
  bool converged = false;
};
// runs the flow until the W2 movement per step is <= tol * tau, or max_time
StationaryResult stationary_limit(const GridFreeEnergy& f, const JkoConfig& cfg, const QuantileMeasure& mu0,
                                  double tol = 1e-8, double max_time = 200.0);

}  // namespace wgflow
