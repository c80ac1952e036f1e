#pragma once

#include <Eigen/Dense>
#include <vector>

#include "wgflow/potentials.hpp"

namespace wgflow {

// Points of the ordered cone with cluster masses; equal-mass particles are
// the case masses = 1/N. Merged particles are one entry with summed mass.
struct OrderedParticles {
  Eigen::VectorXd positions;
  Eigen::VectorXd masses;

  static OrderedParticles equal_masses(Eigen::VectorXd positions);
  void validate() const;
  Eigen::Index size() const { return positions.size(); }
  double barycenter() const { return positions.dot(masses); }
  // positions repeated by multiplicity on a grid of n equal atoms, when the
  // masses are multiples of 1/n
  Eigen::VectorXd expand(int n) const;
};

// weighted least-squares projection onto nondecreasing vectors (PAVA)
Eigen::VectorXd isotonic_project(const Eigen::VectorXd& y, const Eigen::VectorXd& weights);
Eigen::VectorXd isotonic_project(const Eigen::VectorXd& y);

// E(mu) = sum_ij m_i m_j w(z_i - z_j) + sum_i m_i V(z_i), self-interaction
// included (kernels finite at 0). Equals E^{(N)}/N for equal masses.
double ordered_energy(const OrderedParticles& x, const PairPotential& pot);
// (1/m_i) dE/dz_i on the closed cone, with one-sided derivatives at ties
Eigen::VectorXd ordered_gradient(const OrderedParticles& x, const PairPotential& pot);

// collapses entries with identical positions into one cluster
OrderedParticles merge_clusters(const OrderedParticles& x);

struct ProxOptions {
  double tol = 1e-13;
  int max_iters = 500;
};
struct ProxResult {
  OrderedParticles state;
  int iterations = 0;
  bool converged = true;
};
// argmin over nondecreasing z of sum m_i (z_i - x_i)^2 / (2 tau) + E(z)
ProxResult prox_step_ordered(const OrderedParticles& x, const PairPotential& pot, double tau,
                             const ProxOptions& opts = {});

struct OrderedTrajectory {
  std::vector<double> times;  // starts at t = 0
  std::vector<OrderedParticles> states;
  std::vector<double> energies;
  bool converged = true;
  int steps = 0;
};

struct StickyConfig {
  double tau = 1e-2;
  double t_end = 1.0;
  int n_save = 1;
  ProxOptions prox;
};
OrderedTrajectory sticky_flow(const OrderedParticles& x0, const PairPotential& pot, const StickyConfig& cfg);

struct RepulsiveConfig {
  double t_end = 1.0;
  double save_dt = 0.1;
  double abs_tol = 1e-12;
  double rel_tol = 1e-12;
  double max_displacement = 0.1;  // per step, as a fraction of the smallest gap
};
// dx_i/dt = -d/dx_i E^{(N)}, E^{(N)} = 1/(N-1) sum_{i != j} w + sum V, for
// kernels blowing up at 0; energies are E^{(N)}.
OrderedTrajectory repulsive_flow(const Eigen::VectorXd& x0, const PairPotential& pot, const RepulsiveConfig& cfg);

}  // namespace wgflow
