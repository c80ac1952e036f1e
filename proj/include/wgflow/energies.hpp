#pragma once

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <string>
#include <variant>

#include "wgflow/assignment.hpp"
#include "wgflow/geometry.hpp"
#include "wgflow/measures.hpp"
#include "wgflow/permanent.hpp"
#include "wgflow/potentials.hpp"

namespace wgflow {

// E^{(N)}(x) = (1/k) log Per(e^{k x_i·p_j}); body is the P whose uniform
// measure is the large-N limit of the point sample.
struct Permanental {
  std::shared_ptr<const Polytope> body;
  LatticeSample sample;
};
struct Tropical {
  std::shared_ptr<const Polytope> body;
  LatticeSample sample;
};
// gamma * permanental + (1 - gamma) * sum_i V(x_i)
struct WeightedPermanental {
  std::shared_ptr<const Polytope> body;
  LatticeSample sample;
  double gamma = 1.0;
  ConfiningPotential v;
};

enum class PairNormalization {
  ExcludeDiagonal,  // 1/(N-1) sum_{i != j} w + sum_i V
  IncludeDiagonal,  // 1/N sum_{i,j} w + sum_i V, for kernels finite at 0
};
struct PairInteraction {
  PairPotential potential;
  PairNormalization normalization = PairNormalization::ExcludeDiagonal;
};
// E_±^{(N)} = ±(1/N) sum_{i,j} |x_i - x_j|
struct Newtonian1D {
  int sign = 1;
};
// sum_i V(x_i); V = 0 gives pure diffusion
struct External {
  ConfiningPotential v;
};

using EnergyKind = std::variant<Permanental, Tropical, WeightedPermanental, PairInteraction, Newtonian1D, External>;

struct EnergySpec {
  EnergyKind kind;
  double lambda_bound = 0.0;
  std::optional<double> lipschitz_bound;

  // fills lambda_bound and lipschitz_bound from the kind
  static EnergySpec make(EnergyKind kind);
  std::string name() const;
  int dimension() const;
  // number of particles the kind is tied to (0 if any N works)
  std::size_t required_particles() const;
};

// --- microscopic energies ---------------------------------------------------

// log-matrix k x_i·p_j of the permanental Gibbs kernel
Eigen::MatrixXd permanental_kernel(const Eigen::MatrixXd& x, const LatticeSample& sample);
double permanental_energy(const Eigen::MatrixXd& x, const LatticeSample& sample, int cap = kPermanentCap);

enum class GradientMethod { Exact, Sinkhorn };
struct GradientOptions {
  GradientMethod method = GradientMethod::Exact;
  SinkhornOptions sinkhorn;
  int cap = kPermanentCap;
};
struct PermanentalGradient {
  Eigen::MatrixXd gradient;   // N x n, row i = sum_j pi_ij p_j
  Eigen::MatrixXd marginals;  // pi
  bool exact = true;
  int sinkhorn_iterations = 0;
  double marginal_error = 0.0;
  double duality_gap = 0.0;  // Gurvits bound gap on log Per, divided by k
  Eigen::VectorXd dual;      // Sinkhorn column scaling, for warm starts
};
PermanentalGradient permanental_gradient(const Eigen::MatrixXd& x, const LatticeSample& sample,
                                         const GradientOptions& opts = {}, const Eigen::VectorXd* warm = nullptr);

// Gurvits-type bracket of (1/k) log Per from a Sinkhorn scaling, for N beyond
// the exact cap
struct EnergyBounds {
  double lower = 0.0;
  double upper = 0.0;
  bool converged = false;
};
EnergyBounds permanental_energy_bounds(const Eigen::MatrixXd& x, const LatticeSample& sample,
                                       const SinkhornOptions& opts = {});

struct TropicalResult {
  double value = 0.0;
  std::vector<int> assignment;  // sigma(i)
};
TropicalResult tropical_energy(const Eigen::MatrixXd& x, const LatticeSample& sample);

double pair_energy(const Eigen::VectorXd& x, const PairPotential& pot,
                   PairNormalization norm = PairNormalization::ExcludeDiagonal);
Eigen::VectorXd pair_gradient(const Eigen::VectorXd& x, const PairPotential& pot,
                              PairNormalization norm = PairNormalization::ExcludeDiagonal);

// E_±^{(N)} by the double sum (any order of x)
double newtonian_energy(const Eigen::VectorXd& x, int sign);
// ±(4/N^2) sum x_i p_i for sorted x, p_i = i - (N+1)/2; equals E_±^{(N)}/N
double newtonian_closed_form(const Eigen::VectorXd& sorted_x, int sign);

double microscopic_energy(const Eigen::MatrixXd& x, const EnergySpec& spec, int cap = kPermanentCap);

// --- macroscopic energies on quantile grids ---------------------------------

// -C(mu, nu_P) = (1/M) sum X_i Y_i with Y the uniform quantile of P
double ot_energy_1d(const QuantileMeasure& mu, const Polytope& body);
// c_P = (1/2) ∫ p^2 dnu_P on the same grid
double ot_constant(const Polytope& body, int m);
double macroscopic_pair_energy(const QuantileMeasure& mu, const PairPotential& pot);
double potential_energy(const QuantileMeasure& mu, const ConfiningPotential& v);
double macroscopic_newtonian(const QuantileMeasure& mu, int sign);
// E(mu) for 1D kinds
double macroscopic_energy(const QuantileMeasure& mu, const EnergySpec& spec);

inline constexpr double kInfiniteBeta = std::numeric_limits<double>::infinity();
// E(mu) + H(mu)/beta; beta = inf gives E(mu)
double free_energy(const QuantileMeasure& mu, const EnergySpec& spec, double beta);
// -gamma C(mu, nu_P) + (1 - gamma) ∫ V dmu + H(mu)
double weighted_free_energy(const QuantileMeasure& mu, const Polytope& body, double gamma,
                            const ConfiningPotential& v);

}  // namespace wgflow
