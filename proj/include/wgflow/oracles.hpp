#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "wgflow/geometry.hpp"
#include "wgflow/measures.hpp"
#include "wgflow/potentials.hpp"

namespace wgflow {

// values on the symmetric uniform grid x_i = -L + i h, odd node count
struct Grid1D {
  double half_width = 1.0;
  Eigen::VectorXd values;

  static Grid1D zeros(double half_width, int nodes);
  static Grid1D sample(double half_width, int nodes, const std::function<double(double)>& f);
  void validate() const;
  int size() const { return static_cast<int>(values.size()); }
  double spacing() const { return 2.0 * half_width / (size() - 1); }
  double x(int i) const { return -half_width + i * spacing(); }
  Eigen::VectorXd nodes() const;
};

// Viscous Burgers u_t + u u_x = kappa u_xx through the potential
// phi_t = kappa phi_xx + (phi_x)^2 / 2, u = -phi_x, f = e^{phi/(2 kappa)}
// solving the heat equation. u0 is extended by its edge values.
struct ColeHopfResult {
  Grid1D velocity;
  Grid1D potential;
};
ColeHopfResult cole_hopf_solve(const Grid1D& u0, double kappa, double t);

// first x where u crosses `level` (linear interpolation), for front tracking
double crossing_point(const Grid1D& u, double level);

// For the flow of -C(., nu_P) + H/beta on an interval P = [a-, a+], the
// velocity is u = -Y(F) with F the distribution function, Y the quantile of
// nu_P and kappa = 1/beta. These convert between u and the measure.
Grid1D velocity_from_cdf(const Grid1D& cdf, const Polytope& body);
Grid1D cdf_from_velocity(const Grid1D& u, const Polytope& body);

// midpoint quantiles of a distribution function / density given on a grid
QuantileMeasure cdf_to_quantile(const Grid1D& cdf, int m);
QuantileMeasure density_to_quantile(const Grid1D& rho, int m);

// phi'' = e^{-(gamma phi + (1 - gamma) V + s + theta x)} on [-L, L] with
// phi'(±L) = p_±, phi(0) = 0. The constant s carries the normalization; the
// tilt theta (only for gamma = 1) is the obstruction to existence and
// vanishes exactly when the barycenter of P is 0.
struct MaStaticOptions {
  double half_width = 0.0;  // 0: default_half_width
  int nodes = 4001;
  double tol = 1e-10;
  int max_iters = 100;
  int continuation_steps = 10;
};
struct MaStaticResult {
  Grid1D phi;
  Grid1D density;  // phi'' / |P|
  double residual = 0.0;
  double shift = 0.0;
  double tilt = 0.0;
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
  bool boundary_supported = false;  // density not negligible at ±L
};
MaStaticResult ma_static_1d(const Polytope& body, double gamma, const ConfiningPotential& v,
                            const MaStaticOptions& opts = {});
// 40 / min(|p-|, p+) / min(1, beta), for intervals P = [p-, p+]
double default_half_width(const Polytope& body, double beta = 1.0);

// enumeration over S_N, N <= 8
inline constexpr int kBruteCap = 8;
double brute_permanent(const Eigen::MatrixXd& a);
double brute_w2(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);
Eigen::VectorXd finite_diff_grad(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                 double step = 1e-5);

struct SelftestItem {
  std::string name;
  bool passed = false;
  double value = 0.0;
};
std::vector<SelftestItem> oracle_selftest();

}  // namespace wgflow
