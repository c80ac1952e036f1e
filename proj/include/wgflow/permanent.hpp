#pragma once

#include <Eigen/Dense>

namespace wgflow {

inline constexpr int kPermanentCap = 14;

// Log-permanent of the matrix with entries exp(log_a(i,j)). Ryser's formula
// with Gray-code updates in long double, after a Sinkhorn prescaling that
// keeps the alternating sum well conditioned.
double log_permanent_exact(const Eigen::MatrixXd& log_a, int cap = kPermanentCap);
// same, for a matrix of positive entries
double log_permanent_of(const Eigen::MatrixXd& a, int cap = kPermanentCap);

// pi(i,j) = a_ij Per(a without row i, column j) / Per(a): the permutation-Gibbs
// marginals. Doubly stochastic.
struct PermanentMarginals {
  Eigen::MatrixXd pi;
  double log_permanent = 0.0;
};
PermanentMarginals permanent_marginals_exact(const Eigen::MatrixXd& log_a, int cap = kPermanentCap);

struct SinkhornOptions {
  int max_iters = 10000;
  double tol = 1e-8;  // L1 error of the column marginals
};

// Log-domain matrix scaling: plan = diag(e^-u) a diag(e^-v) with unit row and
// column sums. The scaling gives Gurvits-type bounds
//   sum u + sum v + sum (1-s) log(1-s) <= log Per(a) <= sum u + sum v.
struct SinkhornResult {
  Eigen::MatrixXd plan;
  Eigen::VectorXd u;
  Eigen::VectorXd v;
  int iterations = 0;
  double marginal_error = 0.0;
  bool converged = false;
  double log_permanent_lower = 0.0;
  double log_permanent_upper = 0.0;
};
SinkhornResult sinkhorn_scale(const Eigen::MatrixXd& log_a, const SinkhornOptions& opts = {},
                              const Eigen::VectorXd* warm_v = nullptr);

}  // namespace wgflow
