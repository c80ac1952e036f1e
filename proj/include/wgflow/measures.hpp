#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>

#include "wgflow/geometry.hpp"

namespace wgflow {

// 1D probability measure stored as its quantile function at the midpoints
// s_i = (i - 1/2)/M. Nodes are nondecreasing and finite.
class QuantileMeasure {
 public:
  explicit QuantileMeasure(Eigen::VectorXd nodes);
  static QuantileMeasure dirac(double a, int m);

  int size() const { return static_cast<int>(nodes_.size()); }
  const Eigen::VectorXd& nodes() const { return nodes_; }
  double operator[](int i) const { return nodes_(i); }
  QuantileMeasure translated(double c) const;

 private:
  Eigen::VectorXd nodes_;
};

// equal-weight point cloud, one point per row
struct EmpiricalMeasure {
  Eigen::MatrixXd points;
  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
};

QuantileMeasure from_samples(std::span<const double> points, int m);
QuantileMeasure uniform_quantile(const Polytope& body, int m);
QuantileMeasure normal_quantile(double mean, double sd, int m);

double wasserstein2_1d(const QuantileMeasure& mu, const QuantileMeasure& nu);
double wasserstein1_1d(const QuantileMeasure& mu, const QuantileMeasure& nu);
// exact W2 between the empirical measure of `samples` and a quantile measure
// read as a step quantile function (no resampling of either side)
double wasserstein2_empirical(std::span<const double> samples, const QuantileMeasure& mu);
double wasserstein2_discrete(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, std::size_t cap = 2000);

double entropy(const QuantileMeasure& mu);
double fisher_information(const QuantileMeasure& mu);
double second_moment(const QuantileMeasure& mu);
double barycenter_1d(const QuantileMeasure& mu);
double variance(const QuantileMeasure& mu);

}  // namespace wgflow
