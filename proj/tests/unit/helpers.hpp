#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <memory>
#include <random>

#include "wgflow/geometry.hpp"

namespace test {

inline std::shared_ptr<const wgflow::Polytope> interval(double lo, double hi) {
  return std::make_shared<const wgflow::Polytope>(wgflow::Polytope::interval(lo, hi));
}

inline Eigen::VectorXd normals(std::mt19937_64& gen, int n, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = nd(gen);
  return x;
}

inline Eigen::VectorXd sorted_normals(std::mt19937_64& gen, int n, double sd = 1.0) {
  Eigen::VectorXd x = normals(gen, n, sd);
  std::sort(x.data(), x.data() + n);
  return x;
}

// a random triangle with the origin inside
inline wgflow::Polytope random_triangle(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> ang(-0.2, 0.2), rad(0.5, 2.5);
  Eigen::MatrixXd v(3, 2);
  for (int k = 0; k < 3; ++k) {
    const double a = 2.0 * 3.141592653589793 * (k + ang(gen)) / 3.0;
    const double r = rad(gen);
    v.row(k) << r * std::cos(a), r * std::sin(a);
  }
  return wgflow::Polytope(v);
}

}  // namespace test
