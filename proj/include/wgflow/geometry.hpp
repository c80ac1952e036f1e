#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

namespace wgflow {

// outward unit normal, points satisfy normal·x <= offset
struct Facet {
  Eigen::VectorXd normal;
  double offset = 0.0;
};

// Convex body given by its vertices (rows of the matrix), n in {1,2,3}.
// Must contain the origin in its interior; checked on construction.
class Polytope {
 public:
  explicit Polytope(Eigen::MatrixXd vertices);
  static Polytope interval(double lo, double hi);

  int dimension() const { return static_cast<int>(vertices_.cols()); }
  const Eigen::MatrixXd& vertices() const { return vertices_; }
  const std::vector<Facet>& facets() const { return facets_; }

  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
  double volume() const { return volume_; }
  double diameter() const;
  // max |p| over P, a Lipschitz bound for anything whose gradient lies in P
  double max_norm() const;

  // 1D convenience; throws for n > 1
  double lower() const;
  double upper() const;

 private:
  Eigen::MatrixXd vertices_;
  std::vector<Facet> facets_;
  double volume_ = 0.0;
  Eigen::VectorXd barycenter_;

  friend Eigen::VectorXd barycenter(const Polytope& body);
};

Eigen::VectorXd barycenter(const Polytope& body);
double support_value(const Polytope& body, const Eigen::VectorXd& x);
double support_value(const Polytope& body, double x);
double r_invariant(const Polytope& body);
Polytope scale(const Polytope& body, double c);

// A finite point sample p_1..p_N of P. Lattice samples come from
// lattice_points; 1D bodies also admit the midpoint quantile sample of the
// uniform measure, which exists for every N.
struct LatticeSample {
  Eigen::MatrixXd points;  // N x n
  double resolution = 1.0; // k: the energy is (1/k) log Per(e^{k x·p})
  std::size_t count() const { return static_cast<std::size_t>(points.rows()); }
};

LatticeSample lattice_points(const Polytope& body, int k, std::size_t cap = 1'000'000);
LatticeSample quantile_points(const Polytope& body, int n);

}  // namespace wgflow
