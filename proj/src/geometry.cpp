#include "wgflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wgflow/errors.hpp"

namespace wgflow {
namespace {

constexpr double kFacetTol = 1e-10;

double scale_of(const Eigen::MatrixXd& v) { return std::max(1.0, v.cwiseAbs().maxCoeff()); }

void add_facet(std::vector<Facet>& facets, Eigen::VectorXd normal, double offset) {
  for (const auto& f : facets)
    if ((f.normal - normal).norm() < 1e-9 && std::abs(f.offset - offset) < 1e-9) return;
  facets.push_back({std::move(normal), offset});
}

// Hyperplanes through n vertices with all other vertices on one side.
// Brute force is fine for n <= 3 and the small vertex lists we handle.
std::vector<Facet> compute_facets(const Eigen::MatrixXd& v) {
  const int n = static_cast<int>(v.cols());
  const int m = static_cast<int>(v.rows());
  const double tol = kFacetTol * scale_of(v);
  std::vector<Facet> facets;
  if (n == 1) {
    facets.push_back({Eigen::VectorXd::Constant(1, 1.0), v.col(0).maxCoeff()});
    facets.push_back({Eigen::VectorXd::Constant(1, -1.0), -v.col(0).minCoeff()});
    return facets;
  }
  auto try_plane = [&](Eigen::VectorXd normal, const Eigen::VectorXd& through) {
    double len = normal.norm();
    if (len < tol) return;
    normal /= len;
    double off = normal.dot(through);
    bool below = true, above = true;
    for (int r = 0; r < m; ++r) {
      double s = normal.dot(v.row(r).transpose()) - off;
      if (s > tol) below = false;
      if (s < -tol) above = false;
    }
    if (below && above) return;  // every vertex on the plane: flat body
    if (below) add_facet(facets, normal, off);
    if (above) add_facet(facets, -normal, -off);
  };
  if (n == 2) {
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) {
        Eigen::Vector2d d = v.row(j).transpose() - v.row(i).transpose();
        try_plane(Eigen::Vector2d(d.y(), -d.x()), v.row(i).transpose());
      }
  } else {
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j)
        for (int k = j + 1; k < m; ++k) {
          Eigen::Vector3d a = v.row(i).transpose();
          Eigen::Vector3d b = v.row(j).transpose();
          Eigen::Vector3d c = v.row(k).transpose();
          try_plane((b - a).cross(c - a), a);
        }
  }
  return facets;
}

// vertices lying on a facet, in the facet's own ordering
std::vector<Eigen::VectorXd> facet_vertices(const Eigen::MatrixXd& v, const Facet& f) {
  const double tol = 1e-9 * scale_of(v);
  std::vector<Eigen::VectorXd> out;
  for (int r = 0; r < v.rows(); ++r) {
    Eigen::VectorXd p = v.row(r).transpose();
    if (std::abs(f.normal.dot(p) - f.offset) > tol) continue;
    bool dup = false;
    for (const auto& q : out) dup = dup || (q - p).norm() < tol;
    if (!dup) out.push_back(p);
  }
  return out;
}

// Volume and barycenter by coning every facet to the origin.
void cone_decomposition(const Eigen::MatrixXd& v, const std::vector<Facet>& facets,
                        double& volume, Eigen::VectorXd& bary) {
  const int n = static_cast<int>(v.cols());
  volume = 0.0;
  bary = Eigen::VectorXd::Zero(n);
  if (n == 1) {
    double lo = v.col(0).minCoeff(), hi = v.col(0).maxCoeff();
    volume = hi - lo;
    bary(0) = 0.5 * (lo + hi);
    return;
  }
  for (const auto& f : facets) {
    auto pts = facet_vertices(v, f);
    if (pts.size() < static_cast<std::size_t>(n)) continue;
    if (n == 2) {
      // the facet is a segment; take its two extreme points
      Eigen::Vector2d dir(-f.normal(1), f.normal(0));
      auto [lo, hi] = std::minmax_element(pts.begin(), pts.end(), [&](const auto& a, const auto& b) {
        return dir.dot(a) < dir.dot(b);
      });
      const Eigen::VectorXd& a = *lo;
      const Eigen::VectorXd& b = *hi;
      double area = 0.5 * std::abs(a(0) * b(1) - a(1) * b(0));
      volume += area;
      bary += area * (a + b) / 3.0;
    } else {
      Eigen::Vector3d c = Eigen::Vector3d::Zero();
      for (const auto& p : pts) c += p;
      c /= static_cast<double>(pts.size());
      Eigen::Vector3d nrm = f.normal;
      Eigen::Vector3d e1 = (Eigen::Vector3d(pts[0]) - c).normalized();
      Eigen::Vector3d e2 = nrm.cross(e1);
      std::sort(pts.begin(), pts.end(), [&](const auto& a, const auto& b) {
        Eigen::Vector3d da = Eigen::Vector3d(a) - c, db = Eigen::Vector3d(b) - c;
        return std::atan2(da.dot(e2), da.dot(e1)) < std::atan2(db.dot(e2), db.dot(e1));
      });
      for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
        Eigen::Vector3d a = pts[0], b = pts[i], d = pts[i + 1];
        double vol = std::abs(a.dot(b.cross(d))) / 6.0;
        volume += vol;
        bary += vol * (a + b + d) / 4.0;
      }
    }
  }
  if (volume <= 0.0) throw DegenerateGeometry("polytope has zero volume");
  bary /= volume;
}

}  // namespace

Polytope::Polytope(Eigen::MatrixXd vertices) : vertices_(std::move(vertices)) {
  const int n = dimension();
  if (vertices_.rows() == 0) throw InvalidArgument("polytope needs at least one vertex");
  if (n < 1 || n > 3) throw InvalidArgument("polytope dimension must be 1, 2 or 3");
  if (!vertices_.allFinite()) throw InvalidArgument("polytope vertices must be finite");
  if (vertices_.rows() <= n) throw DegenerateGeometry("polytope is not full-dimensional");
  facets_ = compute_facets(vertices_);
  if (static_cast<int>(facets_.size()) < n + 1) throw DegenerateGeometry("polytope is not full-dimensional");
  const double tol = kFacetTol * scale_of(vertices_);
  for (const auto& f : facets_)
    if (f.offset <= tol) throw DegenerateGeometry("origin is not in the interior of the polytope");
  cone_decomposition(vertices_, facets_, volume_, barycenter_);
}

Polytope Polytope::interval(double lo, double hi) {
  Eigen::MatrixXd v(2, 1);
  v << lo, hi;
  return Polytope(std::move(v));
}

bool Polytope::contains(const Eigen::VectorXd& x, double tol) const {
  for (const auto& f : facets_)
    if (f.normal.dot(x) > f.offset + tol) return false;
  return true;
}

double Polytope::diameter() const {
  double d = 0.0;
  for (int i = 0; i < vertices_.rows(); ++i)
    for (int j = i + 1; j < vertices_.rows(); ++j) d = std::max(d, (vertices_.row(i) - vertices_.row(j)).norm());
  return d;
}

double Polytope::max_norm() const { return vertices_.rowwise().norm().maxCoeff(); }

double Polytope::lower() const {
  if (dimension() != 1) throw InvalidArgument("lower() needs a 1D polytope");
  return vertices_.col(0).minCoeff();
}

double Polytope::upper() const {
  if (dimension() != 1) throw InvalidArgument("upper() needs a 1D polytope");
  return vertices_.col(0).maxCoeff();
}

Eigen::VectorXd barycenter(const Polytope& body) { return body.barycenter_; }

double support_value(const Polytope& body, const Eigen::VectorXd& x) {
  return (body.vertices() * x).maxCoeff();
}

double support_value(const Polytope& body, double x) {
  return support_value(body, Eigen::VectorXd::Constant(1, x));
}

double r_invariant(const Polytope& body) {
  const Eigen::VectorXd b = barycenter(body);
  if (b.norm() < 1e-10) return 1.0;
  // points (1-s) b on the ray from b through the origin; s = 1 is the origin
  double lo = 1.0, hi = 2.0;
  while (body.contains((1.0 - hi) * b)) {
    hi *= 2.0;
    if (hi > 1e12) throw DegenerateGeometry("ray from the barycenter does not leave the polytope");
  }
  while (hi - lo > 1e-12 * hi) {
    double mid = 0.5 * (lo + hi);
    (body.contains((1.0 - mid) * b) ? lo : hi) = mid;
  }
  const double s = 0.5 * (lo + hi);
  const Eigen::VectorXd q = (1.0 - s) * b;
  const double denom = (q - b).norm();
  if (denom < 1e-14) throw DegenerateGeometry("ill-conditioned ray-boundary intersection");
  return q.norm() / denom;
}

Polytope scale(const Polytope& body, double c) {
  if (!(c > 0.0)) throw InvalidArgument("scale factor must be positive");
  return Polytope(body.vertices() * c);
}

LatticeSample lattice_points(const Polytope& body, int k, std::size_t cap) {
  if (k < 1) throw InvalidArgument("lattice resolution k must be >= 1");
  const int n = body.dimension();
  const auto& v = body.vertices();
  std::vector<long> lo(n), hi(n);
  double box = 1.0;
  for (int d = 0; d < n; ++d) {
    lo[d] = static_cast<long>(std::ceil(k * v.col(d).minCoeff() - 1e-9));
    hi[d] = static_cast<long>(std::floor(k * v.col(d).maxCoeff() + 1e-9));
    box *= static_cast<double>(hi[d] - lo[d] + 1);
  }
  if (box > 100.0 * static_cast<double>(cap) + 1e6)
    throw CapExceeded("lattice bounding box exceeds the configured cap");
  const double tol = 1e-9 * std::max(1.0, body.max_norm());
  std::vector<double> flat;
  std::vector<long> idx(lo);
  Eigen::VectorXd p(n);
  std::size_t count = 0;
  for (;;) {
    for (int d = 0; d < n; ++d) p(d) = static_cast<double>(idx[d]) / k;
    if (body.contains(p, tol)) {
      if (++count > cap) throw CapExceeded("lattice point count exceeds the configured cap");
      for (int d = 0; d < n; ++d) flat.push_back(p(d));
    }
    // odometer with the last coordinate fastest gives lexicographic order
    int d = n - 1;
    while (d >= 0 && idx[d] == hi[d]) idx[d] = lo[d], --d;
    if (d < 0) break;
    ++idx[d];
  }
  LatticeSample out;
  out.resolution = k;
  out.points.resize(static_cast<Eigen::Index>(count), n);
  for (std::size_t r = 0; r < count; ++r)
    for (int d = 0; d < n; ++d) out.points(static_cast<Eigen::Index>(r), d) = flat[r * n + d];
  return out;
}

LatticeSample quantile_points(const Polytope& body, int n) {
  if (body.dimension() != 1) throw InvalidArgument("quantile sample needs a 1D polytope");
  if (n < 1) throw InvalidArgument("sample size must be >= 1");
  const double a = body.lower(), w = body.upper() - body.lower();
  LatticeSample out;
  out.points.resize(n, 1);
  for (int i = 0; i < n; ++i) out.points(i, 0) = a + w * (i + 0.5) / n;
  out.resolution = n / w;
  return out;
}

}  // namespace wgflow
