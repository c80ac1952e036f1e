#include "wgflow/measures.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <vector>

#include "wgflow/assignment.hpp"
#include "wgflow/errors.hpp"

namespace wgflow {

QuantileMeasure::QuantileMeasure(Eigen::VectorXd nodes) : nodes_(std::move(nodes)) {
  if (nodes_.size() < 1) throw InvalidArgument("quantile measure needs at least one node");
  if (!nodes_.allFinite()) throw InvalidArgument("quantile nodes must be finite");
  for (Eigen::Index i = 0; i + 1 < nodes_.size(); ++i)
    if (nodes_(i + 1) < nodes_(i)) throw InvalidArgument("quantile nodes must be nondecreasing");
}

QuantileMeasure QuantileMeasure::dirac(double a, int m) {
  if (m < 1) throw InvalidArgument("grid size must be >= 1");
  return QuantileMeasure(Eigen::VectorXd::Constant(m, a));
}

QuantileMeasure QuantileMeasure::translated(double c) const {
  return QuantileMeasure((nodes_.array() + c).matrix());
}

QuantileMeasure from_samples(std::span<const double> points, int m) {
  if (points.empty()) throw InvalidArgument("from_samples needs at least one point");
  if (m < 1) throw InvalidArgument("grid size must be >= 1");
  std::vector<double> y(points.begin(), points.end());
  for (double v : y)
    if (!std::isfinite(v)) throw InvalidArgument("samples must be finite");
  std::sort(y.begin(), y.end());
  const long n = static_cast<long>(y.size());
  Eigen::VectorXd nodes(m);
  for (long i = 0; i < m; ++i) {
    // empirical quantile at s=(i+1/2)/M is y[ceil(sN)-1], in integer arithmetic
    long num = (2 * i + 1) * n;
    long idx = (num + 2L * m - 1) / (2L * m) - 1;
    nodes(i) = y[static_cast<std::size_t>(std::clamp(idx, 0L, n - 1))];
  }
  return QuantileMeasure(std::move(nodes));
}

QuantileMeasure uniform_quantile(const Polytope& body, int m) {
  if (body.dimension() != 1) throw InvalidArgument("uniform_quantile needs a 1D polytope");
  if (m < 1) throw InvalidArgument("grid size must be >= 1");
  const double a = body.lower(), w = body.upper() - body.lower();
  Eigen::VectorXd nodes(m);
  for (int i = 0; i < m; ++i) nodes(i) = a + w * (i + 0.5) / m;
  return QuantileMeasure(std::move(nodes));
}

QuantileMeasure normal_quantile(double mean, double sd, int m) {
  if (!(sd > 0.0)) throw InvalidArgument("standard deviation must be positive");
  if (m < 1) throw InvalidArgument("grid size must be >= 1");
  boost::math::normal_distribution<double> law(mean, sd);
  Eigen::VectorXd nodes(m);
  for (int i = 0; i < m; ++i) nodes(i) = boost::math::quantile(law, (i + 0.5) / m);
  return QuantileMeasure(std::move(nodes));
}

namespace {
void require_same_grid(const QuantileMeasure& a, const QuantileMeasure& b) {
  if (a.size() != b.size()) throw InvalidArgument("quantile measures live on different grids");
}
}  // namespace

double wasserstein2_1d(const QuantileMeasure& mu, const QuantileMeasure& nu) {
  require_same_grid(mu, nu);
  return std::sqrt((mu.nodes() - nu.nodes()).squaredNorm() / mu.size());
}

double wasserstein1_1d(const QuantileMeasure& mu, const QuantileMeasure& nu) {
  require_same_grid(mu, nu);
  return (mu.nodes() - nu.nodes()).cwiseAbs().sum() / mu.size();
}

double wasserstein2_empirical(std::span<const double> samples, const QuantileMeasure& mu) {
  if (samples.empty()) throw InvalidArgument("empty sample");
  std::vector<double> y(samples.begin(), samples.end());
  std::sort(y.begin(), y.end());
  const long n = static_cast<long>(y.size()), m = mu.size();
  // walk the merged breakpoints j/N and i/M, measured in units of 1/(N M)
  long i = 0, j = 0, pos = 0;
  double acc = 0.0;
  while (i < m && j < n) {
    long next = std::min((i + 1) * n, (j + 1) * m);
    double d = y[static_cast<std::size_t>(j)] - mu[static_cast<int>(i)];
    acc += d * d * static_cast<double>(next - pos);
    pos = next;
    if (pos == (i + 1) * n) ++i;
    if (pos == (j + 1) * m) ++j;
  }
  return std::sqrt(acc / static_cast<double>(n * m));
}

double wasserstein2_discrete(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, std::size_t cap) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) throw InvalidArgument("point clouds differ in shape");
  if (x.rows() == 0) throw InvalidArgument("empty point cloud");
  if (static_cast<std::size_t>(x.rows()) > cap) throw CapExceeded("assignment size exceeds the configured cap");
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd cost(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) cost(i, j) = (x.row(i) - y.row(j)).squaredNorm();
  return std::sqrt(std::max(0.0, solve_assignment(cost).cost) / static_cast<double>(n));
}

double entropy(const QuantileMeasure& mu) {
  const int m = mu.size();
  if (m < 2) return std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (int i = 0; i + 1 < m; ++i) {
    double gap = mu[i + 1] - mu[i];
    if (!(gap > 0.0)) return std::numeric_limits<double>::infinity();
    acc += std::log(gap * m);
  }
  return -acc / (m - 1);
}

double fisher_information(const QuantileMeasure& mu) {
  const int m = mu.size();
  if (m < 3) return 0.0;
  double acc = 0.0;
  for (int i = 0; i + 2 < m; ++i) {
    double g0 = mu[i + 1] - mu[i], g1 = mu[i + 2] - mu[i + 1];
    if (!(g0 > 0.0 && g1 > 0.0)) return std::numeric_limits<double>::infinity();
    double slope = (std::log(g0) - std::log(g1)) / (0.5 * (mu[i + 2] - mu[i]));
    acc += slope * slope;
  }
  return acc / m;
}

double second_moment(const QuantileMeasure& mu) { return mu.nodes().squaredNorm() / mu.size(); }

double barycenter_1d(const QuantileMeasure& mu) { return mu.nodes().mean(); }

double variance(const QuantileMeasure& mu) {
  return (mu.nodes().array() - barycenter_1d(mu)).square().sum() / mu.size();
}

}  // namespace wgflow
