#include "wgflow/oracles.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "wgflow/errors.hpp"
#include "wgflow/permanent.hpp"

namespace wgflow {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double logsumexp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// log(erfc(v) / 2), stable for large positive v
double log_half_erfc(double v) {
  if (v < 26.0) return std::log(0.5 * std::erfc(v));
  const double v2 = v * v;
  const double series = 1.0 - 1.0 / (2.0 * v2) + 3.0 / (4.0 * v2 * v2) - 15.0 / (8.0 * v2 * v2 * v2);
  return -v2 - std::log(v * std::sqrt(std::numbers::pi)) + std::log(series) - std::log(2.0);
}

// log of int_0^inf N(z; mu, sigma^2) e^{b z} dz
double log_tail_integral(double mu, double sigma, double b) {
  return b * mu + 0.5 * b * b * sigma * sigma + log_half_erfc(-(mu + b * sigma * sigma) / (sigma * std::sqrt(2.0)));
}

}  // namespace

Grid1D Grid1D::zeros(double half_width, int nodes) {
  Grid1D g{half_width, Eigen::VectorXd::Zero(nodes)};
  g.validate();
  return g;
}

Grid1D Grid1D::sample(double half_width, int nodes, const std::function<double(double)>& f) {
  Grid1D g = zeros(half_width, nodes);
  for (int i = 0; i < nodes; ++i) g.values(i) = f(g.x(i));
  return g;
}

void Grid1D::validate() const {
  if (!(half_width > 0.0) || !std::isfinite(half_width)) throw InvalidArgument("grid half width must be positive");
  if (size() < 3 || size() % 2 == 0) throw InvalidArgument("grid needs an odd number of nodes >= 3");
}

Eigen::VectorXd Grid1D::nodes() const {
  return Eigen::VectorXd::LinSpaced(size(), -half_width, half_width);
}

ColeHopfResult cole_hopf_solve(const Grid1D& u0, double kappa, double t) {
  u0.validate();
  if (!(kappa > 0.0)) throw InvalidArgument("viscosity must be positive");
  if (!(t >= 0.0)) throw InvalidArgument("time must be nonnegative");
  if (!u0.values.allFinite()) throw InvalidArgument("initial velocity must be finite");
  const int n = u0.size();
  const int c = n / 2;
  const double h = u0.spacing();

  // phi0 = -int_0^x u0 by the trapezoid rule
  Grid1D phi0 = Grid1D::zeros(u0.half_width, n);
  for (int i = c + 1; i < n; ++i) phi0.values(i) = phi0.values(i - 1) - 0.5 * h * (u0.values(i) + u0.values(i - 1));
  for (int i = c - 1; i >= 0; --i) phi0.values(i) = phi0.values(i + 1) + 0.5 * h * (u0.values(i) + u0.values(i + 1));
  if (t == 0.0) return {u0, phi0};

  const double sigma = std::sqrt(2.0 * kappa * t);
  if (sigma < 0.5 * h) throw InvalidArgument("heat kernel narrower than the grid; refine the grid or increase t");
  const double twok = 2.0 * kappa;
  const Eigen::VectorXd logf0 = phi0.values / twok;
  const double reach = 8.0 * sigma + u0.values.cwiseAbs().maxCoeff() * t;
  const int window = static_cast<int>(std::ceil(reach / h));
  const double log_norm = std::log(h / (sigma * std::sqrt(2.0 * std::numbers::pi)));
  const double ul = u0.values(0), ur = u0.values(n - 1);

  Eigen::VectorXd logf(n);
  for (int i = 0; i < n; ++i) {
    const double x = u0.x(i);
    const int lo = std::max(0, i - window), hi = std::min(n - 1, i + window);
    double m = -kInf;
    for (int j = lo; j <= hi; ++j) {
      const double d = x - u0.x(j);
      m = std::max(m, logf0(j) - d * d / (2.0 * sigma * sigma));
    }
    double s = 0.0;
    for (int j = lo; j <= hi; ++j) {
      const double d = x - u0.x(j);
      const double wt = (j == 0 || j == n - 1) ? 0.5 : 1.0;
      s += wt * std::exp(logf0(j) - d * d / (2.0 * sigma * sigma) - m);
    }
    // Euler-Maclaurin end corrections where the window is cut by the grid ends
    auto slope = [&](int j, double dlogf0) {
      const double d = x - u0.x(j);
      return std::exp(logf0(j) - d * d / (2.0 * sigma * sigma) - m) * (dlogf0 + d / (sigma * sigma));
    };
    if (hi == n - 1) s -= h / 12.0 * slope(n - 1, -ur / twok);
    if (lo == 0) s += h / 12.0 * slope(0, -ul / twok);
    double acc = m + std::log(s) + log_norm;
    // affine extension of phi0 beyond the grid, integrated exactly
    acc = logsumexp(acc, logf0(n - 1) + log_tail_integral(x - u0.half_width, sigma, -ur / twok));
    acc = logsumexp(acc, logf0(0) + log_tail_integral(-(x + u0.half_width), sigma, ul / twok));
    logf(i) = acc;
  }

  ColeHopfResult out{Grid1D::zeros(u0.half_width, n), Grid1D::zeros(u0.half_width, n)};
  out.potential.values = twok * logf;
  const Eigen::VectorXd& phi = out.potential.values;
  for (int i = 1; i + 1 < n; ++i) out.velocity.values(i) = -(phi(i + 1) - phi(i - 1)) / (2.0 * h);
  out.velocity.values(0) = -(-3.0 * phi(0) + 4.0 * phi(1) - phi(2)) / (2.0 * h);
  out.velocity.values(n - 1) = -(3.0 * phi(n - 1) - 4.0 * phi(n - 2) + phi(n - 3)) / (2.0 * h);
  // keep the potential normalized like the input
  out.potential.values.array() -= phi(c);
  return out;
}

double crossing_point(const Grid1D& u, double level) {
  for (int i = 0; i + 1 < u.size(); ++i) {
    const double a = u.values(i) - level, b = u.values(i + 1) - level;
    if (a == 0.0) return u.x(i);
    if ((a < 0.0) != (b < 0.0) || b == 0.0) return u.x(i) + u.spacing() * a / (a - b);
  }
  throw InvalidArgument("profile does not cross the requested level");
}

Grid1D velocity_from_cdf(const Grid1D& cdf, const Polytope& body) {
  const double lo = body.lower(), w = body.upper() - body.lower();
  Grid1D u = cdf;
  u.values = -(lo + w * cdf.values.array()).matrix();
  return u;
}

Grid1D cdf_from_velocity(const Grid1D& u, const Polytope& body) {
  const double lo = body.lower(), w = body.upper() - body.lower();
  Grid1D f = u;
  f.values = ((-u.values.array() - lo) / w).cwiseMax(0.0).cwiseMin(1.0).matrix();
  return f;
}

QuantileMeasure cdf_to_quantile(const Grid1D& cdf, int m) {
  cdf.validate();
  if (m < 1) throw InvalidArgument("quantile grid needs m >= 1");
  const int n = cdf.size();
  std::vector<double> f(n);
  double run = -kInf;
  for (int i = 0; i < n; ++i) f[i] = run = std::max(run, cdf.values(i));
  const double f0 = f.front(), f1 = f.back();
  if (!(f1 > f0)) throw InvalidArgument("distribution function is constant on the grid");
  for (double& v : f) v = (v - f0) / (f1 - f0);
  Eigen::VectorXd q(m);
  for (int j = 0; j < m; ++j) {
    const double s = (j + 0.5) / m;
    auto it = std::upper_bound(f.begin(), f.end(), s);
    const int i = static_cast<int>(it - f.begin());  // f[i-1] <= s < f[i]
    q(j) = cdf.x(i - 1) + cdf.spacing() * (s - f[i - 1]) / (f[i] - f[i - 1]);
  }
  return QuantileMeasure(q);
}

QuantileMeasure density_to_quantile(const Grid1D& rho, int m) {
  Grid1D cdf = Grid1D::zeros(rho.half_width, rho.size());
  const double h = rho.spacing();
  for (int i = 1; i < rho.size(); ++i)
    cdf.values(i) = cdf.values(i - 1) + 0.5 * h * (std::max(rho.values(i), 0.0) + std::max(rho.values(i - 1), 0.0));
  return cdf_to_quantile(cdf, m);
}

double default_half_width(const Polytope& body, double beta) {
  // the density decays like e^{-min(|p-|, p+) |x|}
  return 40.0 / std::min(-body.lower(), body.upper()) / std::min(1.0, beta);
}

MaStaticResult ma_static_1d(const Polytope& body, double gamma, const ConfiningPotential& v,
                            const MaStaticOptions& opts) {
  if (body.dimension() != 1) throw InvalidArgument("static solver is one-dimensional");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidArgument("gamma must lie in [0, 1]");
  if (gamma < 1.0 && v.is_zero()) throw InvalidArgument("gamma < 1 needs a confining potential");
  if (opts.continuation_steps < 1 || opts.max_iters < 1) throw InvalidArgument("iteration counts must be >= 1");
  const double lw = opts.half_width > 0.0 ? opts.half_width : default_half_width(body);
  Grid1D grid = Grid1D::zeros(lw, opts.nodes);
  const int n = grid.size(), c = n / 2;
  const double h = grid.spacing(), pl = body.lower(), pu = body.upper(), width = pu - pl;
  const bool tilted = gamma == 1.0;
  const int dim = n + 1 + (tilted ? 1 : 0);
  const Eigen::VectorXd xs = grid.nodes();
  Eigen::VectorXd vv(n);
  for (int i = 0; i < n; ++i) vv(i) = v.is_zero() ? 0.0 : v.value(xs(i));
  Eigen::VectorXd tw = Eigen::VectorXd::Constant(n, h);
  tw(0) = tw(n - 1) = 0.5 * h;

  // unknowns: phi_0..phi_{n-1}, s, theta
  Eigen::VectorXd z = Eigen::VectorXd::Zero(dim);
  {
    const double mid = 0.5 * (pl + pu);
    for (int i = 0; i < n; ++i) z(i) = mid * xs(i) + 0.5 * width * std::log(std::cosh(xs(i)));
    z.head(n).array() -= z(c);
  }

  auto psi = [&](const Eigen::VectorXd& u, double g) -> Eigen::VectorXd {
    Eigen::VectorXd p = g * u.head(n) + (1.0 - g) * vv;
    p.array() += u(n);
    if (tilted) p += u(n + 1) * xs;
    return p;
  };
  auto residual = [&](const Eigen::VectorXd& u, double g) -> Eigen::VectorXd {
    Eigen::VectorXd r(dim);
    const Eigen::VectorXd e = (-psi(u, g)).array().exp().matrix();
    const double h2 = h * h;
    r(0) = (2.0 * u(1) - 2.0 * u(0) - 2.0 * h * pl) / h2 - e(0);
    for (int i = 1; i + 1 < n; ++i) r(i) = (u(i + 1) - 2.0 * u(i) + u(i - 1)) / h2 - e(i);
    r(n - 1) = (2.0 * u(n - 2) - 2.0 * u(n - 1) + 2.0 * h * pu) / h2 - e(n - 1);
    r(n) = u(c);
    if (tilted) r(n + 1) = tw.cwiseProduct(xs).dot(e);
    return r;
  };
  auto jacobian = [&](const Eigen::VectorXd& u, double g) {
    const Eigen::VectorXd e = (-psi(u, g)).array().exp().matrix();
    const double h2 = h * h;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(6 * n);
    for (int i = 0; i < n; ++i) {
      if (i == 0) {
        t.emplace_back(0, 0, -2.0 / h2);
        t.emplace_back(0, 1, 2.0 / h2);
      } else if (i == n - 1) {
        t.emplace_back(i, i, -2.0 / h2);
        t.emplace_back(i, i - 1, 2.0 / h2);
      } else {
        t.emplace_back(i, i - 1, 1.0 / h2);
        t.emplace_back(i, i, -2.0 / h2);
        t.emplace_back(i, i + 1, 1.0 / h2);
      }
      if (g != 0.0) t.emplace_back(i, i, g * e(i));
      t.emplace_back(i, n, e(i));
      if (tilted) t.emplace_back(i, n + 1, xs(i) * e(i));
    }
    t.emplace_back(n, c, 1.0);
    if (tilted) {
      double ds = 0.0, dt = 0.0;
      for (int i = 0; i < n; ++i) {
        const double wxe = tw(i) * xs(i) * e(i);
        t.emplace_back(n + 1, i, -g * wxe);
        ds -= wxe;
        dt -= wxe * xs(i);
      }
      t.emplace_back(n + 1, n, ds);
      t.emplace_back(n + 1, n + 1, dt);
    }
    Eigen::SparseMatrix<double> jac(dim, dim);
    jac.setFromTriplets(t.begin(), t.end());
    return jac;
  };

  // s from the mass balance at the starting point
  {
    const Eigen::VectorXd p0 = psi(z, 0.0);
    z(n) = std::log(tw.dot((-p0).array().exp().matrix()) / width);
  }

  MaStaticResult res;
  auto newton = [&](double g) {
    Eigen::VectorXd r = residual(z, g);
    double norm = r.head(n).cwiseAbs().maxCoeff();
    // the second difference of phi cannot be resolved below its rounding floor
    auto floor = [&] { return std::max(opts.tol, 16.0 * std::numeric_limits<double>::epsilon() * z.head(n).cwiseAbs().maxCoeff() / (h * h)); };
    for (int it = 0; it < opts.max_iters; ++it) {
      const double tol = floor();
      if (norm <= tol && std::abs(r(n)) <= tol && (!tilted || std::abs(r(n + 1)) <= tol)) return true;
      ++res.iterations;
      Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
      lu.compute(jacobian(z, g));
      if (lu.info() != Eigen::Success) return false;
      Eigen::VectorXd dz = lu.solve(-r);
      if (lu.info() != Eigen::Success || !dz.allFinite()) return false;
      const double merit = r.squaredNorm();
      double alpha = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
        Eigen::VectorXd trial = z + alpha * dz;
        Eigen::VectorXd rt = residual(trial, g);
        if (rt.allFinite() && rt.squaredNorm() < merit) {
          z = std::move(trial);
          r = std::move(rt);
          accepted = true;
          break;
        }
      }
      if (!accepted) return false;
      norm = r.head(n).cwiseAbs().maxCoeff();
    }
    return norm <= floor();
  };

  bool ok = true;
  double g = 0.0;
  double step = gamma / opts.continuation_steps;
  ok = newton(0.0);
  while (ok && g < gamma) {
    const double next = std::min(gamma, g + step);
    const Eigen::VectorXd saved = z;
    if (newton(next)) {
      g = next;
    } else {
      z = saved;
      step *= 0.5;
      if (step < 1e-6) ok = false;
    }
  }

  res.converged = ok;
  res.phi = grid;
  res.phi.values = z.head(n);
  res.shift = z(n);
  res.tilt = tilted ? z(n + 1) : 0.0;
  res.density = grid;
  res.density.values = (-psi(z, gamma)).array().exp().matrix() / width;
  res.residual = residual(z, gamma).head(n).cwiseAbs().maxCoeff();
  const double peak = res.density.values.maxCoeff();
  res.boundary_supported = std::max(res.density.values(0), res.density.values(n - 1)) > 1e-6 * peak;
  res.diverged = !ok || std::abs(res.tilt) > 1e-6 * std::max(1.0, width) || (tilted && res.boundary_supported);
  return res;
}

double brute_permanent(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw InvalidArgument("permanent needs a square matrix");
  if (a.rows() > kBruteCap) throw CapExceeded("brute-force permanent is capped at N = 8");
  const int n = static_cast<int>(a.rows());
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  double sum = 0.0;
  do {
    double prod = 1.0;
    for (int i = 0; i < n; ++i) prod *= a(i, p[i]);
    sum += prod;
  } while (std::next_permutation(p.begin(), p.end()));
  return sum;
}

double brute_w2(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) throw InvalidArgument("point sets must have equal shapes");
  if (x.rows() > kBruteCap) throw CapExceeded("brute-force transport is capped at N = 8");
  const int n = static_cast<int>(x.rows());
  if (n == 0) return 0.0;
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  double best = kInf;
  do {
    double cost = 0.0;
    for (int i = 0; i < n; ++i) cost += (x.row(i) - y.row(p[i])).squaredNorm();
    best = std::min(best, cost);
  } while (std::next_permutation(p.begin(), p.end()));
  return std::sqrt(best / n);
}

Eigen::VectorXd finite_diff_grad(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                 double step) {
  if (!(step > 0.0)) throw InvalidArgument("finite-difference step must be positive");
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd y = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    y(i) = x(i) + step;
    const double fp = f(y);
    y(i) = x(i) - step;
    const double fm = f(y);
    y(i) = x(i);
    g(i) = (fp - fm) / (2.0 * step);
  }
  return g;
}

std::vector<SelftestItem> oracle_selftest() {
  std::vector<SelftestItem> out;
  auto add = [&](std::string name, double value, bool ok) { out.push_back({std::move(name), ok, value}); };

  {
    const double p = brute_permanent(Eigen::MatrixXd::Identity(3, 3));
    add("brute_permanent(I3) = 1", p, p == 1.0);
    Eigen::MatrixXd a(3, 3);
    a << 1, 2, 3, 4, 5, 6, 7, 8, 10;
    const double d = std::abs(std::exp(log_permanent_of(a)) - brute_permanent(a)) / brute_permanent(a);
    add("Ryser permanent vs enumeration", d, d < 1e-12);
  }
  {
    Eigen::MatrixXd x(4, 1);
    x << 0.3, -1.0, 2.0, 0.5;
    const double w = brute_w2(x, x);
    add("brute_w2(x, x) = 0", w, w == 0.0);
  }
  {
    auto q = [](const Eigen::VectorXd& v) { return 0.5 * v.squaredNorm() + v.sum(); };
    Eigen::VectorXd x(3);
    x << 0.2, -0.7, 1.5;
    const double e = (finite_diff_grad(q, x) - (x.array() + 1.0).matrix()).cwiseAbs().maxCoeff();
    add("finite_diff_grad of a quadratic", e, e < 1e-8);
  }
  {
    Grid1D u0 = Grid1D::sample(10.0, 801, [](double) { return 0.7; });
    const double e = (cole_hopf_solve(u0, 0.5, 1.0).velocity.values.array() - 0.7).abs().maxCoeff();
    add("Cole-Hopf keeps constant velocity", e, e < 1e-8);
  }
  {
    auto body = std::make_shared<const Polytope>(Polytope::interval(-1.0, 1.0));
    MaStaticOptions o;
    o.half_width = 40.0;
    o.nodes = 4001;
    MaStaticResult r = ma_static_1d(*body, 1.0, {}, o);
    add("static solve residual, P = [-1, 1]", r.residual, r.converged && !r.diverged && r.residual <= 1e-8);
    MaStaticResult bad = ma_static_1d(Polytope::interval(-1.0, 2.0), 1.0, {}, o);
    add("static solve flags P = [-1, 2]", bad.tilt, bad.diverged);
  }
  return out;
}

}  // namespace wgflow
