#include "wgflow/energies.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "wgflow/errors.hpp"

namespace wgflow {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_sample(const Eigen::MatrixXd& x, const LatticeSample& sample) {
  if (static_cast<std::size_t>(x.rows()) != sample.count())
    throw InvalidArgument("particle count does not match the point sample");
  if (x.cols() != sample.points.cols()) throw InvalidArgument("particle dimension does not match the point sample");
}

const Polytope& body_of(const std::shared_ptr<const Polytope>& b) {
  if (!b) throw InvalidArgument("energy kind needs a polytope");
  return *b;
}

}  // namespace

EnergySpec EnergySpec::make(EnergyKind kind) {
  EnergySpec s;
  s.kind = std::move(kind);
  std::visit(overloaded{
                 [&](const Permanental& p) {
                   s.lambda_bound = 0.0;
                   s.lipschitz_bound = body_of(p.body).max_norm();
                 },
                 [&](const Tropical& p) {
                   s.lambda_bound = 0.0;
                   s.lipschitz_bound = body_of(p.body).max_norm();
                 },
                 [&](const WeightedPermanental& p) {
                   if (!(p.gamma >= 0.0 && p.gamma <= 1.0)) throw InvalidArgument("gamma must lie in [0,1]");
                   s.lambda_bound = (1.0 - p.gamma) * p.v.convexity();
                   double lip = p.gamma * body_of(p.body).max_norm() + (1.0 - p.gamma) * p.v.lipschitz();
                   if (std::isfinite(lip)) s.lipschitz_bound = lip;
                 },
                 [&](const PairInteraction& p) {
                   s.lambda_bound = 2.0 * std::min(0.0, p.potential.lambda()) + p.potential.confinement().convexity();
                 },
                 [&](const Newtonian1D& n) {
                   if (n.sign != 1 && n.sign != -1) throw InvalidArgument("Newtonian sign must be +1 or -1");
                   s.lambda_bound = 0.0;
                   s.lipschitz_bound = 2.0;
                 },
                 [&](const External& e) {
                   s.lambda_bound = e.v.convexity();
                   double lip = e.v.lipschitz();
                   if (std::isfinite(lip)) s.lipschitz_bound = lip;
                 },
             },
             s.kind);
  return s;
}

std::string EnergySpec::name() const {
  return std::visit(overloaded{
                        [](const Permanental&) { return std::string("permanental"); },
                        [](const Tropical&) { return std::string("tropical"); },
                        [](const WeightedPermanental&) { return std::string("weighted_permanental"); },
                        [](const PairInteraction& p) { return "pair:" + p.potential.describe(); },
                        [](const Newtonian1D& n) { return std::string(n.sign > 0 ? "newtonian+" : "newtonian-"); },
                        [](const External&) { return std::string("external"); },
                    },
                    kind);
}

int EnergySpec::dimension() const {
  return std::visit(overloaded{
                        [](const Permanental& p) { return static_cast<int>(p.sample.points.cols()); },
                        [](const Tropical& p) { return static_cast<int>(p.sample.points.cols()); },
                        [](const WeightedPermanental& p) { return static_cast<int>(p.sample.points.cols()); },
                        [](const auto&) { return 1; },
                    },
                    kind);
}

std::size_t EnergySpec::required_particles() const {
  return std::visit(overloaded{
                        [](const Permanental& p) { return p.sample.count(); },
                        [](const Tropical& p) { return p.sample.count(); },
                        [](const WeightedPermanental& p) { return p.sample.count(); },
                        [](const auto&) { return std::size_t{0}; },
                    },
                    kind);
}

Eigen::MatrixXd permanental_kernel(const Eigen::MatrixXd& x, const LatticeSample& sample) {
  check_sample(x, sample);
  return sample.resolution * (x * sample.points.transpose());
}

double permanental_energy(const Eigen::MatrixXd& x, const LatticeSample& sample, int cap) {
  if (sample.count() > static_cast<std::size_t>(cap))
    throw CapExceeded("N exceeds the exact permanent cap; use permanental_energy_bounds");
  return log_permanent_exact(permanental_kernel(x, sample), cap) / sample.resolution;
}

EnergyBounds permanental_energy_bounds(const Eigen::MatrixXd& x, const LatticeSample& sample,
                                       const SinkhornOptions& opts) {
  SinkhornResult r = sinkhorn_scale(permanental_kernel(x, sample), opts);
  return {r.log_permanent_lower / sample.resolution, r.log_permanent_upper / sample.resolution, r.converged};
}

PermanentalGradient permanental_gradient(const Eigen::MatrixXd& x, const LatticeSample& sample,
                                         const GradientOptions& opts, const Eigen::VectorXd* warm) {
  Eigen::MatrixXd kernel = permanental_kernel(x, sample);
  PermanentalGradient g;
  if (opts.method == GradientMethod::Exact) {
    g.marginals = permanent_marginals_exact(kernel, opts.cap).pi;
    g.exact = true;
  } else {
    SinkhornResult r = sinkhorn_scale(kernel, opts.sinkhorn, warm);
    if (!r.converged)
      throw ConvergenceFailure("Sinkhorn scaling did not converge (marginal error " +
                               std::to_string(r.marginal_error) + ")");
    g.marginals = std::move(r.plan);
    g.exact = false;
    g.sinkhorn_iterations = r.iterations;
    g.marginal_error = r.marginal_error;
    g.duality_gap = (r.log_permanent_upper - r.log_permanent_lower) / sample.resolution;
    g.dual = std::move(r.v);
  }
  g.gradient = g.marginals * sample.points;
  return g;
}

TropicalResult tropical_energy(const Eigen::MatrixXd& x, const LatticeSample& sample) {
  check_sample(x, sample);
  Assignment a = solve_assignment_max(x * sample.points.transpose());
  return {a.cost, std::move(a.column_of_row)};
}

double pair_energy(const Eigen::VectorXd& x, const PairPotential& pot, PairNormalization norm) {
  const Eigen::Index n = x.size();
  if (n < 2 && norm == PairNormalization::ExcludeDiagonal) throw InvalidArgument("pair energy needs N >= 2");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double w = pot.w(x(i) - x(j));
      if (w == kInf) return kInf;
      sum += 2.0 * w;
    }
  double pot_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) pot_sum += pot.confinement().value(x(i));
  if (norm == PairNormalization::ExcludeDiagonal) return sum / static_cast<double>(n - 1) + pot_sum;
  double w0 = pot.w(0.0);
  if (w0 == kInf) return kInf;
  return (sum + n * w0) / static_cast<double>(n) + pot_sum;
}

Eigen::VectorXd pair_gradient(const Eigen::VectorXd& x, const PairPotential& pot, PairNormalization norm) {
  const Eigen::Index n = x.size();
  const double scale = norm == PairNormalization::ExcludeDiagonal ? 2.0 / static_cast<double>(n - 1)
                                                                   : 2.0 / static_cast<double>(n);
  Eigen::VectorXd g(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) acc += pot.dw(x(i) - x(j));
    g(i) = scale * acc + pot.confinement().d1(x(i));
  }
  return g;
}

double newtonian_energy(const Eigen::VectorXd& x, int sign) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    for (Eigen::Index j = 0; j < x.size(); ++j) sum += std::abs(x(i) - x(j));
  return sign * sum / static_cast<double>(x.size());
}

double newtonian_closed_form(const Eigen::VectorXd& x, int sign) {
  const Eigen::Index n = x.size();
  for (Eigen::Index i = 0; i + 1 < n; ++i)
    if (x(i + 1) < x(i)) throw InvalidArgument("newtonian_closed_form needs sorted input");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) sum += x(i) * (static_cast<double>(i + 1) - 0.5 * static_cast<double>(n + 1));
  return sign * 4.0 * sum / static_cast<double>(n * n);
}

double microscopic_energy(const Eigen::MatrixXd& x, const EnergySpec& spec, int cap) {
  auto sum_v = [&](const ConfiningPotential& v) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) s += v.value(Eigen::VectorXd(x.row(i).transpose()));
    return s;
  };
  return std::visit(overloaded{
                        [&](const Permanental& p) { return permanental_energy(x, p.sample, cap); },
                        [&](const Tropical& p) { return tropical_energy(x, p.sample).value; },
                        [&](const WeightedPermanental& p) {
                          double e = p.gamma > 0.0 ? p.gamma * permanental_energy(x, p.sample, cap) : 0.0;
                          return e + (1.0 - p.gamma) * sum_v(p.v);
                        },
                        [&](const PairInteraction& p) {
                          return pair_energy(Eigen::VectorXd(x.col(0)), p.potential, p.normalization);
                        },
                        [&](const Newtonian1D& n) { return newtonian_energy(Eigen::VectorXd(x.col(0)), n.sign); },
                        [&](const External& e) { return sum_v(e.v); },
                    },
                    spec.kind);
}

double ot_energy_1d(const QuantileMeasure& mu, const Polytope& body) {
  QuantileMeasure y = uniform_quantile(body, mu.size());
  return mu.nodes().dot(y.nodes()) / mu.size();
}

double ot_constant(const Polytope& body, int m) { return 0.5 * second_moment(uniform_quantile(body, m)); }

double macroscopic_pair_energy(const QuantileMeasure& mu, const PairPotential& pot) {
  const int m = mu.size();
  const bool strong = pot.singularity() == SingularityClass::Strong;
  double sum = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      double w = pot.w(mu[i] - mu[j]);
      if (w == kInf) return kInf;
      sum += 2.0 * w;
    }
  if (!strong) sum += m * pot.w(0.0);
  return sum / (static_cast<double>(m) * m) + potential_energy(mu, pot.confinement());
}

double potential_energy(const QuantileMeasure& mu, const ConfiningPotential& v) {
  if (v.is_zero()) return 0.0;
  double s = 0.0;
  for (int i = 0; i < mu.size(); ++i) s += v.value(mu[i]);
  return s / mu.size();
}

double macroscopic_newtonian(const QuantileMeasure& mu, int sign) { return newtonian_closed_form(mu.nodes(), sign); }

double macroscopic_energy(const QuantileMeasure& mu, const EnergySpec& spec) {
  if (spec.dimension() != 1) throw InvalidArgument("macroscopic energies are only available in 1D");
  return std::visit(overloaded{
                        [&](const Permanental& p) { return ot_energy_1d(mu, body_of(p.body)); },
                        [&](const Tropical& p) { return ot_energy_1d(mu, body_of(p.body)); },
                        [&](const WeightedPermanental& p) {
                          return p.gamma * ot_energy_1d(mu, body_of(p.body)) + (1.0 - p.gamma) * potential_energy(mu, p.v);
                        },
                        [&](const PairInteraction& p) { return macroscopic_pair_energy(mu, p.potential); },
                        [&](const Newtonian1D& n) { return macroscopic_newtonian(mu, n.sign); },
                        [&](const External& e) { return potential_energy(mu, e.v); },
                    },
                    spec.kind);
}

double free_energy(const QuantileMeasure& mu, const EnergySpec& spec, double beta) {
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  double e = macroscopic_energy(mu, spec);
  if (std::isinf(beta)) return e;
  return e + entropy(mu) / beta;
}

double weighted_free_energy(const QuantileMeasure& mu, const Polytope& body, double gamma, const ConfiningPotential& v) {
  double f = entropy(mu);
  if (gamma != 0.0) f += gamma * ot_energy_1d(mu, body);
  if (gamma != 1.0) f += (1.0 - gamma) * potential_energy(mu, v);
  return f;
}

}  // namespace wgflow
