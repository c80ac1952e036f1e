#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "wgflow/errors.hpp"
#include "wgflow/jko.hpp"

using namespace wgflow;

namespace {

EnergySpec external(ConfiningPotential v) { return EnergySpec::make(External{std::move(v)}); }

const ConfiningPotential kQuadratic = ConfiningPotential(QuadraticPotential{1.0, 0.0});

QuantileMeasure heat_steps(const QuantileMeasure& mu, double tau, int steps, double beta) {
  const GridFreeEnergy f(external({}), beta, mu.size());
  QuantileMeasure cur = mu;
  for (int k = 0; k < steps; ++k) cur = jko_step(cur, f, tau).measure;
  return cur;
}

}  // namespace

TEST_CASE("quadratic potential: one step contracts by 1/(1+tau)") {
  const auto mu = normal_quantile(0.7, 1.5, 100);
  const GridFreeEnergy f(external(kQuadratic), kInfiniteBeta, 100);
  for (double tau : {0.01, 0.1, 1.0}) {
    const auto step = jko_step(mu, f, tau);
    CHECK(step.converged);
    CHECK((step.measure.nodes() - mu.nodes() / (1.0 + tau)).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("one implicit heat step adds 2 tau / beta to the variance") {
  const int m = 400;
  const auto mu = normal_quantile(0.0, 1.0, m);
  for (double beta : {1.0, 2.0}) {
    for (double tau : {0.02, 0.01}) {
      const auto out = heat_steps(mu, tau, 1, beta);
      CHECK(std::abs(variance(out) - variance(mu) - 2.0 * tau / beta) <= tau * tau + 1.0 / m);
      CHECK(std::abs(barycenter_1d(out)) <= 1e-10);
    }
  }
}

TEST_CASE("two half steps agree with one step to second order") {
  const int m = 200;
  const auto mu = normal_quantile(0.3, 0.8, m);
  const auto spec = EnergySpec::make(
      PairInteraction{PairPotential(Morse{1.0, 0.5, 0.5, 1.5}, ConfiningPotential(QuadraticPotential{1.0, 0.0}))});
  const GridFreeEnergy f(spec, 2.0, m);
  std::vector<double> gaps;
  for (double tau : {0.04, 0.02, 0.01}) {
    const auto one = jko_step(mu, f, tau).measure;
    const auto two = jko_step(jko_step(mu, f, tau / 2).measure, f, tau / 2).measure;
    gaps.push_back(wasserstein2_1d(one, two));
  }
  CHECK(gaps[0] / gaps[1] >= 3.0);
  CHECK(gaps[1] / gaps[2] >= 3.0);
}

TEST_CASE("the minimizer is a fixed point of the flow") {
  const int m = 200;
  const GridFreeEnergy f(external(kQuadratic), 1.0, m);
  JkoConfig cfg;
  cfg.m = m;
  cfg.tau = 0.1;
  const auto stat = stationary_limit(f, cfg, normal_quantile(1.0, 2.0, m), 1e-10, 400.0);
  REQUIRE(stat.converged);
  cfg.t_end = 1.0;
  const auto traj = jko_flow(stat.measure, f, cfg);
  for (const auto& r : traj.steps) CHECK(wasserstein2_1d(r.measure, stat.measure) <= 1e-8);
}

TEST_CASE("stationary limit of the Ornstein-Uhlenbeck free energy is the standard normal") {
  const int m = 400;
  const GridFreeEnergy f(external(kQuadratic), 1.0, m);
  JkoConfig cfg;
  cfg.m = m;
  cfg.tau = 0.1;
  const auto stat = stationary_limit(f, cfg, uniform_quantile(Polytope::interval(-1.0, 1.0), m), 1e-9, 400.0);
  REQUIRE(stat.converged);
  CHECK(wasserstein2_1d(stat.measure, normal_quantile(0.0, 1.0, m)) <= 0.02);
  CHECK(std::abs(variance(stat.measure) - 1.0) <= 0.02);
}

TEST_CASE("deterministic transport follows the characteristics") {
  // convex V = (1/s) log(e^{-s x} + e^{2 s x}), characteristics integrated by RK4
  const auto body = test::interval(-1.0, 2.0);
  const ConfiningPotential v(SmoothSupportPotential{body, 2.0});
  const int m = 50;
  const auto mu = normal_quantile(0.0, 1.0, m);
  const double t_end = 0.5;
  Eigen::VectorXd exact = mu.nodes();
  const int sub = 5000;
  const double h = t_end / sub;
  for (int k = 0; k < sub; ++k)
    for (int i = 0; i < m; ++i) {
      const double x = exact(i);
      const double k1 = -v.d1(x), k2 = -v.d1(x + 0.5 * h * k1), k3 = -v.d1(x + 0.5 * h * k2), k4 = -v.d1(x + h * k3);
      exact(i) = x + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0;
    }
  const GridFreeEnergy f(external(v), kInfiniteBeta, m);
  std::vector<double> errors;
  for (double tau : {0.02, 0.01, 0.005}) {
    JkoConfig cfg;
    cfg.m = m;
    cfg.tau = tau;
    cfg.t_end = t_end;
    const auto traj = jko_flow(mu, f, cfg);
    REQUIRE(traj.steps.back().time == doctest::Approx(t_end));
    errors.push_back((traj.steps.back().measure.nodes() - exact).cwiseAbs().maxCoeff());
  }
  CHECK(errors[0] <= 2.0 * 0.02);
  CHECK(errors[1] / errors[2] >= 1.7);
  CHECK(errors[0] / errors[1] >= 1.7);
}

TEST_CASE("property: free energy and step optimality along flows") {
  const auto body = test::interval(-1.0, 2.0);
  const std::vector<EnergySpec> specs{
      external({}),
      external(kQuadratic),
      EnergySpec::make(Permanental{body, quantile_points(*body, 2)}),
      EnergySpec::make(PairInteraction{PairPotential(QuadraticKernel{0.5}, kQuadratic)}),
  };
  for (const auto& spec : specs) {
    const int m = 120;
    JkoConfig cfg;
    cfg.m = m;
    cfg.tau = 0.02;
    cfg.t_end = 0.4;
    const GridFreeEnergy f(spec, 1.5, m);
    const auto traj = jko_flow(normal_quantile(0.2, 0.7, m), f, cfg);
    CHECK(traj.converged);
    for (std::size_t j = 1; j < traj.steps.size(); ++j) {
      const auto& prev = traj.steps[j - 1];
      const auto& cur = traj.steps[j];
      CHECK(cur.free_energy <= prev.free_energy + cfg.inner_tol);
      const double d = wasserstein2_1d(cur.measure, prev.measure);
      CHECK(d * d / (2.0 * cfg.tau) + cur.free_energy <= prev.free_energy + cfg.inner_tol);
      CHECK(cur.time == doctest::Approx(j * cfg.tau));
    }
  }
}

TEST_CASE("property: entropy decreases along the heat flow") {
  const int m = 200;
  JkoConfig cfg;
  cfg.m = m;
  cfg.tau = 0.05;
  cfg.t_end = 1.0;
  const GridFreeEnergy f(external({}), 1.0, m);
  const auto traj = jko_flow(uniform_quantile(Polytope::interval(-0.5, 1.0), m), f, cfg);
  for (std::size_t j = 1; j < traj.steps.size(); ++j)
    CHECK(entropy(traj.steps[j].measure) <= entropy(traj.steps[j - 1].measure) + 1e-12);
}

TEST_CASE("EVI residual of the heat flow is small and detects reversed time") {
  const int m = 200;
  JkoConfig cfg;
  cfg.m = m;
  cfg.tau = 0.01;
  cfg.t_end = 0.3;
  const auto spec = external(kQuadratic);
  const GridFreeEnergy f(spec, 1.0, m);
  const auto traj = jko_flow(normal_quantile(0.5, 0.5, m), f, cfg);
  const auto probes = default_probes(traj, spec);
  const double forward = evi_residual(traj, f, probes);
  CHECK(forward <= cfg.tau);
  auto reversed = traj;
  std::reverse(reversed.steps.begin(), reversed.steps.end());
  for (std::size_t j = 0; j < reversed.steps.size(); ++j) reversed.steps[j].time = traj.steps[j].time;
  CHECK(evi_residual(reversed, f, probes) > 0.0);
}

TEST_CASE("grid refinement on the Burgers benchmark converges like 1/M in the bulk") {
  const auto body = test::interval(-1.0, 2.0);
  const auto spec = EnergySpec::make(Permanental{body, quantile_points(*body, 2)});
  // tripling M keeps every coarse quantile level: node i of M sits at node 3i+1 of 3M
  std::vector<int> ms{30, 90, 270};
  std::vector<QuantileMeasure> finals;
  for (int m : ms) {
    JkoConfig cfg;
    cfg.m = m;
    cfg.tau = 0.01;
    cfg.t_end = 0.5;
    const auto traj = jko_flow(normal_quantile(0.0, 0.5, m), GridFreeEnergy(spec, 1.0, m), cfg);
    REQUIRE(traj.converged);
    finals.push_back(traj.steps.back().measure);
  }
  std::vector<double> bulk, full;
  for (std::size_t k = 0; k + 1 < ms.size(); ++k) {
    const int m = ms[k];
    double b = 0.0, f = 0.0;
    for (int i = 0; i < m; ++i) {
      const double d = finals[k][i] - finals[k + 1][3 * i + 1];
      f += d * d / m;
      if (i >= m / 10 && i < m - m / 10) b += d * d / m;
    }
    bulk.push_back(std::sqrt(b) * m);
    full.push_back(std::sqrt(f));
  }
  // M times the change stays bounded on the central quantiles
  CHECK(bulk[1] <= 1.1 * bulk[0]);
  // the exponential tails converge more slowly but still converge
  CHECK(full[1] < full[0]);
}

TEST_CASE("config validation") {
  JkoConfig cfg;
  cfg.tau = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg.tau = 0.1;
  cfg.m = 1;
  CHECK_THROWS(cfg.validate());
}
