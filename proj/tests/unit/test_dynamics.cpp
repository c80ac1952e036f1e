#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "helpers.hpp"
#include "wgflow/dynamics.hpp"
#include "wgflow/errors.hpp"

using namespace wgflow;

namespace {

EnergySpec quadratic_external(double curvature = 1.0) {
  return EnergySpec::make(External{ConfiningPotential(QuadraticPotential{curvature, 0.0})});
}

Eigen::MatrixXd column(const Eigen::VectorXd& v) { return Eigen::MatrixXd(v); }

Eigen::MatrixXd shifted_normals(const CounterRng& rng, int n) {
  Eigen::MatrixXd x(n, 1);
  for (int i = 0; i < n; ++i) x(i, 0) = 0.5 + 2.0 * rng.normal(0, 0, i);
  return x;
}

}  // namespace

TEST_CASE("drift examples") {
  std::mt19937_64 gen(41);
  const Eigen::MatrixXd x = column(test::normals(gen, 6));
  CHECK((drift_eval(x, quadratic_external()) + x).norm() <= 1e-15);

  const Eigen::VectorXd sorted = test::sorted_normals(gen, 7);
  const auto newton = EnergySpec::make(Newtonian1D{-1});
  const Eigen::MatrixXd d = drift_eval(column(sorted), newton);
  for (int i = 0; i < 7; ++i) {
    const double p = i + 1 - 4.0;
    CHECK(d(i, 0) == doctest::Approx(4.0 / 7.0 * p).epsilon(1e-12));
    Eigen::VectorXd xp = sorted, xm = sorted;
    xp(i) += 1e-7;
    xm(i) -= 1e-7;
    const double fd = (newtonian_energy(xp, -1) - newtonian_energy(xm, -1)) / 2e-7;
    CHECK(std::abs(d(i, 0) + fd) <= 1e-6);
  }
}

TEST_CASE("permanental drift is minus the gradient and lies in -P") {
  std::mt19937_64 gen(42);
  auto body = test::interval(-1.0, 2.0);
  const auto spec = EnergySpec::make(Permanental{body, quantile_points(*body, 5)});
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd x = column(test::normals(gen, 5));
    const Eigen::MatrixXd d = drift_eval(x, spec);
    for (int i = 0; i < 5; ++i) {
      Eigen::MatrixXd xp = x, xm = x;
      xp(i, 0) += 1e-5;
      xm(i, 0) -= 1e-5;
      const double fd = (microscopic_energy(xp, spec) - microscopic_energy(xm, spec)) / 2e-5;
      CHECK(std::abs(d(i, 0) + fd) <= 1e-6);
      CHECK(-d(i, 0) >= body->lower() - 1e-12);
      CHECK(-d(i, 0) <= body->upper() + 1e-12);
    }
  }
}

TEST_CASE("deterministic relaxation follows exp(-t)") {
  std::mt19937_64 gen(43);
  const Eigen::MatrixXd x0 = column(test::normals(gen, 4));
  double previous = INFINITY;
  for (double dt : {1e-2, 5e-3, 2.5e-3}) {
    SdeConfig cfg;
    cfg.dt = dt;
    cfg.t_end = 1.0;
    cfg.n_save = 1000000;
    const auto traj = simulate_sde(x0, quadratic_external(), cfg);
    REQUIRE(traj.times.size() == 1);
    CHECK(traj.times.back() == doctest::Approx(1.0));
    const double err = (traj.states.back() - x0 * std::exp(-1.0)).cwiseAbs().maxCoeff();
    CHECK(err <= dt * x0.cwiseAbs().maxCoeff());
    CHECK(err < previous);
    previous = err;
  }
}

TEST_CASE("same seed gives a bitwise identical trajectory") {
  std::mt19937_64 gen(44);
  const Eigen::MatrixXd x0 = column(test::sorted_normals(gen, 6));
  const auto spec = EnergySpec::make(PairInteraction{PairPotential(Morse{}, ConfiningPotential(QuadraticPotential{}))});
  SdeConfig cfg;
  cfg.beta = 3.0;
  cfg.seed = 99;
  cfg.t_end = 0.5;
  cfg.n_save = 5;
  const auto a = simulate_sde(x0, spec, cfg);
  const auto b = simulate_sde(x0, spec, cfg);
  REQUIRE(a.states.size() == b.states.size());
  for (std::size_t k = 0; k < a.states.size(); ++k) CHECK((a.states[k].array() == b.states[k].array()).all());
  cfg.seed = 100;
  const auto c = simulate_sde(x0, spec, cfg);
  CHECK((a.states.back().array() != c.states.back().array()).any());
}

TEST_CASE("stationary variance of the Ornstein-Uhlenbeck process is 1/beta") {
  SdeConfig cfg;
  cfg.beta = 4.0;
  cfg.dt = 1e-2;
  cfg.t_end = 4000.0;
  cfg.n_save = 10;
  cfg.seed = 7;
  const auto traj = simulate_sde(Eigen::MatrixXd::Zero(1, 1), quadratic_external(), cfg);
  // discard a burn-in, then batch means for the Monte Carlo error of the variance
  const std::size_t burn = 1000, batches = 40;
  const std::size_t per = (traj.states.size() - burn) / batches;
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t k = 0; k < per; ++k) {
      const double x = traj.states[burn + b * per + k](0, 0);
      s += x * x;
    }
    means[b] = s / per;
  }
  double mean = 0.0, var = 0.0;
  for (double m : means) mean += m / batches;
  for (double m : means) var += (m - mean) * (m - mean) / (batches - 1);
  const double sigma = std::sqrt(var / batches);
  // Euler-Maruyama inflates the variance by 1/(1 - dt/2)
  CHECK(std::abs(mean - 0.25) <= 3.0 * sigma + 0.25 * cfg.dt);
}

TEST_CASE("ensembles") {
  SdeConfig cfg;
  cfg.t_end = 0.2;
  cfg.dt = 0.01;
  cfg.n_save = 5;
  const Eigen::MatrixXd fixed = column(Eigen::Vector3d(-1.0, 0.2, 1.0));
  const auto det = ensemble_empirical([&](const CounterRng&) { return fixed; }, quadratic_external(), cfg, 6, 2);
  REQUIRE(det.snapshots.size() == 6);
  CHECK(det.times.size() == det.snapshots[0].size());
  for (int r = 1; r < 6; ++r) {
    CHECK(det.seeds[r] == det.seeds[0] + r);
    CHECK((det.snapshots[r].back().points.array() == det.snapshots[0].back().points.array()).all());
  }

  const int n = 10, runs = 400;
  const auto sampler = [&](const CounterRng& rng) { return shifted_normals(rng, n); };
  const auto draws = ensemble_empirical(sampler, quadratic_external(), cfg, runs, 2);
  double first = 0.0, second = 0.0;
  for (const auto& e : draws.initial) {
    first += e.points.sum() / (n * runs);
    second += e.points.squaredNorm() / (n * runs);
  }
  // x = 0.5 + 2 z: E x = 0.5, E x^2 = 4.25, Var x^2 = 16 Var z^2 + 4 Var z = 34
  const double count = n * runs;
  CHECK(std::abs(first - 0.5) <= 3.0 * 2.0 / std::sqrt(count));
  CHECK(std::abs(second - 4.25) <= 3.0 * std::sqrt(34.0 / count));
  // the thread count does not change the result
  const auto serial = ensemble_empirical(sampler, quadratic_external(), cfg, runs, 1);
  CHECK((serial.snapshots[123].back().points.array() == draws.snapshots[123].back().points.array()).all());
}

TEST_CASE("property: translation equivariance for translation-invariant pair energies") {
  std::mt19937_64 gen(45);
  const auto spec = EnergySpec::make(PairInteraction{PairPotential(Morse{2.0, 1.5, 0.7, 2.0})});
  for (double beta : {kInfiniteBeta, 2.0}) {
    const Eigen::MatrixXd x0 = column(test::sorted_normals(gen, 6));
    SdeConfig cfg;
    cfg.beta = beta;
    cfg.seed = 3;
    cfg.t_end = 0.5;
    const auto a = simulate_sde(x0, spec, cfg);
    const auto b = simulate_sde(x0.array() + 1.75, spec, cfg);
    CHECK((b.states.back().array() - 1.75 - a.states.back().array()).abs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("property: convex energies decrease along deterministic flows") {
  std::mt19937_64 gen(46);
  const auto spec =
      EnergySpec::make(PairInteraction{PairPotential(QuadraticKernel{0.5}, ConfiningPotential(QuadraticPotential{}))});
  SdeConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 1.0;
  cfg.n_save = 10;
  const auto traj = simulate_sde(column(test::normals(gen, 8)), spec, cfg);
  double previous = microscopic_energy(traj.initial, spec);
  for (const auto& s : traj.states) {
    const double e = microscopic_energy(s, spec);
    CHECK(e <= previous + cfg.dt * cfg.dt);
    previous = e;
  }
}

TEST_CASE("config validation") {
  SdeConfig bad;
  bad.dt = 0.0;
  CHECK_THROWS(bad.validate());
  bad.dt = 1.0;
  bad.t_end = 0.5;
  CHECK_THROWS(bad.validate());
  SdeConfig hot;
  hot.beta = -1.0;
  CHECK_THROWS(hot.validate());
}
