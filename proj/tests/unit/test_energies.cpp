#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "helpers.hpp"
#include "wgflow/energies.hpp"
#include "wgflow/errors.hpp"

using namespace wgflow;

namespace {

double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// all permutation terms k Σ x_i·p_σ(i)
std::vector<double> permutation_terms(const Eigen::MatrixXd& x, const LatticeSample& s) {
  std::vector<int> perm(x.rows());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> terms;
  do {
    double t = 0.0;
    for (int i = 0; i < x.rows(); ++i) t += x.row(i).dot(s.points.row(perm[i]));
    terms.push_back(s.resolution * t);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return terms;
}

double brute_log_per(const Eigen::MatrixXd& a) {
  std::vector<int> perm(a.rows());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> terms;
  do {
    double t = 0.0;
    for (int i = 0; i < a.rows(); ++i) t += std::log(a(i, perm[i]));
    terms.push_back(t);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return log_sum_exp(terms);
}

LatticeSample sample_1d(const Eigen::VectorXd& p, double k = 1.0) {
  LatticeSample s;
  s.points = p;
  s.resolution = k;
  return s;
}

LatticeSample square_lattice() {
  Eigen::MatrixXd sq(4, 2);
  sq << -1, -1, 1, -1, 1, 1, -1, 1;
  return lattice_points(Polytope(sq), 1);
}

Eigen::MatrixXd random_points(std::mt19937_64& gen, int n, int d) {
  Eigen::MatrixXd x(n, d);
  for (int c = 0; c < d; ++c) x.col(c) = test::normals(gen, n);
  return x;
}

double factorial_log(int n) { return std::lgamma(n + 1.0); }

}  // namespace

TEST_CASE("log permanent examples") {
  Eigen::MatrixXd a1(1, 1);
  a1 << 2.5;
  CHECK(log_permanent_of(a1) == doctest::Approx(std::log(2.5)));
  Eigen::MatrixXd a2(2, 2);
  a2 << 1, 2, 3, 4;
  CHECK(log_permanent_of(a2) == doctest::Approx(std::log(1 * 4 + 2 * 3)));
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd a(6, 6);
    for (int i = 0; i < 36; ++i) a(i) = u(gen);
    CHECK(std::abs(log_permanent_of(a) - brute_log_per(a)) <= 1e-10);
  }
  CHECK_THROWS_AS(log_permanent_exact(Eigen::MatrixXd::Zero(15, 15)), CapExceeded);
}

TEST_CASE("permanental energy against enumeration") {
  const Eigen::VectorXd p1 = Eigen::VectorXd::Constant(1, 0.7);
  CHECK(permanental_energy(Eigen::MatrixXd::Constant(1, 1, -2.0), sample_1d(p1)) == doctest::Approx(-1.4));

  std::mt19937_64 gen(22);
  Eigen::VectorXd p(5);
  p << -1.0, -0.4, 0.1, 0.5, 1.0;
  for (double k : {1.0, 3.0}) {
    const auto s = sample_1d(p, k);
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::MatrixXd x = random_points(gen, 5, 1);
      CHECK(permanental_energy(x, s) == doctest::Approx(log_sum_exp(permutation_terms(x, s)) / k).epsilon(1e-12));
    }
  }
  CHECK_THROWS(permanental_energy(Eigen::MatrixXd::Zero(4, 1), sample_1d(p)));
}

TEST_CASE("property: permanental energy is symmetric and bracketed by the tropical energy") {
  std::mt19937_64 gen(23);
  const auto sq = square_lattice();
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd x = random_points(gen, 9, 2) * 2.0;
    const double e = permanental_energy(x, sq);
    std::vector<int> perm(9);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    Eigen::MatrixXd y(9, 2);
    for (int i = 0; i < 9; ++i) y.row(i) = x.row(perm[i]);
    CHECK(permanental_energy(y, sq) == doctest::Approx(e).epsilon(1e-12));
    const double trop = tropical_energy(x, sq).value;
    CHECK(e >= trop - 1e-12);
    CHECK(e <= trop + factorial_log(9) / sq.resolution + 1e-12);
    const auto b = permanental_energy_bounds(x, sq);
    CHECK(b.lower <= e + 1e-8);
    CHECK(b.upper >= e - 1e-8);
  }
}

TEST_CASE("permanental gradient") {
  const Eigen::VectorXd p1 = Eigen::VectorXd::Constant(1, 0.7);
  CHECK(permanental_gradient(Eigen::MatrixXd::Constant(1, 1, 3.0), sample_1d(p1)).gradient(0, 0) ==
        doctest::Approx(0.7));

  std::mt19937_64 gen(24);
  Eigen::VectorXd p(5);
  p << -1.0, -0.4, 0.1, 0.5, 1.0;
  const auto s = sample_1d(p, 2.0);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd x = random_points(gen, 5, 1);
    const auto g = permanental_gradient(x, s);
    const double h = 1e-5;
    for (int i = 0; i < 5; ++i) {
      Eigen::MatrixXd xp = x, xm = x;
      xp(i, 0) += h;
      xm(i, 0) -= h;
      const double fd = (permanental_energy(xp, s) - permanental_energy(xm, s)) / (2 * h);
      CHECK(std::abs(fd - g.gradient(i, 0)) <= 1e-6);
    }
  }
}

TEST_CASE("property: marginals are doubly stochastic and gradients lie in P") {
  std::mt19937_64 gen(25);
  Eigen::MatrixXd sqv(4, 2);
  sqv << -1, -1, 1, -1, 1, 1, -1, 1;
  const Polytope square(sqv);
  const auto sq = square_lattice();
  GradientOptions sinkhorn;
  sinkhorn.method = GradientMethod::Sinkhorn;
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd x = random_points(gen, 9, 2) * 3.0;
    for (const auto& opts : {GradientOptions{}, sinkhorn}) {
      const auto g = permanental_gradient(x, sq, opts);
      const double tol = g.exact ? 1e-8 : 1e-6;
      CHECK((g.marginals.rowwise().sum().array() - 1.0).abs().maxCoeff() <= tol);
      CHECK((g.marginals.colwise().sum().array() - 1.0).abs().maxCoeff() <= tol);
      CHECK(g.marginals.minCoeff() >= 0.0);
      for (int i = 0; i < 9; ++i) CHECK(square.contains(g.gradient.row(i).transpose(), 1e-9));
    }
  }
}

TEST_CASE("tropical energy against enumeration") {
  const Eigen::VectorXd p1 = Eigen::VectorXd::Constant(1, -0.5);
  CHECK(tropical_energy(Eigen::MatrixXd::Constant(1, 1, 4.0), sample_1d(p1)).value == doctest::Approx(-2.0));
  Eigen::MatrixXd x2(2, 1);
  x2 << 1.0, 3.0;
  Eigen::VectorXd p2(2);
  p2 << 2.0, -1.0;
  const auto t2 = tropical_energy(x2, sample_1d(p2));
  CHECK(t2.value == doctest::Approx(std::max(1.0 * 2 - 3.0, -1.0 + 3.0 * 2)));
  CHECK(t2.assignment == std::vector<int>{1, 0});

  std::mt19937_64 gen(26);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd x = random_points(gen, 7, 2);
    LatticeSample s;
    s.points = random_points(gen, 7, 2);
    const auto terms = permutation_terms(x, s);
    CHECK(tropical_energy(x, s).value == doctest::Approx(*std::max_element(terms.begin(), terms.end())).epsilon(1e-12));
  }
}

TEST_CASE("assignment solver") {
  std::mt19937_64 gen(27);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd c(7, 7);
    for (int i = 0; i < 49; ++i) c(i) = u(gen);
    std::vector<int> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    double best = INFINITY;
    do {
      double t = 0.0;
      for (int i = 0; i < 7; ++i) t += c(i, perm[i]);
      best = std::min(best, t);
    } while (std::next_permutation(perm.begin(), perm.end()));
    const auto a = solve_assignment(c);
    CHECK(a.cost == doctest::Approx(best).epsilon(1e-12));
    double t = 0.0;
    for (int i = 0; i < 7; ++i) t += c(i, a.column_of_row[i]);
    CHECK(t == doctest::Approx(a.cost));
  }
}

TEST_CASE("OT energy and the cost identity") {
  const Polytope half = Polytope::interval(-0.5, 0.5);
  CHECK(ot_energy_1d(QuantileMeasure::dirac(0.0, 64), half) == 0.0);
  for (int m : {16, 64, 256}) {
    CHECK(std::abs(ot_energy_1d(uniform_quantile(half, m), half) - 1.0 / 12.0) <= 1.0 / (double(m) * m));
  }
  std::mt19937_64 gen(28);
  const Polytope p = Polytope::interval(-1.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 128;
    const Eigen::VectorXd draws = test::normals(gen, 300, 1.5);
    const auto mu = from_samples(std::vector<double>(draws.data(), draws.data() + draws.size()), m);
    const double w = wasserstein2_1d(mu, uniform_quantile(p, m));
    const double cost = -ot_energy_1d(mu, p);
    CHECK(std::abs(cost - (0.5 * w * w - 0.5 * second_moment(mu) - ot_constant(p, m))) <= 1e-10);
  }
}

TEST_CASE("pair energy examples") {
  const PairPotential quad(QuadraticKernel{1.0});
  CHECK(pair_energy(Eigen::Vector2d(0.0, 1.0), quad) == doctest::Approx(2.0));
  const PairPotential lg(LogKernel{1.0});
  CHECK(pair_energy(Eigen::Vector2d(0.3, 0.3), lg) == INFINITY);

  const Morse morse{2.0, 1.5, 0.7, 2.0};
  const PairPotential pot(morse);
  std::mt19937_64 gen(29);
  const Eigen::VectorXd x = test::normals(gen, 10);
  double ref = 0.0;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      if (i == j) continue;
      const double s = std::abs(x(i) - x(j));
      ref += morse.c_r * std::exp(-s / morse.l_r) - morse.c_a * std::exp(-s / morse.l_a);
    }
  CHECK(pair_energy(x, pot) == doctest::Approx(ref / 9.0).epsilon(1e-12));
}

TEST_CASE("property: pair gradient matches finite differences") {
  std::mt19937_64 gen(30);
  const PairPotential pot(Morse{2.0, 1.5, 0.7, 2.0}, ConfiningPotential(QuadraticPotential{0.5, 0.2}));
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd x = test::normals(gen, 8);
    const Eigen::VectorXd g = pair_gradient(x, pot);
    for (int i = 0; i < 8; ++i) {
      Eigen::VectorXd xp = x, xm = x;
      xp(i) += 1e-6;
      xm(i) -= 1e-6;
      CHECK(std::abs((pair_energy(xp, pot) - pair_energy(xm, pot)) / 2e-6 - g(i)) <= 1e-6);
    }
  }
}

TEST_CASE("property: convex pair energies are lambda-convex along segments") {
  std::mt19937_64 gen(31);
  const PairPotential pot(QuadraticKernel{1.0}, ConfiningPotential(QuadraticPotential{1.0, 0.0}));
  const auto spec = EnergySpec::make(PairInteraction{pot});
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd x = test::normals(gen, 6);
    Eigen::VectorXd d = test::normals(gen, 6);
    d.normalize();
    const double h = 1e-3;
    const double second = (pair_energy(x + h * d, pot) - 2.0 * pair_energy(x, pot) + pair_energy(x - h * d, pot)) / (h * h);
    CHECK(second >= spec.lambda_bound - 1e-6);
  }
}

TEST_CASE("Newtonian energies") {
  CHECK(newtonian_closed_form(Eigen::VectorXd::Zero(5), 1) == 0.0);
  CHECK(newtonian_closed_form(Eigen::Vector2d(0.0, 1.0), 1) == doctest::Approx(0.5));
  std::mt19937_64 gen(32);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd x = test::sorted_normals(gen, 20);
    double brute = 0.0;
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 20; ++j) brute += std::abs(x(i) - x(j));
    brute /= 20.0;
    for (int sign : {1, -1}) {
      CHECK(std::abs(newtonian_energy(x, sign) - sign * brute) <= 1e-12 * brute);
      CHECK(std::abs(newtonian_closed_form(x, sign) - sign * brute / 20.0) <= 1e-12 * brute);
    }
  }
}

TEST_CASE("macroscopic energies") {
  const QuadraticKernel sq{1.0};
  const QuantileMeasure dirac = QuantileMeasure::dirac(0.4, 32);
  const PairPotential morse(Morse{2.0, 1.5, 0.7, 2.0}, ConfiningPotential(QuadraticPotential{1.0, 0.0}));
  CHECK(macroscopic_pair_energy(dirac, morse) == doctest::Approx(morse.w(0.0) + 0.08));
  for (int m : {32, 128, 512}) {
    const auto unit = uniform_quantile(Polytope::interval(-0.5, 0.5), m).translated(0.5);
    CHECK(std::abs(macroscopic_pair_energy(unit, PairPotential(sq)) - 1.0 / 6.0) <= 1.0 / (double(m) * m));
    // E_+(mu) = 2 ∫ X(t)(2t - 1) dt, here 1/3
    double quad = 0.0;
    for (int i = 0; i < m; ++i) quad += 2.0 * unit[i] * (2.0 * (i + 0.5) / m - 1.0) / m;
    CHECK(std::abs(macroscopic_newtonian(unit, 1) - quad) <= 1.0 / m);
    CHECK(std::abs(macroscopic_newtonian(unit, 1) - 1.0 / 3.0) <= 1.0 / m);
  }
}

TEST_CASE("property: empirical pair energy approaches the macroscopic one") {
  std::mt19937_64 gen(33);
  const PairPotential morse(Morse{2.0, 1.5, 0.7, 2.0});
  double previous = INFINITY;
  for (int n : {10, 40, 160, 640}) {
    const Eigen::VectorXd x = test::sorted_normals(gen, n);
    const auto mu = from_samples(std::vector<double>(x.data(), x.data() + n), n);
    const double micro = pair_energy(x, morse) / n;
    const double gap = std::abs(macroscopic_pair_energy(mu, morse) - micro) / std::abs(micro);
    CHECK(gap < previous);
    previous = gap;
  }
  CHECK(previous < 0.01);
}

TEST_CASE("free energies") {
  const auto mu = normal_quantile(0.0, 1.3, 128);
  const auto spec = EnergySpec::make(External{ConfiningPotential(QuadraticPotential{1.0, 0.0})});
  CHECK(free_energy(mu, spec, kInfiniteBeta) == macroscopic_energy(mu, spec));
  CHECK(free_energy(mu, spec, 2.0) == doctest::Approx(macroscopic_energy(mu, spec) + entropy(mu) / 2.0));
  const Polytope p = Polytope::interval(-1.0, 1.0);
  CHECK(weighted_free_energy(mu, p, 1.0, ConfiningPotential(QuadraticPotential{1.0, 0.0})) ==
        doctest::Approx(weighted_free_energy(mu, p, 1.0, ConfiningPotential(QuadraticPotential{5.0, 2.0}))));
  CHECK(weighted_free_energy(mu, p, 0.0, ConfiningPotential(QuadraticPotential{1.0, 0.0})) ==
        doctest::Approx(potential_energy(mu, ConfiningPotential(QuadraticPotential{1.0, 0.0})) + entropy(mu)));
}
