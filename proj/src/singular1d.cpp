#include "wgflow/singular1d.hpp"

#include <algorithm>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <limits>

#include "wgflow/energies.hpp"
#include "wgflow/errors.hpp"

namespace wgflow {

OrderedParticles OrderedParticles::equal_masses(Eigen::VectorXd positions) {
  const Eigen::Index n = positions.size();
  OrderedParticles p{std::move(positions), Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n))};
  p.validate();
  return p;
}

void OrderedParticles::validate() const {
  if (positions.size() == 0) throw InvalidArgument("ordered state needs at least one particle");
  if (masses.size() != positions.size()) throw InvalidArgument("one mass per position required");
  if (!positions.allFinite()) throw InvalidArgument("positions must be finite");
  for (Eigen::Index i = 0; i + 1 < positions.size(); ++i)
    if (positions(i + 1) < positions(i)) throw InvalidArgument("positions must be nondecreasing");
  if ((masses.array() <= 0.0).any()) throw InvalidArgument("masses must be positive");
  if (std::abs(masses.sum() - 1.0) > 1e-12) throw InvalidArgument("masses must sum to 1");
}

Eigen::VectorXd OrderedParticles::expand(int n) const {
  Eigen::VectorXd out(n);
  int k = 0;
  for (Eigen::Index i = 0; i < size(); ++i) {
    int mult = static_cast<int>(std::lround(masses(i) * n));
    for (int r = 0; r < mult && k < n; ++r) out(k++) = positions(i);
  }
  if (k != n) throw InvalidArgument("masses are not multiples of 1/n");
  return out;
}

Eigen::VectorXd isotonic_project(const Eigen::VectorXd& y, const Eigen::VectorXd& weights) {
  const Eigen::Index n = y.size();
  if (weights.size() != n) throw InvalidArgument("one weight per entry required");
  if (!y.allFinite()) throw InvalidArgument("isotonic projection needs finite input");
  if ((weights.array() <= 0.0).any()) throw InvalidArgument("weights must be positive");
  // blocks on a stack: weighted mean, total weight, length
  std::vector<double> mean, wsum;
  std::vector<Eigen::Index> len;
  for (Eigen::Index i = 0; i < n; ++i) {
    mean.push_back(y(i));
    wsum.push_back(weights(i));
    len.push_back(1);
    while (mean.size() > 1 && mean[mean.size() - 2] > mean.back()) {
      double w = wsum.back() + wsum[wsum.size() - 2];
      double m = (mean.back() * wsum.back() + mean[mean.size() - 2] * wsum[wsum.size() - 2]) / w;
      Eigen::Index l = len.back() + len[len.size() - 2];
      mean.pop_back(), wsum.pop_back(), len.pop_back();
      mean.back() = m, wsum.back() = w, len.back() = l;
    }
  }
  Eigen::VectorXd out(n);
  Eigen::Index k = 0;
  for (std::size_t b = 0; b < mean.size(); ++b)
    for (Eigen::Index r = 0; r < len[b]; ++r) out(k++) = mean[b];
  return out;
}

Eigen::VectorXd isotonic_project(const Eigen::VectorXd& y) {
  return isotonic_project(y, Eigen::VectorXd::Ones(y.size()));
}

double ordered_energy(const OrderedParticles& x, const PairPotential& pot) {
  const Eigen::Index n = x.size();
  double e = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    e += x.masses(i) * x.masses(i) * pot.w(0.0);
    for (Eigen::Index j = i + 1; j < n; ++j) e += 2.0 * x.masses(i) * x.masses(j) * pot.w(x.positions(j) - x.positions(i));
    if (!pot.confinement().is_zero()) e += x.masses(i) * pot.confinement().value(x.positions(i));
  }
  return e;
}

Eigen::VectorXd ordered_gradient(const OrderedParticles& x, const PairPotential& pot) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double d = pot.dw_plus(x.positions(j) - x.positions(i));
      g(i) -= 2.0 * x.masses(j) * d;
      g(j) += 2.0 * x.masses(i) * d;
    }
    if (!pot.confinement().is_zero()) g(i) += pot.confinement().d1(x.positions(i));
  }
  return g;
}

OrderedParticles merge_clusters(const OrderedParticles& x) {
  std::vector<double> pos, mass;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!pos.empty() && x.positions(i) == pos.back()) {
      mass.back() += x.masses(i);
    } else {
      pos.push_back(x.positions(i));
      mass.push_back(x.masses(i));
    }
  }
  return {Eigen::Map<Eigen::VectorXd>(pos.data(), static_cast<Eigen::Index>(pos.size())),
          Eigen::Map<Eigen::VectorXd>(mass.data(), static_cast<Eigen::Index>(mass.size()))};
}

namespace {

bool affine_on_cone(const PairPotential& pot) {
  return std::holds_alternative<AbsKernel>(pot.kernel()) && pot.confinement().is_zero();
}

double prox_objective(const OrderedParticles& z, const OrderedParticles& x, const PairPotential& pot, double tau) {
  return (z.positions - x.positions).cwiseAbs2().dot(x.masses) / (2.0 * tau) + ordered_energy(z, pot);
}

}  // namespace

ProxResult prox_step_ordered(const OrderedParticles& x, const PairPotential& pot, double tau, const ProxOptions& opts) {
  x.validate();
  if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
  if (pot.singularity() == SingularityClass::Strong)
    throw InvalidArgument("proximal steps need a kernel finite at 0; use repulsive_flow");
  ProxResult res;
  if (affine_on_cone(pot)) {
    // E is linear on the cone, so the step is one weighted isotonic regression
    Eigen::VectorXd y = x.positions - tau * ordered_gradient(x, pot);
    res.state = merge_clusters({isotonic_project(y, x.masses), x.masses});
    res.iterations = 1;
    return res;
  }
  // projected Newton with the diagonal Hessian as metric
  const Eigen::Index n = x.size();
  OrderedParticles z = x;
  double f = prox_objective(z, x, pot, tau);
  res.converged = false;
  for (int it = 1; it <= opts.max_iters; ++it) {
    res.iterations = it;
    Eigen::VectorXd grad = x.masses.cwiseProduct((z.positions - x.positions) / tau + ordered_gradient(z, pot));
    Eigen::VectorXd h(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double curv = 0.0;
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i) curv += 2.0 * x.masses(j) * pot.d2w(z.positions(i) - z.positions(j));
      curv += pot.confinement().d2(z.positions(i));
      if (!std::isfinite(curv)) curv = 0.0;
      h(i) = x.masses(i) * std::max(1.0 / tau + curv, 0.5 / tau);
    }
    double alpha = 1.0;
    OrderedParticles trial = z;
    double ft = f;
    for (int ls = 0; ls < 60; ++ls) {
      trial.positions = isotonic_project(z.positions - alpha * grad.cwiseQuotient(h), h);
      ft = prox_objective(trial, x, pot, tau);
      if (ft <= f + 1e-15 * std::abs(f)) break;
      alpha *= 0.5;
    }
    const double move = (trial.positions - z.positions).cwiseAbs().maxCoeff();
    if (ft <= f + 1e-15 * std::abs(f)) {
      z = trial;
      f = ft;
    }
    if (move <= opts.tol * std::max(1.0, z.positions.cwiseAbs().maxCoeff())) {
      res.converged = true;
      break;
    }
  }
  res.state = merge_clusters(z);
  return res;
}

OrderedTrajectory sticky_flow(const OrderedParticles& x0, const PairPotential& pot, const StickyConfig& cfg) {
  if (!(cfg.tau > 0.0) || !(cfg.t_end >= cfg.tau)) throw InvalidArgument("sticky flow needs 0 < tau <= t_end");
  if (cfg.n_save < 1) throw InvalidArgument("n_save must be >= 1");
  x0.validate();
  OrderedTrajectory traj;
  OrderedParticles x = merge_clusters(x0);
  traj.times.push_back(0.0);
  traj.states.push_back(x);
  traj.energies.push_back(ordered_energy(x, pot));
  const int steps = static_cast<int>(std::ceil(cfg.t_end / cfg.tau - 1e-9));
  for (int s = 1; s <= steps; ++s) {
    const double h = s == steps ? cfg.t_end - (s - 1) * cfg.tau : cfg.tau;
    ProxResult r = prox_step_ordered(x, pot, h, cfg.prox);
    traj.converged = traj.converged && r.converged;
    x = std::move(r.state);
    if (s % cfg.n_save == 0 || s == steps) {
      traj.times.push_back(s == steps ? cfg.t_end : s * cfg.tau);
      traj.states.push_back(x);
      traj.energies.push_back(ordered_energy(x, pot));
    }
  }
  traj.steps = steps;
  return traj;
}

OrderedTrajectory repulsive_flow(const Eigen::VectorXd& x0, const PairPotential& pot, const RepulsiveConfig& cfg) {
  namespace ode = boost::numeric::odeint;
  if (pot.singularity() != SingularityClass::Strong)
    throw InvalidArgument("repulsive_flow needs a kernel that blows up at 0");
  if (!(cfg.t_end > 0.0) || !(cfg.save_dt > 0.0)) throw InvalidArgument("t_end and save_dt must be positive");
  const Eigen::Index n = x0.size();
  if (n < 2) throw InvalidArgument("repulsive_flow needs N >= 2");
  for (Eigen::Index i = 0; i + 1 < n; ++i)
    if (!(x0(i + 1) > x0(i))) throw InvalidArgument("repulsive_flow needs strictly increasing positions");

  using State = std::vector<double>;
  const double scale = 2.0 / static_cast<double>(n - 1);
  auto rhs = [&](const State& x, State& dx, double) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i) acc += pot.dw(x[i] - x[j]);
      dx[i] = -scale * acc - pot.confinement().d1(x[i]);
    }
  };
  auto min_gap = [&](const State& x) {
    double g = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i + 1 < n; ++i) g = std::min(g, x[i + 1] - x[i]);
    return g;
  };
  auto energy = [&](const State& x) {
    return pair_energy(Eigen::Map<const Eigen::VectorXd>(x.data(), n), pot, PairNormalization::ExcludeDiagonal);
  };
  auto record = [&](OrderedTrajectory& tr, const State& x, double t) {
    tr.times.push_back(t);
    tr.states.push_back(OrderedParticles::equal_masses(Eigen::Map<const Eigen::VectorXd>(x.data(), n)));
    tr.energies.push_back(energy(x));
  };

  auto stepper = ode::make_controlled(cfg.abs_tol, cfg.rel_tol, ode::runge_kutta_dopri5<State>());
  State x(x0.data(), x0.data() + n), dx(n);
  OrderedTrajectory traj;
  record(traj, x, 0.0);
  double t = 0.0, dt = 1e-3 * cfg.save_dt;
  int k = 1;
  while (t < cfg.t_end) {
    const double target = std::min(cfg.t_end, k * cfg.save_dt);
    while (t < target) {
      rhs(x, dx, t);
      double speed = 0.0;
      for (double v : dx) speed = std::max(speed, std::abs(v));
      double cap = speed > 0.0 ? cfg.max_displacement * min_gap(x) / speed : target - t;
      double h = std::min({dt, cap, target - t});
      ode::controlled_step_result res = ode::fail;
      for (int tries = 0; tries < 200 && res == ode::fail; ++tries) res = stepper.try_step(rhs, x, t, h);
      if (res == ode::fail) throw ConvergenceFailure("repulsive flow step size control failed");
      dt = h;  // suggested next step
      if (target - t < 1e-13 * std::max(1.0, target)) t = target;
      ++traj.steps;
      if (min_gap(x) < 1e-12) throw NonFiniteState("particle gap fell below 1e-12", t);
    }
    record(traj, x, t);
    ++k;
  }
  return traj;
}

}  // namespace wgflow
