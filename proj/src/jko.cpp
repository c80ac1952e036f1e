#include "wgflow/jko.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wgflow/errors.hpp"
#include "wgflow/singular1d.hpp"

namespace wgflow {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

const Polytope* body_of(const EnergySpec& spec) {
  return std::visit(overloaded{
                        [](const Permanental& p) -> const Polytope* { return p.body.get(); },
                        [](const Tropical& p) -> const Polytope* { return p.body.get(); },
                        [](const WeightedPermanental& p) -> const Polytope* { return p.body.get(); },
                        [](const auto&) -> const Polytope* { return nullptr; },
                    },
                    spec.kind);
}

// Thomas algorithm; false if a pivot is not positive
bool solve_tridiagonal(const Eigen::VectorXd& diag, const Eigen::VectorXd& off, const Eigen::VectorXd& rhs,
                       Eigen::VectorXd& out) {
  const Eigen::Index n = diag.size();
  Eigen::VectorXd c(n), d(n);
  double piv = diag(0);
  if (!(piv > 0.0)) return false;
  c(0) = n > 1 ? off(0) / piv : 0.0;
  d(0) = rhs(0) / piv;
  for (Eigen::Index i = 1; i < n; ++i) {
    piv = diag(i) - off(i - 1) * c(i - 1);
    if (!(piv > 0.0)) return false;
    c(i) = i + 1 < n ? off(i) / piv : 0.0;
    d(i) = (rhs(i) - off(i - 1) * d(i - 1)) / piv;
  }
  out.resize(n);
  out(n - 1) = d(n - 1);
  for (Eigen::Index i = n - 2; i >= 0; --i) out(i) = d(i) - c(i) * out(i + 1);
  return true;
}

bool strictly_increasing(const Eigen::VectorXd& x) {
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i)
    if (!(x(i + 1) > x(i))) return false;
  return true;
}

}  // namespace

GridFreeEnergy::GridFreeEnergy(const EnergySpec& spec, double beta, int m)
    : m_(m), beta_(beta), lambda_(spec.lambda_bound), linear_(Eigen::VectorXd::Zero(m)) {
  if (m < 2) throw InvalidArgument("grid size must be >= 2");
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive or infinite");
  if (spec.dimension() != 1) throw InvalidArgument("grid free energies are only available in 1D");
  auto ot_linear = [&](const Polytope& body, double weight) {
    linear_ += weight * uniform_quantile(body, m).nodes() / static_cast<double>(m);
  };
  std::visit(overloaded{
                 [&](const Permanental& p) { ot_linear(*p.body, 1.0); },
                 [&](const Tropical& p) { ot_linear(*p.body, 1.0); },
                 [&](const WeightedPermanental& p) {
                   if (p.gamma != 0.0) ot_linear(*p.body, p.gamma);
                   potential_weight_ = 1.0 - p.gamma;
                   v_ = p.v;
                 },
                 [&](const PairInteraction& p) {
                   pair_ = p.potential;
                   pair_self_term_ = p.potential.singularity() != SingularityClass::Strong;
                   potential_weight_ = 1.0;
                   v_ = p.potential.confinement();
                 },
                 [&](const Newtonian1D& n) {
                   const double mm = static_cast<double>(m) * m;
                   for (int i = 0; i < m; ++i) linear_(i) = n.sign * 4.0 * (i + 1 - 0.5 * (m + 1)) / mm;
                 },
                 [&](const External& e) {
                   potential_weight_ = 1.0;
                   v_ = e.v;
                 },
             },
             spec.kind);
  if (v_.is_zero()) potential_weight_ = 0.0;
}

double GridFreeEnergy::value(const Eigen::VectorXd& x) const {
  if (x.size() != m_) throw InvalidArgument("node vector does not match the grid size");
  if (!x.allFinite()) return kInf;
  const double md = m_;
  double f = linear_.dot(x);
  if (potential_weight_ != 0.0) {
    double s = 0.0;
    for (int i = 0; i < m_; ++i) s += v_.value(x(i));
    f += potential_weight_ * s / md;
  }
  if (pair_) {
    double s = 0.0;
    for (int i = 0; i < m_; ++i)
      for (int j = i + 1; j < m_; ++j) s += 2.0 * pair_->w(x(j) - x(i));
    if (pair_self_term_) s += md * pair_->w(0.0);
    f += s / (md * md);
  }
  if (!std::isinf(beta_)) {
    double h = 0.0;
    for (int i = 0; i + 1 < m_; ++i) {
      const double g = x(i + 1) - x(i);
      if (!(g > 0.0)) return kInf;
      h -= std::log(md * g);
    }
    f += h / ((md - 1.0) * beta_);
  }
  return std::isnan(f) ? kInf : f;
}

Eigen::VectorXd GridFreeEnergy::gradient(const Eigen::VectorXd& x) const {
  const double md = m_;
  Eigen::VectorXd g = linear_;
  if (potential_weight_ != 0.0)
    for (int i = 0; i < m_; ++i) g(i) += potential_weight_ * v_.d1(x(i)) / md;
  if (pair_) {
    const double c = 2.0 / (md * md);
    for (int i = 0; i < m_; ++i)
      for (int j = i + 1; j < m_; ++j) {
        const double d = pair_->dw_plus(x(j) - x(i));
        g(i) -= c * d;
        g(j) += c * d;
      }
  }
  if (!std::isinf(beta_)) {
    const double c = 1.0 / ((md - 1.0) * beta_);
    for (int i = 0; i + 1 < m_; ++i) {
      const double r = c / (x(i + 1) - x(i));
      g(i) += r;
      g(i + 1) -= r;
    }
  }
  return g;
}

void GridFreeEnergy::hessian(const Eigen::VectorXd& x, Eigen::VectorXd& diag, Eigen::VectorXd& off,
                             Eigen::MatrixXd* dense) const {
  const double md = m_;
  diag = Eigen::VectorXd::Zero(m_);
  off = Eigen::VectorXd::Zero(m_ - 1);
  if (potential_weight_ != 0.0)
    for (int i = 0; i < m_; ++i) diag(i) += potential_weight_ * v_.d2(x(i)) / md;
  if (!std::isinf(beta_)) {
    const double c = 1.0 / ((md - 1.0) * beta_);
    for (int i = 0; i + 1 < m_; ++i) {
      const double g = x(i + 1) - x(i);
      const double r = c / (g * g);
      diag(i) += r;
      diag(i + 1) += r;
      off(i) -= r;
    }
  }
  if (dense) {
    dense->setZero(m_, m_);
    if (pair_) {
      const double c = 2.0 / (md * md);
      for (int i = 0; i < m_; ++i)
        for (int j = i + 1; j < m_; ++j) {
          double h = pair_->d2w(x(j) - x(i));
          if (!std::isfinite(h)) h = 0.0;
          (*dense)(i, j) -= c * h;
          (*dense)(j, i) -= c * h;
          (*dense)(i, i) += c * h;
          (*dense)(j, j) += c * h;
        }
    }
  }
}

void JkoConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("tau must be positive");
  if (m < 2) throw InvalidArgument("grid size M must be >= 2");
  if (!(t_end >= tau) || !std::isfinite(t_end)) throw InvalidArgument("t_end must be finite and >= tau");
  if (!(inner_tol > 0.0)) throw InvalidArgument("inner_tol must be positive");
  if (inner_max_iters < 1) throw InvalidArgument("inner_max_iters must be >= 1");
}

int JkoConfig::steps() const { return static_cast<int>(std::ceil(t_end / tau - 1e-9)); }

JkoStep jko_step(const QuantileMeasure& prev, const GridFreeEnergy& f, double tau, double inner_tol,
                 int inner_max_iters) {
  const int m = f.grid_size();
  if (prev.size() != m) throw InvalidArgument("measure does not match the grid size");
  if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
  const bool noisy = !std::isinf(f.beta());
  const Eigen::VectorXd& xp = prev.nodes();
  if (noisy && !strictly_increasing(xp))
    throw InvalidArgument("entropic steps need strictly increasing nodes");
  const double md = m, prox = 1.0 / (tau * md);

  auto objective = [&](const Eigen::VectorXd& x) { return 0.5 * prox * (x - xp).squaredNorm() + f.value(x); };
  auto grad_j = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return prox * (x - xp) + f.gradient(x); };

  Eigen::VectorXd x = xp;
  double jx = objective(x);
  JkoStep out{prev, jx, 0.0, 0, kInf, false};
  Eigen::VectorXd diag, off;
  Eigen::MatrixXd dense;
  for (int it = 0; it <= inner_max_iters; ++it) {
    Eigen::VectorXd g = grad_j(x);
    f.hessian(x, diag, off, f.has_pair_term() ? &dense : nullptr);
    diag.array() += prox;
    if (f.has_pair_term()) diag += dense.diagonal();

    if (noisy) {
      out.residual = md * g.cwiseAbs().maxCoeff();
    } else {
      Eigen::VectorXd h = diag.cwiseMax(0.5 * prox);
      out.residual = (x - isotonic_project(x - g.cwiseQuotient(h), h)).cwiseAbs().maxCoeff() / tau;
    }
    out.iterations = it;
    if (out.residual <= inner_tol) {
      out.converged = true;
      break;
    }
    if (it == inner_max_iters) break;

    Eigen::VectorXd trial;
    double jt = kInf;
    if (noisy) {
      // damped Newton; the entropy keeps trial points strictly increasing
      Eigen::VectorXd d;
      bool ok;
      if (f.has_pair_term()) {
        Eigen::MatrixXd h = dense;
        h.diagonal() = diag;
        for (int i = 0; i + 1 < m; ++i) h(i, i + 1) += off(i), h(i + 1, i) += off(i);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
        ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
        if (ok) d = ldlt.solve(-g);
      } else {
        ok = solve_tridiagonal(diag, off, -g, d);
      }
      if (!ok || !(g.dot(d) < 0.0)) d = -g / prox;
      const double slope = g.dot(d);
      // near the minimizer the decrease drops below the resolution of J; a
      // full Newton step is then judged by the gradient instead
      const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (std::abs(jx) + 1.0);
      trial = x + d;
      if (-slope <= noise && strictly_increasing(trial) && objective(trial) <= jx + noise &&
          grad_j(trial).cwiseAbs().maxCoeff() < g.cwiseAbs().maxCoeff()) {
        x = std::move(trial);
        jx = objective(x);
        continue;
      }
      double alpha = 1.0;
      for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
        trial = x + alpha * d;
        if (!strictly_increasing(trial)) continue;
        jt = objective(trial);
        if (jt <= jx + 1e-4 * alpha * slope + 1e-15 * std::abs(jx)) break;
      }
    } else {
      // projected Newton in the diagonal metric, projection by PAVA
      Eigen::VectorXd h = diag.cwiseMax(0.5 * prox);
      Eigen::VectorXd step = g.cwiseQuotient(h);
      double alpha = 1.0;
      for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
        trial = isotonic_project(x - alpha * step, h);
        jt = objective(trial);
        if (jt <= jx + 1e-15 * std::abs(jx)) break;
      }
    }
    if (!(jt <= jx + 1e-15 * std::abs(jx))) break;  // no descent left at working precision
    const bool stalled = (trial - x).cwiseAbs().maxCoeff() == 0.0;
    x = std::move(trial);
    jx = jt;
    if (stalled) break;
  }
  out.measure = QuantileMeasure(x);
  out.objective = jx;
  out.free_energy = f.value(x);
  return out;
}

JkoTrajectory jko_flow(const QuantileMeasure& mu0, const GridFreeEnergy& f, const JkoConfig& cfg) {
  cfg.validate();
  if (cfg.m != f.grid_size() || mu0.size() != cfg.m) throw InvalidArgument("grid sizes of config, energy and measure differ");
  JkoTrajectory traj;
  traj.steps.push_back({0.0, mu0, f.value(mu0), f.value(mu0), 0, 0.0});
  const int steps = cfg.steps();
  for (int s = 1; s <= steps; ++s) {
    const double h = s == steps ? cfg.t_end - (s - 1) * cfg.tau : cfg.tau;
    const QuantileMeasure& prev = traj.steps.back().measure;
    JkoStep r = jko_step(prev, f, h, cfg.inner_tol, cfg.inner_max_iters);
    traj.converged = traj.converged && r.converged;
    const double t = s == steps ? cfg.t_end : s * cfg.tau;
    const double move = wasserstein2_1d(prev, r.measure);
    traj.steps.push_back({t, std::move(r.measure), r.objective, r.free_energy, r.iterations, move});
  }
  return traj;
}

double evi_residual(const JkoTrajectory& traj, const GridFreeEnergy& f, const std::vector<QuantileMeasure>& probes) {
  if (traj.steps.size() < 3) throw InvalidArgument("EVI check needs at least three records");
  double worst = -kInf;
  for (const auto& v : probes) {
    const double fv = f.value(v);
    for (std::size_t j = 0; j + 1 < traj.steps.size(); ++j) {
      const auto& a = traj.steps[j];
      const auto& b = traj.steps[j + 1];
      const double da = std::pow(wasserstein2_1d(a.measure, v), 2);
      const double db = std::pow(wasserstein2_1d(b.measure, v), 2);
      const double lhs = (db - da) / (2.0 * (b.time - a.time));
      const double rhs = fv - b.free_energy - 0.5 * f.lambda() * db;
      worst = std::max(worst, lhs - rhs);
    }
  }
  return worst;
}

std::vector<QuantileMeasure> default_probes(const JkoTrajectory& traj, const EnergySpec& spec) {
  if (traj.steps.empty()) throw InvalidArgument("empty trajectory");
  const QuantileMeasure& last = traj.steps.back().measure;
  const int m = last.size();
  std::vector<QuantileMeasure> probes{traj.steps.front().measure, last};
  if (const Polytope* body = body_of(spec)) probes.push_back(uniform_quantile(*body, m));
  const double mean = barycenter_1d(last);
  double sd = std::sqrt(variance(last));
  if (!(sd > 0.0)) sd = 1.0;
  for (double c : {0.5, 1.0, 2.0}) probes.push_back(normal_quantile(mean, c * sd, m));
  return probes;
}

StationaryResult stationary_limit(const GridFreeEnergy& f, const JkoConfig& cfg, const QuantileMeasure& mu0, double tol,
                                  double max_time) {
  cfg.validate();
  if (mu0.size() != f.grid_size()) throw InvalidArgument("measure does not match the grid size");
  StationaryResult res{mu0};
  const int max_steps = static_cast<int>(std::ceil(max_time / cfg.tau));
  for (int s = 1; s <= max_steps; ++s) {
    JkoStep r = jko_step(res.measure, f, cfg.tau, cfg.inner_tol, cfg.inner_max_iters);
    res.last_movement = wasserstein2_1d(res.measure, r.measure);
    res.measure = std::move(r.measure);
    res.steps = s;
    res.time = s * cfg.tau;
    if (res.last_movement <= tol * cfg.tau) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace wgflow
