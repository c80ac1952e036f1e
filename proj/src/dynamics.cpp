#include "wgflow/dynamics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "wgflow/errors.hpp"

namespace wgflow {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// rank-based gradient of E_±^{(N)}: sign (2/N) (#{x_j < x_i} - #{x_j > x_i})
Eigen::VectorXd newtonian_gradient(const Eigen::VectorXd& x, int sign) {
  const Eigen::Index n = x.size();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x(a) < x(b); });
  Eigen::VectorXd g(n);
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    while (j + 1 < n && x(order[j + 1]) == x(order[i])) ++j;
    // ties contribute sign(0) = 0
    const double below = static_cast<double>(i), above = static_cast<double>(n - 1 - j);
    for (Eigen::Index k = i; k <= j; ++k) g(order[k]) = sign * 2.0 * (below - above) / static_cast<double>(n);
    i = j + 1;
  }
  return g;
}

Eigen::MatrixXd potential_gradient(const Eigen::MatrixXd& x, const ConfiningPotential& v) {
  Eigen::MatrixXd g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) g.row(i) = v.gradient(Eigen::VectorXd(x.row(i).transpose())).transpose();
  return g;
}

bool order_preserved(const Eigen::VectorXd& before, const Eigen::VectorXd& after) {
  const Eigen::Index n = before.size();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return before(a) < before(b); });
  for (Eigen::Index k = 0; k + 1 < n; ++k)
    if (!(after(order[k]) < after(order[k + 1]))) return false;
  return true;
}

bool needs_guard(const EnergySpec& spec, double beta) {
  if (std::isinf(beta)) return false;
  auto* p = std::get_if<PairInteraction>(&spec.kind);
  return p && p->potential.singularity() == SingularityClass::Strong;
}

}  // namespace

void SdeConfig::validate() const {
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive or infinite");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be positive");
  if (!(t_end >= dt) || !std::isfinite(t_end)) throw InvalidArgument("t_end must be finite and >= dt");
  if (n_save < 1) throw InvalidArgument("n_save must be >= 1");
  if (max_guard_halvings < 0) throw InvalidArgument("max_guard_halvings must be >= 0");
}

int SdeConfig::steps() const { return static_cast<int>(std::ceil(t_end / dt - 1e-9)); }

DriftEvaluator::DriftEvaluator(const EnergySpec& spec, GradientOptions opts) : spec_(spec), opts_(opts) {}

Eigen::MatrixXd DriftEvaluator::operator()(const Eigen::MatrixXd& x) {
  auto perm_grad = [&](const LatticeSample& sample) -> Eigen::MatrixXd {
    GradientOptions o = opts_;
    if (o.method == GradientMethod::Exact && sample.count() > static_cast<std::size_t>(o.cap))
      throw CapExceeded("N exceeds the exact permanent cap; select Sinkhorn gradients");
    PermanentalGradient g = permanental_gradient(x, sample, o, warm_.size() ? &warm_ : nullptr);
    if (!g.exact) {
      warm_ = g.dual;
      last_gap_ = g.duality_gap;
    }
    return g.gradient;
  };
  Eigen::MatrixXd grad = std::visit(
      overloaded{
          [&](const Permanental& p) -> Eigen::MatrixXd { return perm_grad(p.sample); },
          [&](const Tropical& p) -> Eigen::MatrixXd {
            TropicalResult t = tropical_energy(x, p.sample);
            Eigen::MatrixXd g(x.rows(), x.cols());
            for (Eigen::Index i = 0; i < x.rows(); ++i) g.row(i) = p.sample.points.row(t.assignment[i]);
            return g;
          },
          [&](const WeightedPermanental& p) -> Eigen::MatrixXd {
            Eigen::MatrixXd g = (1.0 - p.gamma) * potential_gradient(x, p.v);
            if (p.gamma > 0.0) g += p.gamma * perm_grad(p.sample);
            return g;
          },
          [&](const PairInteraction& p) -> Eigen::MatrixXd {
            return pair_gradient(Eigen::VectorXd(x.col(0)), p.potential, p.normalization);
          },
          [&](const Newtonian1D& n) -> Eigen::MatrixXd { return newtonian_gradient(Eigen::VectorXd(x.col(0)), n.sign); },
          [&](const External& e) -> Eigen::MatrixXd { return potential_gradient(x, e.v); },
      },
      spec_.kind);
  return -grad;
}

Eigen::MatrixXd drift_eval(const Eigen::MatrixXd& x, const EnergySpec& spec, const GradientOptions& opts) {
  DriftEvaluator eval(spec, opts);
  return eval(x);
}

ParticleTrajectory simulate_sde(const Eigen::MatrixXd& x0, const EnergySpec& spec, const SdeConfig& cfg) {
  cfg.validate();
  if (!x0.allFinite()) throw InvalidArgument("initial state must be finite");
  if (std::size_t need = spec.required_particles(); need && need != static_cast<std::size_t>(x0.rows()))
    throw InvalidArgument("initial state has the wrong number of particles for this energy");
  if (x0.cols() != spec.dimension()) throw InvalidArgument("initial state has the wrong dimension for this energy");

  ParticleTrajectory traj;
  traj.initial = x0;
  traj.seed = cfg.seed;
  traj.config = cfg;
  const CounterRng rng(cfg.seed);
  DriftEvaluator drift(spec, cfg.gradient);
  const bool noisy = !std::isinf(cfg.beta);
  const bool guard = needs_guard(spec, cfg.beta);
  const Eigen::Index n = x0.rows(), dim = x0.cols();
  const int steps = cfg.steps();

  auto noise = [&](std::uint64_t path, int step) {
    Eigen::MatrixXd xi(n, dim);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index d = 0; d < dim; ++d)
        xi(i, d) = rng.normal(path, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(i * dim + d));
    return xi;
  };

  // one Euler-Maruyama step of length h; under the guard a step that would
  // reorder particles is replaced by two half steps with fresh noise
  std::function<void(Eigen::MatrixXd&, double, int, std::uint64_t, int)> advance =
      [&](Eigen::MatrixXd& x, double h, int depth, std::uint64_t path, int step) {
        Eigen::MatrixXd y = x + h * drift(x);
        if (noisy) y += std::sqrt(2.0 * h / cfg.beta) * noise(path, step);
        if (drift.last_duality_gap() > traj.max_duality_gap) traj.max_duality_gap = drift.last_duality_gap();
        if (guard && !order_preserved(x.col(0), y.col(0))) {
          if (depth < cfg.max_guard_halvings) {
            if (depth == 0) ++traj.guard_events;
            advance(x, 0.5 * h, depth + 1, 2 * path, step);
            advance(x, 0.5 * h, depth + 1, 2 * path + 1, step);
            return;
          }
          ++traj.guard_failures;
        }
        x = std::move(y);
      };

  Eigen::MatrixXd x = x0;
  for (int s = 1; s <= steps; ++s) {
    const double t0 = (s - 1) * cfg.dt;
    const double h = s == steps ? cfg.t_end - t0 : cfg.dt;
    advance(x, h, 0, 1, s);
    const double t = s == steps ? cfg.t_end : s * cfg.dt;
    if (!x.allFinite()) throw NonFiniteState("particle state became non-finite", t);
    if (s % cfg.n_save == 0 || s == steps) {
      traj.times.push_back(t);
      traj.states.push_back(x);
    }
  }
  traj.sinkhorn_used = cfg.gradient.method == GradientMethod::Sinkhorn &&
                       (std::holds_alternative<Permanental>(spec.kind) ||
                        std::holds_alternative<WeightedPermanental>(spec.kind));
  return traj;
}

int default_threads() {
  if (const char* env = std::getenv("WGFLOW_THREADS")) {
    int t = std::atoi(env);
    if (t > 0) return t;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

Ensemble ensemble_empirical(const InitialSampler& sampler, const EnergySpec& spec, const SdeConfig& cfg, int runs,
                            int threads) {
  if (runs < 1) throw InvalidArgument("ensemble needs at least one run");
  cfg.validate();
  if (threads <= 0) threads = default_threads();
  threads = std::min(threads, runs);

  std::vector<ParticleTrajectory> trajs(runs);
  std::vector<Eigen::MatrixXd> starts(runs);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int r = next++; r < runs; r = next++) {
      try {
        SdeConfig c = cfg;
        c.seed = cfg.seed + static_cast<std::uint64_t>(r);
        starts[r] = sampler(CounterRng(c.seed));
        trajs[r] = simulate_sde(starts[r], spec, c);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  Ensemble out;
  out.times = trajs.front().times;
  for (int r = 0; r < runs; ++r) {
    out.seeds.push_back(trajs[r].seed);
    out.initial.push_back({starts[r]});
    std::vector<EmpiricalMeasure> snaps;
    for (auto& s : trajs[r].states) snaps.push_back({std::move(s)});
    out.snapshots.push_back(std::move(snaps));
    out.guard_events += trajs[r].guard_events;
    out.guard_failures += trajs[r].guard_failures;
    out.sinkhorn_used = out.sinkhorn_used || trajs[r].sinkhorn_used;
    out.max_duality_gap = std::max(out.max_duality_gap, trajs[r].max_duality_gap);
  }
  return out;
}

}  // namespace wgflow
