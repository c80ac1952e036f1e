#include "wgflow/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wgflow/errors.hpp"
#include "wgflow/singular1d.hpp"

namespace wgflow {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool same_time(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

std::size_t find_time(const std::vector<double>& times, double t) {
  for (std::size_t i = 0; i < times.size(); ++i)
    if (same_time(times[i], t)) return i;
  throw InvalidArgument("checkpoint time is not on the time grid");
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

bool is_permanental(const EnergySpec& spec) {
  return std::holds_alternative<Permanental>(spec.kind) || std::holds_alternative<WeightedPermanental>(spec.kind);
}

// streaming log-sum-exp accumulator
struct LogSum {
  double m = -kInf;
  double s = 0.0;
  void add(double v) {
    if (v == -kInf) return;
    if (v > m) {
      s = s * std::exp(m - v) + 1.0;
      m = v;
    } else {
      s += std::exp(v - m);
    }
  }
  double value() const { return m == -kInf ? -kInf : m + std::log(s); }
};

double logsumexp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace

void PocConfig::validate() const {
  if (particle_counts.empty()) throw InvalidArgument("particle ladder is empty");
  for (int n : particle_counts)
    if (n < 1) throw InvalidArgument("particle counts must be positive");
  if (times.empty()) throw InvalidArgument("no checkpoint times");
  for (double t : times)
    if (!(t > 0.0)) throw InvalidArgument("checkpoint times must be positive");
  if (runs < 8) throw InvalidArgument("chaos statistics need at least 8 runs");
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
}

ChaosReport poc_experiment(const PocBenchmark& bench, const PocConfig& cfg) {
  cfg.validate();
  if (!bench.energy || !bench.sampler || !bench.reference) throw InvalidArgument("benchmark is incomplete");
  ChaosReport rep;
  rep.name = bench.name;
  rep.particle_counts = cfg.particle_counts;
  rep.times = cfg.times;
  rep.runs = cfg.runs;
  rep.dt = cfg.dt;
  rep.beta = bench.beta;
  const double t_end = *std::max_element(cfg.times.begin(), cfg.times.end());

  std::vector<QuantileMeasure> refs;
  for (double t : cfg.times) refs.push_back(bench.reference(t));

  for (std::size_t a = 0; a < cfg.particle_counts.size(); ++a) {
    const int n = cfg.particle_counts[a];
    const EnergySpec spec = bench.energy(n);
    const std::uint64_t base = cfg.seed + static_cast<std::uint64_t>(a) * 1'000'003ULL;
    std::vector<std::vector<double>> w2(cfg.times.size());
    std::vector<std::uint64_t> seeds;

    const auto* newton = std::get_if<Newtonian1D>(&spec.kind);
    if (newton && std::isinf(bench.beta)) {
      const PairPotential pot(AbsKernel{newton->sign});
      StickyConfig sc;
      sc.tau = cfg.dt;
      sc.t_end = t_end;
      for (int r = 0; r < cfg.runs; ++r) {
        const std::uint64_t seed = base + static_cast<std::uint64_t>(r);
        seeds.push_back(seed);
        Eigen::VectorXd x0 = bench.sampler(CounterRng(seed), n).col(0);
        std::sort(x0.data(), x0.data() + x0.size());
        OrderedTrajectory tr = sticky_flow(OrderedParticles::equal_masses(x0), pot, sc);
        for (std::size_t k = 0; k < cfg.times.size(); ++k) {
          const Eigen::VectorXd pts = tr.states[find_time(tr.times, cfg.times[k])].expand(n);
          w2[k].push_back(wasserstein2_empirical({pts.data(), static_cast<std::size_t>(pts.size())}, refs[k]));
        }
      }
      rep.notes.push_back("N=" + std::to_string(n) + ": deterministic Newtonian flow integrated by sticky proximal steps");
    } else {
      SdeConfig sc;
      sc.beta = bench.beta;
      sc.dt = cfg.dt;
      sc.t_end = t_end;
      sc.seed = base;
      sc.gradient = cfg.gradient;
      if (is_permanental(spec) && sc.gradient.method == GradientMethod::Exact &&
          n > sc.gradient.cap) {
        sc.gradient.method = GradientMethod::Sinkhorn;
        rep.notes.push_back("N=" + std::to_string(n) + " exceeds the exact permanent cap; Sinkhorn gradients used");
      }
      InitialSampler sampler = [&](const CounterRng& rng) { return bench.sampler(rng, n); };
      Ensemble ens = ensemble_empirical(sampler, spec, sc, cfg.runs, cfg.threads);
      seeds = ens.seeds;
      rep.sinkhorn_used = rep.sinkhorn_used || ens.sinkhorn_used;
      rep.max_duality_gap = std::max(rep.max_duality_gap, ens.max_duality_gap);
      if (ens.guard_failures > 0)
        rep.notes.push_back("N=" + std::to_string(n) + ": " + std::to_string(ens.guard_failures) +
                            " steps crossed particles after the maximal number of halvings");
      for (std::size_t k = 0; k < cfg.times.size(); ++k) {
        const std::size_t idx = find_time(ens.times, cfg.times[k]);
        for (int r = 0; r < cfg.runs; ++r) {
          const Eigen::VectorXd pts = ens.snapshots[r][idx].points.col(0);
          w2[k].push_back(wasserstein2_empirical({pts.data(), static_cast<std::size_t>(pts.size())}, refs[k]));
        }
      }
    }
    rep.seeds.push_back(seeds);
    std::vector<double> means, stds;
    for (auto& v : w2) {
      means.push_back(mean_of(v));
      stds.push_back(sample_std(v));
    }
    rep.mean_w2.push_back(means);
    rep.std_w2.push_back(stds);
  }
  return rep;
}

bool chaos_trend_holds(const ChaosReport& report, std::size_t time_index, int allowed_inversions) {
  int inversions = 0;
  for (std::size_t a = 0; a + 1 < report.particle_counts.size(); ++a) {
    const double m0 = report.mean_w2[a][time_index], m1 = report.mean_w2[a + 1][time_index];
    if (m1 <= m0) continue;
    const double s0 = report.std_w2[a][time_index], s1 = report.std_w2[a + 1][time_index];
    const double pooled = std::sqrt(0.5 * (s0 * s0 + s1 * s1));
    if (m1 - m0 > pooled) return false;
    ++inversions;
  }
  return inversions <= allowed_inversions;
}

std::function<QuantileMeasure(double)> jko_reference(const QuantileMeasure& mu0, const GridFreeEnergy& f,
                                                     const JkoConfig& cfg) {
  auto traj = std::make_shared<JkoTrajectory>(jko_flow(mu0, f, cfg));
  return [traj](double t) {
    for (const auto& rec : traj->steps)
      if (same_time(rec.time, t)) return rec.measure;
    throw InvalidArgument("reference time is not a multiple of the JKO step");
  };
}

void GibbsConfig::validate() const {
  if (!(step > 0.0)) throw InvalidArgument("MALA step must be positive");
  if (burn_in < 0 || samples < 1 || thin < 1) throw InvalidArgument("burn-in >= 0, samples >= 1 and thin >= 1 required");
  if (blocks < 2) throw InvalidArgument("divergence monitor needs at least 2 blocks");
  if (!(divergence_ratio > 1.0)) throw InvalidArgument("divergence ratio must exceed 1");
}

double mala_log_acceptance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const ScalarField& u,
                           const VectorField& grad_u, double step) {
  const double uy = u(y), ux = u(x);
  if (!std::isfinite(uy)) return -kInf;
  const double fwd = (y - x + step * grad_u(x)).squaredNorm();
  const double bwd = (x - y + step * grad_u(y)).squaredNorm();
  return -(uy - ux) - (bwd - fwd) / (4.0 * step);
}

GibbsResult mala_sample(const ScalarField& u, const VectorField& grad_u, const Eigen::MatrixXd& x0,
                        const GibbsConfig& cfg) {
  cfg.validate();
  if (!x0.allFinite()) throw InvalidArgument("initial state must be finite");
  const CounterRng rng(cfg.seed);
  const Eigen::Index rows = x0.rows(), cols = x0.cols();
  GibbsResult res;
  Eigen::MatrixXd x = x0;
  double ux = u(x);
  if (!std::isfinite(ux)) throw InvalidArgument("initial state has infinite energy");
  Eigen::MatrixXd gx = grad_u(x);
  const double sd = std::sqrt(2.0 * cfg.step);
  const long long total = cfg.burn_in + static_cast<long long>(cfg.samples) * cfg.thin;
  long long accepted = 0, iters = 0;
  std::vector<double> stat;
  for (long long it = 1; it <= total; ++it) {
    Eigen::MatrixXd xi(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index d = 0; d < cols; ++d)
        xi(i, d) = rng.normal(1, static_cast<std::uint64_t>(it), static_cast<std::uint64_t>(i * cols + d));
    Eigen::MatrixXd y = x - cfg.step * gx + sd * xi;
    const double uy = u(y);
    ++iters;
    if (std::isfinite(uy)) {
      Eigen::MatrixXd gy = grad_u(y);
      const double fwd = (y - x + cfg.step * gx).squaredNorm();
      const double bwd = (x - y + cfg.step * gy).squaredNorm();
      const double log_alpha = -(uy - ux) - (bwd - fwd) / (4.0 * cfg.step);
      if (std::log(rng.uniform(2, static_cast<std::uint64_t>(it), 0)) < log_alpha) {
        x = std::move(y);
        ux = uy;
        gx = std::move(gy);
        ++accepted;
      }
    }
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > cfg.escape_radius) {
      res.divergence_suspected = true;
      res.message = "non-normalizable suspected: chain escaped to infinity";
      break;
    }
    if (it > cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
      res.samples.push_back(x);
      stat.push_back(x.cwiseAbs().mean());
    }
  }
  res.acceptance = iters ? static_cast<double>(accepted) / iters : 0.0;

  // a normalizable target gives flat block means of |x|; a chain running off
  // to infinity gives steadily growing ones
  const int blocks = std::min<int>(cfg.blocks, static_cast<int>(stat.size()));
  if (blocks >= 2) {
    const std::size_t len = stat.size() / blocks;
    for (int b = 0; b < blocks; ++b)
      res.block_means.push_back(
          std::accumulate(stat.begin() + b * len, stat.begin() + (b + 1) * len, 0.0) / static_cast<double>(len));
    int rises = 0;
    for (int b = 0; b + 1 < blocks; ++b) rises += res.block_means[b + 1] > res.block_means[b];
    const double first = std::max(res.block_means.front(), 1.0);
    if (!res.divergence_suspected && res.block_means.back() > cfg.divergence_ratio * first &&
        rises >= static_cast<int>(std::ceil(0.7 * (blocks - 1)))) {
      res.divergence_suspected = true;
      res.message = "non-normalizable suspected: first moment grows along the chain";
    }
    res.geweke_z = geweke_z(stat);
  }
  return res;
}

GibbsResult mala_gibbs(const EnergySpec& spec, double beta, const Eigen::MatrixXd& x0, const GibbsConfig& cfg) {
  if (!(beta > 0.0) || std::isinf(beta)) throw InvalidArgument("Gibbs sampling needs a finite positive beta");
  ScalarField u = [&](const Eigen::MatrixXd& x) { return beta * microscopic_energy(x, spec); };
  auto drift = std::make_shared<DriftEvaluator>(spec);
  VectorField g = [&, drift](const Eigen::MatrixXd& x) -> Eigen::MatrixXd { return -beta * (*drift)(x); };
  return mala_sample(u, g, x0, cfg);
}

double geweke_z(const std::vector<double>& chain) {
  const std::size_t n = chain.size();
  if (n < 40) return 0.0;
  auto stats = [&](std::size_t lo, std::size_t hi) {
    const std::size_t len = hi - lo;
    const std::size_t batches = std::min<std::size_t>(20, len / 2);
    const std::size_t bl = len / batches;
    std::vector<double> means;
    for (std::size_t b = 0; b < batches; ++b)
      means.push_back(std::accumulate(chain.begin() + lo + b * bl, chain.begin() + lo + (b + 1) * bl, 0.0) / bl);
    const double s = sample_std(means);
    return std::pair{mean_of(means), s * s / static_cast<double>(batches)};
  };
  const auto [ma, va] = stats(0, n / 10);
  const auto [mb, vb] = stats(n / 2, n);
  const double v = va + vb;
  return v > 0.0 ? (ma - mb) / std::sqrt(v) : 0.0;
}

const char* to_string(Finiteness f) {
  switch (f) {
    case Finiteness::Finite: return "finite";
    case Finiteness::Infinite: return "infinite";
    default: return "inconclusive";
  }
}

void QuadratureConfig::validate() const {
  if (!(spacing > 0.0)) throw InvalidArgument("quadrature spacing must be positive");
  if (!(initial_half_width >= spacing)) throw InvalidArgument("initial box must contain at least one cell");
  if (doublings < 2) throw InvalidArgument("the finiteness test needs at least 2 doublings");
  if (!(rel_tol > 0.0)) throw InvalidArgument("rel_tol must be positive");
}

QuadratureResult partition_quadrature(const std::function<double(const Eigen::VectorXd&)>& energy, int n,
                                      double beta, const QuadratureConfig& cfg) {
  cfg.validate();
  if (n < 1 || n > 3) throw InvalidArgument("partition quadrature supports 1 <= N <= 3");
  if (!(beta > 0.0) || std::isinf(beta)) throw InvalidArgument("beta must be finite and positive");
  const int levels = cfg.doublings + 1;
  std::vector<long long> cells(levels);
  for (int k = 0; k < levels; ++k)
    cells[k] = std::llround(cfg.initial_half_width * std::ldexp(1.0, k) / cfg.spacing);
  const long long kmax = cells.back();
  if (std::pow(2.0 * kmax, n) > static_cast<double>(cfg.max_points)) throw CapExceeded("quadrature grid too large");

  // box level of each 1D cell index i in [-kmax, kmax)
  std::vector<int> level(2 * kmax);
  for (long long i = -kmax; i < kmax; ++i) {
    const long long reach = i >= 0 ? i + 1 : -i;
    int k = 0;
    while (cells[k] < reach) ++k;
    level[i + kmax] = k;
  }
  std::vector<LogSum> shells(levels);
  Eigen::VectorXd x(n);
  std::vector<long long> idx(n, -kmax);
  const double log_cell = n * std::log(cfg.spacing);
  for (;;) {
    int k = 0;
    for (int d = 0; d < n; ++d) {
      x(d) = (static_cast<double>(idx[d]) + 0.5) * cfg.spacing;
      k = std::max(k, level[idx[d] + kmax]);
    }
    const double e = energy(x);
    shells[k].add(std::isnan(e) ? -kInf : -beta * e);
    int d = 0;
    while (d < n && ++idx[d] == kmax) idx[d++] = -kmax;
    if (d == n) break;
  }

  QuadratureResult res;
  double acc = -kInf;
  std::vector<double> log_shell(levels);
  for (int k = 0; k < levels; ++k) {
    log_shell[k] = shells[k].value() + log_cell;
    acc = logsumexp(acc, log_shell[k]);
    res.half_widths.push_back(cells[k] * cfg.spacing);
    res.log_z.push_back(acc);
  }
  const double zk = res.log_z[levels - 1], zk1 = res.log_z[levels - 2];
  res.relative_change = std::isfinite(zk) ? -std::expm1(zk1 - zk) : 1.0;
  res.tail_ratio = std::exp(log_shell[levels - 1] - log_shell[levels - 2]);
  if (!std::isfinite(zk)) {
    res.verdict = Finiteness::Infinite;
  } else if (res.relative_change < cfg.rel_tol) {
    res.verdict = Finiteness::Finite;
  } else if (res.tail_ratio >= 1.0) {
    res.verdict = Finiteness::Infinite;
  } else {
    res.verdict = Finiteness::Inconclusive;
  }
  res.log_z_estimate = zk;
  if (res.verdict == Finiteness::Finite && res.tail_ratio < 1.0 && res.tail_ratio > 0.0)
    res.log_z_estimate = logsumexp(zk, log_shell[levels - 1] + std::log(res.tail_ratio / (1.0 - res.tail_ratio)));
  res.free_energy = -res.log_z_estimate / (n * beta);
  return res;
}

QuadratureResult partition_quadrature(const EnergySpec& spec, int n, double beta, const QuadratureConfig& cfg) {
  if (spec.dimension() != 1) throw InvalidArgument("partition quadrature needs one-dimensional particles");
  if (std::size_t need = spec.required_particles(); need && need != static_cast<std::size_t>(n))
    throw InvalidArgument("energy is tied to a different number of particles");
  Eigen::MatrixXd xm(n, 1);
  return partition_quadrature(
      [&](const Eigen::VectorXd& x) {
        xm.col(0) = x;
        return microscopic_energy(xm, spec);
      },
      n, beta, cfg);
}

ThresholdResult gamma_threshold_probe(std::shared_ptr<const Polytope> body, const ConfiningPotential& v, int n,
                                      const ThresholdConfig& cfg) {
  if (!body || body->dimension() != 1) throw InvalidArgument("threshold probe needs a 1D body");
  if (!(cfg.lo < cfg.hi)) throw InvalidArgument("threshold bracket must satisfy lo < hi");
  if (!(cfg.target_width > 0.0)) throw InvalidArgument("target width must be positive");
  const LatticeSample sample = quantile_points(*body, n);
  ThresholdResult res;
  res.lo = cfg.lo;
  res.hi = cfg.hi;
  auto probe = [&](double gamma, const QuadratureConfig& q) {
    const EnergySpec spec = EnergySpec::make(WeightedPermanental{body, sample, gamma, v});
    QuadratureResult r = partition_quadrature(spec, n, cfg.beta, q);
    res.probes.push_back({gamma, r.verdict, r.log_z_estimate});
    return r.verdict;
  };
  for (int it = 0; it < cfg.max_bisections && res.hi - res.lo > cfg.target_width; ++it) {
    const double mid = 0.5 * (res.lo + res.hi);
    Finiteness f = probe(mid, cfg.quadrature);
    if (f == Finiteness::Inconclusive) {
      // one more doubling of the box before giving up on this point
      QuadratureConfig bigger = cfg.quadrature;
      ++bigger.doublings;
      bigger.spacing *= 2.0;
      f = probe(mid, bigger);
    }
    if (f == Finiteness::Finite) {
      res.lo = mid;
    } else if (f == Finiteness::Infinite) {
      res.hi = mid;
    } else {
      res.inconclusive = true;
      break;
    }
  }
  res.estimate = 0.5 * (res.lo + res.hi);
  return res;
}

MultiStartResult multi_start_stationary(const GridFreeEnergy& f, const JkoConfig& cfg,
                                        const std::vector<QuantileMeasure>& starts, double tol, double max_time) {
  if (starts.empty()) throw InvalidArgument("no starting measures");
  MultiStartResult res;
  for (const auto& mu : starts) res.runs.push_back(stationary_limit(f, cfg, mu, 1e-8, max_time));
  for (std::size_t i = 0; i < res.runs.size(); ++i)
    for (std::size_t j = i + 1; j < res.runs.size(); ++j)
      res.spread = std::max(res.spread, wasserstein2_1d(res.runs[i].measure, res.runs[j].measure));
  res.unique = res.spread <= tol;
  return res;
}

}  // namespace wgflow
