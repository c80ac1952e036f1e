#include "wgflow/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <toml.hpp>

#include "plan.hpp"
#include "wgflow/errors.hpp"

namespace wgflow {

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Simulate: return "simulate";
    case ExperimentKind::Jko: return "jko";
    case ExperimentKind::StaticSolve: return "static-solve";
    case ExperimentKind::Sticky: return "sticky";
    case ExperimentKind::Repulsive: return "repulsive";
    case ExperimentKind::Poc: return "poc";
    case ExperimentKind::Gibbs: return "gibbs";
    case ExperimentKind::Threshold: return "threshold";
    case ExperimentKind::Rp: return "rp";
  }
  return "?";
}

namespace plan {
namespace {

struct KindInfo {
  ExperimentKind kind;
  const char* name;
  const char* block;
  bool stochastic;
};
constexpr KindInfo kKinds[] = {
    {ExperimentKind::Simulate, "simulate", "simulate", true},
    {ExperimentKind::Jko, "jko", "jko", false},
    {ExperimentKind::StaticSolve, "static-solve", "static", false},
    {ExperimentKind::Sticky, "sticky", "sticky", false},
    {ExperimentKind::Repulsive, "repulsive", "repulsive", false},
    {ExperimentKind::Poc, "poc", "poc", true},
    {ExperimentKind::Gibbs, "gibbs", "gibbs", true},
    {ExperimentKind::Threshold, "threshold", "threshold", false},
    {ExperimentKind::Rp, "rp", "rp", false},
};

const KindInfo& kind_info(const Node& root) {
  const std::string k = root.str("kind");
  for (const auto& info : kKinds)
    if (k == info.name) return info;
  root.fail("kind", "unknown experiment kind '" + k +
                        "' (expected simulate, jko, static-solve, sticky, repulsive, poc, gibbs, threshold or rp)");
}

// runs f, turning library argument errors into config errors at `where`
template <class F>
auto guarded(const Node& where, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    where.fail(e.what());
  }
}

std::shared_ptr<const Polytope> body_at(const Node& n, const std::string& key) {
  if (!n.has(key)) n.fail(key, "missing field");
  const json& b = n.raw()[key];
  Node at(b, n.child_path(key));
  if (!b.is_array() || b.empty()) at.fail("expected [lo, hi] or a list of vertices");
  return guarded(at, [&] {
    if (b.front().is_number()) {
      if (b.size() != 2 || !b[1].is_number()) at.fail("an interval is given as [lo, hi]");
      return std::make_shared<const Polytope>(Polytope::interval(b[0].get<double>(), b[1].get<double>()));
    }
    const std::size_t rows = b.size(), cols = b.front().is_array() ? b.front().size() : 0;
    if (cols == 0) at.fail("vertices must be lists of coordinates");
    Eigen::MatrixXd v(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
      if (!b[i].is_array() || b[i].size() != cols) at.fail("all vertices need the same dimension");
      for (std::size_t j = 0; j < cols; ++j) {
        if (!b[i][j].is_number()) at.fail("vertex coordinates must be numbers");
        v(i, j) = b[i][j].get<double>();
      }
    }
    return std::make_shared<const Polytope>(Polytope(v));
  });
}

ConfiningPotential potential_at(const Node& parent, const std::string& key, std::shared_ptr<const Polytope> body,
                                const std::string& def = "zero") {
  if (!parent.has(key)) {
    if (def == "support" && body) return ConfiningPotential(SupportPotential{body});
    return ConfiningPotential(ZeroPotential{});
  }
  const Node n = parent.at(key);
  n.allow_only({"type", "curvature", "center", "sharpness", "body"});
  const std::string type = n.str("type");
  if (n.has("body")) body = body_at(n, "body");
  return guarded(n, [&]() -> ConfiningPotential {
    if (type == "zero") return ConfiningPotential(ZeroPotential{});
    if (type == "quadratic") {
      const double c = n.number("curvature", 1.0);
      if (!(c >= 0.0)) n.fail("curvature", "must be nonnegative");
      return ConfiningPotential(QuadraticPotential{c, n.number("center", 0.0)});
    }
    if (type == "support" || type == "smooth_support") {
      if (!body) n.fail("body", "support potentials need a body");
      if (type == "support") return ConfiningPotential(SupportPotential{body});
      const double s = n.number("sharpness", 1.0);
      if (!(s > 0.0)) n.fail("sharpness", "must be positive");
      return ConfiningPotential(SmoothSupportPotential{body, s});
    }
    n.fail("type", "unknown potential '" + type + "' (zero, quadratic, support, smooth_support)");
  });
}

PairKernel kernel_at(const Node& parent, const std::string& key) {
  const Node n = parent.at(key);
  n.allow_only({"type", "alpha", "coefficient", "c_r", "c_a", "l_r", "l_a", "sign"});
  const std::string type = n.str("type");
  if (type == "power") return PowerLaw{n.number("alpha"), n.number("coefficient", 1.0)};
  if (type == "log") return LogKernel{n.number("coefficient", 1.0)};
  if (type == "morse") return Morse{n.number("c_r", 1.0), n.number("c_a", 1.0), n.number("l_r", 1.0), n.number("l_a", 2.0)};
  if (type == "quadratic") return QuadraticKernel{n.number("coefficient", 1.0)};
  if (type == "abs") {
    const int s = n.integer("sign", 1);
    if (s != 1 && s != -1) n.fail("sign", "must be +1 or -1");
    return AbsKernel{s};
  }
  n.fail("type", "unknown kernel '" + type + "' (power, log, morse, quadratic, abs)");
}

PairPotential pair_at(const Node& n, const std::string& kernel_key, const std::string& potential_key) {
  PairKernel k = kernel_at(n, kernel_key);
  ConfiningPotential v = potential_at(n, potential_key, nullptr);
  return guarded(n, [&] { return PairPotential(k, v); });
}

EnergyFactory energy_at(const Node& root) {
  const Node n = root.at("energy");
  n.allow_only({"type", "body", "sample", "gamma", "potential", "kernel", "normalization", "sign"});
  const std::string type = n.str("type");
  EnergyFactory f;
  if (type == "permanental" || type == "tropical" || type == "weighted") {
    auto body = body_at(n, "body");
    f.body = body;
    std::string sample_type = body->dimension() == 1 ? "quantile" : "lattice";
    int k = 0;
    if (n.has("sample")) {
      const Node s = n.at("sample");
      s.allow_only({"type", "k"});
      sample_type = s.str("type", sample_type);
      if (sample_type == "lattice") k = s.integer("k");
      else if (sample_type != "quantile") s.fail("type", "unknown sample '" + sample_type + "' (quantile, lattice)");
    } else if (sample_type == "lattice") {
      n.fail("sample", "bodies of dimension > 1 need a lattice sample with resolution k");
    }
    std::optional<LatticeSample> lattice;
    if (sample_type == "lattice") {
      if (k < 1) n.fail("sample.k", "must be >= 1");
      lattice = guarded(n, [&] { return lattice_points(*body, k); });
      f.fixed_particles = static_cast<int>(lattice->count());
    } else if (body->dimension() != 1) {
      n.fail("sample", "quantile samples need a 1D body");
    }
    const double gamma = type == "weighted" ? n.number("gamma") : 1.0;
    if (type == "weighted" && !(gamma >= 0.0 && gamma <= 1.0)) n.fail("gamma", "must lie in [0, 1]");
    ConfiningPotential v = type == "weighted" ? potential_at(n, "potential", body, "support") : ConfiningPotential{};
    f.make = [=](int np) {
      LatticeSample s = lattice ? *lattice : quantile_points(*body, np);
      if (type == "permanental") return EnergySpec::make(Permanental{body, s});
      if (type == "tropical") return EnergySpec::make(Tropical{body, s});
      return EnergySpec::make(WeightedPermanental{body, s, gamma, v});
    };
  } else if (type == "pair") {
    PairPotential p = pair_at(n, "kernel", "potential");
    const std::string norm = n.str("normalization", "exclude_diagonal");
    PairNormalization pn;
    if (norm == "exclude_diagonal") pn = PairNormalization::ExcludeDiagonal;
    else if (norm == "include_diagonal") pn = PairNormalization::IncludeDiagonal;
    else n.fail("normalization", "expected exclude_diagonal or include_diagonal");
    if (pn == PairNormalization::IncludeDiagonal && p.singularity() == SingularityClass::Strong)
      n.fail("normalization", "kernels singular at 0 cannot include the diagonal");
    f.make = [=](int) { return EnergySpec::make(PairInteraction{p, pn}); };
  } else if (type == "newtonian") {
    const int s = n.integer("sign", 1);
    if (s != 1 && s != -1) n.fail("sign", "must be +1 or -1");
    f.make = [=](int) { return EnergySpec::make(Newtonian1D{s}); };
  } else if (type == "external") {
    ConfiningPotential v = potential_at(n, "potential", nullptr);
    f.zero_external = v.is_zero();
    f.make = [=](int) { return EnergySpec::make(External{v}); };
  } else {
    n.fail("type", "unknown energy '" + type + "' (permanental, tropical, weighted, pair, newtonian, external)");
  }
  return f;
}

InitialLaw initial_at(const Node& root) {
  const Node n = root.at("initial");
  n.allow_only({"type", "mean", "sd", "lo", "hi", "at", "values"});
  InitialLaw law;
  law.type = n.str("type");
  if (law.type == "normal") {
    law.mean = n.number("mean", 0.0);
    law.sd = n.number("sd", 1.0);
    if (!(law.sd > 0.0)) n.fail("sd", "must be positive");
  } else if (law.type == "uniform") {
    law.lo = n.number("lo");
    law.hi = n.number("hi");
    if (!(law.hi > law.lo)) n.fail("hi", "must exceed lo");
  } else if (law.type == "dirac") {
    law.at = n.number("at", 0.0);
  } else if (law.type == "points") {
    law.points = n.numbers("values");
    if (law.points.empty()) n.fail("values", "needs at least one point");
  } else {
    n.fail("type", "unknown initial law '" + law.type + "' (normal, uniform, dirac, points)");
  }
  return law;
}

int particles_for(const Node& block, const EnergyFactory& e, const std::string& key = "particles") {
  if (e.fixed_particles) {
    if (block.has(key) && block.integer(key) != *e.fixed_particles)
      block.fail(key, "the lattice sample has " + std::to_string(*e.fixed_particles) + " points");
    return *e.fixed_particles;
  }
  const int n = block.integer(key);
  if (n < 1) block.fail(key, "must be >= 1");
  return n;
}

GradientOptions gradient_at(const Node& n) {
  GradientOptions g;
  const std::string m = n.str("gradient", "exact");
  if (m == "exact") g.method = GradientMethod::Exact;
  else if (m == "sinkhorn") g.method = GradientMethod::Sinkhorn;
  else n.fail("gradient", "expected exact or sinkhorn");
  g.sinkhorn.tol = n.number("sinkhorn_tol", g.sinkhorn.tol);
  g.sinkhorn.max_iters = n.integer("sinkhorn_max_iters", g.sinkhorn.max_iters);
  if (!(g.sinkhorn.tol > 0.0) || g.sinkhorn.max_iters < 1) n.fail("sinkhorn_tol", "Sinkhorn settings must be positive");
  return g;
}

void check_law_fits(const Node& where, const InitialLaw& law, int n, int dim) {
  if (law.type == "points" && (static_cast<int>(law.points.size()) != n || dim != 1))
    where.fail("initial points must list one value per particle of a 1D energy");
}

Plan build_simulate(const Node& root) {
  const Node b = root.at("simulate");
  b.allow_only({"particles", "runs", "beta", "dt", "t_end", "n_save", "gradient", "sinkhorn_tol", "sinkhorn_max_iters",
                "max_guard_halvings"});
  SimulatePlan p;
  p.energy = energy_at(root);
  p.initial = initial_at(root);
  p.particles = particles_for(b, p.energy);
  p.runs = b.integer("runs", 1);
  if (p.runs < 1) b.fail("runs", "must be >= 1");
  p.sde.beta = b.beta("beta", kInfiniteBeta);
  p.sde.dt = b.number("dt");
  p.sde.t_end = b.number("t_end");
  p.sde.n_save = b.integer("n_save", 1);
  if (!(p.sde.dt > 0.0) || !std::isfinite(p.sde.dt)) b.fail("dt", "must be positive");
  if (!(p.sde.t_end >= p.sde.dt)) b.fail("t_end", "must be at least dt");
  if (p.sde.n_save < 1) b.fail("n_save", "must be >= 1");
  p.sde.max_guard_halvings = b.integer("max_guard_halvings", 20);
  p.sde.gradient = gradient_at(b);
  guarded(b, [&] { p.sde.validate(); });
  const EnergySpec spec = guarded(root.at("energy"), [&] { return p.energy.make(p.particles); });
  check_law_fits(root.at("initial"), p.initial, p.particles, spec.dimension());
  if (spec.required_particles() > static_cast<std::size_t>(kPermanentCap) &&
      p.sde.gradient.method == GradientMethod::Exact && spec.required_particles())
    b.fail("gradient", "N exceeds the exact permanent cap of " + std::to_string(kPermanentCap) + "; use sinkhorn");
  return p;
}

Plan build_jko(const Node& root) {
  const Node b = root.at("jko");
  b.allow_only({"M", "tau", "t_end", "beta", "inner_tol", "inner_max_iters", "snapshot_every", "evi"});
  JkoPlan p;
  p.energy = energy_at(root);
  p.initial = initial_at(root);
  p.beta = b.beta("beta", kInfiniteBeta);
  p.jko.m = b.integer("M", 200);
  p.jko.tau = b.number("tau");
  p.jko.t_end = b.number("t_end");
  p.jko.inner_tol = b.number("inner_tol", 1e-9);
  p.jko.inner_max_iters = b.integer("inner_max_iters", 200);
  p.snapshot_every = b.integer("snapshot_every", 10);
  p.evi = b.boolean("evi", true);
  if (p.snapshot_every < 1) b.fail("snapshot_every", "must be >= 1");
  guarded(b, [&] { p.jko.validate(); });
  const EnergySpec spec = guarded(root.at("energy"), [&] { return p.energy.make(p.jko.m); });
  if (spec.dimension() != 1) root.at("energy").fail("JKO flows are one-dimensional");
  guarded(b, [&] { GridFreeEnergy(spec, p.beta, p.jko.m); });
  const QuantileMeasure mu0 = guarded(root.at("initial"), [&] { return p.initial.quantiles(p.jko.m); });
  if (!std::isinf(p.beta))
    for (int i = 0; i + 1 < mu0.size(); ++i)
      if (!(mu0[i + 1] > mu0[i])) root.at("initial").fail("finite beta needs an initial law with a density");
  if (p.evi && p.jko.steps() < 2) b.fail("evi", "the EVI check needs at least two steps");
  return p;
}

Plan build_static(const Node& root) {
  const Node b = root.at("static");
  b.allow_only({"body", "gamma", "potential", "half_width", "nodes", "tol", "max_iters", "continuation_steps"});
  StaticPlan p;
  p.body = body_at(b, "body");
  if (p.body->dimension() != 1) b.fail("body", "the static solver is one-dimensional");
  p.gamma = b.number("gamma", 1.0);
  if (!(p.gamma >= 0.0 && p.gamma <= 1.0)) b.fail("gamma", "must lie in [0, 1]");
  p.potential = potential_at(b, "potential", p.body, "support");
  p.options.half_width = b.number("half_width", 0.0);
  p.options.nodes = b.integer("nodes", 4001);
  p.options.tol = b.number("tol", 1e-10);
  p.options.max_iters = b.integer("max_iters", 100);
  p.options.continuation_steps = b.integer("continuation_steps", 10);
  if (p.options.half_width < 0.0) b.fail("half_width", "must be positive (or 0 for the default)");
  if (p.options.nodes < 3 || p.options.nodes % 2 == 0) b.fail("nodes", "must be odd and >= 3");
  if (!(p.options.tol > 0.0)) b.fail("tol", "must be positive");
  if (p.options.max_iters < 1 || p.options.continuation_steps < 1) b.fail("max_iters", "iteration counts must be >= 1");
  return p;
}

Eigen::VectorXd positions_at(const Node& b) {
  if (b.has("positions") == b.has("equidistant")) b.fail("give exactly one of positions or equidistant");
  if (b.has("positions")) {
    std::vector<double> v = b.numbers("positions");
    if (v.empty()) b.fail("positions", "needs at least one particle");
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  const int n = b.integer("equidistant");
  if (n < 1) b.fail("equidistant", "must be >= 1");
  const double spacing = b.number("spacing", 1.0);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = spacing * (i + 1 - 0.5 * (n + 1));
  return x;
}

Plan build_sticky(const Node& root) {
  const Node b = root.at("sticky");
  b.allow_only({"positions", "equidistant", "spacing", "masses", "kernel", "potential", "tau", "t_end", "n_save",
                "prox_tol", "prox_max_iters"});
  StickyPlan p;
  Eigen::VectorXd x = positions_at(b);
  if (b.has("masses")) {
    std::vector<double> m = b.numbers("masses");
    if (m.size() != static_cast<std::size_t>(x.size())) b.fail("masses", "one mass per position");
    p.initial = {x, Eigen::Map<Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()))};
    guarded(b, [&] { p.initial.validate(); });
  } else {
    p.initial = guarded(b, [&] { return OrderedParticles::equal_masses(x); });
  }
  p.potential = b.has("kernel") ? pair_at(b, "kernel", "potential") : PairPotential(AbsKernel{1}, potential_at(b, "potential", nullptr));
  if (p.potential.singularity() == SingularityClass::Strong) b.fail("kernel", "sticky flows need kernels finite at 0");
  p.sticky.tau = b.number("tau");
  p.sticky.t_end = b.number("t_end");
  p.sticky.n_save = b.integer("n_save", 1);
  p.sticky.prox.tol = b.number("prox_tol", p.sticky.prox.tol);
  p.sticky.prox.max_iters = b.integer("prox_max_iters", p.sticky.prox.max_iters);
  if (!(p.sticky.tau > 0.0) || !(p.sticky.t_end >= p.sticky.tau)) b.fail("tau", "need 0 < tau <= t_end");
  if (p.sticky.n_save < 1) b.fail("n_save", "must be >= 1");
  return p;
}

Plan build_repulsive(const Node& root) {
  const Node b = root.at("repulsive");
  b.allow_only({"positions", "equidistant", "spacing", "kernel", "potential", "t_end", "save_dt", "abs_tol", "rel_tol"});
  RepulsivePlan p;
  p.initial = positions_at(b);
  for (Eigen::Index i = 0; i + 1 < p.initial.size(); ++i)
    if (!(p.initial(i + 1) > p.initial(i))) b.fail("positions", "must be strictly increasing");
  if (p.initial.size() < 2) b.fail("positions", "needs at least two particles");
  p.potential = b.has("kernel") ? pair_at(b, "kernel", "potential") : PairPotential(LogKernel{1.0}, potential_at(b, "potential", nullptr));
  p.repulsive.t_end = b.number("t_end");
  p.repulsive.save_dt = b.number("save_dt", 0.1 * p.repulsive.t_end);
  p.repulsive.abs_tol = b.number("abs_tol", p.repulsive.abs_tol);
  p.repulsive.rel_tol = b.number("rel_tol", p.repulsive.rel_tol);
  if (!(p.repulsive.t_end > 0.0) || !(p.repulsive.save_dt > 0.0)) b.fail("t_end", "times must be positive");
  return p;
}

Plan build_poc(const Node& root, std::uint64_t seed) {
  const Node b = root.at("poc");
  b.allow_only({"particle_counts", "times", "runs", "dt", "beta", "gradient", "sinkhorn_tol", "sinkhorn_max_iters",
                "reference_M", "reference_tau"});
  PocPlan p;
  p.seed = seed;
  p.energy = energy_at(root);
  p.initial = initial_at(root);
  p.beta = b.beta("beta", kInfiniteBeta);
  p.poc.particle_counts = b.integers("particle_counts");
  p.poc.times = b.numbers("times");
  p.poc.runs = b.integer("runs", 8);
  p.poc.dt = b.number("dt");
  if (!(p.poc.dt > 0.0) || !std::isfinite(p.poc.dt)) b.fail("dt", "must be positive");
  p.poc.seed = seed;
  p.poc.gradient = gradient_at(b);
  p.reference_m = b.integer("reference_M", 400);
  p.reference_tau = b.number("reference_tau", 1e-3);
  guarded(b, [&] { p.poc.validate(); });
  if (p.reference_m < 2) b.fail("reference_M", "must be >= 2");
  if (!(p.reference_tau > 0.0)) b.fail("reference_tau", "must be positive");
  if (p.energy.fixed_particles) root.at("energy").fail("chaos ladders need quantile samples, not lattices");
  for (double t : p.poc.times) {
    const double r = t / p.poc.dt;
    if (std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r)) b.fail("times", "checkpoints must be multiples of dt");
    const double q = t / p.reference_tau;
    if (std::abs(q - std::round(q)) > 1e-9 * std::max(1.0, q))
      b.fail("times", "checkpoints must be multiples of reference_tau");
  }
  for (int n : p.poc.particle_counts) {
    const EnergySpec s = guarded(root.at("energy"), [&] { return p.energy.make(n); });
    if (s.dimension() != 1) root.at("energy").fail("chaos studies are one-dimensional");
  }
  const bool analytic = p.energy.zero_external && (p.initial.type == "normal" || p.initial.type == "dirac");
  if (!analytic && !std::isinf(p.beta) && (p.initial.type == "dirac" || p.initial.type == "points"))
    root.at("initial").fail("the reference flow at finite beta needs an initial law with a density");
  return p;
}

Plan build_gibbs(const Node& root) {
  const Node b = root.at("gibbs");
  b.allow_only({"particles", "beta", "step", "burn_in", "samples", "thin", "x0", "blocks", "divergence_ratio"});
  GibbsPlan p;
  p.energy = energy_at(root);
  p.particles = particles_for(b, p.energy);
  p.beta = b.beta("beta", 1.0);
  if (std::isinf(p.beta)) b.fail("beta", "Gibbs sampling needs a finite beta");
  p.gibbs.step = b.number("step", 0.05);
  p.gibbs.burn_in = b.integer("burn_in", 2000);
  p.gibbs.samples = b.integer("samples", 20000);
  p.gibbs.thin = b.integer("thin", 1);
  p.gibbs.blocks = b.integer("blocks", 10);
  p.gibbs.divergence_ratio = b.number("divergence_ratio", 3.0);
  guarded(b, [&] { p.gibbs.validate(); });
  const EnergySpec spec = guarded(root.at("energy"), [&] { return p.energy.make(p.particles); });
  p.x0 = Eigen::MatrixXd::Zero(p.particles, spec.dimension());
  if (b.has("x0")) {
    std::vector<double> v = b.numbers("x0");
    if (static_cast<Eigen::Index>(v.size()) != p.x0.size()) b.fail("x0", "needs N * dimension values");
    for (Eigen::Index i = 0; i < p.x0.rows(); ++i)
      for (Eigen::Index d = 0; d < p.x0.cols(); ++d) p.x0(i, d) = v[i * p.x0.cols() + d];
  }
  if (spec.required_particles() > static_cast<std::size_t>(kPermanentCap))
    root.at("energy").fail("Gibbs sampling evaluates exact permanents; N is above the cap");
  return p;
}

Plan build_threshold(const Node& root) {
  const Node b = root.at("threshold");
  b.allow_only({"body", "potential", "particles", "lo", "hi", "target_width", "max_bisections", "beta", "spacing",
                "initial_half_width", "doublings", "rel_tol"});
  ThresholdPlan p;
  p.body = body_at(b, "body");
  if (p.body->dimension() != 1) b.fail("body", "the threshold probe is one-dimensional");
  p.potential = potential_at(b, "potential", p.body, "support");
  p.particles = b.integer("particles", 2);
  if (p.particles < 1 || p.particles > 3) b.fail("particles", "must lie in 1..3");
  auto& t = p.threshold;
  t.lo = b.number("lo", 0.0);
  t.hi = b.number("hi", 1.0);
  t.target_width = b.number("target_width", 0.1);
  t.max_bisections = b.integer("max_bisections", 12);
  t.beta = b.beta("beta", 1.0);
  t.quadrature.spacing = b.number("spacing", 0.2);
  t.quadrature.initial_half_width = b.number("initial_half_width", 4.0);
  t.quadrature.doublings = b.integer("doublings", 6);
  t.quadrature.rel_tol = b.number("rel_tol", 1e-3);
  if (!(t.lo >= 0.0 && t.hi <= 1.0 && t.lo < t.hi)) b.fail("lo", "need 0 <= lo < hi <= 1");
  if (!(t.target_width > 0.0)) b.fail("target_width", "must be positive");
  if (std::isinf(t.beta)) b.fail("beta", "must be finite");
  guarded(b, [&] { t.quadrature.validate(); });
  return p;
}

Plan build_rp(const Node& root) {
  const Node b = root.at("rp");
  b.allow_only({"body"});
  return RpPlan{body_at(b, "body")};
}

}  // namespace

bool Node::has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

Node Node::at(const std::string& key) const {
  if (!has(key)) fail(key, "missing field");
  const json& c = (*j_)[key];
  if (!c.is_object()) fail(key, "expected a table");
  return Node(c, child_path(key));
}

double Node::number(const std::string& key) const {
  if (!has(key)) fail(key, "missing field");
  const json& v = (*j_)[key];
  if (!v.is_number()) fail(key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(key, "must be finite");
  return d;
}

double Node::number(const std::string& key, double def) const { return has(key) ? number(key) : def; }

int Node::integer(const std::string& key) const {
  if (!has(key)) fail(key, "missing field");
  const json& v = (*j_)[key];
  if (!v.is_number_integer()) fail(key, "expected an integer");
  return v.get<int>();
}

int Node::integer(const std::string& key, int def) const { return has(key) ? integer(key) : def; }

std::string Node::str(const std::string& key) const {
  if (!has(key)) fail(key, "missing field");
  const json& v = (*j_)[key];
  if (!v.is_string()) fail(key, "expected a string");
  return v.get<std::string>();
}

std::string Node::str(const std::string& key, const std::string& def) const { return has(key) ? str(key) : def; }

bool Node::boolean(const std::string& key, bool def) const {
  if (!has(key)) return def;
  const json& v = (*j_)[key];
  if (!v.is_boolean()) fail(key, "expected true or false");
  return v.get<bool>();
}

std::vector<double> Node::numbers(const std::string& key) const {
  if (!has(key)) fail(key, "missing field");
  const json& v = (*j_)[key];
  if (!v.is_array()) fail(key, "expected a list of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number() || !std::isfinite(e.get<double>())) fail(key, "expected a list of finite numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<int> Node::integers(const std::string& key) const {
  if (!has(key)) fail(key, "missing field");
  const json& v = (*j_)[key];
  if (!v.is_array() || v.empty()) fail(key, "expected a nonempty list of integers");
  std::vector<int> out;
  for (const auto& e : v) {
    if (!e.is_number_integer()) fail(key, "expected a list of integers");
    out.push_back(e.get<int>());
  }
  return out;
}

double Node::beta(const std::string& key, double def) const {
  if (!has(key)) return def;
  const json& v = (*j_)[key];
  if (v.is_string() && v.get<std::string>() == "inf") return kInfiniteBeta;
  if (!v.is_number() || !(v.get<double>() > 0.0)) fail(key, "expected a positive number or \"inf\"");
  return v.get<double>();
}

void Node::allow_only(std::initializer_list<const char*> keys) const {
  for (const auto& [k, _] : j_->items()) {
    bool ok = false;
    for (const char* a : keys) ok = ok || k == a;
    if (!ok) fail(k, "unknown field");
  }
}

void Node::fail(const std::string& what) const {
  throw ConfigError((path_.empty() ? std::string("config") : path_) + ": " + what);
}

void Node::fail(const std::string& key, const std::string& what) const {
  throw ConfigError(child_path(key) + ": " + what);
}

Eigen::MatrixXd InitialLaw::draw(const CounterRng& rng, int n, int dim) const {
  Eigen::MatrixXd x(n, dim);
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d) {
      const auto idx = static_cast<std::uint64_t>(i * dim + d);
      if (type == "normal") x(i, d) = mean + sd * rng.normal(0, 0, idx);
      else if (type == "uniform") x(i, d) = lo + (hi - lo) * rng.uniform(0, 0, idx);
      else if (type == "dirac") x(i, d) = at;
      else x(i, d) = points.at(static_cast<std::size_t>(i));
    }
  return x;
}

QuantileMeasure InitialLaw::quantiles(int m) const {
  if (type == "normal") return normal_quantile(mean, sd, m);
  if (type == "uniform") {
    Eigen::VectorXd q(m);
    for (int i = 0; i < m; ++i) q(i) = lo + (hi - lo) * (i + 0.5) / m;
    return QuantileMeasure(q);
  }
  if (type == "dirac") return QuantileMeasure::dirac(at, m);
  return from_samples(points, m);
}

Plan build(const json& root_json) {
  if (!root_json.is_object()) throw ConfigError("config: the document must be a table");
  const Node root(root_json, "");
  const KindInfo& info = kind_info(root);
  std::vector<const char*> allowed{"kind", "output", "seed", "threads", "description", info.block};
  const bool uses_energy = info.kind == ExperimentKind::Simulate || info.kind == ExperimentKind::Jko ||
                           info.kind == ExperimentKind::Poc || info.kind == ExperimentKind::Gibbs;
  const bool uses_initial =
      info.kind == ExperimentKind::Simulate || info.kind == ExperimentKind::Jko || info.kind == ExperimentKind::Poc;
  if (uses_energy) allowed.push_back("energy");
  if (uses_initial) allowed.push_back("initial");
  for (const auto& [k, _] : root_json.items())
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }) == allowed.end())
      root.fail(k, "unknown field for kind " + std::string(info.name));
  std::uint64_t seed = 0;
  if (info.stochastic) {
    if (!root.has("seed")) root.fail("seed", "missing field (mandatory for stochastic experiments)");
    const json& s = root_json["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      root.fail("seed", "expected a nonnegative integer");
    seed = s.get<std::uint64_t>();
  }
  if (root.has("threads") && root.integer("threads") < 0) root.fail("threads", "must be >= 0");
  switch (info.kind) {
    case ExperimentKind::Simulate: return build_simulate(root);
    case ExperimentKind::Jko: return build_jko(root);
    case ExperimentKind::StaticSolve: return build_static(root);
    case ExperimentKind::Sticky: return build_sticky(root);
    case ExperimentKind::Repulsive: return build_repulsive(root);
    case ExperimentKind::Poc: return build_poc(root, seed);
    case ExperimentKind::Gibbs: return build_gibbs(root);
    case ExperimentKind::Threshold: return build_threshold(root);
    case ExperimentKind::Rp: return build_rp(root);
  }
  throw ConfigError("config: unreachable kind");
}

}  // namespace plan

namespace {

nlohmann::json toml_to_json(const toml::node& node) {
  if (auto t = node.as_table()) {
    nlohmann::json o = nlohmann::json::object();
    for (const auto& [k, v] : *t) o[std::string(k.str())] = toml_to_json(v);
    return o;
  }
  if (auto a = node.as_array()) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& v : *a) arr.push_back(toml_to_json(v));
    return arr;
  }
  if (auto s = node.as_string()) return s->get();
  if (auto i = node.as_integer()) return i->get();
  if (auto f = node.as_floating_point()) {
    const double d = f->get();
    if (std::isinf(d) && d > 0) return "inf";
    return d;
  }
  if (auto b = node.as_boolean()) return b->get();
  throw ConfigError("dates and times are not valid config values");
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, ConfigFormat format, const std::string& origin) {
  nlohmann::json doc;
  if (format == ConfigFormat::Toml) {
    try {
      doc = toml_to_json(toml::parse(text, origin));
    } catch (const toml::parse_error& e) {
      const auto& src = e.source();
      throw ConfigError(origin + ":" + std::to_string(src.begin.line) + ":" + std::to_string(src.begin.column) + ": " +
                        std::string(e.description()));
    }
  } else {
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(origin + ": " + e.what());
    }
  }
  plan::build(doc);
  ExperimentConfig cfg;
  const std::string kind = doc["kind"].get<std::string>();
  for (ExperimentKind k : {ExperimentKind::Simulate, ExperimentKind::Jko, ExperimentKind::StaticSolve,
                           ExperimentKind::Sticky, ExperimentKind::Repulsive, ExperimentKind::Poc, ExperimentKind::Gibbs,
                           ExperimentKind::Threshold, ExperimentKind::Rp})
    if (kind == to_string(k)) cfg.kind = k;
  if (doc.contains("output")) {
    if (!doc["output"].is_string() || doc["output"].get<std::string>().empty())
      throw ConfigError("output: expected a nonempty path");
    cfg.output = doc["output"].get<std::string>();
  }
  if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
  cfg.json = doc.dump();
  cfg.source = origin;
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open the config file");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string ext = path.extension().string();
  ConfigFormat fmt;
  if (ext == ".toml") fmt = ConfigFormat::Toml;
  else if (ext == ".json") fmt = ConfigFormat::Json;
  else throw ConfigError(path.string() + ": config files must end in .json or .toml");
  ExperimentConfig cfg = parse_config(ss.str(), fmt, path.string());
  cfg.source = path;
  return cfg;
}

}  // namespace wgflow
