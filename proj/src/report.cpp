#include "wgflow/report.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "plan.hpp"
#include "wgflow/errors.hpp"

#ifndef WGFLOW_VERSION
#define WGFLOW_VERSION "unknown"
#endif

namespace wgflow {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  std::ofstream open(const std::string& rel) {
    const fs::path final_path = dir_ / rel;
    fs::create_directories(final_path.parent_path());
    fs::path partial = final_path;
    partial += ".partial";
    std::ofstream out(partial, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + partial.string());
    pending_.push_back(final_path);
    return out;
  }

  void commit() {
    for (const auto& p : pending_) {
      fs::path partial = p;
      partial += ".partial";
      fs::rename(partial, p);
    }
  }

  std::vector<fs::path> relative_files() const {
    std::vector<fs::path> out;
    for (const auto& p : pending_) out.push_back(fs::relative(p, dir_));
    return out;
  }
  const std::vector<fs::path>& files() const { return pending_; }

 private:
  fs::path dir_;
  std::vector<fs::path> pending_;
};

void close_checked(std::ofstream& out, const std::string& what) {
  out.flush();
  if (!out) throw Error("I/O error while writing " + what);
}

void csv_row(std::ostream& out, const std::vector<double>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << format_double(v[i]);
  out << '\n';
}

json to_json(const Eigen::MatrixXd& x) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (x.cols() == 1) {
      rows.push_back(x(i, 0));
    } else {
      json r = json::array();
      for (Eigen::Index d = 0; d < x.cols(); ++d) r.push_back(x(i, d));
      rows.push_back(r);
    }
  }
  return rows;
}

json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

// JSON has no infinity; store it as the string the config parser accepts
json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return nullptr;
  return v;
}

void write_json(Outputs& o, const std::string& name, const json& j) {
  auto out = o.open(name);
  out << j.dump(2) << '\n';
  close_checked(out, name);
}

struct Context {
  Outputs& out;
  json& manifest;
  RunResult& result;
  int threads;
  std::uint64_t seed;
  void flag(const std::string& why) {
    result.status = 1;
    result.flags.push_back(why);
  }
};

void run(const plan::SimulatePlan& p, Context& c) {
  const EnergySpec spec = p.energy.make(p.particles);
  SdeConfig sde = p.sde;
  sde.seed = c.seed;
  const int dim = spec.dimension();
  InitialSampler sampler = [&](const CounterRng& rng) { return p.initial.draw(rng, p.particles, dim); };
  Ensemble ens = ensemble_empirical(sampler, spec, sde, p.runs, c.threads);
  auto out = c.out.open("trajectory.jsonl");
  for (int r = 0; r < p.runs; ++r) {
    out << json{{"run", r}, {"seed", ens.seeds[r]}, {"t", 0.0}, {"x", to_json(ens.initial[r].points)}}.dump() << '\n';
    for (std::size_t k = 0; k < ens.times.size(); ++k)
      out << json{{"run", r}, {"seed", ens.seeds[r]}, {"t", ens.times[k]}, {"x", to_json(ens.snapshots[r][k].points)}}
                 .dump()
          << '\n';
  }
  close_checked(out, "trajectory.jsonl");
  write_json(c.out, "summary.json",
             {{"energy", spec.name()},
              {"particles", p.particles},
              {"runs", p.runs},
              {"beta", number_or_inf(sde.beta)},
              {"guard_events", ens.guard_events},
              {"guard_failures", ens.guard_failures},
              {"sinkhorn_used", ens.sinkhorn_used},
              {"max_duality_gap", ens.max_duality_gap}});
  c.manifest["seeds"] = ens.seeds;
  if (ens.guard_failures > 0) c.flag("particles crossed after the maximal number of guard halvings");
}

void run(const plan::JkoPlan& p, Context& c) {
  const EnergySpec spec = p.energy.make(p.jko.m);
  const GridFreeEnergy f(spec, p.beta, p.jko.m);
  const JkoTrajectory traj = jko_flow(p.initial.quantiles(p.jko.m), f, p.jko);
  auto flow = c.out.open("flow.csv");
  flow << "step,time,free_energy,entropy,movement,objective,iterations\n";
  for (std::size_t j = 0; j < traj.steps.size(); ++j) {
    const auto& r = traj.steps[j];
    csv_row(flow, {static_cast<double>(j), r.time, r.free_energy, entropy(r.measure), r.movement, r.objective,
                   static_cast<double>(r.iterations)});
  }
  close_checked(flow, "flow.csv");
  for (std::size_t j = 0; j < traj.steps.size(); ++j) {
    if (j % p.snapshot_every != 0 && j + 1 != traj.steps.size()) continue;
    char name[64];
    std::snprintf(name, sizeof name, "snapshots/quantiles_%06zu.csv", j);
    auto snap = c.out.open(name);
    snap << "s,x\n";
    const auto& mu = traj.steps[j].measure;
    for (int i = 0; i < mu.size(); ++i) csv_row(snap, {(i + 0.5) / mu.size(), mu[i]});
    close_checked(snap, name);
  }
  json rep{{"energy", spec.name()},
           {"beta", number_or_inf(p.beta)},
           {"M", p.jko.m},
           {"tau", p.jko.tau},
           {"steps", traj.steps.size() - 1},
           {"converged", traj.converged},
           {"lambda", spec.lambda_bound},
           {"final_free_energy", number_or_inf(traj.steps.back().free_energy)},
           {"final_barycenter", barycenter_1d(traj.steps.back().measure)},
           {"final_variance", variance(traj.steps.back().measure)}};
  if (p.evi && traj.steps.size() >= 3) rep["evi_residual"] = number_or_inf(evi_residual(traj, f, default_probes(traj, spec)));
  write_json(c.out, "report.json", rep);
  if (!traj.converged) c.flag("an inner JKO solve did not reach inner_tol");
}

void run(const plan::StaticPlan& p, Context& c) {
  const MaStaticResult r = ma_static_1d(*p.body, p.gamma, p.potential, p.options);
  auto out = c.out.open("static.csv");
  out << "x,phi,density\n";
  for (int i = 0; i < r.phi.size(); ++i) csv_row(out, {r.phi.x(i), r.phi.values(i), r.density.values(i)});
  close_checked(out, "static.csv");
  double mass = 0.0;
  const double h = r.density.spacing();
  for (int i = 0; i + 1 < r.density.size(); ++i) mass += 0.5 * h * (r.density.values(i) + r.density.values(i + 1));
  write_json(c.out, "report.json",
             {{"gamma", p.gamma},
              {"half_width", r.phi.half_width},
              {"nodes", r.phi.size()},
              {"residual", r.residual},
              {"shift", r.shift},
              {"tilt", r.tilt},
              {"iterations", r.iterations},
              {"mass", mass},
              {"converged", r.converged},
              {"diverged", r.diverged},
              {"boundary_supported", r.boundary_supported}});
  if (r.diverged) c.flag("static solve diverged (no solution on the line for this body and gamma)");
}

void run(const plan::StickyPlan& p, Context& c) {
  const OrderedTrajectory tr = sticky_flow(p.initial, p.potential, p.sticky);
  auto csv = c.out.open("sticky.csv");
  csv << "t,energy,clusters,barycenter\n";
  auto states = c.out.open("states.jsonl");
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    csv_row(csv, {tr.times[k], tr.energies[k], static_cast<double>(tr.states[k].size()), tr.states[k].barycenter()});
    states << json{{"t", tr.times[k]}, {"positions", to_json(tr.states[k].positions)},
                   {"masses", to_json(tr.states[k].masses)}}
                  .dump()
           << '\n';
  }
  close_checked(csv, "sticky.csv");
  close_checked(states, "states.jsonl");
  if (!tr.converged) c.flag("a proximal step did not converge");
}

void run(const plan::RepulsivePlan& p, Context& c) {
  const OrderedTrajectory tr = repulsive_flow(p.initial, p.potential, p.repulsive);
  auto csv = c.out.open("repulsive.csv");
  csv << "t,energy,min_gap\n";
  auto states = c.out.open("states.jsonl");
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    const Eigen::VectorXd& x = tr.states[k].positions;
    const double gap = (x.tail(x.size() - 1) - x.head(x.size() - 1)).minCoeff();
    csv_row(csv, {tr.times[k], tr.energies[k], gap});
    states << json{{"t", tr.times[k]}, {"positions", to_json(x)}}.dump() << '\n';
  }
  close_checked(csv, "repulsive.csv");
  close_checked(states, "states.jsonl");
}

void run(const plan::PocPlan& p, Context& c) {
  PocBenchmark bench;
  bench.name = p.energy.make(p.poc.particle_counts.front()).name();
  bench.beta = p.beta;
  bench.energy = p.energy.make;
  bench.sampler = [law = p.initial](const CounterRng& rng, int n) { return law.draw(rng, n, 1); };
  const bool analytic = p.energy.zero_external && (p.initial.type == "normal" || p.initial.type == "dirac");
  if (analytic) {
    const double mean = p.initial.type == "normal" ? p.initial.mean : p.initial.at;
    const double sd0 = p.initial.type == "normal" ? p.initial.sd : 0.0;
    const double beta = p.beta;
    const int m = p.reference_m;
    bench.reference = [=](double t) {
      const double var = sd0 * sd0 + (std::isinf(beta) ? 0.0 : 2.0 * t / beta);
      return var > 0.0 ? normal_quantile(mean, std::sqrt(var), m) : QuantileMeasure::dirac(mean, m);
    };
  } else {
    JkoConfig jc;
    jc.m = p.reference_m;
    jc.tau = p.reference_tau;
    jc.t_end = *std::max_element(p.poc.times.begin(), p.poc.times.end());
    const GridFreeEnergy f(p.energy.make(jc.m), p.beta, jc.m);
    bench.reference = jko_reference(p.initial.quantiles(jc.m), f, jc);
  }
  PocConfig cfg = p.poc;
  cfg.seed = c.seed;
  cfg.threads = c.threads;
  const ChaosReport rep = poc_experiment(bench, cfg);
  auto csv = c.out.open("poc.csv");
  csv << "N,t,mean_w2,std_w2,runs\n";
  for (std::size_t a = 0; a < rep.particle_counts.size(); ++a)
    for (std::size_t k = 0; k < rep.times.size(); ++k)
      csv_row(csv, {static_cast<double>(rep.particle_counts[a]), rep.times[k], rep.mean_w2[a][k], rep.std_w2[a][k],
                    static_cast<double>(rep.runs)});
  close_checked(csv, "poc.csv");
  json trend = json::array();
  bool all = true;
  for (std::size_t k = 0; k < rep.times.size(); ++k) {
    const bool ok = chaos_trend_holds(rep, k);
    all = all && ok;
    trend.push_back({{"t", rep.times[k]}, {"nonincreasing", ok}});
  }
  write_json(c.out, "report.json",
             {{"benchmark", rep.name},
              {"beta", number_or_inf(rep.beta)},
              {"dt", rep.dt},
              {"runs", rep.runs},
              {"reference", analytic ? "heat kernel" : "jko"},
              {"trend", trend},
              {"sinkhorn_used", rep.sinkhorn_used},
              {"max_duality_gap", rep.max_duality_gap},
              {"notes", rep.notes},
              {"seeds", rep.seeds}});
  c.manifest["seeds"] = rep.seeds;
  if (!all) c.flag("mean W2 is not nonincreasing in N");
}

void run(const plan::GibbsPlan& p, Context& c) {
  const EnergySpec spec = p.energy.make(p.particles);
  GibbsConfig g = p.gibbs;
  g.seed = c.seed;
  const GibbsResult r = mala_gibbs(spec, p.beta, p.x0, g);
  auto csv = c.out.open("samples.csv");
  csv << "index";
  const Eigen::Index width = p.x0.size();
  for (Eigen::Index i = 0; i < width; ++i) csv << ",x" << (i + 1);
  csv << '\n';
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(width), sq = Eigen::VectorXd::Zero(width);
  for (std::size_t s = 0; s < r.samples.size(); ++s) {
    std::vector<double> row{static_cast<double>(s)};
    Eigen::Map<const Eigen::VectorXd> flat(r.samples[s].data(), width);
    // row-major flattening: particle by particle
    for (Eigen::Index i = 0; i < r.samples[s].rows(); ++i)
      for (Eigen::Index d = 0; d < r.samples[s].cols(); ++d) row.push_back(r.samples[s](i, d));
    mean += flat;
    sq += flat.cwiseAbs2();
    csv_row(csv, row);
  }
  close_checked(csv, "samples.csv");
  const double n = std::max<std::size_t>(r.samples.size(), 1);
  mean /= n;
  write_json(c.out, "report.json",
             {{"energy", spec.name()},
              {"beta", p.beta},
              {"particles", p.particles},
              {"kept_samples", r.samples.size()},
              {"acceptance", r.acceptance},
              {"divergence_suspected", r.divergence_suspected},
              {"message", r.message},
              {"block_means", r.block_means},
              {"geweke_z", r.geweke_z},
              {"mean", to_json(mean)},
              {"variance", to_json(Eigen::VectorXd(sq / n - mean.cwiseAbs2()))}});
  c.manifest["seeds"] = {c.seed};
  if (r.divergence_suspected) c.flag(r.message);
}

void run(const plan::ThresholdPlan& p, Context& c) {
  const ThresholdResult r = gamma_threshold_probe(p.body, p.potential, p.particles, p.threshold);
  auto csv = c.out.open("probes.csv");
  csv << "gamma,verdict,log_z\n";
  for (const auto& pr : r.probes)
    csv << format_double(pr.gamma) << ',' << to_string(pr.verdict) << ',' << format_double(pr.log_z) << '\n';
  close_checked(csv, "probes.csv");
  write_json(c.out, "report.json",
             {{"estimate", r.estimate},
              {"lo", r.lo},
              {"hi", r.hi},
              {"width", r.hi - r.lo},
              {"inconclusive", r.inconclusive},
              {"particles", p.particles},
              {"r_invariant", r_invariant(*p.body)}});
  if (r.inconclusive) c.flag("the finiteness test was inconclusive; interval not refined to the target width");
}

void run(const plan::RpPlan& p, Context& c) {
  write_json(c.out, "report.json",
             {{"dimension", p.body->dimension()},
              {"volume", p.body->volume()},
              {"barycenter", to_json(barycenter(*p.body))},
              {"r_invariant", r_invariant(*p.body)}});
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  if (cfg.output.empty()) throw ConfigError("output: missing field");
  const json doc = json::parse(cfg.json);
  const plan::Plan pl = plan::build(doc);
  int threads = opts.threads;
  if (threads <= 0 && doc.contains("threads")) threads = doc["threads"].get<int>();
  if (threads <= 0) threads = default_threads();

  fs::create_directories(cfg.output);
  Outputs out(cfg.output);
  RunResult result;
  json manifest{{"version", WGFLOW_VERSION},
                {"kind", to_string(cfg.kind)},
                {"config", doc},
                {"source", cfg.source.string()},
                {"threads", threads}};
  if (cfg.seed) manifest["seed"] = *cfg.seed;
  Context ctx{out, manifest, result, threads, cfg.seed.value_or(0)};
  std::visit([&](const auto& p) { run(p, ctx); }, pl);

  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  manifest["wall_time_s"] = result.wall_time;
  manifest["status"] = result.status;
  manifest["flags"] = result.flags;
  json files = json::array();
  for (const auto& f : out.relative_files()) files.push_back(f.generic_string());
  manifest["files"] = files;
  write_json(out, "manifest.json", manifest);
  out.commit();
  result.files = out.files();
  if (!opts.quiet)
    for (const auto& f : result.flags) std::cerr << "flag: " << f << '\n';
  return result;
}

}  // namespace wgflow
