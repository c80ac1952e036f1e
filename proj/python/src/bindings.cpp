#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "wgflow/config.hpp"
#include "wgflow/energies.hpp"
#include "wgflow/errors.hpp"
#include "wgflow/geometry.hpp"
#include "wgflow/measures.hpp"
#include "wgflow/oracles.hpp"
#include "wgflow/permanent.hpp"
#include "wgflow/potentials.hpp"
#include "wgflow/report.hpp"
#include "wgflow/singular1d.hpp"

namespace py = pybind11;
using namespace py::literals;
using namespace wgflow;

namespace {

QuantileMeasure measure(const Eigen::VectorXd& nodes) { return QuantileMeasure(nodes); }

py::dict config_dict(const ExperimentConfig& cfg) {
  py::dict d;
  d["kind"] = to_string(cfg.kind);
  d["output"] = cfg.output;
  d["seed"] = cfg.seed;
  d["config"] = py::module_::import("json").attr("loads")(cfg.json);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Wasserstein gradient flows of permanental and toric energies";
  m.attr("__version__") = WGFLOW_VERSION;

  auto base = py::register_exception<Error>(m, "WgflowError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<CapExceeded>(m, "CapExceeded", base.ptr());

  py::class_<Polytope>(m, "Polytope")
      .def(py::init<Eigen::MatrixXd>(), "vertices"_a)
      .def_static("interval", &Polytope::interval, "lo"_a, "hi"_a)
      .def_property_readonly("dimension", &Polytope::dimension)
      .def_property_readonly("vertices", &Polytope::vertices)
      .def_property_readonly("volume", &Polytope::volume)
      .def_property_readonly("diameter", &Polytope::diameter)
      .def("contains", &Polytope::contains, "x"_a, "tol"_a = 0.0)
      .def("barycenter", [](const Polytope& p) { return barycenter(p); })
      .def("support_value", [](const Polytope& p, const Eigen::VectorXd& x) { return support_value(p, x); }, "x"_a)
      .def("r_invariant", [](const Polytope& p) { return r_invariant(p); })
      .def("scale", [](const Polytope& p, double c) { return scale(p, c); }, "c"_a)
      .def("lattice_points", [](const Polytope& p, int k) { return lattice_points(p, k).points; }, "k"_a)
      .def("quantile_points", [](const Polytope& p, int n) { return quantile_points(p, n).points; }, "n"_a);

  m.def("normal_quantile", [](double mean, double sd, int m) { return normal_quantile(mean, sd, m).nodes(); },
        "mean"_a, "sd"_a, "m"_a);
  m.def("uniform_quantile",
        [](double lo, double hi, int m) { return uniform_quantile(Polytope::interval(lo, hi), m).nodes(); }, "lo"_a,
        "hi"_a, "m"_a);
  m.def("from_samples", [](const std::vector<double>& x, int m) { return from_samples(x, m).nodes(); }, "points"_a,
        "m"_a);
  m.def("wasserstein2",
        [](const Eigen::VectorXd& x, const Eigen::VectorXd& y) { return wasserstein2_1d(measure(x), measure(y)); },
        "x"_a, "y"_a, "W2 between two quantile vectors on the same grid");
  m.def("wasserstein2_discrete", &wasserstein2_discrete, "x"_a, "y"_a, "cap"_a = 2000);
  m.def("entropy", [](const Eigen::VectorXd& x) { return entropy(measure(x)); }, "nodes"_a);
  m.def("fisher_information", [](const Eigen::VectorXd& x) { return fisher_information(measure(x)); }, "nodes"_a);

  m.def("log_permanent", [](const Eigen::MatrixXd& log_a) { return log_permanent_exact(log_a); }, "log_a"_a);
  m.def(
      "permanent_marginals",
      [](const Eigen::MatrixXd& log_a) {
        const auto r = permanent_marginals_exact(log_a);
        return py::make_tuple(r.pi, r.log_permanent);
      },
      "log_a"_a);
  m.def("newtonian_energy", &newtonian_energy, "x"_a, "sign"_a);
  m.def("newtonian_closed_form", &newtonian_closed_form, "sorted_x"_a, "sign"_a);

  m.def(
      "isotonic_project",
      [](const Eigen::VectorXd& y, std::optional<Eigen::VectorXd> w) {
        return w ? isotonic_project(y, *w) : isotonic_project(y);
      },
      "y"_a, "weights"_a = py::none());

  m.def(
      "cole_hopf",
      [](const Eigen::VectorXd& u0, double half_width, double kappa, double t) {
        Grid1D g;
        g.half_width = half_width;
        g.values = u0;
        ColeHopfResult r;
        {
          py::gil_scoped_release release;
          r = cole_hopf_solve(g, kappa, t);
        }
        return py::make_tuple(g.nodes(), r.velocity.values, r.potential.values);
      },
      "u0"_a, "half_width"_a, "kappa"_a, "t"_a, "Burgers velocity and potential on the grid of u0");
  m.def(
      "ma_static",
      [](double lo, double hi, double gamma, const std::string& potential, int nodes, double half_width) {
        MaStaticOptions opts;
        opts.nodes = nodes;
        opts.half_width = half_width;
        auto body = std::make_shared<const Polytope>(Polytope::interval(lo, hi));
        ConfiningPotential v;
        if (potential == "support")
          v = ConfiningPotential(PotentialKind(SupportPotential{body}));
        else if (potential != "zero")
          throw py::value_error("potential must be 'zero' or 'support'");
        MaStaticResult r;
        {
          py::gil_scoped_release release;
          r = ma_static_1d(*body, gamma, v, opts);
        }
        py::dict d;
        d["x"] = r.phi.nodes();
        d["phi"] = r.phi.values;
        d["density"] = r.density.values;
        d["residual"] = r.residual;
        d["shift"] = r.shift;
        d["tilt"] = r.tilt;
        d["converged"] = r.converged;
        d["boundary_supported"] = r.boundary_supported;
        d["diverged"] = r.diverged;
        return d;
      },
      "lo"_a, "hi"_a, "gamma"_a = 1.0, "potential"_a = "zero", "nodes"_a = 4001, "half_width"_a = 0.0,
      "static solution for P = [lo, hi]; potential is 'zero' or 'support' (V = phi_P)");

  m.def("load_config", [](const std::filesystem::path& p) { return config_dict(load_config(p)); }, "path"_a);
  m.def(
      "run_config",
      [](const std::filesystem::path& p, std::optional<std::filesystem::path> output, int threads) {
        ExperimentConfig cfg = load_config(p);
        if (output) cfg.output = *output;
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(cfg, {threads, true});
        }
        py::dict d;
        d["status"] = r.status;
        d["flags"] = r.flags;
        d["files"] = r.files;
        d["wall_time"] = r.wall_time;
        return d;
      },
      "path"_a, "output"_a = py::none(), "threads"_a = 0);
  m.def("selftest", [] {
    py::list out;
    for (const auto& item : oracle_selftest()) out.append(py::make_tuple(item.name, item.passed, item.value));
    return out;
  });
}
