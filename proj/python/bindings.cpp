#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/eigen.h>
#include <pybind11/stl.h>

#include "hqao/bounds.hpp"
#include "hqao/config.hpp"
#include "hqao/enumeration.hpp"
#include "hqao/errors.hpp"
#include "hqao/experiment.hpp"
#include "hqao/hierarchy.hpp"
#include "hqao/lattice_mc.hpp"
#include "hqao/rg_flow.hpp"
#include "hqao/spectral.hpp"
#include "hqao/ursell.hpp"

namespace py = pybind11;
using namespace hqao;

// Structured results cross the boundary as JSON text; the Python package
// decodes them into dicts.
PYBIND11_MODULE(_core, m) {
  m.doc() = "Hierarchical quantum anharmonic oscillator core";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<DomainError>(m, "DomainError", base);
  py::register_exception<RangeError>(m, "RangeError", base);
  py::register_exception<TruncationError>(m, "TruncationError", base);
  py::register_exception<StabilityError>(m, "StabilityError", base);
  py::register_exception<BracketError>(m, "BracketError", base);
  py::register_exception<TuningError>(m, "TuningError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);

  py::class_<HierarchyParams>(m, "HierarchyParams")
      .def_static("normalized", &HierarchyParams::normalized, py::arg("kappa"), py::arg("delta"))
      .def_static("decoupled", &HierarchyParams::decoupled, py::arg("kappa"), py::arg("delta"))
      .def_readonly("kappa", &HierarchyParams::kappa)
      .def_readonly("delta", &HierarchyParams::delta)
      .def_readwrite("theta", &HierarchyParams::theta)
      .def_readonly("j_star", &HierarchyParams::j_star)
      .def("__repr__", [](const HierarchyParams& h) {
        return "HierarchyParams(kappa=" + std::to_string(h.kappa) + ", delta=" + std::to_string(h.delta) +
               ", theta=" + std::to_string(h.theta) + ")";
      });

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init([](double mass, double a, double b, double beta) { return ModelParams{mass, a, b, beta}; }),
           py::arg("mass") = 1.0, py::arg("a") = 1.0, py::arg("b") = 0.0, py::arg("beta") = 1.0)
      .def_readwrite("mass", &ModelParams::mass)
      .def_readwrite("a", &ModelParams::a)
      .def_readwrite("b", &ModelParams::b)
      .def_readwrite("beta", &ModelParams::beta);

  m.def(
      "block_members",
      [](int level, std::uint64_t index, const HierarchyParams& h) { return block_members(level, index, h).members(); },
      py::arg("level"), py::arg("index"), py::arg("hier"));
  m.def("coupling_matrix", &coupling_matrix, py::arg("level"), py::arg("hier"));

  m.def(
      "u_hat0",
      [](const ModelParams& p, const std::vector<double>& qs) {
        const auto spec = build_and_diagonalize(p, 64);
        std::vector<double> out;
        for (double q : qs) out.push_back(u_hat0_spectral(spec, p.beta, q));
        return out;
      },
      py::arg("model"), py::arg("q") = std::vector<double>{0.0},
      "Spectral u_hat_0(q) at model.beta for each q.");
  m.def(
      "spectral_record",
      [](const ModelParams& p, int q_modes) {
        const auto spec = build_and_diagonalize(p, 64);
        auto rec = spectral_record(spec, p.beta, q_modes);
        const auto er = eta_and_rigidity(spec, p.beta);
        rec["eta"] = er.eta;
        rec["rigidity"] = er.rigidity;
        rec["x0"] = x0_spectral(spec, p.beta);
        rec["sum_rule_residual"] = sum_rule_residual(spec, p.beta);
        return rec.dump();
      },
      py::arg("model"), py::arg("q_modes") = 8);
  m.def("double_commutator_residual", &double_commutator_residual, py::arg("model"), py::arg("K") = 128);

  m.def(
      "kernels",
      [](double v, int kappa, double delta) {
        const auto k = kernel_functions(v, kappa, delta);
        return py::make_tuple(k.sigma, k.phi, k.psi);
      },
      py::arg("v"), py::arg("kappa") = 2, py::arg("delta") = 0.25, "(sigma, phi, psi) at v.");
  m.def(
      "epsilon_window", [](int kappa, double delta, double eps) { return to_json(epsilon_window(kappa, delta, eps)).dump(); },
      py::arg("kappa") = 2, py::arg("delta") = 0.25, py::arg("epsilon") = 0.05);
  m.def(
      "propagate",
      [](double u0, double x0, int kappa, double delta, double eps, int n_max) {
        return to_json(propagate_and_classify({u0, u0}, x0, Kernels{kappa, delta}, epsilon_window(kappa, delta, eps),
                                              n_max))
            .dump();
      },
      py::arg("u0"), py::arg("x0"), py::arg("kappa") = 2, py::arg("delta") = 0.25, py::arg("epsilon") = 0.05,
      py::arg("n_max") = 400);

  m.def(
      "flow_run",
      [](const ModelParams& p, const HierarchyParams& h, int n_max, int population, int cutoff, std::uint64_t seed) {
        FlowOptions o;
        o.population = population;
        o.cutoff = cutoff;
        o.seed = seed;
        py::gil_scoped_release release;
        return to_json(flow_run(p, h, n_max, o)).dump();
      },
      py::arg("model"), py::arg("hier"), py::arg("n_max"), py::arg("population") = 100000, py::arg("cutoff") = 32,
      py::arg("seed") = 1);
  m.def("gaussian_oracle_u_hat",
        [](int n, const HierarchyParams& h, const ModelParams& p, double q) { return gaussian_oracle(n, h, p, q).u_hat; },
        py::arg("level"), py::arg("hier"), py::arg("model"), py::arg("q") = 0.0);

  m.def(
      "cumulants_from_moments", [](const std::vector<double>& mom) { return cumulants_from_moments(mom).values; },
      py::arg("even_moments"));
  m.def("moments_from_cumulants", &moments_from_cumulants, py::arg("even_cumulants"));
  m.def(
      "ising_ring_root_ratio",
      [](int n, double J) {
        return root_locus_check(exact_enumeration(IsingModel::ring(n, J), J < 0.0).polynomial).max_ratio;
      },
      py::arg("spins"), py::arg("J"), "max |Re z|/|z| over the partition-polynomial zeros of an Ising ring.");

  m.def("config_keys", &config_keys);
  m.def(
      "default_config", [] { return to_yaml(ExperimentConfig{}); }, "Default config as YAML text.");
  m.def(
      "run",
      [](const std::string& subcommand, const std::string& yaml, const std::string& out) {
        auto cfg = yaml.empty() ? ExperimentConfig{} : parse_config(yaml);
        cfg.subcommand = subcommand;
        if (!out.empty()) cfg.out = out;
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(cfg);
        }
        return py::make_tuple(r.exit_code, r.message, r.files);
      },
      py::arg("subcommand"), py::arg("config_yaml") = "", py::arg("out") = "",
      "Run a subcommand; returns (exit_code, message, files).");
}
