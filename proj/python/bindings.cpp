#include "minhet/analysis.hpp"
#include "minhet/errors.hpp"
#include "minhet/minimizer.hpp"
#include "minhet/run.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace minhet;

namespace {

py::dict outcome_dict(const RunOutcome& o) {
  py::dict d;
  d["exit_code"] = o.exit_code;
  d["summary"] = o.summary.dump(2);
  d["files"] = o.files;
  if (o.result) d["result"] = *o.result;
  else d["result"] = py::none();
  return d;
}

}  // namespace

PYBIND11_MODULE(minhet, m) {
  m.doc() = "Heteroclinic orbits of fourth-order Lagrangian systems by discrete energy minimization";

  static py::exception<InputError> input_error(m, "InputError", PyExc_ValueError);
  static py::exception<CapabilityError> capability_error(m, "CapabilityError", PyExc_RuntimeError);
  static py::exception<DegenerateTail> degenerate_tail(m, "DegenerateTail", PyExc_RuntimeError);
  static py::exception<NoLimit> no_limit(m, "NoLimit", PyExc_RuntimeError);
  static py::exception<OutputError> output_error(m, "OutputError", PyExc_OSError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InputError& e) {
      PyErr_SetString(input_error.ptr(), e.what());
    } catch (const CapabilityError& e) {
      PyErr_SetString(capability_error.ptr(), e.what());
    } catch (const DegenerateTail& e) {
      PyErr_SetString(degenerate_tail.ptr(), e.what());
    } catch (const NoLimit& e) {
      PyErr_SetString(no_limit.ptr(), e.what());
    } catch (const OutputError& e) {
      PyErr_SetString(output_error.ptr(), e.what());
    }
  });

  // potential

  py::enum_<Family>(m, "Family")
      .value("Multiwell", Family::Multiwell)
      .value("EFK", Family::EFK)
      .value("GeneralizedEFK", Family::GeneralizedEFK)
      .value("Custom", Family::Custom);
  py::enum_<FForm>(m, "FForm")
      .value("ScalarQuartic", FForm::ScalarQuartic)
      .value("Product", FForm::Product)
      .value("Harmonic", FForm::Harmonic);

  py::class_<WellPotential>(m, "WellPotential")
      .def(py::init([](FForm form, std::vector<Vec> wells, double scale) {
             return WellPotential{form, std::move(wells), scale};
           }),
           py::arg("form") = FForm::ScalarQuartic, py::arg("wells") = std::vector<Vec>{},
           py::arg("scale") = 1.0)
      .def_readwrite("form", &WellPotential::form)
      .def_readwrite("wells", &WellPotential::wells)
      .def_readwrite("scale", &WellPotential::scale);

  py::class_<Coupling>(m, "Coupling")
      .def(py::init([](double g0, double g1) { return Coupling{g0, g1}; }), py::arg("g0") = 1.0,
           py::arg("g1") = 0.0)
      .def_readwrite("g0", &Coupling::g0)
      .def_readwrite("g1", &Coupling::g1);

  py::class_<PotentialSpec>(m, "PotentialSpec")
      .def_static("multiwell", &PotentialSpec::multiwell, py::arg("f") = WellPotential{})
      .def_static("efk", &PotentialSpec::efk, py::arg("f") = WellPotential{}, py::arg("beta") = 1.0)
      .def_static("generalized_efk", &PotentialSpec::generalized_efk, py::arg("f") = WellPotential{},
                  py::arg("coupling") = Coupling{})
      .def_static(
          "custom",
          [](int dimension, std::function<double(const Vec&, const Vec&)> value,
             std::function<std::pair<Vec, Vec>(const Vec&, const Vec&)> gradient,
             std::optional<std::function<std::tuple<Mat, Mat, Mat>(const Vec&, const Vec&)>> hessian,
             std::vector<Vec> wells) {
            CustomPotential c;
            c.dimension = dimension;
            c.value = std::move(value);
            c.gradient = [gradient](const Vec& u, const Vec& v) {
              auto [wu, wv] = gradient(u, v);
              return Gradient{wu, wv};
            };
            if (hessian)
              c.hessian = [h = *hessian](const Vec& u, const Vec& v) {
                auto [uu, uv, vv] = h(u, v);
                return HessianBlocks{uu, uv, vv};
              };
            c.wells = std::move(wells);
            return PotentialSpec::custom(std::move(c));
          },
          py::arg("dimension"), py::arg("value"), py::arg("gradient"), py::arg("hessian") = py::none(),
          py::arg("wells") = std::vector<Vec>{})
      .def_property_readonly("family", &PotentialSpec::family)
      .def_property_readonly("dimension", &PotentialSpec::dimension)
      .def_property_readonly("beta", &PotentialSpec::beta)
      .def_property_readonly("coupling", &PotentialSpec::coupling)
      .def_property_readonly("well_potential", &PotentialSpec::well_potential)
      .def("wells", &PotentialSpec::wells)
      .def("has_hessian", &PotentialSpec::has_hessian)
      .def("parameter", &PotentialSpec::parameter, py::arg("name"))
      .def("with_parameter", &PotentialSpec::with_parameter, py::arg("name"), py::arg("value"));

  m.def("eval_W", &eval_W, py::arg("spec"), py::arg("u"), py::arg("v"));
  m.def(
      "grad_W",
      [](const PotentialSpec& s, const Vec& u, const Vec& v) {
        Gradient g = grad_W(s, u, v);
        return py::make_tuple(g.wu, g.wv);
      },
      py::arg("spec"), py::arg("u"), py::arg("v"), "Returns (W_u, W_v).");
  m.def(
      "hess_W",
      [](const PotentialSpec& s, const Vec& u, const Vec& v) {
        HessianBlocks h = hess_W(s, u, v);
        return py::make_tuple(h.uu, h.uv, h.vv);
      },
      py::arg("spec"), py::arg("u"), py::arg("v"), "Returns (W_uu, W_uv, W_vv).");

  py::class_<EquilibriaSpec>(m, "EquilibriaSpec")
      .def(py::init<std::vector<Vec>, std::vector<Vec>, double>(), py::arg("a_minus"), py::arg("a_plus"),
           py::arg("q"))
      .def_property_readonly("a_minus", [](const EquilibriaSpec& e) { return e.minus().points; })
      .def_property_readonly("a_plus", [](const EquilibriaSpec& e) { return e.plus().points; })
      .def_property_readonly("q", &EquilibriaSpec::q)
      .def_property_readonly("dimension", &EquilibriaSpec::dimension)
      .def_property_readonly("separation", &EquilibriaSpec::separation)
      .def("closest_pair", &EquilibriaSpec::closest_pair);

  py::class_<HypothesisCheck>(m, "HypothesisCheck")
      .def_readonly("passed", &HypothesisCheck::passed)
      .def_readonly("samples", &HypothesisCheck::samples)
      .def_readonly("min_value", &HypothesisCheck::min_value)
      .def_readonly("detail", &HypothesisCheck::detail);
  py::class_<ValidationReport>(m, "ValidationReport")
      .def_readonly("h1", &ValidationReport::h1)
      .def_readonly("h2", &ValidationReport::h2)
      .def_readonly("h3", &ValidationReport::h3)
      .def_property_readonly("all_passed", &ValidationReport::all_passed);
  m.def(
      "validate_hypotheses",
      [](const PotentialSpec& s, const EquilibriaSpec& e, int budget, std::uint64_t seed) {
        ValidationOptions o;
        o.budget = budget;
        o.seed = seed;
        return validate_hypotheses(s, e, o);
      },
      py::arg("spec"), py::arg("equilibria"), py::arg("budget") = 1000, py::arg("seed") = 1);

  // grid and energy

  py::class_<Grid>(m, "Grid")
      .def(py::init<double, int>(), py::arg("half_length"), py::arg("intervals"))
      .def_property_readonly("half_length", &Grid::half_length)
      .def_property_readonly("intervals", &Grid::intervals)
      .def_property_readonly("spacing", &Grid::spacing)
      .def("x", &Grid::x, py::arg("j"))
      .def("nodes", [](const Grid& g) {
        Vec x(g.intervals() + 1);
        for (int j = 0; j <= g.intervals(); ++j) x[j] = g.x(j);
        return x;
      });

  py::class_<DiscreteOrbit>(m, "DiscreteOrbit")
      .def(py::init<Grid, Mat>(), py::arg("grid"), py::arg("values"))
      .def_property_readonly("grid", &DiscreteOrbit::grid)
      .def_property_readonly("dimension", &DiscreteOrbit::dimension)
      .def_property_readonly("intervals", &DiscreteOrbit::intervals)
      .def_property_readonly("values", &DiscreteOrbit::values)
      .def_property_readonly("a_minus", &DiscreteOrbit::a_minus)
      .def_property_readonly("a_plus", &DiscreteOrbit::a_plus)
      .def("interior", &DiscreteOrbit::interior)
      .def("with_interior", [](const DiscreteOrbit& o, const Mat& x) { return o.with_interior(x); });

  py::class_<EnergyBreakdown>(m, "EnergyBreakdown")
      .def_readonly("total", &EnergyBreakdown::total)
      .def_readonly("bending", &EnergyBreakdown::bending)
      .def_readonly("potential_part", &EnergyBreakdown::potential_part);

  m.def("initial_guess", &initial_guess, py::arg("grid"), py::arg("equilibria"), py::arg("a_minus"),
        py::arg("a_plus"), py::arg("core_halfwidth") = 1.0);
  m.def("energy", &energy, py::arg("spec"), py::arg("orbit"));
  m.def("energy_difference", &energy_difference, py::arg("spec"), py::arg("base"), py::arg("trial"));
  m.def("energy_gradient", &energy_gradient, py::arg("spec"), py::arg("orbit"));
  m.def(
      "el_residual",
      [](const PotentialSpec& s, const DiscreteOrbit& o) {
        NodalField f = el_residual(s, o);
        return py::make_tuple(f.values, f.boundary_affected);
      },
      py::arg("spec"), py::arg("orbit"), "Returns (m x (N+1) residual, boundary flags).");
  m.def(
      "el_residual_max",
      [](const PotentialSpec& s, const DiscreteOrbit& o) { return el_residual_max(el_residual(s, o)); },
      py::arg("spec"), py::arg("orbit"));
  m.def(
      "hamiltonian_profile",
      [](const PotentialSpec& s, const DiscreteOrbit& o) {
        ScalarProfile p = hamiltonian_profile(s, o);
        return py::make_tuple(p.values, p.boundary_affected);
      },
      py::arg("spec"), py::arg("orbit"), "Returns (H per node, boundary flags).");
  m.def(
      "orbit_csv",
      [](const PotentialSpec& s, const DiscreteOrbit& o) {
        std::ostringstream out;
        write_orbit_csv(out, s, o);
        return out.str();
      },
      py::arg("spec"), py::arg("orbit"));

  // minimizer

  py::enum_<OptimizerStatus>(m, "OptimizerStatus")
      .value("Converged", OptimizerStatus::Converged)
      .value("MaxIterations", OptimizerStatus::MaxIterations)
      .value("LineSearchFailure", OptimizerStatus::LineSearchFailure);

  py::class_<OptimizerConfig>(m, "OptimizerConfig")
      .def(py::init<>())
      .def_readwrite("max_iterations", &OptimizerConfig::max_iterations)
      .def_readwrite("grad_tol", &OptimizerConfig::grad_tol)
      .def_readwrite("memory", &OptimizerConfig::memory)
      .def_readwrite("c1", &OptimizerConfig::c1)
      .def_readwrite("backtrack", &OptimizerConfig::backtrack)
      .def_readwrite("max_backtracks", &OptimizerConfig::max_backtracks)
      .def_readwrite("step_init", &OptimizerConfig::step_init)
      .def("validate", &OptimizerConfig::validate)
      .def("tolerance_for", &OptimizerConfig::tolerance_for);

  py::class_<OptimizerResult>(m, "OptimizerResult")
      .def_readonly("status", &OptimizerResult::status)
      .def_readonly("iterations", &OptimizerResult::iterations)
      .def_readonly("initial_energy", &OptimizerResult::initial_energy)
      .def_readonly("final_energy", &OptimizerResult::final_energy)
      .def_readonly("final_grad_norm", &OptimizerResult::final_grad_norm)
      .def_readonly("grad_tol", &OptimizerResult::grad_tol)
      .def_readonly("orbit", &OptimizerResult::orbit)
      .def_readonly("energy_history", &OptimizerResult::energy_history);

  m.def("minimize", &minimize, py::arg("spec"), py::arg("start"), py::arg("config") = OptimizerConfig{});
  m.def(
      "sweep",
      [](const PotentialSpec& s, const std::string& parameter, const std::vector<double>& values,
         const DiscreteOrbit& base, const OptimizerConfig& c) { return sweep(s, parameter, values, base, c); },
      py::arg("spec"), py::arg("parameter"), py::arg("values"), py::arg("base"),
      py::arg("config") = OptimizerConfig{});

  py::class_<AuditReport>(m, "AuditReport")
      .def_readonly("trials", &AuditReport::trials)
      .def_readonly("min_delta", &AuditReport::min_delta)
      .def_readonly("fraction_nonnegative", &AuditReport::fraction_nonnegative)
      .def_readonly("deltas", &AuditReport::deltas);
  m.def("local_minimality_audit", &local_minimality_audit, py::arg("spec"), py::arg("orbit"),
        py::arg("trials") = 100, py::arg("amplitude") = 1e-2, py::arg("seed") = 1);

  // analysis

  py::enum_<Side>(m, "Side").value("Left", Side::Left).value("Right", Side::Right);
  py::enum_<TailKind>(m, "TailKind").value("Monotone", TailKind::Monotone).value("Oscillatory", TailKind::Oscillatory);
  py::enum_<FitMode>(m, "FitMode")
      .value("Auto", FitMode::Auto)
      .value("Direct", FitMode::Direct)
      .value("Envelope", FitMode::Envelope);

  py::class_<TransitionSequence>(m, "TransitionSequence")
      .def_readonly("crossings", &TransitionSequence::crossings)
      .def_readonly("exits", &TransitionSequence::exits)
      .def_readonly("count", &TransitionSequence::count);
  m.def("transitions", &transitions, py::arg("orbit"), py::arg("equilibria"));

  py::class_<SpectralInfo>(m, "SpectralInfo")
      .def_readonly("roots", &SpectralInfo::roots)
      .def_readonly("slowest_stable_rate", &SpectralInfo::slowest_stable_rate)
      .def_readonly("oscillatory", &SpectralInfo::oscillatory)
      .def_readonly("nondegenerate", &SpectralInfo::nondegenerate);
  m.def("linearization_roots", &linearization_roots, py::arg("spec"), py::arg("well"));

  py::class_<TailOptions>(m, "TailOptions")
      .def(py::init<>())
      .def_readwrite("boundary_nodes", &TailOptions::boundary_nodes)
      .def_readwrite("boundary_fraction", &TailOptions::boundary_fraction)
      .def_readwrite("floor", &TailOptions::floor)
      .def_readwrite("mode", &TailOptions::mode);

  py::class_<ExponentialFit>(m, "ExponentialFit")
      .def_readonly("rate", &ExponentialFit::rate)
      .def_readonly("amplitude", &ExponentialFit::amplitude)
      .def_readonly("r_squared", &ExponentialFit::r_squared)
      .def_readonly("points", &ExponentialFit::points);
  py::class_<DecayFit>(m, "DecayFit")
      .def_readonly("rate", &DecayFit::rate)
      .def_readonly("amplitude", &DecayFit::amplitude)
      .def_readonly("r_squared", &DecayFit::r_squared)
      .def_readonly("window_begin", &DecayFit::window_begin)
      .def_readonly("window_end", &DecayFit::window_end)
      .def_readonly("envelope", &DecayFit::envelope)
      .def_readonly("points", &DecayFit::points)
      .def_readonly("derivative", &DecayFit::derivative);
  m.def("decay_fit", &decay_fit, py::arg("orbit"), py::arg("equilibria"), py::arg("side"),
        py::arg("window_fraction") = 0.25, py::arg("options") = TailOptions{});

  py::class_<TailClass>(m, "TailClass")
      .def_readonly("kind", &TailClass::kind)
      .def_readonly("sign_changes", &TailClass::sign_changes);
  m.def("classify_tail", &classify_tail, py::arg("orbit"), py::arg("equilibria"), py::arg("side"),
        py::arg("direction") = std::nullopt, py::arg("options") = TailOptions{});

  py::class_<HamiltonianStats>(m, "HamiltonianStats")
      .def_readonly("max_abs", &HamiltonianStats::max_abs)
      .def_readonly("mean", &HamiltonianStats::mean)
      .def_readonly("stddev", &HamiltonianStats::stddev);
  m.def("hamiltonian_stats", &hamiltonian_stats, py::arg("spec"), py::arg("orbit"));

  py::class_<EndpointLimits>(m, "EndpointLimits")
      .def_readonly("a_minus_hat", &EndpointLimits::a_minus_hat)
      .def_readonly("a_plus_hat", &EndpointLimits::a_plus_hat)
      .def_readonly("a_minus_id", &EndpointLimits::a_minus_id)
      .def_readonly("a_plus_id", &EndpointLimits::a_plus_id);
  m.def("endpoint_limits", &endpoint_limits, py::arg("orbit"), py::arg("equilibria"),
        py::arg("window_fraction") = 0.25, py::arg("options") = TailOptions{});

  // config-driven runs; summaries come back as JSON text

  py::class_<RunConfig>(m, "RunConfig")
      .def_readwrite("L", &RunConfig::L)
      .def_readwrite("N", &RunConfig::N)
      .def_readwrite("q", &RunConfig::q)
      .def_readwrite("core_halfwidth", &RunConfig::core_halfwidth)
      .def_readwrite("optimizer", &RunConfig::optimizer)
      .def_property(
          "output_directory", [](const RunConfig& c) { return c.output.directory; },
          [](RunConfig& c, const std::string& d) { c.output.directory = d; })
      .def_property(
          "seed", [](const RunConfig& c) { return c.output.seed; },
          [](RunConfig& c, std::uint64_t s) { c.output.seed = s; })
      .def_property(
          "svg", [](const RunConfig& c) { return c.output.svg; }, [](RunConfig& c, bool s) { c.output.svg = s; })
      .def("make_potential", &RunConfig::make_potential)
      .def("make_equilibria", &RunConfig::make_equilibria)
      .def("to_json", [](const RunConfig& c) { return c.to_json().dump(2); });

  m.def("parse_config", [](const std::string& text) { return parse_config(text); }, py::arg("text"));
  m.def("load_config", &load_config, py::arg("path"));
  m.def(
      "run", [](const RunConfig& c, bool write) { return outcome_dict(run(c, write)); }, py::arg("config"),
      py::arg("write") = true);
  m.def(
      "run_all_pairs",
      [](const RunConfig& c, int jobs, bool write) { return outcome_dict(run_all_pairs(c, jobs, write)); },
      py::arg("config"), py::arg("jobs") = 1, py::arg("write") = true);
  m.def(
      "run_sweep", [](const RunConfig& c, bool write) { return outcome_dict(run_sweep(c, write)); },
      py::arg("config"), py::arg("write") = true);

  m.attr("SUMMARY_SCHEMA_VERSION") = kSummarySchemaVersion;
  m.attr("CONFIG_SCHEMA_VERSION") = kConfigSchemaVersion;
}
