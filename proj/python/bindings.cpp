#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "covmeas/checks.hpp"
#include "covmeas/error.hpp"
#include "covmeas/gaussian_analytic.hpp"
#include "covmeas/measurement_rules.hpp"
#include "covmeas/report.hpp"
#include "covmeas/scenario.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace covmeas;

namespace {

Scenario load(const std::filesystem::path& path, const std::optional<std::string>& rule) {
  Scenario s = parse_scenario(path);
  if (rule) {
    const auto r = parse_rule(*rule);
    if (!r) throw Error(ErrorCode::ValidationError, "unknown rule '" + *rule + "'");
    s.rule = *r;
  }
  return s;
}

TableOptions table_options(unsigned threads) {
  TableOptions t;
  t.sequence.threads = threads;
  return t;
}

py::dict table_dict(const OutcomeTable& t) {
  py::dict probabilities;
  for (const auto& [key, p] : t.probabilities) probabilities[py::tuple(py::cast(key))] = p;
  return py::dict("rule"_a = to_string(t.rule), "devices"_a = t.devices, "sequence"_a = t.layer_order,
                  "probabilities"_a = probabilities, "total"_a = t.total(), "eps_trunc"_a = t.eps_trunc,
                  "layer_residual"_a = t.layer_residual);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Smeared-field measurement sequences under the standard and intrinsic ordering rules";

  static py::exception<Error> error(m, "CovmeasError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  py::class_<LatticeSpec>(m, "LatticeSpec")
      .def(py::init([](int n_sites, double spacing, double mass) { return LatticeSpec{n_sites, spacing, mass}; }),
           "n_sites"_a, "spacing"_a, "mass"_a)
      .def_readwrite("n_sites", &LatticeSpec::n_sites)
      .def_readwrite("spacing", &LatticeSpec::spacing)
      .def_readwrite("mass", &LatticeSpec::mass)
      .def_property_readonly("box_length", &LatticeSpec::box_length)
      .def("site_position", &LatticeSpec::site_position, "j"_a);

  py::class_<SmearingFunction>(m, "SmearingFunction")
      .def_readonly("device_id", &SmearingFunction::device_id)
      .def_readonly("samples", &SmearingFunction::samples);

  m.def("bump_profile", &bump_profile, "spec"_a, "device_id"_a, "center"_a, "width"_a);
  m.def("uniform_profile", &uniform_profile, "spec"_a, "device_id"_a, "x_lo"_a, "x_hi"_a);

  auto modes_for = [](const LatticeSpec& spec, const std::vector<int>& active) {
    const ModeTable full = build_mode_table(spec);
    return active.empty() ? full : full.restrict_to(active);
  };
  m.def(
      "pauli_jordan",
      [modes_for](const LatticeSpec& spec, const SmearingFunction& f, double t_f, const SmearingFunction& g,
                  double t_g, const std::vector<int>& active) {
        return pauli_jordan(spec, f, t_f, g, t_g, modes_for(spec, active));
      },
      "spec"_a, "f"_a, "t_f"_a, "g"_a, "t_g"_a, "active_modes"_a = std::vector<int>{});
  m.def(
      "vacuum_variance",
      [modes_for](const LatticeSpec& spec, const SmearingFunction& f, const std::vector<int>& active) {
        return vacuum_variance(spec, f, modes_for(spec, active));
      },
      "spec"_a, "f"_a, "active_modes"_a = std::vector<int>{});

  m.def(
      "kernels",
      [](double omega, double t) {
        const KernelPair k = kernels(omega, t);
        return py::make_tuple(k.a, k.b, k.c_abs);
      },
      "omega"_a, "t"_a, "Kernel values (A, B, |C|) of one mode at time t.");
  m.def("gaussian_mass", &gaussian_mass, "variance"_a, "lo"_a, "hi"_a);

  m.def(
      "layers",
      [](const std::vector<std::tuple<std::string, double, double, double>>& regions) {
        std::vector<Region> rs;
        for (const auto& [id, t, lo, hi] : regions) rs.push_back({id, t, lo, hi});
        return layer_parts(split_devices(rs)).layers;
      },
      "regions"_a, "Layers S^1, S^2, ... of the parts of (id, t, x_lo, x_hi) device regions.");

  m.def(
      "scenario_hash", [](const std::filesystem::path& path) { return scenario_hash(parse_scenario(path)); },
      "path"_a);
  m.def(
      "canonical_scenario", [](const std::filesystem::path& path) { return serialize_scenario(parse_scenario(path)); },
      "path"_a);

  m.def(
      "order",
      [](const std::filesystem::path& path) {
        const Scenario s = parse_scenario(path);
        std::vector<Region> rs;
        for (const auto& d : s.devices) rs.push_back({d.id, d.t, d.x_lo, d.x_hi});
        return layer_parts(split_devices(rs)).layers;
      },
      "path"_a);

  m.def(
      "simulate",
      [](const std::filesystem::path& path, std::optional<std::string> rule, unsigned threads) {
        const Scenario s = load(path, rule);
        OutcomeTable t;
        {
          py::gil_scoped_release release;
          const Arrangement arr(to_plan(s));
          t = rule_table(arr, s.rule, table_options(threads));
        }
        return table_dict(t);
      },
      "path"_a, "rule"_a = py::none(), "threads"_a = 1u);

  m.def(
      "audit",
      [](const std::filesystem::path& path, const std::string& source, const std::string& target,
         std::optional<std::string> rule, unsigned threads) {
        const Scenario s = load(path, rule);
        SignalingReport r;
        {
          py::gil_scoped_release release;
          const Arrangement arr(to_plan(s));
          r = signaling_audit(arr, source, target, s.rule, table_options(threads));
        }
        return py::dict("source"_a = r.source, "target"_a = r.target, "rule"_a = to_string(r.rule), "tv"_a = r.tv,
                        "eps_trunc"_a = r.eps_trunc, "with_source"_a = r.with_source,
                        "without_source"_a = r.without_source);
      },
      "path"_a, "source"_a, "target"_a, "rule"_a = py::none(), "threads"_a = 1u);

  m.def(
      "validate",
      [](const std::filesystem::path& path) {
        const Scenario s = parse_scenario(path);
        std::vector<CheckResult> checks;
        {
          py::gil_scoped_release release;
          const Arrangement arr(to_plan(s));
          checks = run_checks(s, arr);
        }
        py::list out;
        for (const auto& c : checks) {
          out.append(py::dict("name"_a = c.name, "value"_a = c.value, "limit"_a = c.limit, "passed"_a = c.passed,
                              "detail"_a = c.detail));
        }
        return out;
      },
      "path"_a);
}
