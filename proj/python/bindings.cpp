#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "sipred/audit.hpp"
#include "sipred/cli.hpp"
#include "sipred/examples.hpp"
#include "sipred/model.hpp"
#include "sipred/reduction.hpp"
#include "sipred/solution_io.hpp"

namespace py = pybind11;
using namespace sipred;

namespace {

Bindings bindings_from(const py::dict& values) {
  Bindings b;
  for (const auto& [key, val] : values) {
    const auto name = key.cast<std::string>();
    bool found = false;
    for (std::size_t g = 0; g < kGroupCount; ++g) {
      if (group_name(static_cast<Group>(g)) == name) {
        b.values[g] = name == "gamma" ? std::vector<double>{val.cast<double>()} : val.cast<std::vector<double>>();
        found = true;
      }
    }
    if (!found) throw py::key_error("unknown variable group '" + name + "'");
  }
  return b;
}

py::dict scenario_dict(const Scenario& s) {
  py::dict d;
  d["id"] = s.id;
  d["w"] = s.w;
  d["origin"] = origin_label(s);
  d["violation"] = s.violation_at_creation;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Robust min-max programs solved by local reduction";

  py::register_exception<LoadError>(m, "LoadError", PyExc_ValueError);

  m.def("evaluate", [](const std::string& text, const py::dict& values) { return eval(parse(text), bindings_from(values)); },
        py::arg("expr"), py::arg("values"));
  m.def(
      "gradient",
      [](const std::string& text, const py::dict& values, const std::string& group) {
        const Bindings b = bindings_from(values);
        for (std::size_t g = 0; g < kGroupCount; ++g) {
          if (group_name(static_cast<Group>(g)) == group) return sipred::gradient(parse(text), b, static_cast<Group>(g));
        }
        throw py::key_error("unknown variable group '" + group + "'");
      },
      py::arg("expr"), py::arg("values"), py::arg("group"));
  m.def("canonical", [](const std::string& text) { return to_string(parse(text)); }, py::arg("expr"));

  py::class_<SipProblem>(m, "Problem")
      .def_readonly("name", &SipProblem::name)
      .def_property_readonly("dims",
                             [](const SipProblem& p) {
                               return py::make_tuple(p.dims.theta, p.dims.w, p.dims.zp, p.dims.zm, p.dims.s);
                             })
      .def("to_json", &problem_to_json)
      .def_static("from_json", &problem_from_json, py::arg("text"))
      .def_static("load", [](const std::string& path) { return load_problem(path); }, py::arg("path"))
      .def("save", [](const SipProblem& p, const std::string& path) { save_problem(p, path); }, py::arg("path"))
      .def("validate",
           [](const SipProblem& p) {
             py::list out;
             for (const Diagnostic& d : sipred::validate(p)) out.append(py::make_tuple(d.code, d.message));
             return out;
           })
      .def("__eq__", [](const SipProblem& a, const SipProblem& b) { return a == b; });

  m.def("build_example", &build_example, py::arg("name"));

  m.def(
      "solve",
      [](const SipProblem& p, std::uint64_t seed, double tol_viol, int max_scenarios, int restarts,
         int max_inner_iter) {
        ReductionOptions o;
        o.rng_seed = seed;
        o.tol_viol = tol_viol;
        o.tol_inner = std::min(o.tol_inner, 0.1 * tol_viol);
        o.max_scenarios = max_scenarios;
        o.adversary_restarts = restarts;
        o.nlp.max_inner_iter = max_inner_iter;
        ReductionReport r;
        {
          py::gil_scoped_release release;
          r = run(p, o);
        }
        py::dict d;
        d["status"] = std::string(to_string(r.status));
        d["theta"] = r.theta;
        d["gamma"] = r.gamma;
        py::list scen;
        for (const Scenario& s : r.scenario_set.scenarios) scen.append(scenario_dict(s));
        d["scenarios"] = scen;
        py::list its;
        for (const IterationRecord& rec : r.iterations) {
          py::dict i;
          i["iter"] = rec.iteration;
          i["gamma"] = rec.gamma;
          i["n_scenarios"] = rec.n_scenarios;
          i["scenarios_added"] = rec.scenarios_added;
          i["worst_violation"] = rec.worst_violation;
          its.append(i);
        }
        d["iterations"] = its;
        d["solution_json"] = solution_to_json(solution_of(r));
        return d;
      },
      py::arg("problem"), py::arg("seed") = 0, py::arg("tol_viol") = 1e-6, py::arg("max_scenarios") = 100,
      py::arg("restarts") = 10, py::arg("max_inner_iter") = 500);

  m.def(
      "monte_carlo",
      [](const SipProblem& p, const std::vector<double>& theta, double gamma, std::size_t n, std::uint64_t seed) {
        AuditReport a;
        {
          py::gil_scoped_release release;
          a = monte_carlo(p, theta, gamma, n, seed);
        }
        py::dict d;
        d["samples"] = a.samples;
        d["violations"] = a.violations;
        d["infeasible_samples"] = a.infeasible_samples;
        d["worst_cost"] = a.worst_cost;
        d["worst_w"] = a.worst_w;
        d["gamma"] = a.gamma;
        d["margin"] = a.margin;
        return d;
      },
      py::arg("problem"), py::arg("theta"), py::arg("gamma"), py::arg("n"), py::arg("seed") = 0);

  m.def(
      "oracle_saturation",
      [](int grid_b, int grid_w) {
        const SaturationOracle o = oracle_saturation({}, grid_b, grid_w);
        return py::make_tuple(o.b, o.value);
      },
      py::arg("grid_b") = 2000, py::arg("grid_w") = 2000);
  m.def(
      "oracle_estimation",
      [](int grid_w) -> py::object {
        const auto o = oracle_estimation({}, grid_w);
        if (!o) return py::none();
        return py::make_tuple(o->m_lo, o->m_hi);
      },
      py::arg("grid_w") = 5);

  m.def(
      "cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "sipred");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        std::ostringstream out, err;
        const int code = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line tool in-process; returns (exit code, stdout, stderr).");
}
