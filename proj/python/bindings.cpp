#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cli.hpp"
#include "vaerl/analysis.hpp"
#include "vaerl/config.hpp"
#include "vaerl/errors.hpp"
#include "vaerl/graph.hpp"
#include "vaerl/managers.hpp"
#include "vaerl/toy.hpp"

namespace py = pybind11;
using namespace vaerl;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Topology managers for partially observable multi-agent teams";
  m.attr("__version__") = std::string(config::version);

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<MissingArtifact>(m, "MissingArtifact", base.ptr());

  py::class_<graph::Topology>(m, "Topology")
      .def(py::init<int>(), py::arg("n"))
      .def(py::init<int, std::vector<std::uint8_t>>(), py::arg("n"), py::arg("bits"))
      .def_static("complete", &graph::Topology::complete)
      .def_static("from_index", &graph::Topology::from_index, py::arg("n"), py::arg("index"))
      .def_static("from_string", &graph::Topology::from_string, py::arg("n"), py::arg("bits"))
      .def_property_readonly("n", &graph::Topology::n)
      .def_property_readonly("bits", &graph::Topology::bits)
      .def("link_count", &graph::Topology::link_count)
      .def("index", &graph::Topology::index)
      .def("linked", &graph::Topology::linked)
      .def("__eq__", [](const graph::Topology& a, const graph::Topology& b) { return a == b; })
      .def("__repr__", [](const graph::Topology& t) {
        std::string bits;
        for (auto b : t.bits()) bits += b ? '1' : '0';
        return "Topology(n=" + std::to_string(t.n()) + ", bits='" + bits + "')";
      });

  m.def("link_slots", &graph::link_slots, py::arg("n"));
  m.def("degrees", &graph::degrees, py::arg("topology"));
  m.def("betweenness", &graph::betweenness, py::arg("topology"));
  m.def(
      "density_category", [](const graph::Topology& t) { return std::string(graph::to_string(graph::density_category(t))); },
      py::arg("topology"));

  m.def("toy_report_json", [] { return toy::flipping_rank_report(toy::ToyConfig{}).to_json(); });
  m.def("toy_report_text", [] { return toy::flipping_rank_report(toy::ToyConfig{}).to_text(); });

  m.def("profile_json", [](const std::string& name) { return config::to_json(config::make_profile(config::profile_from_string(name))); },
        py::arg("profile") = "desk");
  m.def("config_hash", [](const std::string& json_text) { return config::config_hash(config::parse_run_config(json_text)); },
        py::arg("json_text"));

  m.def(
      "evaluate_random",
      [](int n, double vision, int episodes, std::uint64_t seed) {
        const auto env = env::EnvConfig::homogeneous(n, vision);
        managers::RandomManager manager(n);
        py::gil_scoped_release release;
        const auto s = managers::evaluate(env, manager, episodes, seed);
        py::gil_scoped_acquire acquire;
        py::dict d;
        d["episodes"] = s.episodes;
        d["mean_return"] = s.mean_return;
        d["stderr_return"] = s.stderr_return;
        d["mean_performance"] = s.mean_performance;
        d["mean_cost"] = s.mean_cost;
        d["mean_step_cost"] = s.mean_step_cost;
        d["returns"] = s.returns;
        return d;
      },
      py::arg("n") = 4, py::arg("vision") = 1.0, py::arg("episodes") = 100, py::arg("seed") = 0);

  m.def(
      "welch_test",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto w = analysis::welch_test(a, b);
        py::dict d;
        d["mean_a"] = w.mean_a;
        d["mean_b"] = w.mean_b;
        d["t"] = w.t_statistic;
        d["dof"] = w.dof;
        d["p"] = w.p_value;
        return d;
      },
      py::arg("a"), py::arg("b"));

  // Runs the command line in-process; returns (exit code, stdout, stderr).
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
