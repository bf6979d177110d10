#include <sstream>
#include <stdexcept>
#include <string>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "droplab/dataset.hpp"
#include "droplab/drop.hpp"
#include "droplab/experiments.hpp"
#include "droplab/graph.hpp"
#include "droplab/theory.hpp"

namespace py = pybind11;
using namespace droplab;

namespace {

DropKind kind(const std::string& name) {
  const auto k = parse_drop_kind(name);
  if (!k) throw py::value_error("unknown drop kind: " + name);
  return *k;
}

EntropyInputs entropy_inputs(std::vector<double> p, std::vector<double> senders, std::vector<double> deliveries,
                             double msg_dim, double delta) {
  EntropyInputs in{std::move(p), std::move(senders), std::move(deliveries), msg_dim, delta};
  in.validate();
  return in;
}

}  // namespace

PYBIND11_MODULE(_droplab, m) {
  m.doc() = "Bindings to the droplab core library";

  py::list kinds;
  for (DropKind k : kDroppingKinds) kinds.append(std::string(to_string(k)));
  m.attr("DROPPING_KINDS") = py::tuple(kinds);

  py::class_<Graph>(m, "Graph")
      .def_static("from_edges", [](std::size_t n, const std::vector<Edge>& edges) { return Graph::from_edges(n, edges); },
                  py::arg("n"), py::arg("edges"))
      .def_readonly("n", &Graph::n)
      .def_property_readonly("num_undirected", &Graph::num_undirected)
      .def_property_readonly("num_classes", &Graph::num_classes)
      .def_property_readonly("feature_dim", &Graph::feature_dim)
      .def_readonly("labels", &Graph::labels)
      .def("edges", &Graph::undirected_edges, "Undirected edges as (u, v) with u < v")
      .def("degrees", [](const Graph& g) { return degrees(g); })
      .def("has_edge", &Graph::has_edge)
      .def("features", [](const Graph& g) {
        std::vector<std::vector<double>> rows;
        if (!g.features) return rows;
        for (std::size_t i = 0; i < g.n; ++i) {
          const auto* row = g.features->data.data() + i * g.features->cols;
          rows.emplace_back(row, row + g.features->cols);
        }
        return rows;
      })
      .def("split", [](const Graph& g) {
        std::vector<std::string> s;
        for (Split x : g.split) s.emplace_back(to_string(x));
        return s;
      })
      .def("__repr__", [](const Graph& g) {
        std::ostringstream s;
        s << "Graph(n=" << g.n << ", edges=" << g.num_undirected() << ", classes=" << g.num_classes() << ")";
        return s.str();
      });

  m.def("make_regular_graph", &make_regular_graph, py::arg("n"), py::arg("degree"), py::arg("seed"));
  m.def(
      "make_sbm",
      [](std::size_t n, std::size_t blocks, double p_in, double p_out, std::size_t dim, double noise,
         std::uint64_t seed) { return make_sbm(SbmParams{n, blocks, p_in, p_out, dim, noise}, seed); },
      py::arg("n") = 300, py::arg("blocks") = 3, py::arg("p_in") = 0.03, py::arg("p_out") = 0.005,
      py::arg("dim") = 32, py::arg("noise") = 1.0, py::arg("seed") = 0);
  m.def("perturb_add_edges", &perturb_add_edges, py::arg("graph"), py::arg("ratio"), py::arg("seed"));
  m.def("rewire", &rewire, py::arg("graph"), py::arg("ratio"), py::arg("seed"));
  m.def("load_dataset", &load_dataset, py::arg("path"));
  m.def("save_dataset", &save_dataset, py::arg("graph"), py::arg("path"));
  m.def(
      "diversity_rate_bound", [](const Graph& g, std::size_t c) { return diversity_rate_bound(g, c); },
      py::arg("graph"), py::arg("c"));

  m.def(
      "variance_closed_form",
      [](const std::string& k, std::size_t n, std::size_t c, std::size_t d, double delta) {
        return variance_closed_form(kind(k), n, c, d, delta);
      },
      py::arg("kind"), py::arg("n"), py::arg("c"), py::arg("d"), py::arg("delta"));
  m.def(
      "variance_monte_carlo",
      [](const std::string& k, const Graph& g, std::size_t c, double delta, std::size_t trials, std::uint64_t seed) {
        const VarianceReport r = variance_monte_carlo(kind(k), g, c, delta, trials, seed);
        py::dict out;
        out["closed_form"] = r.closed_form;
        out["estimate"] = r.mc_estimate;
        out["std_error"] = r.mc_std_error;
        out["trials"] = r.mc_trials;
        return out;
      },
      py::arg("kind"), py::arg("graph"), py::arg("c"), py::arg("delta"), py::arg("trials"), py::arg("seed"));
  m.def(
      "regularization_check",
      [](const std::string& k, double delta, std::size_t trials, std::uint64_t seed, double weight) {
        const RegCheckReport r =
            regularization_check(regularization_fixture(weight), DropSpec{kind(k), delta, {}, 0}, trials, seed);
        py::dict out;
        out["base_loss"] = r.base_loss;
        out["gap"] = r.gap;
        out["gap_std_error"] = r.gap_std_error;
        out["taylor_term"] = r.taylor_term;
        out["relative_residual"] = r.relative_residual();
        return out;
      },
      py::arg("kind"), py::arg("delta"), py::arg("trials"), py::arg("seed"), py::arg("weight") = 0.5);
  m.def(
      "entropy_clean",
      [](std::vector<double> p, std::vector<double> senders, std::vector<double> deliveries, double msg_dim) {
        return entropy_clean(entropy_inputs(std::move(p), std::move(senders), std::move(deliveries), msg_dim, 0.0));
      },
      py::arg("p"), py::arg("senders"), py::arg("deliveries"), py::arg("msg_dim"));
  m.def(
      "entropy_expected",
      [](const std::string& k, std::vector<double> p, std::vector<double> senders, std::vector<double> deliveries,
         double msg_dim, double delta) {
        return entropy_expected(
            kind(k), entropy_inputs(std::move(p), std::move(senders), std::move(deliveries), msg_dim, delta));
      },
      py::arg("kind"), py::arg("p"), py::arg("senders"), py::arg("deliveries"), py::arg("msg_dim"),
      py::arg("delta"));

  m.def(
      "config_defaults", [](const std::string& command) { return ExperimentConfig::defaults(command).to_json(); },
      py::arg("command"), "Default configuration of a command as JSON text");
  m.def(
      "run_experiment",
      [](const std::string& config_json, const std::filesystem::path& out, std::size_t jobs) {
        const ExperimentConfig cfg = ExperimentConfig::from_json(config_json);
        cfg.validate();
        std::ostringstream log;
        {
          py::gil_scoped_release release;
          run_experiment(cfg, out, jobs, log);
        }
        return log.str();
      },
      py::arg("config_json"), py::arg("out"), py::arg("jobs") = 1,
      "Runs a command from its JSON configuration and returns the progress log");

  py::register_exception<std::invalid_argument>(m, "InvalidArgument", PyExc_ValueError);
}
