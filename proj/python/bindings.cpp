// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Python bindings. Reports cross the boundary as JSON text; the Python
// package decodes them.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "relubound/bounding.hpp"
#include "relubound/error.hpp"
#include "relubound/evt.hpp"
#include "relubound/interval.hpp"
#include "relubound/oracle.hpp"
#include "relubound/report.hpp"
#include "relubound/sampling.hpp"
#include "relubound/verifier.hpp"

namespace py = pybind11;
using namespace relubound;

namespace {

RunOptions run_options(const Network& net, std::size_t samples, std::uint64_t seed, std::optional<double> p,
                       bool apply_evt) {
  RunOptions opt;
  opt.pt.samples = samples;
  opt.pt.evt = EvtConfig::for_network(net);
  if (p) opt.pt.evt.p = *p;
  opt.pt.apply_evt = apply_evt;
  opt.pt.seed = seed;
  return opt;
}

std::pair<double, double> pair_of(const OutputBounds& b) { return {b.lower, b.upper}; }

}  // namespace

PYBIND11_MODULE(_relubound, m) {
  m.doc() = "Interval, linear-relaxation and sampling-based bounds for small ReLU networks";

  static py::exception<Error> error(m, "Error", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr ep) {
    try {
      if (ep) std::rethrow_exception(ep);
    } catch (const Error& e) {
      py::set_error(error, (std::string(to_string(e.code())) + ": " + e.what()).c_str());
    }
  });

  py::class_<Network>(m, "Network")
      .def_static("from_json", [](const std::string& text) { return Network::from_json(nlohmann::json::parse(text)); })
      .def_static("load", [](const std::string& path) { return load_network(path); })
      .def("to_json", [](const Network& n) { return n.to_json().dump(); })
      .def_property_readonly("input_dim", &Network::input_dim)
      .def_property_readonly("output_dim", &Network::output_dim)
      .def_property_readonly("hidden_neurons", &Network::hidden_neuron_count)
      .def("evaluate", &Network::evaluate, py::arg("x"))
      .def("with_output_offset", &Network::with_output_offset, py::arg("offset"))
      .def("encode_margin", [](const Network& n, std::size_t target) { return encode_margin(n, target); },
           py::arg("target"));

  py::class_<PerturbationSet>(m, "PerturbationSet")
      .def_static("linf_ball", py::overload_cast<const Vector&, double>(&PerturbationSet::linf_ball), py::arg("x0"),
                  py::arg("epsilon"))
      .def_static("box", &PerturbationSet::box, py::arg("lower"), py::arg("upper"))
      .def_static("load", [](const std::string& path) { return load_property(path); })
      .def_property_readonly("lower", &PerturbationSet::lower)
      .def_property_readonly("upper", &PerturbationSet::upper)
      .def_property_readonly("epsilon", &PerturbationSet::epsilon)
      .def("contains", &PerturbationSet::contains, py::arg("x"), py::arg("tol") = 0.0);

  m.def("ibp_bounds", [](const Network& net, const PerturbationSet& region) {
    const LayerBounds b = ibp(net, region);
    return std::make_pair(b.output().lo(0), b.output().hi(0));
  });
  m.def("crown_bounds", [](const Network& net, const PerturbationSet& region) {
    return pair_of(crown_bounds(net, region).output);
  });
  m.def(
      "pt_lirpa_bounds",
      [](const Network& net, const PerturbationSet& region, std::size_t samples, std::uint64_t seed,
         std::optional<double> p, bool apply_evt) {
        const RunOptions opt = run_options(net, samples, seed, p, apply_evt);
        py::gil_scoped_release release;
        return to_json(run_method(ReportMethod::PtLirpa, net, region, opt), false).dump();
      },
      py::arg("net"), py::arg("region"), py::arg("samples") = 10000, py::arg("seed") = 0, py::arg("p") = py::none(),
      py::arg("apply_evt") = true);
  m.def(
      "exact_range",
      [](const Network& net, const PerturbationSet& region, std::size_t max_unstable) {
        const ExactRange r = exact_range(net, region, {}, max_unstable);
        return std::make_pair(r.lower, r.upper);
      },
      py::arg("net"), py::arg("region"), py::arg("max_unstable") = 20);
  m.def(
      "compare",
      [](const Network& net, const PerturbationSet& region, bool with_oracle, std::size_t samples,
         std::uint64_t seed, bool timing) {
        const RunOptions opt = run_options(net, samples, seed, std::nullopt, true);
        py::gil_scoped_release release;
        return compare_to_json(compare_methods(net, region, opt, with_oracle), timing).dump();
      },
      py::arg("net"), py::arg("region"), py::arg("with_oracle") = false, py::arg("samples") = 10000,
      py::arg("seed") = 0, py::arg("timing") = true);
  m.def(
      "verify",
      [](const Network& net, const PerturbationSet& region, const std::string& method, std::size_t samples,
         double timeout, std::uint64_t seed, std::size_t workers, bool timing) {
        VerifierConfig cfg;
        cfg.method = method == "crown" ? BoundMethod::Crown : BoundMethod::PtLirpa;
        if (method != "crown" && method != "pt-lirpa") throw Error(ErrorCode::InvalidArgument, "unknown method " + method);
        cfg.samples = samples;
        cfg.timeout_seconds = timeout;
        cfg.seed = seed;
        cfg.workers = workers;
        py::gil_scoped_release release;
        return to_json(verify(net, region, cfg), timing).dump();
      },
      py::arg("net"), py::arg("region"), py::arg("method") = "pt-lirpa", py::arg("samples") = 10000,
      py::arg("timeout") = 30.0, py::arg("seed") = 0, py::arg("workers") = 1, py::arg("timing") = true);

  m.def("wilks_sample_size", &wilks_sample_size, py::arg("psi"), py::arg("coverage"));
  m.def("union_sample_size", &union_sample_size, py::arg("psi"), py::arg("coverage"), py::arg("neurons"));
  m.def("worst_case_probability", &worst_case_probability, py::arg("n"), py::arg("delta"), py::arg("lipschitz"),
        py::arg("d"));
  m.def("network_confidence", &network_confidence, py::arg("neurons"), py::arg("p"));
}
