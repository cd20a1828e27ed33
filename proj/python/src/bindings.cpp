#include "scenario.hpp"
#include "specflow/acceptance.hpp"
#include "specflow/doi.hpp"
#include "specflow/errors.hpp"
#include "specflow/paths.hpp"
#include "specflow/quadrature.hpp"
#include "specflow/spectral_flow.hpp"
#include "specflow/weights.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace specflow;

namespace {

WeightSpec weight_spec(const std::string& kind, const py::kwargs& kw) {
  const auto num = [&](const char* key, double fallback) {
    return kw.contains(key) ? kw[key].cast<double>() : fallback;
  };
  for (const auto& item : kw) {
    const auto key = item.first.cast<std::string>();
    static const std::vector<std::string> known{"delta", "m", "epsilon", "p", "variant"};
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InvalidSpec("unknown weight parameter '" + key + "'");
    }
  }
  if (kind == "bump") return BumpSpec{num("delta", 0.5), kw.contains("m") ? kw["m"].cast<int>() : 2};
  if (kind == "gaussian") return GaussianSpec{num("epsilon", 1.0)};
  if (kind == "resolvent") {
    const std::string variant = kw.contains("variant") ? kw["variant"].cast<std::string>() : "half_shift";
    if (variant != "half_shift" && variant != "classic") throw InvalidSpec("unknown resolvent variant '" + variant + "'");
    return ResolventSpec{num("p", 1.0), variant == "classic" ? ResolventVariant::classic : ResolventVariant::half_shift};
  }
  throw InvalidSpec("unknown weight kind '" + kind + "'");
}

py::dict report_dict(const SFReport& r) {
  py::dict d;
  d["sf_partition"] = r.sf_partition;
  d["sf_crossing"] = r.sf_crossing;
  d["integral_value"] = r.integral_value;
  d["boundary_term"] = r.boundary_term;
  d["total"] = r.total;
  d["rounded_total"] = r.rounded_total;
  d["integer_defect"] = r.integer_defect;
  d["quadrature_error_estimate"] = r.quadrature_error_estimate;
  d["wall_time"] = r.wall_time;
  return d;
}

SFOptions sf_options(int grid) {
  SFOptions o;
  o.grid = grid;
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spectral flow of framed operator paths: estimators, weights and double operator integrals";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidInput>(m, "InvalidInput", error.ptr());
  py::register_exception<DomainError>(m, "DomainError", error.ptr());
  py::register_exception<NotTraceClass>(m, "NotTraceClass", error.ptr());
  py::register_exception<NoCalkinModel>(m, "NoCalkinModel", error.ptr());
  py::register_exception<InvalidSpec>(m, "InvalidSpec", error.ptr());
  py::register_exception<InvalidPair>(m, "InvalidPair", error.ptr());
  py::register_exception<InvalidKernel>(m, "InvalidKernel", error.ptr());
  py::register_exception<HypothesisViolation>(m, "HypothesisViolation", error.ptr());
  py::register_exception<PathTooWild>(m, "PathTooWild", error.ptr());
  py::register_exception<DegenerateCrossing>(m, "DegenerateCrossing", error.ptr());
  py::register_exception<ModelViolation>(m, "ModelViolation", error.ptr());
  py::register_exception<GeneratorError>(m, "GeneratorError", error.ptr());
  py::register_exception<NotClosed>(m, "NotClosed", error.ptr());
  py::register_exception<cli::ConfigError>(m, "ConfigError", error.ptr());

  py::class_<FramedOperator>(m, "FramedOperator")
      .def(py::init<Matrix, std::vector<double>>(), py::arg("block"), py::arg("essential_points") = std::vector<double>{})
      .def_property_readonly("block", [](const FramedOperator& a) { return a.block(); })
      .def_property_readonly("essential_points", &FramedOperator::essential_points)
      .def_property_readonly("dim", &FramedOperator::dim)
      .def("op_norm", [](const FramedOperator& a) { return op_norm(a); })
      .def("phase", [](const FramedOperator& a) { return phase(a); })
      .def("eigenvalues", [](const FramedOperator& a) { return eigensystem(a).values; })
      .def("essential_data", [](const FramedOperator& a) {
        const auto d = essential_data(a);
        py::dict out;
        out["delta_f"] = d.delta_f;
        out["essential_norm"] = d.essential_norm;
        out["is_fredholm"] = d.is_fredholm;
        out["in_f_pm1"] = d.in_f_pm1;
        return out;
      })
      .def("__repr__", [](const FramedOperator& a) {
        return "<FramedOperator dim=" + std::to_string(a.dim()) + " essential=" +
               std::to_string(a.essential_points().size()) + ">";
      });

  m.def("framed_distance", &framed_distance);
  m.def("relative_index", &relative_index, py::arg("p"), py::arg("q"));

  py::class_<SpectralWeight>(m, "SpectralWeight")
      .def_property_readonly("mass", &SpectralWeight::mass)
      .def_property_readonly("support", [](const SpectralWeight& w) { return py::make_tuple(w.support_lo(), w.support_hi()); })
      .def_property_readonly("compact", &SpectralWeight::compact)
      .def("density", py::vectorize(&SpectralWeight::density))
      .def("antiderivative", py::vectorize(&SpectralWeight::antiderivative))
      .def("boundary_f", py::vectorize(&SpectralWeight::boundary_f))
      .def("__repr__", &SpectralWeight::describe);
  m.def("weight", [](const std::string& kind, const py::kwargs& kw) { return make_weight(weight_spec(kind, kw)); },
        py::arg("kind"),
        "weight('bump', delta=0.5, m=2), weight('gaussian', epsilon=1.0), weight('resolvent', p=1, variant='classic')");
  m.def("boundary_term", py::overload_cast<const SpectralWeight&, const FramedOperator&, const FramedOperator&>(&boundary_term));

  py::class_<OperatorPath>(m, "OperatorPath")
      .def("at", &OperatorPath::at, py::arg("t"))
      .def("derivative", [](const OperatorPath& p, double t) { return p.derivative(t); }, py::arg("t"))
      .def_property_readonly("dim", &OperatorPath::dim)
      .def_property_readonly("essential_points", &OperatorPath::essential_points)
      .def_property_readonly("breakpoints", &OperatorPath::breakpoints)
      .def_property_readonly("unbounded", [](const OperatorPath& p) { return p.kind() == PathKind::unbounded_model; });

  m.def("line_path", [](const FramedOperator& f0, const FramedOperator& f1, bool unbounded) {
    return make_line_path(f0, f1, unbounded ? PathKind::unbounded_model : PathKind::bounded);
  }, py::arg("f0"), py::arg("f1"), py::arg("unbounded") = false);
  m.def("polynomial_path", [](std::vector<Matrix> c, std::vector<double> ess, bool unbounded) {
    return make_polynomial_path(std::move(c), std::move(ess), unbounded ? PathKind::unbounded_model : PathKind::bounded);
  }, py::arg("coefficients"), py::arg("essential_points") = std::vector<double>{}, py::arg("unbounded") = false);
  m.def("trig_path", [](std::uint64_t seed, int n, double amplitude, int harmonics, double base_radius, double base_gap,
                        double drift, double margin) {
    TrigPathSpec s;
    s.seed = seed;
    s.n = n;
    s.amplitude = amplitude;
    s.harmonics = harmonics;
    s.base_radius = base_radius;
    s.base_gap = base_gap;
    s.drift = drift;
    s.margin = margin;
    return make_trig_path(s);
  }, py::arg("seed"), py::arg("n"), py::arg("amplitude") = 0.1, py::arg("harmonics") = 2, py::arg("base_radius") = 0.6,
        py::arg("base_gap") = 0.0, py::arg("drift") = 0.0, py::arg("margin") = 0.05);
  m.def("trig_loop", &make_trig_loop, py::arg("seed"), py::arg("n"), py::arg("amplitude"), py::arg("harmonics"));
  m.def("quadratic_dpath", [](std::uint64_t seed, int n, double headroom, double spread, double curvature) {
    return make_quadratic_dpath({seed, n, headroom, spread, curvature});
  }, py::arg("seed"), py::arg("n") = 8, py::arg("headroom") = 4.0, py::arg("spread") = 8.0, py::arg("curvature") = 2.0);
  m.def("vartheta_path", &vartheta_path);
  m.def("reversed", &reversed);
  m.def("concatenate", &concatenate);
  m.def("arc_length", &arc_length, py::arg("path"), py::arg("samples") = 129);

  m.def("sf_partition", [](const OperatorPath& p, int grid) { return sf_partition(p, grid); },
        py::arg("path"), py::arg("grid") = 64);
  m.def("sf_crossing", &sf_crossing, py::arg("path"), py::arg("grid") = 64);
  m.def("crossing_events", [](const OperatorPath& p, int grid, bool locate) {
    CrossingOptions o;
    o.locate = locate;
    py::list out;
    for (const auto& e : crossing_events(p, grid, o).events) out.append(py::make_tuple(e.t, e.branch, e.direction));
    return out;
  }, py::arg("path"), py::arg("grid") = 64, py::arg("locate") = true);
  m.def("sf_integral_bounded", [](const OperatorPath& p, const SpectralWeight& w, double tol, int grid) {
    return report_dict(sf_integral_bounded(p, w, tol, sf_options(grid)));
  }, py::arg("path"), py::arg("weight"), py::arg("quad_tol") = 1e-9, py::arg("grid") = 64);
  m.def("sf_integral_unbounded", [](const OperatorPath& p, const SpectralWeight& w, double tol, int grid) {
    return report_dict(sf_integral_unbounded(p, w, tol, sf_options(grid)));
  }, py::arg("dpath"), py::arg("weight"), py::arg("quad_tol") = 1e-9, py::arg("grid") = 64);
  m.def("loop_integral", [](const OperatorPath& p, const SpectralWeight& w, double tol) {
    return loop_integral(p, w, tol);
  }, py::arg("loop"), py::arg("weight"), py::arg("quad_tol") = 1e-9);
  m.def("retract", &retract, py::arg("f"), py::arg("t"));
  m.def("clamp_chi", py::vectorize(&clamp_chi));

  m.def("divided_difference", [](const std::string& f, double l, double mu) {
    return divided_difference(functions::by_name(f), l, mu);
  }, py::arg("function"), py::arg("l"), py::arg("m"));
  m.def("perturbation_residual", [](const std::string& f, const FramedOperator& a, const FramedOperator& b) {
    return perturbation_residual(functions::by_name(f), a, b);
  }, py::arg("function"), py::arg("a"), py::arg("b"));
  m.def("vartheta_derivative", py::overload_cast<const FramedOperator&, const Matrix&>(&vartheta_derivative),
        py::arg("d"), py::arg("ddot"));
  m.def("interpolation_gap", &interpolation_gap, py::arg("a"), py::arg("b0"), py::arg("b1"), py::arg("theta"));

  m.def("integrate", [](const std::function<double(double)>& f, double a, double b, double tol) {
    const auto r = integrate_adaptive(f, a, b, tol);
    return py::make_tuple(r.value, r.error_estimate);
  }, py::arg("f"), py::arg("a"), py::arg("b"), py::arg("tol") = 1e-10);

  m.def("acceptance_criteria", [] {
    py::list out;
    for (const auto& c : acceptance_criteria()) out.append(py::make_tuple(c.id, c.name));
    return out;
  });
  m.def("run_acceptance", [](const std::string& filter, int threads) {
    std::vector<CriterionResult> results;
    {
      py::gil_scoped_release release;
      results = run_acceptance(filter, threads);
    }
    py::list out;
    for (const auto& r : results) {
      py::dict d;
      d["id"] = r.id;
      d["name"] = r.name;
      d["pass"] = r.pass;
      d["detail"] = r.detail;
      d["seconds"] = r.seconds;
      out.append(d);
    }
    return out;
  }, py::arg("filter") = "", py::arg("threads") = 1);

  m.def("run_config", [](const std::string& text, int threads) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw cli::ConfigError(e.what());
    }
    const auto cfg = cli::parse_config(doc);
    std::vector<cli::ScenarioResult> results;
    {
      py::gil_scoped_release release;
      results = cli::run_all(cfg.scenarios, threads);
    }
    py::list out;
    for (const auto& r : results) out.append(cli::report_json(r).dump());
    return out;
  }, py::arg("config_json"), py::arg("threads") = 1, "Runs a scenario config; returns one JSON report string per scenario.");
}
