#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "apspec/experiments.hpp"
#include "apspec/freqsets.hpp"
#include "apspec/gauge.hpp"
#include "apspec/prufer.hpp"
#include "apspec/spectral.hpp"
#include "apspec/weights.hpp"
#include "apspec/wvn.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

// JSON crosses the boundary as text; the Python side parses it with the json module.
std::string dump(const json& j) { return j.dump(); }

apspec::MatrixOperator dense(const Eigen::MatrixXcd& m) {
  return apspec::MatrixOperator(m, apspec::UniformGrid{0.0, 1.0, static_cast<std::size_t>(m.rows())},
                                apspec::BoundaryConvention::dirichlet, 1.0, true);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Almost-periodic spectral laboratory: compiled core";
  m.attr("__version__") = APSPEC_VERSION;

  // Translators run newest first, so the base class is registered before its refinements.
  auto error = py::register_exception<apspec::Error>(m, "Error", PyExc_RuntimeError);
  auto invalid = py::register_exception<apspec::InvalidArgument>(m, "InvalidArgument", error.ptr());
  py::register_exception<apspec::NonConvergence>(m, "NonConvergence", error.ptr());
  py::register_exception<apspec::ResolutionError>(m, "ResolutionError", error.ptr());
  py::register_exception<apspec::ConfigError>(m, "ConfigError", invalid.ptr());

  m.def("experiment_kinds", &apspec::experiment_kinds);
  m.def("experiment_schema_json", [](const std::string& kind) { return dump(apspec::experiment_schema(kind)); });
  m.def("validate_config_json",
        [](const std::string& config) { return dump(apspec::validate_config(json::parse(config))); });
  m.def(
      "run_experiment_json",
      [](const std::string& config, const std::string& out) {
        const auto o = apspec::run_experiment(json::parse(config), out);
        return dump({{"report", o.report}, {"artifacts", o.artifacts}, {"manifest", o.manifest}});
      },
      py::arg("config"), py::arg("out"), py::call_guard<py::gil_scoped_release>());

  m.def(
      "quasi_periodic_set",
      [](const std::vector<double>& omega, int n_max) { return apspec::make_quasi_periodic(omega, n_max).elements(); },
      py::arg("omega"), py::arg("n_max"));
  m.def(
      "limit_periodic_set",
      [](const std::vector<std::int64_t>& mm, int n_max) { return apspec::make_limit_periodic(mm, n_max).elements(); },
      py::arg("m"), py::arg("n_max"));
  m.def(
      "diophantine_constant",
      [](const std::vector<double>& omega, int n_max, double mu) {
        const auto r = apspec::diophantine_constant(omega, n_max, mu);
        return py::make_tuple(r.c, r.witness);
      },
      py::arg("omega"), py::arg("n_max"), py::arg("mu"));
  m.def("min_gap", &apspec::min_gap, py::arg("thetas"));

  m.def("weight_exponent", &apspec::weight_exponent, py::arg("k"));
  m.def(
      "s_weight",
      [](const std::vector<double>& thetas, const std::vector<std::pair<double, double>>& table) {
        return apspec::s_weight(thetas, apspec::SeminormTable(table)).value;
      },
      py::arg("thetas"), py::arg("table"), "s_k for a table of (theta, ||w_theta||) pairs");

  m.def(
      "prufer_endpoint_angles",
      [](const std::function<double(double)>& V, double a, double b, const std::vector<double>& ks,
         const std::vector<double>& theta0) { return apspec::prufer_endpoint_angles(V, a, b, ks, theta0); },
      py::arg("V"), py::arg("a"), py::arg("b"), py::arg("ks"), py::arg("theta0"));
  m.def(
      "shoot_rotation",
      [](double a, double b, const std::vector<double>& ks, const std::vector<double>& start,
         const std::vector<double>& target) { return dump(apspec::shoot_rotation(a, b, ks, start, target).to_json()); },
      py::arg("a"), py::arg("b"), py::arg("ks"), py::arg("theta_start"), py::arg("theta_target"),
      py::call_guard<py::gil_scoped_release>());

  m.def(
      "projector_kernel",
      [](double L, std::size_t N, const std::vector<double>& lambdas,
         const std::vector<std::pair<double, double>>& pairs, std::optional<std::vector<double>> w0_samples) {
        // W0 is given on the N - 2 interior nodes; it is interpolated piecewise linearly.
        std::function<double(double)> W0;
        if (w0_samples) {
          if (w0_samples->size() != N - 2) throw apspec::InvalidArgument("W0 needs one sample per interior node");
          const double dx = 2.0 * L / static_cast<double>(N - 1);
          W0 = [w = *w0_samples, L, dx](double x) {
            const double s = (x + L) / dx - 1.0;
            const auto i = static_cast<std::ptrdiff_t>(std::floor(s));
            const auto at = [&](std::ptrdiff_t j) {
              return j < 0 || j >= static_cast<std::ptrdiff_t>(w.size()) ? 0.0 : w[static_cast<std::size_t>(j)];
            };
            return at(i) + (s - static_cast<double>(i)) * (at(i + 1) - at(i));
          };
        }
        const auto op = apspec::discretize(W0, nullptr, L, N);
        const auto ks = apspec::projector_kernel(op, lambdas, pairs);
        Eigen::MatrixXcd out(static_cast<Eigen::Index>(lambdas.size()), static_cast<Eigen::Index>(pairs.size()));
        for (std::size_t l = 0; l < lambdas.size(); ++l)
          for (std::size_t p = 0; p < pairs.size(); ++p)
            out(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(p)) = ks.values[l][p];
        return py::make_tuple(out, ks.pairs);
      },
      py::arg("L"), py::arg("N"), py::arg("lambdas"), py::arg("pairs"), py::arg("W0") = py::none(),
      "Kernel values [lambda, pair] and the grid-snapped pairs");

  m.def(
      "conjugate_truncated",
      [](const Eigen::MatrixXcd& P, const Eigen::MatrixXcd& G, int N) {
        return Eigen::MatrixXcd(apspec::conjugate_truncated(dense(P), dense(G), N).matrix);
      },
      py::arg("P"), py::arg("G"), py::arg("N"));
  m.def(
      "conjugate_exact",
      [](const Eigen::MatrixXcd& P, const Eigen::MatrixXcd& G) {
        return Eigen::MatrixXcd(apspec::conjugate_exact(dense(P), dense(G)).matrix);
      },
      py::arg("P"), py::arg("G"));

  m.def(
      "build_embedded",
      [](const std::vector<double>& kappas, int m_max) {
        apspec::EmbedConfig cfg;
        cfg.m_max = m_max;
        const auto b = apspec::build_embedded(kappas, cfg);
        py::list efs;
        for (const auto& ef : b.eigenfunctions)
          efs.append(py::dict(py::arg("kappa") = ef.kappa, py::arg("x") = ef.x, py::arg("u") = ef.u,
                              py::arg("du") = ef.du, py::arg("boundary_value") = ef.boundary_value));
        return py::make_tuple(dump(b.plan.to_json()), efs);
      },
      py::arg("kappas"), py::arg("m_max") = 1);
}
