#include "codkit/commands.hpp"
#include "codkit/errors.hpp"
#include "codkit/gradients.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

namespace py = pybind11;
using namespace codkit;

namespace {

MetricConfig make_config(const Matrix& Xs, const Matrix& Xt, const Matrix& Ys, const Matrix& Yt,
                         const std::string& x_kernel, const std::string& y_kernel,
                         std::optional<double> x_bandwidth, std::optional<double> y_bandwidth, double epsilon,
                         double ridge_lambda, const std::string& mod_variant, double delta_tolerance) {
  MetricConfig cfg;
  cfg.x_kernel.kind = kernel_kind_from_string(x_kernel);
  cfg.y_kernel.kind = kernel_kind_from_string(y_kernel);
  cfg.y_kernel.delta_tolerance = delta_tolerance;
  auto stacked = [](const Matrix& a, const Matrix& b) {
    Matrix m(a.rows() + b.rows(), a.cols());
    m << a, b;
    return m;
  };
  if (cfg.x_kernel.kind == KernelKind::gaussian)
    cfg.x_kernel.bandwidth = x_bandwidth ? *x_bandwidth : median_heuristic(stacked(Xs, Xt));
  if (cfg.y_kernel.kind == KernelKind::gaussian)
    cfg.y_kernel.bandwidth = y_bandwidth ? *y_bandwidth : 0.5 * median_heuristic(stacked(Ys, Yt));
  cfg.epsilon = epsilon;
  cfg.ridge_lambda = ridge_lambda;
  if (mod_variant == "corrected") cfg.mod_variant = ModVariant::corrected;
  else if (mod_variant == "literal") cfg.mod_variant = ModVariant::literal;
  else throw ConfigError("mod_variant: expected corrected or literal");
  cfg.validate();
  return cfg;
}

py::dict value_dict(const MetricValue& v) {
  py::dict components;
  for (const auto& [name, value] : v.components) components[py::str(name)] = value;
  py::dict out;
  out["total"] = v.total;
  out["components"] = components;
  return out;
}

py::object json_to_py(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

#define CODKIT_METRIC_ARGS                                                                                   \
  py::arg("Xs"), py::arg("Xt"), py::arg("Ys"), py::arg("Yt"), py::kw_only(), py::arg("x_kernel") = "gaussian", \
      py::arg("y_kernel") = "gaussian", py::arg("x_bandwidth") = py::none(), py::arg("y_bandwidth") = py::none(), \
      py::arg("epsilon") = 0.01, py::arg("ridge_lambda") = 0.001, py::arg("mod_variant") = "corrected",      \
      py::arg("delta_tolerance") = 0.0

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Conditional operator discrepancy metrics and domain adaptation regression";

  auto base = py::register_exception<Error>(m, "CodkitError", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  m.def(
      "kernel_matrix",
      [](const std::string& kind, const Matrix& a, const Matrix& b, double bandwidth, double delta_tolerance) {
        KernelSpec spec{kernel_kind_from_string(kind), bandwidth, delta_tolerance};
        return kernel_matrix(spec, a, b);
      },
      py::arg("kind"), py::arg("a"), py::arg("b"), py::arg("bandwidth") = 1.0, py::arg("delta_tolerance") = 0.0);
  m.def("center_gram", [](const Matrix& k) { return center_gram(k); }, py::arg("k"));
  m.def("nuclear_norm", [](const Matrix& k) { return nuclear_norm(k); }, py::arg("m"));
  m.def("median_heuristic", [](const Matrix& x) { return median_heuristic(x); }, py::arg("x"));
  m.def("metric_names", []() {
    std::vector<std::string> names;
    for (MetricKind k : all_metrics()) names.push_back(to_string(k));
    return names;
  });

  m.def(
      "metric",
      [](const std::string& name, const Matrix& Xs, const Matrix& Xt, const Matrix& Ys, const Matrix& Yt,
         const std::string& xk, const std::string& yk, std::optional<double> xb, std::optional<double> yb, double eps,
         double lam, const std::string& variant, double tol) {
        const MetricConfig cfg = make_config(Xs, Xt, Ys, Yt, xk, yk, xb, yb, eps, lam, variant, tol);
        return value_dict(evaluate(metric_from_string(name), Xs, Xt, Ys, Yt, cfg));
      },
      py::arg("name"), CODKIT_METRIC_ARGS,
      "Evaluates one metric. Gaussian bandwidths default to the median heuristic on the stacked samples "
      "(times 0.5 for labels).");

  m.def(
      "metric_grad",
      [](const std::string& name, const Matrix& Xs, const Matrix& Xt, const Matrix& Ys, const Matrix& Yt,
         const std::string& xk, const std::string& yk, std::optional<double> xb, std::optional<double> yb, double eps,
         double lam, const std::string& variant, double tol) {
        const MetricConfig cfg = make_config(Xs, Xt, Ys, Yt, xk, yk, xb, yb, eps, lam, variant, tol);
        const MetricGrad g = metric_grad(metric_from_string(name), Xs, Xt, Ys, Yt, cfg);
        return py::make_tuple(value_dict(g.value), g.grads.dZs, g.grads.dZt);
      },
      py::arg("name"), CODKIT_METRIC_ARGS, "Returns (value, dXs, dXt); labels are treated as constants.");

  m.def(
      "finite_diff_check",
      [](const std::string& name, const Matrix& Xs, const Matrix& Xt, const Matrix& Ys, const Matrix& Yt, double h,
         const std::string& xk, const std::string& yk, std::optional<double> xb, std::optional<double> yb, double eps,
         double lam, const std::string& variant, double tol) {
        const MetricConfig cfg = make_config(Xs, Xt, Ys, Yt, xk, yk, xb, yb, eps, lam, variant, tol);
        return finite_diff_check(metric_from_string(name), Xs, Xt, Ys, Yt, cfg, h);
      },
      py::arg("name"), py::arg("Xs"), py::arg("Xt"), py::arg("Ys"), py::arg("Yt"), py::arg("h") = 1e-5,
      py::kw_only(), py::arg("x_kernel") = "gaussian", py::arg("y_kernel") = "gaussian",
      py::arg("x_bandwidth") = py::none(), py::arg("y_bandwidth") = py::none(), py::arg("epsilon") = 0.01,
      py::arg("ridge_lambda") = 0.001, py::arg("mod_variant") = "corrected", py::arg("delta_tolerance") = 0.0);

  m.def(
      "gen_synthetic",
      [](Eigen::Index n, std::pair<double, double> source_law, std::pair<double, double> target_law,
         const std::string& curve, double arc_span, double rotation, std::pair<double, double> translation,
         double scale, double noise, std::uint64_t seed) {
        SynthSpec spec;
        spec.n = n;
        spec.source_law = {source_law.first, source_law.second};
        spec.target_law = {target_law.first, target_law.second};
        spec.curve = curve_from_string(curve);
        spec.arc_span = arc_span;
        spec.rotation = rotation;
        spec.translation_x = translation.first;
        spec.translation_y = translation.second;
        spec.scale = scale;
        spec.noise = noise;
        const auto [s, t] = gen_synthetic(spec, seed);
        return py::make_tuple(s.X, s.Y, t.X, t.Y);
      },
      py::arg("n") = 200, py::kw_only(), py::arg("source_law") = std::pair{0.0, 1.0},
      py::arg("target_law") = std::pair{0.0, 1.0}, py::arg("curve") = "circle_arc",
      py::arg("arc_span") = 2.0 * std::numbers::pi, py::arg("rotation") = 0.0,
      py::arg("translation") = std::pair{0.0, 0.0}, py::arg("scale") = 1.0, py::arg("noise") = 0.0,
      py::arg("seed") = 0, "Returns (Xs, Ys, Xt, Yt).");

  m.def(
      "run_config",
      [](const std::string& command, const std::string& config_text, const std::string& out_dir) {
        const ExperimentConfig cfg = experiment_from_keys(KeyValueFile::parse(config_text));
        Json report;
        {
          py::gil_scoped_release release;
          if (command == "train") report = run_train(cfg, out_dir);
          else if (command == "ablate") report = run_ablate(cfg, out_dir);
          else throw ConfigError("run_config: command must be train or ablate");
        }
        return json_to_py(report);
      },
      py::arg("command"), py::arg("config_text"), py::arg("out_dir"),
      "Runs train or ablate from config text and returns the report as a dict.");

  m.def(
      "reference_config",
      []() {
        std::string text;
        for (const auto& [key, value] : reference_experiment().echo()) text += key + " = " + value + "\n";
        return text;
      },
      "Config text of the reference rotation task.");

  m.attr("REPORT_SCHEMA_VERSION") = kReportSchemaVersion;
}
