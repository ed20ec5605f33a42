#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mlap/cli.hpp"
#include "mlap/errors.hpp"
#include "mlap/estimate.hpp"
#include "mlap/free_entropy.hpp"
#include "mlap/gibbs.hpp"
#include "mlap/laplace.hpp"
#include "mlap/nc_poly.hpp"
#include "mlap/potentials.hpp"
#include "mlap/value_function.hpp"
#include "mlap/yosida.hpp"

namespace py = pybind11;
using namespace mlap;

namespace {

PotentialSpec spec_of(const std::string& text) { return spec_from_json(nlohmann::json::parse(text)); }

HermitianTuple tuple_of(const std::vector<Matrix>& mats) {
  if (mats.empty()) throw ConfigError("need at least one matrix", "x");
  return HermitianTuple(mats);
}

py::dict estimate_dict(const ValueEstimate& e) {
  py::dict d;
  d["value"] = e.value;
  d["stderr"] = e.std_error;
  d["samples"] = e.samples;
  d["ess"] = e.ess;
  d["warnings"] = e.warnings;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Matrix Laplace principle estimators";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

  m.def("catalan_numbers", &catalan_numbers, py::arg("count"));

  m.def(
      "canonical_polynomial", [](const std::string& text) { return to_string(parse_polynomial(text)); },
      py::arg("text"));

  m.def(
      "difference_quotient",
      [](const std::string& text, int index) {
        return to_string(free_difference_quotient(parse_polynomial(text), LetterRef{index, 0}));
      },
      py::arg("text"), py::arg("index") = 0);

  m.def(
      "gue_sample",
      [](int n, int count, std::uint64_t seed) {
        RngStream rng(seed, 0);
        return sample_normalized_increment(n, count, 1.0, rng).matrices();
      },
      py::arg("n"), py::arg("m") = 1, py::arg("seed") = 0);

  m.def(
      "potential",
      [](const std::string& spec, const std::vector<std::vector<Matrix>>& slots) {
        std::vector<HermitianTuple> x;
        for (const auto& s : slots) x.push_back(tuple_of(s));
        return eval_potential(spec_of(spec), x);
      },
      py::arg("spec"), py::arg("slots"));

  m.def(
      "value_h",
      [](const std::string& spec, double t, const std::vector<Matrix>& x, std::size_t samples, std::uint64_t seed) {
        ValueQuery q;
        q.spec = spec_of(spec);
        q.t = t;
        q.x = tuple_of(x);
        q.samples = samples;
        RngStream rng(seed, 0);
        return estimate_dict(value_h(q, rng));
      },
      py::arg("spec"), py::arg("t"), py::arg("x"), py::arg("samples") = 256, py::arg("seed") = 0);

  m.def(
      "drift",
      [](const std::string& spec, double t, const std::vector<Matrix>& x, std::size_t samples, std::uint64_t seed) {
        ValueQuery q;
        q.spec = spec_of(spec);
        q.t = t;
        q.x = tuple_of(x);
        q.samples = samples;
        RngStream rng(seed, 0);
        const DriftEstimate d = drift_logratio(q, rng);
        py::dict out;
        out["drift"] = d.drift.matrices();
        out["stderr"] = d.std_error;
        out["warnings"] = d.warnings;
        return out;
      },
      py::arg("spec"), py::arg("t"), py::arg("x"), py::arg("samples") = 256, py::arg("seed") = 0);

  m.def(
      "lhs_log_laplace",
      [](const std::string& spec, int n, int mm, std::size_t samples, std::uint64_t seed) {
        LhsOptions o;
        o.samples = samples;
        RngStream rng(seed, 0);
        const LhsResult r = lhs_log_laplace(spec_of(spec), n, mm, o, rng);
        py::dict d = estimate_dict(r.estimate);
        d["scale"] = r.scale;
        d["direct_regime"] = r.direct_regime;
        return d;
      },
      py::arg("spec"), py::arg("n"), py::arg("m") = 1, py::arg("samples") = 20000, py::arg("seed") = 0);

  m.def(
      "rhs_control_cost",
      [](const std::string& spec, int n, int mm, std::size_t paths, int steps, std::size_t inner, std::uint64_t seed) {
        RhsOptions o;
        o.paths = paths;
        o.steps = steps;
        o.inner = inner;
        RngStream rng(seed, 0);
        const RhsResult r = rhs_control_cost(spec_of(spec), n, mm, o, rng);
        py::dict d = estimate_dict(r.total);
        d["terminal"] = estimate_dict(r.terminal);
        d["control"] = estimate_dict(r.control);
        return d;
      },
      py::arg("spec"), py::arg("n"), py::arg("m") = 1, py::arg("paths") = 200, py::arg("steps") = 100,
      py::arg("inner") = 64, py::arg("seed") = 0);

  m.def(
      "sd_residuals",
      [](const std::string& spec, int n, const std::vector<std::string>& battery, int samples, std::uint64_t seed) {
        const GibbsEnsemble ens(spec_of(spec), n, 1);
        MalaOptions o;
        o.samples = samples;
        RngStream rng(seed, 0);
        const MalaResult r = ens.sample(o, rng);
        py::list out;
        for (const auto& p : battery)
          out.append(estimate_dict(sd_residual(ens, r.samples, parse_polynomial(p), LetterRef{0, ens.spec().slots() - 1})));
        return out;
      },
      py::arg("spec"), py::arg("n"), py::arg("battery"), py::arg("samples") = 200, py::arg("seed") = 0);

  m.def(
      "fisher_flow",
      [](const std::string& spec, const std::vector<double>& ts) {
        FlowOptions o;
        RngStream rng(0, 0);
        const FlowReport r = fisher_semicircular_flow(spec_of(spec), ts, o, rng);
        py::dict d;
        std::vector<double> fisher;
        for (const auto& p : r.points) fisher.push_back(p.fisher.value);
        d["t"] = ts;
        d["fisher"] = fisher;
        d["monotone"] = r.monotone;
        d["holder_exponent"] = r.holder_exponent;
        d["chi_star"] = chi_star(r.points, 1);
        return d;
      },
      py::arg("spec"), py::arg("t"));

  m.def(
      "semicircle_fisher", [](double sigma2, double t) { return free_convolve_semicircle(semicircle_density(sigma2), t).fisher(); },
      py::arg("sigma2"), py::arg("t") = 0.0);

  m.def("chi_constant", &chi_constant);

  m.def(
      "yosida_suite",
      [](int pairs, int dim, double lambda, std::uint64_t seed) {
        RngStream rng(seed, 0);
        const YosidaSuiteReport r = yosida_suite(pairs, dim, lambda, rng);
        py::dict d;
        d["soft_threshold_error"] = r.soft_threshold_error;
        d["huber_error"] = r.huber_error;
        d["half_square_error"] = r.half_square_error;
        d["worst_contraction"] = r.worst_contraction;
        d["worst_lipschitz"] = r.worst_lipschitz;
        d["worst_envelope_increase"] = r.worst_envelope_increase;
        return d;
      },
      py::arg("pairs") = 200, py::arg("dim") = 4, py::arg("lam") = 0.5, py::arg("seed") = 0);

  m.def(
      "run_config",
      [](const std::string& config, bool write_files) {
        const RunOutcome r = run(parse_config(nlohmann::json::parse(config)), write_files);
        return py::make_tuple(r.exit_code, r.report.dump());
      },
      py::arg("config"), py::arg("write_files") = false);
}
