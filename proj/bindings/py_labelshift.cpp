#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "labelshift/io.hpp"
#include "labelshift/likelihood.hpp"

namespace py = pybind11;
namespace ls = labelshift;

namespace {

using Matrix = std::vector<std::vector<double>>;

ls::EvalMatrix to_eval_matrix(const Matrix& raw) {
  return ls::validate_eval_matrix(raw);
}

py::dict result_to_dict(const ls::EstimationResult& r) {
  py::dict d;
  d["beta_hat"] = r.beta_hat.values();
  d["log_likelihood"] = r.log_likelihood;
  d["iterations"] = r.iterations;
  d["converged"] = r.converged;
  d["certificate"] = r.certificate ? py::cast(*r.certificate) : py::none();
  d["flat"] = r.flat;
  d["floored"] = r.floored;
  return d;
}

py::dict certificate_to_dict(const ls::CertificateReport& r) {
  py::dict d;
  d["upsilon"] = r.upsilon;
  d["certified"] = r.is_certified;
  d["threshold"] = r.threshold;
  d["maximizer"] = r.maximizer_beta.values();
  d["iterations"] = r.iterations;
  d["converged"] = r.converged;
  return d;
}

py::dict separation_to_dict(const ls::SeparationResult& r) {
  py::dict d;
  d["delta_star"] = r.delta_star;
  d["argmin_subset"] = r.argmin_subset;
  d["argmin_gamma"] = r.argmin_gamma;
  d["argmin_lambda"] = r.argmin_lambda;
  d["lower_bound_l2"] = r.lower_bound_l2;
  d["descent_grid_disagreement"] = r.descent_grid_disagreement;
  return d;
}

}  // namespace

PYBIND11_MODULE(_labelshift, m) {
  m.doc() = "Label shift quantification on finite spaces";

  py::register_exception<ls::validation_error>(m, "ValidationError",
                                               PyExc_ValueError);
  py::register_exception<ls::numerical_error>(m, "NumericalError",
                                              PyExc_ArithmeticError);

  py::class_<ls::DiscreteDistribution>(m, "DiscreteDistribution")
      .def(py::init<std::vector<std::int64_t>, std::vector<double>>(),
           py::arg("atoms"), py::arg("probs"))
      .def_property_readonly("atoms", &ls::DiscreteDistribution::atoms)
      .def_property_readonly("probs", &ls::DiscreteDistribution::probs);

  m.def("simplex_project", [](const std::vector<double>& v) {
    return ls::simplex_project(v).values();
  });

  m.def("hellinger",
        [](const ls::DiscreteDistribution& p, const ls::DiscreteDistribution& q) {
          return ls::hellinger(p, q);
        });
  m.def("total_variation",
        [](const ls::DiscreteDistribution& p, const ls::DiscreteDistribution& q) {
          return ls::total_variation(p, q);
        });
  m.def("hellinger_weights",
        [](const std::vector<double>& w, const std::vector<double>& w2) {
          return ls::hellinger_weights(ls::SimplexVector(w), ls::SimplexVector(w2));
        });
  m.def(
      "delta_star",
      [](const std::vector<ls::DiscreteDistribution>& components,
         const std::string& method) {
        auto mode = method == "qp_lower_bound" ? ls::DeltaStarMethod::qp_lower_bound
                                               : ls::DeltaStarMethod::exact;
        return separation_to_dict(ls::delta_star(components, mode));
      },
      py::arg("components"), py::arg("method") = "exact");

  m.def("psi", &ls::psi);
  m.def("t_statistic", [](const Matrix& L, const std::vector<double>& beta,
                          const std::vector<double>& beta2) {
    return ls::t_statistic(to_eval_matrix(L), ls::SimplexVector(beta),
                           ls::SimplexVector(beta2));
  });
  m.def("upsilon", [](const Matrix& L, const std::vector<double>& beta) {
    return certificate_to_dict(ls::upsilon(to_eval_matrix(L), ls::SimplexVector(beta)));
  });
  m.def(
      "certify",
      [](const Matrix& L, const std::vector<double>& beta, double threshold) {
        return certificate_to_dict(
            ls::certify(to_eval_matrix(L), ls::SimplexVector(beta), threshold));
      },
      py::arg("L"), py::arg("beta"), py::arg("threshold") = ls::kCertificateThreshold);

  m.def(
      "estimate_mle",
      [](const Matrix& L, std::int64_t max_iterations, double tolerance) {
        ls::EmConfig cfg;
        cfg.max_iterations = max_iterations;
        cfg.tolerance = tolerance;
        return result_to_dict(ls::estimate_mle(to_eval_matrix(L), cfg));
      },
      py::arg("L"), py::arg("max_iterations") = 10000, py::arg("tolerance") = 1e-10);
  m.def(
      "estimate_mle_predictor",
      [](const Matrix& F, const std::vector<double>& alpha, std::int64_t max_iterations,
         double tolerance) {
        ls::EmConfig cfg;
        cfg.max_iterations = max_iterations;
        cfg.tolerance = tolerance;
        return result_to_dict(
            ls::estimate_mle_predictor(F, ls::SimplexVector(alpha), cfg));
      },
      py::arg("F"), py::arg("alpha"), py::arg("max_iterations") = 10000,
      py::arg("tolerance") = 1e-10);
  m.def(
      "estimate_grid_oracle",
      [](const Matrix& L, double resolution) {
        return result_to_dict(ls::estimate_grid_oracle(to_eval_matrix(L), resolution));
      },
      py::arg("L"), py::arg("resolution"));
  m.def("estimate_bbse", [](const Matrix& F, const Matrix& M) {
    auto r = ls::estimate_bbse(F, M);
    py::dict d;
    d["beta"] = r.beta.values();
    d["condition_number"] = r.condition_number;
    return d;
  });

  m.def("sample_target", [](const std::string& scenario_json) {
    auto spec = ls::io::scenario_from_json(ls::io::json::parse(scenario_json));
    return ls::sample_target(spec);
  });
  m.def("run_study", [](const std::string& study_json) {
    auto spec = ls::io::study_spec_from_json(ls::io::json::parse(study_json));
    auto report = ls::run_study(spec);
    return ls::io::study_report_to_json(spec, report).dump();
  });
  m.def(
      "theoretical_envelope",
      [](std::size_t k, std::size_t n, double xi, double C, double misspec) {
        return ls::theoretical_envelope(k, n, xi, C, misspec);
      },
      py::arg("k"), py::arg("n"), py::arg("xi"), py::arg("C"), py::arg("misspec") = 0.0);

  m.attr("CERTIFICATE_THRESHOLD") = ls::kCertificateThreshold;
  m.attr("__version__") = "0.1.0";
}
