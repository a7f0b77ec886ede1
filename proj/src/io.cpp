#include "labelshift/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace labelshift::io {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json simplex_to_json(const SimplexVector& v) { return json(v.values()); }

SimplexVector simplex_from_json(const json& j) {
  return SimplexVector(j.get<std::vector<double>>());
}

}  // namespace

json distribution_to_json(const DiscreteDistribution& dist) {
  json j;
  j["atoms"] = dist.atoms();
  j["probs"] = dist.probs();
  return j;
}

DiscreteDistribution distribution_from_json(const json& j) {
  if (!j.contains("atoms") || !j.contains("probs")) {
    throw invalid_input_error("distribution JSON needs 'atoms' and 'probs'");
  }
  return DiscreteDistribution(j["atoms"].get<std::vector<std::int64_t>>(),
                              j["probs"].get<std::vector<double>>());
}

json scenario_to_json(const ScenarioSpec& spec) {
  json j;
  j["k"] = spec.k;
  j["m"] = spec.m;
  json comps = json::array();
  for (const auto& c : spec.components) comps.push_back(distribution_to_json(c));
  j["components"] = comps;
  j["beta_star"] = simplex_to_json(spec.beta_star);
  j["alpha"] = simplex_to_json(spec.alpha);
  j["contamination_rate"] = spec.contamination_rate;
  if (spec.contaminant) j["contaminant"] = distribution_to_json(*spec.contaminant);
  j["outlier_indices"] = spec.outlier_indices;
  if (spec.outlier_distribution) {
    j["outlier_distribution"] = distribution_to_json(*spec.outlier_distribution);
  }
  j["component_perturbation"] = spec.component_perturbation;
  j["n"] = spec.n;
  j["seed"] = spec.seed;
  j["well_posed"] = spec.well_posed;
  return j;
}

ScenarioSpec scenario_from_json(const json& j) {
  try {
    std::vector<DiscreteDistribution> components;
    for (const auto& c : j.at("components")) {
      components.push_back(distribution_from_json(c));
    }
    ScenarioSpec spec{
        .k = j.at("k").get<std::size_t>(),
        .m = j.at("m").get<std::size_t>(),
        .components = std::move(components),
        .beta_star = simplex_from_json(j.at("beta_star")),
        .alpha = simplex_from_json(j.at("alpha")),
        .contamination_rate = j.value("contamination_rate", 0.0),
        .contaminant = std::nullopt,
        .outlier_indices = j.value("outlier_indices", std::vector<std::size_t>{}),
        .outlier_distribution = std::nullopt,
        .component_perturbation = j.value("component_perturbation", 0.0),
        .n = j.at("n").get<std::size_t>(),
        .seed = j.value("seed", std::uint64_t{0}),
        .well_posed = j.value("well_posed", true)};
    if (j.contains("contaminant")) {
      spec.contaminant = distribution_from_json(j["contaminant"]);
    }
    if (j.contains("outlier_distribution")) {
      spec.outlier_distribution = distribution_from_json(j["outlier_distribution"]);
    }
    validate_scenario(spec);
    return spec;
  } catch (const json::exception& e) {
    throw invalid_input_error(std::string("scenario JSON: ") + e.what());
  }
}

json study_spec_to_json(const StudySpec& spec) {
  json j;
  j["base_scenario"] = scenario_to_json(spec.base_scenario);
  j["sweep_variable"] = to_string(spec.sweep_variable);
  j["sweep_values"] = spec.sweep_values;
  j["replications"] = spec.replications;
  json est = json::array();
  for (auto e : spec.estimators) est.push_back(to_string(e));
  j["estimators"] = est;
  j["confidence"] = spec.confidence;
  j["grid_resolution"] = spec.grid_resolution;
  return j;
}

StudySpec study_spec_from_json(const json& j) {
  try {
    StudySpec spec{.base_scenario = scenario_from_json(j.at("base_scenario"))};
    spec.sweep_variable = sweep_variable_from_string(j.at("sweep_variable"));
    spec.sweep_values = j.at("sweep_values").get<std::vector<double>>();
    spec.replications = j.at("replications").get<std::int64_t>();
    spec.estimators.clear();
    for (const auto& e : j.at("estimators")) {
      spec.estimators.push_back(estimator_from_string(e.get<std::string>()));
    }
    spec.confidence = j.value("confidence", 0.9);
    spec.grid_resolution = j.value("grid_resolution", 1e-3);
    if (!(spec.confidence > 0.0) || spec.confidence >= 1.0) {
      throw configuration_error("study JSON: confidence must be in (0, 1)");
    }
    return spec;
  } catch (const json::exception& e) {
    throw invalid_input_error(std::string("study JSON: ") + e.what());
  }
}

json estimation_result_to_json(const EstimationResult& result) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["beta_hat"] = simplex_to_json(result.beta_hat);
  j["log_likelihood"] = result.log_likelihood;
  j["iterations"] = result.iterations;
  j["converged"] = result.converged;
  if (result.certificate) {
    j["certificate"] = *result.certificate;
  } else {
    j["certificate"] = nullptr;
  }
  j["flat"] = result.flat;
  j["floored"] = result.floored;
  return j;
}

json certificate_to_json(const CertificateReport& report) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["upsilon"] = report.upsilon;
  j["certified"] = report.is_certified;
  j["verdict"] = report.is_certified ? "certified" : "inconclusive";
  j["threshold"] = report.threshold;
  j["maximizer"] = simplex_to_json(report.maximizer_beta);
  j["iterations"] = report.iterations;
  j["converged"] = report.converged;
  return j;
}

json separation_to_json(const SeparationResult& result) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["delta_star"] = result.delta_star;
  j["argmin_subset"] = result.argmin_subset;
  j["argmin_gamma"] = result.argmin_gamma;
  j["argmin_lambda"] = result.argmin_lambda;
  j["lower_bound_l2"] = result.lower_bound_l2;
  j["descent_grid_disagreement"] = result.descent_grid_disagreement;
  return j;
}

json study_report_to_json(const StudySpec& spec, const StudyReport& report) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["spec"] = study_spec_to_json(spec);
  j["xi"] = report.xi;
  j["delta_star"] = report.delta_star_value;
  j["c_constant"] = report.c_constant;
  j["deviation_constants"] = {{"c1", kDeviationBoundC1}, {"c2", kDeviationBoundC2}, {"c3", kDeviationBoundC3}};
  json cells = json::array();
  for (const auto& cell : report.cells) {
    json c;
    c["sweep_value"] = cell.sweep_value;
    c["estimator"] = to_string(cell.estimator);
    c["median_l1"] = cell.median_l1;
    c["quantile_l1"] = cell.quantile_l1;
    c["misspec_h2"] = cell.misspec_h2;
    c["envelope"] = cell.envelope;
    c["deviation_envelope_sq"] = cell.deviation_envelope_sq;
    cells.push_back(std::move(c));
  }
  j["cells"] = cells;
  if (!report.slope.empty()) {
    j["slope"] = report.slope;
    j["intercept"] = report.intercept;
  }
  return j;
}

std::string study_errors_csv(const StudySpec& spec, const StudyReport& report) {
  std::ostringstream out;
  out << "sweep_value,estimator,replication,l1_error\n";
  for (const auto& cell : report.cells) {
    for (std::size_t r = 0; r < cell.errors.size(); ++r) {
      out << format_double(cell.sweep_value) << ',' << to_string(cell.estimator) << ','
          << r << ',' << format_double(cell.errors[r]) << '\n';
    }
  }
  (void)spec;
  return out.str();
}

std::string study_plot_data(const StudySpec& spec, const StudyReport& report) {
  std::ostringstream out;
  char level[32];
  std::snprintf(level, sizeof(level), "%g", spec.confidence);
  out << "# x y y_lo y_hi (y = median l1 error, y_hi = " << level << "-quantile)\n";
  for (std::size_t e = 0; e < spec.estimators.size(); ++e) {
    out << "# estimator: " << to_string(spec.estimators[e]) << '\n';
    for (std::size_t si = 0; si < spec.sweep_values.size(); ++si) {
      const auto& cell = report.cells[si * spec.estimators.size() + e];
      double lo = cell.errors.empty()
                      ? cell.median_l1
                      : *std::min_element(cell.errors.begin(), cell.errors.end());
      out << format_double(cell.sweep_value) << ' ' << format_double(cell.median_l1)
          << ' ' << format_double(lo) << ' ' << format_double(cell.quantile_l1) << '\n';
    }
    out << "\n\n";
  }
  return out.str();
}

void write_matrix_csv(const std::filesystem::path& path,
                      const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw invalid_input_error("cannot open for writing: " + path.string());
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << ',';
      out << format_double(row[j]);
    }
    out << '\n';
  }
}

std::vector<std::vector<double>> read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw invalid_input_error("cannot open: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t comma = line.find(',', start);
      std::string cell = line.substr(
          start, comma == std::string::npos ? std::string::npos : comma - start);
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw invalid_input_error("bad CSV cell '" + cell + "' in " + path.string());
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw invalid_input_error("empty CSV: " + path.string());
  return rows;
}

void write_samples_csv(const std::filesystem::path& path,
                       const std::vector<std::int64_t>& samples) {
  std::ofstream out(path);
  if (!out) throw invalid_input_error("cannot open for writing: " + path.string());
  for (auto s : samples) out << s << '\n';
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw invalid_input_error("cannot open: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw invalid_input_error("bad JSON in " + path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw invalid_input_error("cannot open for writing: " + path.string());
  out << content;
}

SimplexVector parse_weights(const std::string& csv) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= csv.size()) {
    std::size_t comma = csv.find(',', start);
    std::string cell = csv.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    try {
      values.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw invalid_input_error("bad weight '" + cell + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return SimplexVector(std::move(values));
}

}  // namespace labelshift::io
