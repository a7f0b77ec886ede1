#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "labelshift/io.hpp"
#include "labelshift/likelihood.hpp"

namespace fs = std::filesystem;
using labelshift::io::json;

namespace {

void emit(const json& report, const std::optional<std::string>& out_file) {
  std::string text = report.dump(2);
  text.push_back('\n');
  if (out_file) {
    labelshift::io::write_text_file(*out_file, text);
  }
  std::cout << text;
}

int run_estimate(const std::string& mode, const std::string& input,
                 const std::string& alpha_csv, bool with_certificate, double threshold,
                 const std::optional<std::string>& out_file) {
  auto raw = labelshift::io::read_matrix_csv(input);
  labelshift::EmConfig cfg;
  labelshift::EstimationResult result{.beta_hat = labelshift::SimplexVector::uniform(1)};

  if (mode == "evals") {
    labelshift::EvalMatrix L = labelshift::validate_eval_matrix(raw);
    result = labelshift::estimate_mle(L, cfg);
    if (with_certificate) {
      result.certificate = labelshift::certify(L, result.beta_hat, threshold).upsilon;
    }
  } else if (mode == "predictor") {
    if (alpha_csv.empty()) {
      throw labelshift::configuration_error("estimate --mode predictor needs --alpha");
    }
    labelshift::SimplexVector alpha = labelshift::io::parse_weights(alpha_csv);
    result = labelshift::estimate_mle_predictor(raw, alpha, cfg);
    if (with_certificate) {
      std::vector<double> flat;
      flat.reserve(raw.size() * alpha.size());
      for (const auto& row : raw) {
        for (std::size_t j = 0; j < alpha.size(); ++j) {
          flat.push_back(row[j] / alpha[j]);
        }
      }
      labelshift::EvalMatrix L(std::move(flat), raw.size(), alpha.size());
      result.certificate = labelshift::certify(L, result.beta_hat, threshold).upsilon;
    }
  } else {
    throw labelshift::configuration_error("estimate --mode must be evals or predictor");
  }
  emit(labelshift::io::estimation_result_to_json(result), out_file);
  return 0;
}

int run_certify(const std::string& evals, const std::string& beta_csv, double threshold,
                const std::optional<std::string>& out_file) {
  labelshift::EvalMatrix L =
      labelshift::validate_eval_matrix(labelshift::io::read_matrix_csv(evals));
  labelshift::SimplexVector beta = labelshift::io::parse_weights(beta_csv);
  auto report = labelshift::certify(L, beta, threshold);
  emit(labelshift::io::certificate_to_json(report), out_file);
  return 0;
}

int run_simulate(const std::string& spec_file, const std::string& out_dir,
                 std::optional<std::uint64_t> seed) {
  labelshift::ScenarioSpec spec =
      labelshift::io::scenario_from_json(labelshift::io::read_json_file(spec_file));
  if (seed) spec.seed = *seed;

  fs::create_directories(out_dir);
  auto samples = labelshift::sample_target(spec);
  auto model = labelshift::model_components(spec);

  labelshift::io::write_samples_csv(fs::path(out_dir) / "samples.csv", samples);

  auto evals = labelshift::evals_at(model, samples);
  std::vector<std::vector<double>> eval_rows(evals.rows());
  for (std::size_t i = 0; i < evals.rows(); ++i) {
    auto row = evals.row(i);
    eval_rows[i].assign(row.begin(), row.end());
  }
  labelshift::io::write_matrix_csv(fs::path(out_dir) / "evals.csv", eval_rows);

  std::vector<std::int64_t> universe(spec.m);
  std::iota(universe.begin(), universe.end(), 0);
  auto predictor = labelshift::bayes_predictor(model, spec.alpha, universe);
  labelshift::io::write_matrix_csv(
      fs::path(out_dir) / "predictor.csv",
      labelshift::predictor_rows_at(predictor, samples));

  json truth;
  truth["schema_version"] = labelshift::io::kSchemaVersion;
  truth["beta_star"] = spec.beta_star.values();
  truth["alpha"] = spec.alpha.values();
  truth["contamination_rate"] = spec.contamination_rate;
  truth["outlier_count"] = spec.outlier_indices.size();
  truth["component_perturbation"] = spec.component_perturbation;
  truth["realized_misspecification_h2"] = labelshift::realized_misspecification(spec);
  truth["n"] = spec.n;
  truth["seed"] = spec.seed;
  auto gamma = labelshift::gamma_mismatch(predictor, spec.components, spec.alpha);
  truth["gamma"] = {{"feasible", gamma.feasible},
                    {"l1_mismatch", gamma.feasible ? json(gamma.l1_mismatch) : json()}};
  std::string text = truth.dump(2);
  text.push_back('\n');
  labelshift::io::write_text_file(fs::path(out_dir) / "truth.json", text);
  std::cout << text;
  return 0;
}

int run_distances(const std::vector<std::string>& component_files,
                  const std::optional<std::string>& out_file) {
  if (component_files.size() < 2) {
    throw labelshift::configuration_error("distances needs at least two component files");
  }
  std::vector<labelshift::DiscreteDistribution> components;
  for (const auto& file : component_files) {
    components.push_back(
        labelshift::io::distribution_from_json(labelshift::io::read_json_file(file)));
  }
  auto exact = labelshift::delta_star(components, labelshift::DeltaStarMethod::exact);
  auto qp =
      labelshift::delta_star(components, labelshift::DeltaStarMethod::qp_lower_bound);

  json report;
  report["schema_version"] = labelshift::io::kSchemaVersion;
  report["hellinger"] = labelshift::hellinger(components[0], components[1]);
  report["tv"] = labelshift::total_variation(components[0], components[1]);
  report["delta_star"] = exact.delta_star;
  report["qp_lower_bound"] = qp.delta_star;
  report["descent_grid_disagreement"] = exact.descent_grid_disagreement;
  emit(report, out_file);
  return 0;
}

int run_study(const std::string& spec_file, const std::string& out_dir,
              std::optional<std::uint64_t> seed, std::optional<std::size_t> threads) {
  labelshift::StudySpec spec =
      labelshift::io::study_spec_from_json(labelshift::io::read_json_file(spec_file));
  if (seed) spec.base_scenario.seed = *seed;
  if (threads) spec.threads = *threads;

  labelshift::StudyReport report = labelshift::run_study(spec);

  fs::create_directories(out_dir);
  json j = labelshift::io::study_report_to_json(spec, report);
  std::string text = j.dump(2);
  text.push_back('\n');
  labelshift::io::write_text_file(fs::path(out_dir) / "report.json", text);
  labelshift::io::write_text_file(fs::path(out_dir) / "errors.csv",
                                  labelshift::io::study_errors_csv(spec, report));
  labelshift::io::write_text_file(fs::path(out_dir) / "plot.dat",
                                  labelshift::io::study_plot_data(spec, report));
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label shift quantification: estimation, certification and "
               "Monte Carlo studies on finite spaces"};
  app.require_subcommand(1);

  // estimate
  std::string est_mode = "evals", est_input, est_alpha;
  bool est_certify = false;
  double threshold = labelshift::kCertificateThreshold;
  std::optional<std::string> est_out;
  auto* estimate = app.add_subcommand("estimate", "Mixture-weight MLE via EM");
  estimate->add_option("--mode", est_mode, "evals or predictor")
      ->check(CLI::IsMember({"evals", "predictor"}));
  estimate->add_option("--input", est_input, "CSV matrix (no header)")->required();
  estimate->add_option("--alpha", est_alpha, "source prior, e.g. \"0.5,0.5\"");
  estimate->add_flag("--certify", est_certify, "attach the certificate value");
  estimate->add_option("--threshold", threshold, "certificate threshold");
  estimate->add_option("--out", est_out, "also write the JSON report here");

  // certify
  std::string cert_evals, cert_beta;
  std::optional<std::string> cert_out;
  auto* certify = app.add_subcommand("certify", "Certificate for a candidate weight");
  certify->add_option("--evals", cert_evals, "CSV evaluation matrix")->required();
  certify->add_option("--beta", cert_beta, "candidate weights, e.g. \"0.2,0.8\"")
      ->required();
  certify->add_option("--threshold", threshold, "certificate threshold");
  certify->add_option("--out", cert_out, "also write the JSON report here");

  // simulate
  std::string sim_spec, sim_out;
  std::optional<std::uint64_t> seed;
  auto* simulate = app.add_subcommand("simulate", "Draw a target sample from a scenario");
  simulate->add_option("--spec", sim_spec, "scenario JSON")->required();
  simulate->add_option("--out", sim_out, "output directory")->required();
  simulate->add_option("--seed", seed, "override the scenario seed");

  // distances
  std::vector<std::string> dist_files;
  std::optional<std::string> dist_out;
  auto* distances = app.add_subcommand("distances", "Distribution geometry report");
  distances->add_option("--components", dist_files, "component JSON files")
      ->required()
      ->expected(-2);
  distances->add_option("--out", dist_out, "also write the JSON report here");

  // study
  std::string study_spec, study_out;
  std::optional<std::size_t> threads;
  auto* study = app.add_subcommand("study", "Monte Carlo sweep with JSON/CSV reports");
  study->add_option("--spec", study_spec, "study JSON")->required();
  study->add_option("--out", study_out, "output directory")->required();
  study->add_option("--seed", seed, "override the base scenario seed");
  study->add_option("--threads", threads, "replication worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (estimate->parsed()) {
      return run_estimate(est_mode, est_input, est_alpha, est_certify, threshold,
                          est_out);
    }
    if (certify->parsed()) {
      return run_certify(cert_evals, cert_beta, threshold, cert_out);
    }
    if (simulate->parsed()) return run_simulate(sim_spec, sim_out, seed);
    if (distances->parsed()) return run_distances(dist_files, dist_out);
    if (study->parsed()) return run_study(study_spec, study_out, seed, threads);
  } catch (const labelshift::validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const labelshift::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
