#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "labelshift/core.hpp"
#include "labelshift/distances.hpp"
#include "labelshift/rho_certificate.hpp"
#include "labelshift/scenario.hpp"
#include "labelshift/study.hpp"

namespace labelshift::io {

using json = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

json distribution_to_json(const DiscreteDistribution& dist);
DiscreteDistribution distribution_from_json(const json& j);

json scenario_to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const json& j);

json study_spec_to_json(const StudySpec& spec);
StudySpec study_spec_from_json(const json& j);

json estimation_result_to_json(const EstimationResult& result);
json certificate_to_json(const CertificateReport& report);
json separation_to_json(const SeparationResult& result);
json study_report_to_json(const StudySpec& spec, const StudyReport& report);

// Flat replication errors: sweep_value,estimator,replication,l1_error.
std::string study_errors_csv(const StudySpec& spec, const StudyReport& report);
// Per-estimator blocks of "x y y_lo y_hi" rows for external plotting.
std::string study_plot_data(const StudySpec& spec, const StudyReport& report);

// No-header CSV with full round-trip precision.
void write_matrix_csv(const std::filesystem::path& path,
                      const std::vector<std::vector<double>>& rows);
std::vector<std::vector<double>> read_matrix_csv(const std::filesystem::path& path);

void write_samples_csv(const std::filesystem::path& path,
                       const std::vector<std::int64_t>& samples);

json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

// "0.3,0.7" -> weight vector.
SimplexVector parse_weights(const std::string& csv);

}  // namespace labelshift::io
