#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ardchoice/ard.hpp"
#include "ardchoice/evaluation.hpp"
#include "ardchoice/mnl.hpp"
#include "ardchoice/search_space.hpp"

namespace ardchoice {

/// Provenance block embedded in every JSON artifact (CSV artifacts get a
/// `<name>.manifest.json` sidecar).
struct RunManifest {
    std::string subcommand;
    std::map<std::string, std::string> inputs;  // role -> path
    std::map<std::string, uint64_t> seeds;
    std::string catalog_hash;
    std::string tool_version;

    nlohmann::json to_json() const;
};

uint64_t fnv1a64(const std::string& bytes);
std::string hex64(uint64_t v);

nlohmann::json catalog_to_json(const CandidateCatalog& catalog);
CandidateCatalog catalog_from_json(const nlohmann::json& j);
CandidateCatalog load_catalog(const std::string& path);
std::string catalog_hash(const CandidateCatalog& catalog);

void write_json(const nlohmann::json& j, const std::string& path);
nlohmann::json read_json(const std::string& path);

void write_tensor_csv(const DesignTensor& tensor, const CandidateCatalog& catalog,
                      const std::string& path);
DesignTensor read_tensor_csv(const std::string& path, const CandidateCatalog& catalog);

void write_lambda_csv(const Selection& selection, const std::vector<std::string>& alternatives,
                      const std::string& path);
/// (alternative, group, lambda, rank, selected) rows, grouped per alternative.
std::vector<std::vector<SelectedGroup>> read_lambda_csv(const std::string& path,
                                                        std::vector<std::string>* alts = nullptr);

void write_trace_csv(const ElboTrace& trace, const std::string& path);

nlohmann::json state_to_json(const VariationalState& state, const CandidateCatalog& catalog,
                             const LambdaEstimate& lambda, const std::string& config_hash,
                             bool converged);
VariationalState state_from_json(const nlohmann::json& j, const CandidateCatalog& catalog);

nlohmann::json coefficients_to_json(const MnlCoefficients& beta, const CandidateCatalog& catalog,
                                    Standardize standardized);
MnlCoefficients coefficients_from_json(const nlohmann::json& j, const CandidateCatalog& catalog);

nlohmann::json eval_report_to_json(const EvalReport& rep);
std::string eval_report_table(const EvalReport& rep);

nlohmann::json recovery_to_json(const RecoveryReport& rep);

nlohmann::json training_config_to_json(const TrainingConfig& c);

std::string csv_quote(const std::string& s);
std::vector<std::string> csv_split(const std::string& line);
std::string format_double(double v);  // shortest round-trip

}  // namespace ardchoice
