#pragma once

#include "contract_forge/config.hpp"
#include "contract_forge/contract_assembly.hpp"
#include "contract_forge/principal_solver.hpp"

#include "json.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace contract_forge {

struct StepRecord {
    int time = 0;
    std::size_t index = 0;
    Eigen::VectorXd A;
    Eigen::VectorXd gamma;
    Eigen::VectorXd Gamma;
    Eigen::VectorXd lagrange;
    double beta = 1.0;
    double h = 0.0;
    double foc_residual = 0.0;
    double bound = 0.0;
    std::string branch;
    std::string method;
};

struct ThetaRecord {
    std::vector<int> path;
    double theta = 0.0;
    double benchmark_wealth = 0.0;
};

struct VerificationRecord {
    double ic_worst_violation = 0.0;
    double ir_gap = 0.0;
    double policy_gap = 0.0;
    double beta_gap = 0.0;
    std::vector<double> beta_grid;
    std::vector<double> beta_values;
    std::optional<std::vector<std::array<double, 4>>> foc_residuals;
    std::optional<double> lagrange_norm;
    std::vector<double> h_bound_slack;
    std::vector<std::vector<bool>> degenerate_flags;
    double replication_residual = 0.0;
    bool passed = false;
    std::vector<std::string> failures;
};

struct TimingRecord {
    double build_seconds = 0.0;
    double solve_seconds = 0.0;
    double assemble_seconds = 0.0;
    double verify_seconds = 0.0;
    double total_seconds = 0.0;
};

struct RunReport {
    std::string schema_version = "1";
    RunConfig config;
    std::string mode;
    double h0 = 0.0;
    double principal_value_root = 0.0;
    double agent_value_root = 0.0;
    std::optional<double> kappa;
    std::optional<double> kappa_bar;
    std::optional<SharingWeights> weights;
    std::optional<std::vector<StepRecord>> per_time;  // Markov mode
    std::optional<std::vector<StepRecord>> nodes;     // general mode
    std::vector<ThetaRecord> contract;
    VerificationRecord verification;
    TimingRecord timing;
};

nlohmann::ordered_json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::ordered_json& j);

nlohmann::ordered_json report_to_json(const RunReport& report);
/// Throws ParseError on missing fields or a schema_version other than "1".
RunReport report_from_json(const nlohmann::ordered_json& j);

std::string serialize_report(const RunReport& report);
RunReport parse_report(const std::string& text);

/// Nodal solution stored in a report, expanded to every node for Markov reports.
NodalSolution solution_from_report(const ScenarioTree& tree, const RunReport& report);
/// Contract stored in a report; efforts and sharing coefficients from the solution records.
ContractSolution contract_from_report(const ScenarioTree& tree, const RunReport& report);

}  // namespace contract_forge
