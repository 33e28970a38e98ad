#pragma once

#include "contract_forge/config.hpp"
#include "contract_forge/contract_assembly.hpp"
#include "contract_forge/ic_verifier.hpp"
#include "contract_forge/report.hpp"

namespace contract_forge {

struct PipelineResult {
    ScenarioTree tree;
    NodalSolution solution;
    ContractSolution contract;
    RunReport report;
};

/// Every verifier on a solved contract; fills the verification record and its pass flag.
VerificationRecord verify_solution(const ScenarioTree& tree, const NodalSolution& solution,
                                   const ContractSolution& contract, const ProblemSpec& spec,
                                   const RunConfig& config);

/// build_tree -> solve -> assemble -> verify. `root_effort_shift` perturbs the
/// recommended root effort of the assembled contract before verification.
PipelineResult run(const RunConfig& config, double root_effort_shift = 0.0);

/// Re-runs verification on a stored report against its configuration.
RunReport verify_report(const RunConfig& config, const RunReport& stored);

}  // namespace contract_forge
