#include "contract_forge/pipeline.hpp"

#include "contract_forge/errors.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace contract_forge {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void check(std::vector<std::string>& failures, const char* name, double value, double tolerance) {
    if (std::isfinite(value) && value <= tolerance) return;
    std::ostringstream msg;
    msg.precision(3);
    msg << name << " " << std::scientific << value << " exceeds " << tolerance;
    failures.push_back(msg.str());
}

StepRecord record(const StepSolution& s, int t, std::size_t k) {
    return {t, k, s.A, s.gamma, s.Gamma, s.lagrange, s.beta, s.h, s.foc_residual, s.bound,
            std::string(to_string(s.branch)), s.method};
}

}  // namespace

VerificationRecord verify_solution(const ScenarioTree& tree, const NodalSolution& solution,
                                   const ContractSolution& contract, const ProblemSpec& spec,
                                   const RunConfig& config) {
    const VerifySettings& vs = config.verify;
    VerificationRecord v;
    v.ic_worst_violation = verify_ic(tree, contract, solution, spec, vs.ic_grid_radius, vs.ic_grid_points);

    const IrReport ir = verify_ir(tree, contract, spec, config.solver);
    v.ir_gap = ir.ir_gap;
    v.policy_gap = ir.policy_gap;

    const Eigen::VectorXd h_children = solution.h.at(1).head(tree.branching());
    const BetaReport beta = verify_beta(tree, tree.root(), h_children, spec, vs.beta_grid, config.solver);
    v.beta_gap = beta.gap;
    v.beta_grid = beta.grid;
    v.beta_values = beta.values;

    if (tree.is_markov() && spec.agent_penalty.is_smooth() && spec.principal_penalty.is_smooth()) {
        const FocReport foc = verify_foc(tree, solution, spec);
        v.foc_residuals = foc.residuals;
        v.lagrange_norm = foc.lagrange_norm;
        check(v.failures, "foc_residual", foc.max_residual(), vs.foc_tolerance);
    }

    v.h_bound_slack = h_bound_slack(tree, solution);
    for (int t = 0; t < tree.horizon(); ++t) {
        std::vector<bool> flags;
        for (const auto& s : solution.steps[static_cast<std::size_t>(t)]) flags.push_back(s.branch == Branch::Degenerate);
        v.degenerate_flags.push_back(std::move(flags));
    }
    v.replication_residual = replication_residual(tree, contract.theta).max_residual;

    check(v.failures, "ic_worst_violation", v.ic_worst_violation, vs.ic_tolerance);
    check(v.failures, "ir_gap", v.ir_gap, vs.ir_tolerance);
    check(v.failures, "policy_gap", v.policy_gap, vs.policy_tolerance);
    check(v.failures, "beta_gap", v.beta_gap, vs.beta_tolerance);
    for (std::size_t t = 0; t < v.h_bound_slack.size(); ++t)
        if (!(v.h_bound_slack[t] >= -vs.bound_tolerance)) {
            std::ostringstream msg;
            msg << "h_bound_slack at t = " << t << " is " << v.h_bound_slack[t];
            v.failures.push_back(msg.str());
        }
    v.passed = v.failures.empty();
    return v;
}

PipelineResult run(const RunConfig& config, double root_effort_shift) {
    const auto start = Clock::now();
    validate_config(config);
    TimingRecord timing;

    auto mark = Clock::now();
    ScenarioTree tree = build_tree(config.market);
    const ProblemSpec spec = config.problem();
    timing.build_seconds = seconds_since(mark);

    mark = Clock::now();
    NodalSolution solution = config.mode == SolveMode::Markov
                                 ? expand_markov(tree, solve_markov(tree, spec, config.solver))
                                 : solve_backward(tree, spec, config.solver);
    timing.solve_seconds = seconds_since(mark);

    mark = Clock::now();
    ContractSolution contract = assemble_contract(tree, solution, spec, config.solver);
    if (root_effort_shift != 0.0) contract.efforts.front().row(0).array() += root_effort_shift;
    timing.assemble_seconds = seconds_since(mark);

    mark = Clock::now();
    RunReport report;
    report.verification = verify_solution(tree, solution, contract, spec, config);
    timing.verify_seconds = seconds_since(mark);

    report.config = config;
    report.mode = std::string(to_string(config.mode));
    report.h0 = contract.h0;
    report.principal_value_root = contract.principal_value_root;
    report.agent_value_root = contract.agent_value_root;
    report.kappa = contract.kappa;
    report.kappa_bar = contract.kappa_bar;
    report.weights = contract.weights;
    std::vector<StepRecord> steps;
    for (int t = 0; t < tree.horizon(); ++t) {
        const auto& level = solution.steps[static_cast<std::size_t>(t)];
        if (config.mode == SolveMode::Markov) {
            StepRecord r = record(level.front(), t, 0);
            r.A = contract.efforts[static_cast<std::size_t>(t)].row(0).transpose();
            steps.push_back(std::move(r));
        } else {
            for (std::size_t k = 0; k < level.size(); ++k) {
                StepRecord r = record(level[k], t, k);
                r.A = contract.efforts[static_cast<std::size_t>(t)].row(static_cast<Eigen::Index>(k)).transpose();
                steps.push_back(std::move(r));
            }
        }
    }
    if (config.mode == SolveMode::Markov)
        report.per_time = std::move(steps);
    else
        report.nodes = std::move(steps);
    for (std::size_t i = 0; i < tree.leaf_count(); ++i) {
        const auto e = static_cast<Eigen::Index>(i);
        report.contract.push_back({tree.path({tree.horizon(), i}), contract.theta(e), contract.benchmark_wealth(e)});
    }
    timing.total_seconds = seconds_since(start);
    report.timing = timing;
    return {std::move(tree), std::move(solution), std::move(contract), std::move(report)};
}

RunReport verify_report(const RunConfig& config, const RunReport& stored) {
    const auto start = Clock::now();
    validate_config(config);
    if (config_to_json(config).at("market") != config_to_json(stored.config).at("market"))
        fail(ErrorCode::ValidationError, "solution was produced for a different market");
    if (config.mode != stored.config.mode)
        fail(ErrorCode::ValidationError, "solution was produced in a different solve mode");
    const ScenarioTree tree = build_tree(config.market);
    const ProblemSpec spec = config.problem();
    const NodalSolution solution = solution_from_report(tree, stored);
    const ContractSolution contract = contract_from_report(tree, stored);
    RunReport out = stored;
    out.verification = verify_solution(tree, solution, contract, spec, config);
    out.timing.verify_seconds = seconds_since(start);
    return out;
}

}  // namespace contract_forge
