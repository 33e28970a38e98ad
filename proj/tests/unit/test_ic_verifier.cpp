#include "contract_forge/contract_assembly.hpp"
#include "contract_forge/errors.hpp"
#include "contract_forge/ic_verifier.hpp"
#include "contract_forge/oce.hpp"

#include "doctest.h"

#include <cmath>

using namespace contract_forge;

namespace {

MarketSpec one_asset(double mu, double sigma, int T) {
    MarketSpec m;
    m.drift = Eigen::VectorXd::Constant(1, mu);
    m.vol = Eigen::MatrixXd::Constant(1, 1, sigma);
    m.initial_price = Eigen::VectorXd::Ones(1);
    m.horizon = T;
    return m;
}

ProblemSpec make_spec(const MarketSpec& m, PenaltySpec a, PenaltySpec p, double R) {
    ProblemSpec s;
    s.market = m;
    s.agent_penalty = std::move(a);
    s.principal_penalty = std::move(p);
    s.cost = CostSpec::scalar(1.0, 1, m.horizon);
    s.reservation = R;
    s.detect_base_preference();
    return s;
}

struct Solved {
    ScenarioTree tree;
    ProblemSpec spec;
    NodalSolution solution;
    ContractSolution contract;
};

Solved solve(const MarketSpec& m, PenaltySpec a, PenaltySpec p, double R, bool markov) {
    ScenarioTree tree = build_tree(m);
    ProblemSpec spec = make_spec(m, std::move(a), std::move(p), R);
    NodalSolution sol = markov ? expand_markov(tree, solve_markov(tree, spec)) : solve_backward(tree, spec);
    ContractSolution c = assemble_contract(tree, sol, spec);
    return {std::move(tree), std::move(spec), std::move(sol), std::move(c)};
}

const PenaltySpec ent = PenaltySpec::entropic(1.0);

}  // namespace

TEST_CASE("incentive compatibility on the entropic example") {
    Solved s = solve(one_asset(0.05, 0.2, 3), ent, ent, 0.5, false);
    CHECK(verify_ic(s.tree, s.contract, s.solution, s.spec, 1.0, 41) < 1e-7);
    s.contract.efforts[0](0, 0) += 0.5;
    CHECK(verify_ic(s.tree, s.contract, s.solution, s.spec, 1.0, 41) > 1e-3);

    const Solved z = solve(one_asset(0.0, 0.2, 2), ent, ent, 0.0, true);
    CHECK(verify_ic(z.tree, z.contract, z.solution, z.spec, 1.0, 41) < 1e-9);
    CHECK_THROWS_AS(verify_ic(z.tree, z.contract, z.solution, z.spec, 1.0, 2), ContractError);
}

TEST_CASE("incentive compatibility with tvar agents") {
    const Solved s = solve(one_asset(0.1, 0.2, 2), PenaltySpec::tvar(0.7), ent, 0.0, false);
    CHECK(verify_ic(s.tree, s.contract, s.solution, s.spec, 1.0, 41) < 1e-7);
}

TEST_CASE("first-order system") {
    const Solved s = solve(one_asset(0.05, 0.2, 3), ent, ent, 0.5, true);
    const FocReport r = verify_foc(s.tree, s.solution, s.spec);
    REQUIRE(r.residuals.size() == 3);
    CHECK(r.max_residual() < 1e-9);
    CHECK(r.beta_condition == 0.0);

    const Solved z = solve(one_asset(0.0, 0.2, 2), ent, PenaltySpec::entropic(2.0), 0.0, true);
    CHECK(verify_foc(z.tree, z.solution, z.spec).max_residual() == 0.0);

    NodalSolution bumped = s.solution;
    for (auto& level : bumped.steps)
        for (auto& st : level) st.gamma(0) += 0.1;
    const FocReport b = verify_foc(s.tree, bumped, s.spec);
    const StepSolution& st = s.solution.steps[0][0];
    const Generator g(s.tree, s.tree.root(), ent);
    const Eigen::VectorXd up = (st.gamma.array() + 0.1).matrix();
    const double expected = std::abs(g.gradient(up)(0) - g.gradient(0.2 * st.A - up)(0));
    CHECK(b.residuals[0][2] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(b.residuals[0][2] > 1e-3);

    CHECK_THROWS_AS(verify_foc(s.tree.reweighted({1, 0}, Eigen::Vector2d(0.3, 0.7)), s.solution, s.spec),
                    ContractError);
    const Solved t = solve(one_asset(0.05, 0.2, 2), PenaltySpec::tvar(0.5), ent, 0.0, true);
    try {
        verify_foc(t.tree, t.solution, t.spec);
        FAIL("tvar accepted");
    } catch (const ContractError& e) {
        CHECK(e.code() == ErrorCode::InvalidPenalty);
    }
}

TEST_CASE("individual rationality replay") {
    Solved s = solve(one_asset(0.05, 0.2, 3), ent, ent, 0.5, true);
    IrReport r = verify_ir(s.tree, s.contract, s.spec);
    CHECK(r.ir_gap < 1e-8);
    CHECK(r.policy_gap < 1e-7);
    s.contract.theta.array() += 1.0;
    r = verify_ir(s.tree, s.contract, s.spec);
    CHECK(r.ir_gap == doctest::Approx(1.0).epsilon(1e-12));

    const Solved z = solve(one_asset(0.0, 0.2, 2), ent, ent, 0.0, true);
    r = verify_ir(z.tree, z.contract, z.spec);
    CHECK(r.ir_gap < 1e-10);
    CHECK(r.policy_gap < 1e-12);
}

TEST_CASE("unit loading is optimal") {
    const Solved s = solve(one_asset(0.05, 0.2, 2), ent, ent, 0.5, true);
    const Eigen::VectorXd hc = s.solution.h[1].head(2);
    const std::vector<double> grid{0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
    const BetaReport r = verify_beta(s.tree, s.tree.root(), hc, s.spec, grid);
    CHECK(r.gap <= 1e-7);
    CHECK(r.values[0] <= r.values[4]);
    CHECK(std::abs(r.values[4] - s.solution.steps[0][0].h) < 1e-10);
    CHECK(verify_beta(s.tree, s.tree.root(), hc, s.spec, {1.0}).gap == 0.0);
    CHECK_THROWS_AS(verify_beta(s.tree, s.tree.root(), hc, s.spec, {0.5, 2.0}), ContractError);

    const Solved t = solve(one_asset(0.1, 0.2, 1), PenaltySpec::tvar(0.6), ent, 0.0, false);
    const BetaReport tr = verify_beta(t.tree, t.tree.root(), Eigen::Vector2d::Zero(), t.spec, grid);
    CHECK(tr.gap <= 1e-7);
    CHECK(std::abs(tr.values[4] - t.solution.root_value()) < 1e-9);
}

TEST_CASE("bound slack") {
    const Solved s = solve(one_asset(0.05, 0.2, 3), PenaltySpec::tvar(0.5), PenaltySpec::tvar(0.3), 0.0, false);
    for (double v : h_bound_slack(s.tree, s.solution)) CHECK(v >= -1e-8);
}
