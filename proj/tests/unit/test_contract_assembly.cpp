#include "contract_forge/contract_assembly.hpp"
#include "contract_forge/errors.hpp"
#include "contract_forge/oce.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <random>

using namespace contract_forge;

namespace {

MarketSpec market(double mu, Eigen::MatrixXd vol, int T, double h = 1.0) {
    MarketSpec m;
    m.n_assets = static_cast<int>(vol.rows());
    m.n_drivers = static_cast<int>(vol.cols());
    m.drift = Eigen::VectorXd::Constant(m.n_assets, mu);
    m.vol = std::move(vol);
    m.initial_price = Eigen::VectorXd::Ones(m.n_assets);
    m.step = h;
    m.horizon = T;
    return m;
}

MarketSpec one_asset(double mu, double sigma, int T) { return market(mu, Eigen::MatrixXd::Constant(1, 1, sigma), T); }

ProblemSpec make_spec(const MarketSpec& m, PenaltySpec a, PenaltySpec p, double R, double W0) {
    ProblemSpec s;
    s.market = m;
    s.agent_penalty = std::move(a);
    s.principal_penalty = std::move(p);
    s.cost = CostSpec::scalar(1.0, m.n_assets, m.horizon);
    s.reservation = R;
    s.initial_wealth = W0;
    s.detect_base_preference();
    return s;
}

std::vector<Eigen::MatrixXd> random_efforts(const ScenarioTree& tree, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    std::vector<Eigen::MatrixXd> e;
    for (int t = 0; t < tree.horizon(); ++t) {
        Eigen::MatrixXd A(static_cast<Eigen::Index>(tree.node_count(t)), tree.n_assets());
        for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = u(rng);
        e.push_back(A);
    }
    return e;
}

// Dense least-squares projection onto cash plus predictable positions.
double dense_replication(const ScenarioTree& tree, const Eigen::VectorXd& target) {
    const int T = tree.horizon(), N = tree.n_assets();
    std::vector<Eigen::Index> off{1};
    for (int t = 0; t < T; ++t) off.push_back(off.back() + static_cast<Eigen::Index>(tree.node_count(t)) * N);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(target.size(), off.back());
    for (Eigen::Index leaf = 0; leaf < target.size(); ++leaf) {
        M(leaf, 0) = 1.0;
        const auto path = tree.path({T, static_cast<std::size_t>(leaf)});
        std::size_t k = 0;
        for (int t = 0; t < T; ++t) {
            const Eigen::VectorXd r = tree.returns({t, k}).row(path[static_cast<std::size_t>(t)]).transpose();
            M.block(leaf, off[static_cast<std::size_t>(t)] + static_cast<Eigen::Index>(k) * N, 1, N) = r.transpose();
            k = k * static_cast<std::size_t>(tree.branching()) + static_cast<std::size_t>(path[static_cast<std::size_t>(t)]);
        }
    }
    const Eigen::VectorXd x = M.completeOrthogonalDecomposition().solve(target);
    return (M * x - target).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("one-period theta with a constant continuation") {
    const MarketSpec m = one_asset(0.05, 0.2, 1);
    const ScenarioTree tree = build_tree(m);
    NodalSolution s;
    s.steps = {{StepSolution{}}};
    s.steps[0][0].A = Eigen::VectorXd::Constant(1, 0.3);
    s.steps[0][0].gamma = Eigen::VectorXd::Zero(1);
    s.steps[0][0].Gamma = Eigen::Vector2d::Constant(0.7);
    s.h = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(2)};
    const Eigen::VectorXd theta = build_theta(tree, s, PenaltySpec::tvar(0.5), CostSpec::scalar(1.0, 1, 1), 0.4);
    CHECK((theta.array() - (0.4 + 0.045)).abs().maxCoeff() < 1e-15);
}

TEST_CASE("zero drift contract is the reservation") {
    const MarketSpec m = one_asset(0.0, 0.2, 3);
    const ScenarioTree tree = build_tree(m);
    const ProblemSpec spec = make_spec(m, PenaltySpec::entropic(1.0), PenaltySpec::entropic(3.0), 0.25, 2.0);
    const ContractSolution c = assemble_contract(tree, expand_markov(tree, solve_markov(tree, spec)), spec);
    CHECK((c.theta.array() - 0.25).abs().maxCoeff() < 1e-14);
    CHECK(std::abs(c.principal_value_root - 1.75) < 1e-14);
}

TEST_CASE("entropic example decomposition") {
    const MarketSpec m = one_asset(0.05, 0.2, 4);
    const ScenarioTree tree = build_tree(m);
    const ProblemSpec spec = make_spec(m, PenaltySpec::entropic(1.0), PenaltySpec::entropic(1.0), 0.5, 3.0);
    const MarkovSolution mk = solve_markov(tree, spec);
    const NodalSolution sol = expand_markov(tree, mk);
    const ContractSolution c = assemble_contract(tree, sol, spec);
    REQUIRE(c.kappa);
    REQUIRE(c.weights);
    CHECK(c.weights->principal == 0.5);
    CHECK(c.weights->agent == 0.5);

    // kappa = R + sum_t [c(A*) - g^a(gamma*)], recomputed by hand.
    double kappa = 0.5;
    for (const auto& st : mk.steps) {
        const double a = st.A(0), g = st.gamma(0);
        kappa += 0.5 * a * a - oracle::entropic(g * oracle::binary_increments(1.0), Eigen::Vector2d(0.5, 0.5), 1.0);
    }
    CHECK(std::abs(*c.kappa - kappa) < 1e-14);

    const Eigen::VectorXd gains = c.benchmark_wealth.array() - 3.0;
    const Eigen::VectorXd rhs = (kappa + driver_integral(tree, c).array() - gains.array()).matrix();
    CHECK((lump_sum(c) - rhs).cwiseAbs().maxCoeff() < 1e-12);

    CHECK(std::abs(c.agent_value_root - 0.5) < 1e-8);
    CHECK(std::abs(c.principal_value_root - (3.0 - 0.5 + mk.h[0])) < 1e-12);
    CHECK(principal_value(sol, 3.0, 0.5) == c.principal_value_root);

    std::vector<Eigen::MatrixXd> zero;
    for (const auto& e : c.efforts) zero.push_back(Eigen::MatrixXd::Zero(e.rows(), e.cols()));
    CHECK((payment(tree, c, zero) - (c.theta - gains)).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((payment(tree, c, c.efforts) - c.theta).cwiseAbs().maxCoeff() < 1e-13);

    std::mt19937 rng(9);
    for (int trial = 0; trial < 5; ++trial) {
        const auto e = random_efforts(tree, rng);
        const Eigen::VectorXd wealth = terminal_wealth(tree, e, 3.0);
        CHECK((payment(tree, c, e) - normal_form_payment(c, wealth)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("principal value formula") {
    NodalSolution s;
    s.h = {Eigen::VectorXd::Zero(1)};
    CHECK(principal_value(s, 100.0, 1.0) == 99.0);
}

TEST_CASE("incomplete solutions are rejected") {
    const MarketSpec m = one_asset(0.05, 0.2, 2);
    const ScenarioTree tree = build_tree(m);
    const ProblemSpec spec = make_spec(m, PenaltySpec::entropic(1.0), PenaltySpec::entropic(1.0), 0.0, 0.0);
    NodalSolution s = solve_backward(tree, spec);
    s.steps[1].pop_back();
    try {
        assemble_contract(tree, s, spec);
        FAIL("incomplete solution accepted");
    } catch (const ContractError& e) {
        CHECK(e.code() == ErrorCode::IncompleteSolution);
    }
}

TEST_CASE("terminal wealth of a constant policy") {
    const MarketSpec m = one_asset(0.05, 0.2, 2);
    const ScenarioTree tree = build_tree(m);
    const std::vector<Eigen::MatrixXd> e{Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::MatrixXd::Constant(2, 1, 2.0)};
    const Eigen::VectorXd w = terminal_wealth(tree, e, 1.0);
    CHECK(w(0) == doctest::Approx(2.0));
    CHECK(w(3) == doctest::Approx(1.0 - 0.6));
    CHECK(w(1) == doctest::Approx(1.0 + 0.2));
}

TEST_CASE("replication residual") {
    MarketSpec m = market(0.02, (Eigen::MatrixXd(1, 2) << 0.2, 0.1).finished(), 2);
    const ScenarioTree tree = build_tree(m);
    std::mt19937 rng(2);
    const auto e = random_efforts(tree, rng);
    const Eigen::VectorXd hedgeable = terminal_wealth(tree, e, 0.7);
    const ReplicationResult r = replication_residual(tree, hedgeable);
    CHECK(r.max_residual < 1e-10);
    CHECK(std::abs(r.cash - 0.7) < 1e-9);

    std::normal_distribution<double> n01;
    Eigen::VectorXd claim(static_cast<Eigen::Index>(tree.leaf_count()));
    for (Eigen::Index i = 0; i < claim.size(); ++i) claim(i) = n01(rng);
    const ReplicationResult q = replication_residual(tree, claim);
    CHECK(q.max_residual > 1e-2);
    CHECK(std::abs(q.max_residual - dense_replication(tree, claim)) < 1e-9);
    CHECK_THROWS_AS(replication_residual(tree, Eigen::VectorXd::Zero(3)), ContractError);
}
