#include "contract_forge/errors.hpp"
#include "contract_forge/principal_solver.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <cmath>

using namespace contract_forge;

namespace {

MarketSpec one_asset(double mu, double sigma, int T, double h = 1.0) {
    MarketSpec m;
    m.drift = Eigen::VectorXd::Constant(1, mu);
    m.vol = Eigen::MatrixXd::Constant(1, 1, sigma);
    m.initial_price = Eigen::VectorXd::Ones(1);
    m.step = h;
    m.horizon = T;
    return m;
}

ProblemSpec make_spec(const MarketSpec& m, PenaltySpec a, PenaltySpec p, double q = 1.0) {
    ProblemSpec s;
    s.market = m;
    s.agent_penalty = std::move(a);
    s.principal_penalty = std::move(p);
    s.cost = CostSpec::scalar(q, m.n_assets, m.horizon);
    s.detect_base_preference();
    return s;
}

double oce(const Eigen::VectorXd& x, const PenaltySpec& pen) {
    const Eigen::VectorXd p = Eigen::VectorXd::Constant(x.size(), 1.0 / x.size());
    return pen.kind() == PenaltyKind::Tvar ? oracle::tvar(x, p, pen.lambda()) : oracle::entropic(x, p, pen.gamma());
}

}  // namespace

TEST_CASE("zero drift one step is trivial") {
    const MarketSpec m = one_asset(0.0, 0.2, 1);
    const ScenarioTree tree = build_tree(m);
    for (const auto& [a, p] : {std::pair{PenaltySpec::entropic(1.0), PenaltySpec::entropic(2.0)},
                               std::pair{PenaltySpec::tvar(0.5), PenaltySpec::entropic(1.0)}}) {
        const StepSolution s = solve_one_step(tree, tree.root(), Eigen::Vector2d::Zero(), make_spec(m, a, p));
        CHECK(s.A.cwiseAbs().maxCoeff() < 1e-9);
        CHECK(s.gamma.cwiseAbs().maxCoeff() < 1e-8);
        CHECK(std::abs(s.h) < 1e-12);
        CHECK(s.beta == 1.0);
    }
}

TEST_CASE("entropic one step matches a grid oracle") {
    const MarketSpec m = one_asset(0.05, 0.2, 1);
    const ScenarioTree tree = build_tree(m);
    const ProblemSpec spec = make_spec(m, PenaltySpec::entropic(1.0), PenaltySpec::entropic(1.0));
    const StepSolution s = solve_one_step(tree, tree.root(), Eigen::Vector2d::Zero(), spec);
    const Eigen::Vector2d w = oracle::binary_increments(1.0);
    const Eigen::Vector2d r = (0.05 + 0.2 * w.array()).matrix();
    auto f = [&](const Eigen::VectorXd& x) {
        return oce(x(1) * w, spec.agent_penalty) - 0.5 * x(0) * x(0) + oce(x(0) * r - x(1) * w, spec.principal_penalty);
    };
    const auto g = oracle::grid_search_2d(f, -1.0, 1.0, 2001);
    CHECK(std::abs(s.A(0) - g.x(0)) < 1e-6);
    CHECK(std::abs(s.gamma(0) - g.x(1)) < 1e-6);
    CHECK(std::abs(s.h - g.value) < 1e-10);
    CHECK(std::abs(s.A(0) - oracle::entropic_effort(1.0, 1.0, 0.2, 0.05, 1.0)) < 1e-9);
}

TEST_CASE("base preference sharing rule") {
    const MarketSpec m = one_asset(0.04, 0.15, 1, 0.5);
    const ScenarioTree tree = build_tree(m);
    const ProblemSpec spec = make_spec(m, PenaltySpec::entropic(2.0), PenaltySpec::entropic(0.7));
    REQUIRE(spec.base_preference);
    const Eigen::Vector2d hc(0.02, -0.01);
    const StepSolution s = solve_one_step(tree, tree.root(), hc, spec);
    const Eigen::VectorXd x = hc + tree.returns(tree.root()) * s.A;
    const Eigen::VectorXd share = risk_share_split(x, 2.0, 0.7);
    CHECK((s.Gamma - share).cwiseAbs().maxCoeff() < 1e-9);

    // Same spec with the closed-form route disabled.
    ProblemSpec general = spec;
    general.base_preference.reset();
    const StepSolution n = solve_one_step(tree, tree.root(), hc, general);
    CHECK(std::abs(n.h - s.h) < 1e-12);
    CHECK(std::abs(n.A(0) - s.A(0)) < 1e-8);
    const double mean = x.mean() * 0.7 / 2.7;
    CHECK((n.Gamma.array() + mean - s.Gamma.array()).abs().maxCoeff() < 1e-8);
}

TEST_CASE("risk sharing split") {
    const Eigen::Vector2d x(1.0, -1.0);
    CHECK((risk_share_split(x, 1.0, 1.0) - x / 2).norm() < 1e-15);
    CHECK((risk_share_split(x, 1.0, 3.0) - Eigen::Vector2d(0.75, -0.75)).norm() < 1e-15);
    CHECK(risk_share_split(x, 1.0, 1e-12).norm() < 1e-11);
}

TEST_CASE("markov recursion") {
    const MarketSpec flat = one_asset(0.0, 0.2, 3);
    const ScenarioTree ft = build_tree(flat);
    const MarkovSolution z = solve_markov(ft, make_spec(flat, PenaltySpec::entropic(1.0), PenaltySpec::entropic(1.0)));
    for (const auto& s : z.steps) {
        CHECK(s.A.norm() < 1e-12);
        CHECK(s.gamma.norm() < 1e-12);
    }
    for (double h : z.h) CHECK(std::abs(h) < 1e-14);

    const MarketSpec m = one_asset(0.05, 0.2, 3);
    const ScenarioTree tree = build_tree(m);
    const ProblemSpec spec = make_spec(m, PenaltySpec::entropic(1.0), PenaltySpec::entropic(1.0));
    const MarkovSolution s = solve_markov(tree, spec);
    REQUIRE(s.h.size() == 4);
    CHECK(s.h[3] == 0.0);
    for (const auto& st : s.steps) {
        CHECK(std::abs(oracle::entropic_effort_equation(st.A(0), 1.0, 1.0, 0.2, 0.05, 1.0)) < 1e-10);
        CHECK(std::abs(st.A(0) - oracle::entropic_effort(1.0, 1.0, 0.2, 0.05, 1.0)) < 1e-9);
    }
    CHECK(std::abs(s.h[0] - 3.0 * s.h[2]) < 1e-14);

    CHECK_THROWS_AS(solve_markov(tree.reweighted({1, 0}, Eigen::Vector2d(0.4, 0.6)), spec), ContractError);
}

TEST_CASE("markov and backward sweeps agree") {
    MarketSpec m;
    m.n_assets = 1;
    m.n_drivers = 2;
    m.drift = Eigen::VectorXd::Constant(1, 0.06);
    m.vol = Eigen::MatrixXd(1, 2);
    m.vol << 0.2, 0.1;
    m.initial_price = Eigen::VectorXd::Ones(1);
    m.horizon = 3;
    const ScenarioTree tree = build_tree(m);
    for (const auto& [a, p] : {std::pair{PenaltySpec::entropic(1.0), PenaltySpec::entropic(2.0)},
                               std::pair{PenaltySpec::tvar(0.6), PenaltySpec::entropic(1.0)},
                               std::pair{PenaltySpec::entropic(1.0), PenaltySpec::tvar(0.6)}}) {
        const ProblemSpec spec = make_spec(m, a, p);
        const NodalSolution mk = expand_markov(tree, solve_markov(tree, spec));
        const NodalSolution bw = solve_backward(tree, spec);
        CHECK(mk.markov);
        CHECK_FALSE(bw.markov);
        for (int t = 0; t < 3; ++t) {
            CHECK((mk.h[static_cast<std::size_t>(t)] - bw.h[static_cast<std::size_t>(t)]).cwiseAbs().maxCoeff() < 1e-8);
            for (std::size_t k = 0; k < tree.node_count(t); ++k)
                CHECK((mk.at({t, k}).A - bw.at({t, k}).A).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
}

TEST_CASE("backward recursion base cases") {
    const MarketSpec one = one_asset(0.05, 0.2, 1);
    const ScenarioTree t1 = build_tree(one);
    const ProblemSpec s1 = make_spec(one, PenaltySpec::entropic(1.5), PenaltySpec::entropic(0.5));
    const NodalSolution b1 = solve_backward(t1, s1);
    const StepSolution direct = solve_one_step(t1, t1.root(), Eigen::Vector2d::Zero(), s1);
    CHECK(b1.root_value() == direct.h);
    CHECK((b1.at(t1.root()).A - direct.A).norm() == 0.0);
    REQUIRE(b1.h.size() == 2);
    CHECK(b1.h[1].norm() == 0.0);

    const MarketSpec two = one_asset(0.05, 0.2, 2);
    const ScenarioTree t2 = build_tree(two);
    const NodalSolution b2 = solve_backward(t2, make_spec(two, PenaltySpec::entropic(1.5), PenaltySpec::entropic(0.5)));
    CHECK(std::abs(b2.root_value() - 2.0 * direct.h) < 1e-14);
}

TEST_CASE("bounded tvar sweep completes") {
    const MarketSpec m = one_asset(0.1, 0.2, 3);
    const ScenarioTree tree = build_tree(m);
    const ProblemSpec spec = make_spec(m, PenaltySpec::tvar(0.7), PenaltySpec::tvar(0.4), 0.5);
    const NodalSolution s = solve_backward(tree, spec);
    CHECK(s.complete(tree));
    for (const auto& h : s.h) CHECK(h.allFinite());
    for (int t = 0; t < 3; ++t)
        for (const auto& st : s.steps[static_cast<std::size_t>(t)]) {
            CHECK(st.h <= st.bound + 1e-8);
            CHECK(st.method.find("interior-point") == 0);
        }
}

TEST_CASE("growth bound closed form") {
    const MarketSpec m = one_asset(0.05, 0.2, 3);
    const ScenarioTree tree = build_tree(m);
    for (double q : {0.5, 1.0, 2.0}) {
        const ProblemSpec spec = make_spec(m, PenaltySpec::entropic(1.0), PenaltySpec::entropic(1.0), q);
        const auto [lo, hi] = tree.price_bounds();
        const double k = 2.0 * hi / lo;
        for (int t = 0; t < 3; ++t) CHECK(growth_bound(tree, spec, t) == doctest::Approx(k * k / (2.0 * q)));
    }
}

TEST_CASE("lagrange multiplier estimate") {
    const MarketSpec m = one_asset(0.05, 0.2, 1);
    const ScenarioTree tree = build_tree(m);
    const ProblemSpec ent = make_spec(m, PenaltySpec::entropic(1.0), PenaltySpec::entropic(1.0));
    const StepSolution s = solve_one_step(tree, tree.root(), Eigen::Vector2d::Zero(), ent);
    const Eigen::VectorXd l = lagrange_estimate(tree, tree.root(), Eigen::Vector2d::Zero(), ent, s.A, s.gamma);
    CHECK(l.allFinite());
    CHECK(l.size() == 1);
    CHECK(std::abs(l(0)) < 1e-8);
    const ProblemSpec tv = make_spec(m, PenaltySpec::tvar(0.5), PenaltySpec::entropic(1.0));
    CHECK(lagrange_estimate(tree, tree.root(), Eigen::Vector2d::Zero(), tv, s.A, s.gamma).norm() == 0.0);
}

TEST_CASE("problem validation") {
    ProblemSpec s = make_spec(one_asset(0.05, 0.2, 2), PenaltySpec::tvar(0.5), PenaltySpec::entropic(1.0));
    CHECK_FALSE(s.base_preference);
    s.base_preference = BasePreference{1.0, 1.0};
    CHECK_THROWS_AS(s.validate(), ContractError);
    s = make_spec(one_asset(0.05, 0.2, 2), PenaltySpec::tvar(1.5), PenaltySpec::entropic(1.0));
    CHECK_THROWS_AS(s.validate(), ContractError);
    s = make_spec(one_asset(0.05, 0.2, 2), PenaltySpec::tvar(0.5), PenaltySpec::entropic(1.0));
    s.cost = CostSpec::scalar(1.0, 1, 1);
    CHECK_THROWS_AS(s.validate(), ContractError);
}
