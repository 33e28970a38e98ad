#include "contract_forge/config.hpp"
#include "contract_forge/errors.hpp"
#include "contract_forge/pipeline.hpp"
#include "contract_forge/report.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <string>

using namespace contract_forge;

namespace {

const std::string kMinimal = R"(
[market]
mu = 0.05
sigma = 0.2
p0 = 1
horizon = 2

[agent]
penalty = entropic
gamma = 1

[principal]
penalty = entropic
gamma = 1
)";

ContractError error_of(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const ContractError& e) {
        return e;
    }
    FAIL("config accepted");
    return ContractError(ErrorCode::ValidationError, "");
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

std::string strip_timing(nlohmann::ordered_json j) {
    j.erase("timing");
    return j.dump();
}

}  // namespace

TEST_CASE("golden example config parses") {
    const RunConfig c = parse_config(std::string(CONFIG_DIR) + "/entropic_single_asset.ini");
    CHECK(c.mode == SolveMode::Markov);
    CHECK(c.market.n_assets == 1);
    CHECK(c.market.drift(0) == 0.05);
    CHECK(c.market.vol(0, 0) == 0.2);
    CHECK(c.market.horizon == 3);
    CHECK(c.agent.kind == "entropic");
    CHECK(c.cost.Q(0, 0) == 1.0);
    CHECK(c.reservation == 0.5);
    CHECK(c.verify.beta_grid.size() == 9);
    const ProblemSpec p = c.problem();
    CHECK(p.base_preference);
}

TEST_CASE("config defaults and matrices") {
    const RunConfig c = parse_config(std::string(CONFIG_DIR) + "/two_assets.ini");
    CHECK(c.mode == SolveMode::General);
    CHECK(c.market.vol.rows() == 2);
    CHECK(c.market.vol(1, 0) == 0.04);
    CHECK(c.cost.Q(0, 1) == 0.2);
    CHECK(c.cost.linear(1) == 0.01);
    const RunConfig d = parse_config_text(kMinimal);
    CHECK(d.cost.Q(0, 0) == d.market.step);
    CHECK(d.solver.tolerance == 1e-10);
}

TEST_CASE("config errors") {
    ContractError e = error_of(kMinimal + "[agent]\n");
    CHECK(e.code() == ErrorCode::ParseError);

    e = error_of(R"(
[market]
mu = 0.05
sigma = 0.2
p0 = 1
horizon = 2
[agent]
penalty = tvar
lambda = 1.5
)");
    CHECK(e.code() == ErrorCode::ValidationError);
    CHECK(contains(e.what(), "lambda must lie in (0,1)"));

    e = error_of(R"(
[market]
mu = 0.05, 0.04
sigma = 0.2; 0.1
p0 = 1, 1
horizon = 2
)");
    CHECK(e.code() == ErrorCode::ValidationError);
    CHECK(contains(e.what(), "rank"));

    e = error_of("[market]\nmu = 0.05\nsigma = 0.2\np0 = 1\nhorizon = 2\ncolour = red\n");
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(contains(e.what(), "line 6"));
    CHECK(contains(e.what(), "market.colour"));

    e = error_of("[market]\nmu = 0.05\nmu = 0.06\n");
    CHECK(contains(e.what(), "duplicate"));
    e = error_of("[market]\nmu = abc\nsigma = 0.2\np0 = 1\nhorizon = 2\n");
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(contains(e.what(), "line 2"));
    e = error_of("[market]\nmu = 0.05\nsigma = 0.2\np0 = 1\n");
    CHECK(contains(e.what(), "market.horizon"));
    e = error_of("[weather]\n");
    CHECK(contains(e.what(), "unknown section"));
    e = error_of("[market]\nmu = 0\nsigma = 1.1\np0 = 1\nhorizon = 1\n");
    CHECK(e.code() == ErrorCode::ValidationError);
    e = error_of(kMinimal + "[verify]\nbeta_grid = 0, 0.5\n");
    CHECK(contains(e.what(), "must contain 1"));
    e = error_of(kMinimal + "[cost]\nq = -1\n");
    CHECK(contains(e.what(), "cost"));
    CHECK_THROWS_AS(parse_config("/nonexistent/config.ini"), ContractError);
}

TEST_CASE("example run") {
    const RunConfig c = parse_config(std::string(CONFIG_DIR) + "/entropic_single_asset.ini");
    const PipelineResult r = run(c);
    const VerificationRecord& v = r.report.verification;
    CHECK(v.passed);
    CHECK(v.failures.empty());
    REQUIRE(r.report.per_time);
    CHECK_FALSE(r.report.nodes);
    CHECK(r.report.per_time->size() == 3);
    const double a = oracle::entropic_effort(1.0, 1.0, 0.2, 0.05, 1.0);
    for (const auto& s : *r.report.per_time) CHECK(std::abs(s.A(0) - a) < 1e-9);
    REQUIRE(r.report.weights);
    CHECK(r.report.weights->principal == 0.5);
    CHECK(r.report.kappa);
    CHECK(r.report.contract.size() == 8);
    REQUIRE(v.foc_residuals);
    CHECK(v.replication_residual < 1e-8);
    CHECK(std::abs(r.report.agent_value_root - 0.5) < 1e-8);
}

TEST_CASE("zero drift run") {
    const PipelineResult r = run(parse_config(std::string(CONFIG_DIR) + "/zero_drift.ini"));
    CHECK(r.report.verification.passed);
    for (const auto& s : *r.report.per_time) CHECK(s.A.norm() < 1e-12);
    for (const auto& t : r.report.contract) CHECK(std::abs(t.theta - 0.25) < 1e-14);
}

TEST_CASE("fault injection is caught") {
    const PipelineResult r = run(parse_config(std::string(CONFIG_DIR) + "/entropic_single_asset.ini"), 0.05);
    CHECK_FALSE(r.report.verification.passed);
    CHECK(r.report.verification.ic_worst_violation > 1e-6);
    bool named = false;
    for (const auto& f : r.report.verification.failures) named = named || contains(f, "ic_worst_violation");
    CHECK(named);
}

TEST_CASE("report round trip and determinism") {
    for (const char* name : {"entropic_single_asset.ini", "tvar_tvar.ini", "two_assets.ini"}) {
        const RunConfig c = parse_config(std::string(CONFIG_DIR) + "/" + name);
        const PipelineResult a = run(c);
        const std::string text = serialize_report(a.report);
        const RunReport back = parse_report(text);
        CHECK(serialize_report(back) == text);
        CHECK(strip_timing(report_to_json(run(c).report)) == strip_timing(report_to_json(a.report)));

        const NodalSolution s = solution_from_report(a.tree, back);
        CHECK(s.root_value() == a.solution.root_value());
        const ContractSolution k = contract_from_report(a.tree, back);
        CHECK((k.theta - a.contract.theta).norm() == 0.0);
        CHECK((k.benchmark_wealth - a.contract.benchmark_wealth).norm() == 0.0);

        const RunReport checked = verify_report(c, back);
        CHECK(checked.verification.passed);
        CHECK(checked.verification.ir_gap == a.report.verification.ir_gap);
    }
}

TEST_CASE("schema keeps optional sections as nulls") {
    const PipelineResult r = run(parse_config(std::string(CONFIG_DIR) + "/tvar_tvar.ini"));
    const auto j = report_to_json(r.report);
    CHECK(j.at("schema_version") == "1");
    CHECK(j.at("solution").at("weights").is_null());
    CHECK(j.at("solution").at("kappa_bar").is_null());
    CHECK(j.at("solution").at("nodes").is_null());
    CHECK(j.at("verification").at("foc_residuals").is_null());
    CHECK(j.at("verification").at("lagrange_norm").is_null());
    for (const char* key : {"config", "solution", "contract", "verification", "timing"}) CHECK(j.contains(key));
}

TEST_CASE("tampered reports fail verification") {
    const RunConfig c = parse_config(std::string(CONFIG_DIR) + "/entropic_single_asset.ini");
    RunReport r = run(c).report;
    for (auto& t : r.contract) t.theta += 0.01;
    const RunReport checked = verify_report(c, r);
    CHECK_FALSE(checked.verification.passed);
    CHECK(checked.verification.ir_gap == doctest::Approx(0.01));

    RunConfig other = c;
    other.market.drift(0) = 0.06;
    CHECK_THROWS_AS(verify_report(other, r), ContractError);

    auto j = report_to_json(r);
    j["schema_version"] = "2";
    CHECK_THROWS_AS(report_from_json(j), ContractError);
    j = report_to_json(r);
    j["solution"].erase("h0");
    CHECK_THROWS_AS(report_from_json(j), ContractError);
    CHECK_THROWS_AS(parse_report("{not json"), ContractError);
}
