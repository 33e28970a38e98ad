#include "contract_forge/report.hpp"

#include "contract_forge/errors.hpp"

namespace contract_forge {

using json = nlohmann::ordered_json;

namespace {

json vec(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json mat(const Eigen::MatrixXd& m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec(m.row(i).transpose()));
    return a;
}

Eigen::VectorXd to_vec(const json& a) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a.at(i).get<double>();
    return v;
}

Eigen::MatrixXd to_mat(const json& a) {
    const std::size_t rows = a.size();
    const std::size_t cols = rows ? a.at(0).size() : 0;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        if (a.at(i).size() != cols) fail(ErrorCode::ParseError, "matrix rows differ in length");
        m.row(static_cast<Eigen::Index>(i)) = to_vec(a.at(i)).transpose();
    }
    return m;
}

template <class T>
json optional_value(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> optional_get(const json& j, const char* key) {
    const json& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<T>();
}

json penalty_json(const PenaltyConfig& p) {
    json j;
    j["penalty"] = p.kind;
    j[p.kind == "tvar" ? "lambda" : "gamma"] = p.parameter;
    return j;
}

PenaltyConfig penalty_from(const json& j) {
    PenaltyConfig p;
    p.kind = j.at("penalty").get<std::string>();
    p.parameter = j.at(p.kind == "tvar" ? "lambda" : "gamma").get<double>();
    return p;
}

json step_json(const StepRecord& s) {
    json j;
    j["t"] = s.time;
    j["index"] = s.index;
    j["A"] = vec(s.A);
    j["gamma"] = vec(s.gamma);
    j["Gamma"] = vec(s.Gamma);
    j["lagrange"] = vec(s.lagrange);
    j["beta"] = s.beta;
    j["h"] = s.h;
    j["foc_residual"] = s.foc_residual;
    j["bound"] = s.bound;
    j["branch"] = s.branch;
    j["method"] = s.method;
    return j;
}

StepRecord step_from(const json& j) {
    StepRecord s;
    s.time = j.at("t").get<int>();
    s.index = j.at("index").get<std::size_t>();
    s.A = to_vec(j.at("A"));
    s.gamma = to_vec(j.at("gamma"));
    s.Gamma = to_vec(j.at("Gamma"));
    s.lagrange = to_vec(j.at("lagrange"));
    s.beta = j.at("beta").get<double>();
    s.h = j.at("h").get<double>();
    s.foc_residual = j.at("foc_residual").get<double>();
    s.bound = j.at("bound").get<double>();
    s.branch = j.at("branch").get<std::string>();
    s.method = j.at("method").get<std::string>();
    return s;
}

json steps_json(const std::optional<std::vector<StepRecord>>& steps) {
    if (!steps) return nullptr;
    json a = json::array();
    for (const auto& s : *steps) a.push_back(step_json(s));
    return a;
}

std::optional<std::vector<StepRecord>> steps_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    std::vector<StepRecord> out;
    for (const auto& s : j) out.push_back(step_from(s));
    return out;
}

StepSolution to_step(const StepRecord& r) {
    StepSolution s;
    s.A = r.A;
    s.gamma = r.gamma;
    s.Gamma = r.Gamma;
    s.lagrange = r.lagrange;
    s.beta = r.beta;
    s.h = r.h;
    s.foc_residual = r.foc_residual;
    s.bound = r.bound;
    s.branch = r.branch == "degenerate" ? Branch::Degenerate : Branch::Regular;
    s.method = r.method;
    return s;
}

}  // namespace

json config_to_json(const RunConfig& c) {
    json j;
    j["mode"] = std::string(to_string(c.mode));
    j["base_preference"] = c.base_preference;
    j["market"] = {{"n_assets", c.market.n_assets}, {"n_drivers", c.market.n_drivers},
                   {"mu", vec(c.market.drift)},     {"sigma", mat(c.market.vol)},
                   {"step", c.market.step},         {"p0", vec(c.market.initial_price)},
                   {"horizon", c.market.horizon}};
    j["agent"] = penalty_json(c.agent);
    j["principal"] = penalty_json(c.principal);
    j["cost"] = {{"kind", "quadratic"},
                 {"matrix", mat(c.cost.Q)},
                 {"linear", vec(c.cost.linear)},
                 {"constant", c.cost.constant}};
    j["contract"] = {{"reservation", c.reservation}, {"initial_wealth", c.initial_wealth}};
    j["solver"] = {{"tolerance", c.solver.tolerance},
                   {"max_iterations", c.solver.max_iterations},
                   {"grid_points", c.solver.grid_points}};
    const VerifySettings& v = c.verify;
    j["verify"] = {{"beta_grid", v.beta_grid},
                   {"ic_grid_radius", v.ic_grid_radius},
                   {"ic_grid_points", v.ic_grid_points},
                   {"ic_tolerance", v.ic_tolerance},
                   {"ir_tolerance", v.ir_tolerance},
                   {"policy_tolerance", v.policy_tolerance},
                   {"beta_tolerance", v.beta_tolerance},
                   {"foc_tolerance", v.foc_tolerance},
                   {"bound_tolerance", v.bound_tolerance}};
    return j;
}

RunConfig config_from_json(const json& j) {
    RunConfig c;
    c.mode = j.at("mode").get<std::string>() == "general" ? SolveMode::General : SolveMode::Markov;
    c.base_preference = j.at("base_preference").get<bool>();
    const json& m = j.at("market");
    c.market.n_assets = m.at("n_assets").get<int>();
    c.market.n_drivers = m.at("n_drivers").get<int>();
    c.market.drift = to_vec(m.at("mu"));
    c.market.vol = to_mat(m.at("sigma"));
    c.market.step = m.at("step").get<double>();
    c.market.initial_price = to_vec(m.at("p0"));
    c.market.horizon = m.at("horizon").get<int>();
    c.agent = penalty_from(j.at("agent"));
    c.principal = penalty_from(j.at("principal"));
    const json& cost = j.at("cost");
    c.cost.Q = to_mat(cost.at("matrix"));
    c.cost.linear = to_vec(cost.at("linear"));
    c.cost.constant = cost.at("constant").get<double>();
    c.reservation = j.at("contract").at("reservation").get<double>();
    c.initial_wealth = j.at("contract").at("initial_wealth").get<double>();
    const json& s = j.at("solver");
    c.solver.tolerance = s.at("tolerance").get<double>();
    c.solver.max_iterations = s.at("max_iterations").get<int>();
    c.solver.grid_points = s.at("grid_points").get<int>();
    const json& v = j.at("verify");
    c.verify.beta_grid = v.at("beta_grid").get<std::vector<double>>();
    c.verify.ic_grid_radius = v.at("ic_grid_radius").get<double>();
    c.verify.ic_grid_points = v.at("ic_grid_points").get<int>();
    c.verify.ic_tolerance = v.at("ic_tolerance").get<double>();
    c.verify.ir_tolerance = v.at("ir_tolerance").get<double>();
    c.verify.policy_tolerance = v.at("policy_tolerance").get<double>();
    c.verify.beta_tolerance = v.at("beta_tolerance").get<double>();
    c.verify.foc_tolerance = v.at("foc_tolerance").get<double>();
    c.verify.bound_tolerance = v.at("bound_tolerance").get<double>();
    return c;
}

json report_to_json(const RunReport& r) {
    json j;
    j["schema_version"] = r.schema_version;
    j["config"] = config_to_json(r.config);

    json sol;
    sol["mode"] = r.mode;
    sol["h0"] = r.h0;
    sol["principal_value_root"] = r.principal_value_root;
    sol["agent_value_root"] = r.agent_value_root;
    sol["kappa"] = optional_value(r.kappa);
    sol["kappa_bar"] = optional_value(r.kappa_bar);
    sol["weights"] = r.weights ? json{{"principal", r.weights->principal}, {"agent", r.weights->agent}} : json(nullptr);
    sol["per_time"] = steps_json(r.per_time);
    sol["nodes"] = steps_json(r.nodes);
    j["solution"] = std::move(sol);

    json table = json::array();
    for (const auto& t : r.contract)
        table.push_back({{"path", t.path}, {"theta", t.theta}, {"benchmark_wealth", t.benchmark_wealth}});
    j["contract"] = {{"theta", std::move(table)}};

    const VerificationRecord& v = r.verification;
    json ver;
    ver["ic_worst_violation"] = v.ic_worst_violation;
    ver["ir_gap"] = v.ir_gap;
    ver["policy_gap"] = v.policy_gap;
    ver["beta_gap"] = v.beta_gap;
    ver["beta_grid"] = v.beta_grid;
    ver["beta_values"] = v.beta_values;
    if (v.foc_residuals) {
        json rows = json::array();
        for (const auto& row : *v.foc_residuals) rows.push_back(json(std::vector<double>(row.begin(), row.end())));
        ver["foc_residuals"] = std::move(rows);
    } else {
        ver["foc_residuals"] = nullptr;
    }
    ver["lagrange_norm"] = optional_value(v.lagrange_norm);
    ver["h_bound_slack"] = v.h_bound_slack;
    ver["degenerate_flags"] = v.degenerate_flags;
    ver["replication_residual"] = v.replication_residual;
    ver["passed"] = v.passed;
    ver["failures"] = v.failures;
    j["verification"] = std::move(ver);

    j["timing"] = {{"build_seconds", r.timing.build_seconds},
                   {"solve_seconds", r.timing.solve_seconds},
                   {"assemble_seconds", r.timing.assemble_seconds},
                   {"verify_seconds", r.timing.verify_seconds},
                   {"total_seconds", r.timing.total_seconds}};
    return j;
}

RunReport report_from_json(const json& j) {
    try {
        RunReport r;
        r.schema_version = j.at("schema_version").get<std::string>();
        if (r.schema_version != "1")
            fail(ErrorCode::ParseError, "unsupported report schema_version '" + r.schema_version + "'");
        r.config = config_from_json(j.at("config"));
        const json& sol = j.at("solution");
        r.mode = sol.at("mode").get<std::string>();
        r.h0 = sol.at("h0").get<double>();
        r.principal_value_root = sol.at("principal_value_root").get<double>();
        r.agent_value_root = sol.at("agent_value_root").get<double>();
        r.kappa = optional_get<double>(sol, "kappa");
        r.kappa_bar = optional_get<double>(sol, "kappa_bar");
        if (!sol.at("weights").is_null())
            r.weights = SharingWeights{sol.at("weights").at("principal").get<double>(),
                                       sol.at("weights").at("agent").get<double>()};
        r.per_time = steps_from(sol.at("per_time"));
        r.nodes = steps_from(sol.at("nodes"));
        for (const auto& t : j.at("contract").at("theta"))
            r.contract.push_back({t.at("path").get<std::vector<int>>(), t.at("theta").get<double>(),
                                  t.at("benchmark_wealth").get<double>()});
        const json& v = j.at("verification");
        VerificationRecord& rv = r.verification;
        rv.ic_worst_violation = v.at("ic_worst_violation").get<double>();
        rv.ir_gap = v.at("ir_gap").get<double>();
        rv.policy_gap = v.at("policy_gap").get<double>();
        rv.beta_gap = v.at("beta_gap").get<double>();
        rv.beta_grid = v.at("beta_grid").get<std::vector<double>>();
        rv.beta_values = v.at("beta_values").get<std::vector<double>>();
        if (!v.at("foc_residuals").is_null()) {
            std::vector<std::array<double, 4>> rows;
            for (const auto& row : v.at("foc_residuals")) {
                const auto values = row.get<std::vector<double>>();
                if (values.size() != 4) fail(ErrorCode::ParseError, "foc_residuals rows must have 4 entries");
                rows.push_back({values[0], values[1], values[2], values[3]});
            }
            rv.foc_residuals = std::move(rows);
        }
        rv.lagrange_norm = optional_get<double>(v, "lagrange_norm");
        rv.h_bound_slack = v.at("h_bound_slack").get<std::vector<double>>();
        rv.degenerate_flags = v.at("degenerate_flags").get<std::vector<std::vector<bool>>>();
        rv.replication_residual = v.at("replication_residual").get<double>();
        rv.passed = v.at("passed").get<bool>();
        rv.failures = v.at("failures").get<std::vector<std::string>>();
        const json& t = j.at("timing");
        r.timing = {t.at("build_seconds").get<double>(), t.at("solve_seconds").get<double>(),
                    t.at("assemble_seconds").get<double>(), t.at("verify_seconds").get<double>(),
                    t.at("total_seconds").get<double>()};
        return r;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, std::string("malformed report: ") + e.what());
    }
}

std::string serialize_report(const RunReport& report) { return report_to_json(report).dump(2) + "\n"; }

RunReport parse_report(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, std::string("report is not valid JSON: ") + e.what());
    }
    return report_from_json(j);
}

NodalSolution solution_from_report(const ScenarioTree& tree, const RunReport& report) {
    const int T = tree.horizon();
    if (report.per_time) {
        MarkovSolution m;
        m.h.assign(static_cast<std::size_t>(T) + 1, 0.0);
        if (static_cast<int>(report.per_time->size()) != T)
            fail(ErrorCode::IncompleteSolution, "report covers a different horizon");
        for (const auto& r : *report.per_time) {
            m.steps.push_back(to_step(r));
            m.h[static_cast<std::size_t>(r.time)] = r.h;
        }
        return expand_markov(tree, m);
    }
    if (!report.nodes) fail(ErrorCode::IncompleteSolution, "report carries no solution");
    NodalSolution s;
    s.steps.resize(static_cast<std::size_t>(T));
    s.h.resize(static_cast<std::size_t>(T) + 1);
    for (int t = 0; t <= T; ++t) {
        s.h[static_cast<std::size_t>(t)] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(tree.node_count(t)));
        if (t < T) s.steps[static_cast<std::size_t>(t)].resize(tree.node_count(t));
    }
    for (const auto& r : *report.nodes) {
        if (r.time < 0 || r.time >= T || r.index >= tree.node_count(r.time))
            fail(ErrorCode::IncompleteSolution, "report node lies outside the tree");
        s.steps[static_cast<std::size_t>(r.time)][r.index] = to_step(r);
        s.h[static_cast<std::size_t>(r.time)](static_cast<Eigen::Index>(r.index)) = r.h;
    }
    if (!s.complete(tree)) fail(ErrorCode::IncompleteSolution, "report does not cover every node");
    return s;
}

ContractSolution contract_from_report(const ScenarioTree& tree, const RunReport& report) {
    const NodalSolution solution = solution_from_report(tree, report);
    if (report.contract.size() != tree.leaf_count())
        fail(ErrorCode::IncompleteSolution, "contract table does not cover every leaf");
    ContractSolution c;
    const auto leaves = static_cast<Eigen::Index>(tree.leaf_count());
    c.theta.resize(leaves);
    c.benchmark_wealth.resize(leaves);
    for (Eigen::Index i = 0; i < leaves; ++i) {
        c.theta(i) = report.contract[static_cast<std::size_t>(i)].theta;
        c.benchmark_wealth(i) = report.contract[static_cast<std::size_t>(i)].benchmark_wealth;
    }
    for (int t = 0; t < tree.horizon(); ++t) {
        const auto ts = static_cast<std::size_t>(t);
        const auto count = static_cast<Eigen::Index>(tree.node_count(t));
        Eigen::MatrixXd A(count, tree.n_assets()), G(count, tree.n_completed());
        for (Eigen::Index k = 0; k < count; ++k) {
            A.row(k) = solution.steps[ts][static_cast<std::size_t>(k)].A.transpose();
            G.row(k) = solution.steps[ts][static_cast<std::size_t>(k)].gamma.transpose();
        }
        c.efforts.push_back(std::move(A));
        c.gammas.push_back(std::move(G));
    }
    c.kappa = report.kappa;
    c.kappa_bar = report.kappa_bar;
    c.weights = report.weights;
    c.h0 = report.h0;
    c.principal_value_root = report.principal_value_root;
    c.agent_value_root = report.agent_value_root;
    c.reservation = report.config.reservation;
    c.initial_wealth = report.config.initial_wealth;
    c.markov = solution.markov;
    return c;
}

}  // namespace contract_forge
