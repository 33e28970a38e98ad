#include "contract_forge/config.hpp"

#include "contract_forge/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace contract_forge {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

struct Entry {
    std::string value;
    int line = 0;
};

using Section = std::map<std::string, Entry>;

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s{
        {"run", {"mode", "base_preference"}},
        {"market", {"n_assets", "n_drivers", "mu", "sigma", "step", "p0", "horizon"}},
        {"agent", {"penalty", "gamma", "lambda"}},
        {"principal", {"penalty", "gamma", "lambda"}},
        {"cost", {"kind", "q", "matrix", "linear", "constant"}},
        {"contract", {"reservation", "initial_wealth"}},
        {"solver", {"tolerance", "max_iterations", "grid_points"}},
        {"verify",
         {"beta_grid", "ic_grid_radius", "ic_grid_points", "ic_tolerance", "ir_tolerance", "policy_tolerance",
          "beta_tolerance", "foc_tolerance", "bound_tolerance"}},
    };
    return s;
}

[[noreturn]] void parse_error(int line, const std::string& key, const std::string& what) {
    std::ostringstream msg;
    msg << "line " << line;
    if (!key.empty()) msg << ", key '" << key << "'";
    msg << ": " << what;
    fail(ErrorCode::ParseError, msg.str());
}

class Reader {
public:
    Reader(std::string section, const std::map<std::string, Section>& sections) : name_(std::move(section)) {
        if (auto it = sections.find(name_); it != sections.end()) section_ = &it->second;
    }

    bool has(const std::string& key) const { return section_ && section_->count(key); }

    std::string text(const std::string& key, const std::string& fallback) const {
        return has(key) ? section_->at(key).value : fallback;
    }

    double number(const std::string& key, double fallback) const {
        return has(key) ? to_number(key, section_->at(key).value) : fallback;
    }

    double required_number(const std::string& key) const {
        require(key);
        return number(key, 0.0);
    }

    int integer(const std::string& key, int fallback) const {
        if (!has(key)) return fallback;
        const double v = number(key, 0.0);
        if (v != static_cast<double>(static_cast<long>(v)) || std::abs(v) > 1e9)
            parse_error(line(key), qualified(key), "expected an integer");
        return static_cast<int>(v);
    }

    std::vector<double> list(const std::string& key) const {
        std::vector<double> out;
        for (const auto& item : split(section_->at(key).value, ',')) out.push_back(to_number(key, item));
        return out;
    }

    Eigen::VectorXd vector(const std::string& key) const {
        const auto v = list(key);
        return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }

    Eigen::MatrixXd matrix(const std::string& key) const {
        std::vector<std::vector<double>> rows;
        for (const auto& row : split(section_->at(key).value, ';')) {
            std::vector<double> r;
            for (const auto& item : split(row, ',')) r.push_back(to_number(key, item));
            rows.push_back(std::move(r));
        }
        for (const auto& r : rows)
            if (r.size() != rows.front().size()) parse_error(line(key), qualified(key), "matrix rows differ in length");
        Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < rows[i].size(); ++j)
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        return m;
    }

    void require(const std::string& key) const {
        if (!has(key)) fail(ErrorCode::ParseError, "missing required key '" + qualified(key) + "'");
    }

    int line(const std::string& key) const { return has(key) ? section_->at(key).line : 0; }
    std::string qualified(const std::string& key) const { return name_ + "." + key; }

private:
    double to_number(const std::string& key, const std::string& s) const {
        if (s.empty()) parse_error(line(key), qualified(key), "empty value");
        char* end = nullptr;
        errno = 0;
        const double v = std::strtod(s.c_str(), &end);
        if (end != s.c_str() + s.size() || errno == ERANGE)
            parse_error(line(key), qualified(key), "expected a number, got '" + s + "'");
        return v;
    }

    std::string name_;
    const Section* section_ = nullptr;
};

PenaltyConfig read_penalty(const Reader& r) {
    PenaltyConfig p;
    p.kind = r.text("penalty", "entropic");
    if (p.kind == "entropic") {
        if (r.has("lambda")) fail(ErrorCode::ValidationError, r.qualified("lambda") + " is not a parameter of entropic");
        p.parameter = r.number("gamma", 1.0);
    } else if (p.kind == "tvar") {
        if (r.has("gamma")) fail(ErrorCode::ValidationError, r.qualified("gamma") + " is not a parameter of tvar");
        r.require("lambda");
        p.parameter = r.number("lambda", 0.5);
    } else {
        parse_error(r.line("penalty"), r.qualified("penalty"), "expected entropic or tvar, got '" + p.kind + "'");
    }
    return p;
}

[[noreturn]] void invalid(const std::string& what) { fail(ErrorCode::ValidationError, what); }

bool to_bool(const Reader& r, const std::string& key, bool fallback) {
    const std::string v = r.text(key, fallback ? "auto" : "off");
    if (v == "auto" || v == "on" || v == "true") return true;
    if (v == "off" || v == "false") return false;
    parse_error(r.line(key), r.qualified(key), "expected auto or off, got '" + v + "'");
}

}  // namespace

std::string_view to_string(SolveMode mode) { return mode == SolveMode::Markov ? "markov" : "general"; }

PenaltySpec make_penalty(const PenaltyConfig& config) {
    return config.kind == "tvar" ? PenaltySpec::tvar(config.parameter) : PenaltySpec::entropic(config.parameter);
}

ProblemSpec RunConfig::problem() const {
    ProblemSpec p;
    p.market = market;
    p.agent_penalty = make_penalty(agent);
    p.principal_penalty = make_penalty(principal);
    p.cost = CostSpec::stationary(cost, market.horizon);
    p.reservation = reservation;
    p.initial_wealth = initial_wealth;
    if (base_preference) p.detect_base_preference();
    return p;
}

RunConfig parse_config_text(const std::string& text) {
    std::map<std::string, Section> sections;
    std::string current;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string s = raw;
        if (const auto hash = s.find('#'); hash != std::string::npos) s.erase(hash);
        s = trim(s);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') parse_error(line, "", "unterminated section header");
            current = trim(s.substr(1, s.size() - 2));
            if (!schema().count(current)) parse_error(line, "", "unknown section [" + current + "]");
            if (sections.count(current)) parse_error(line, "", "duplicate section [" + current + "]");
            sections[current];
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) parse_error(line, "", "expected key = value");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (current.empty()) parse_error(line, key, "key outside of any section");
        if (!schema().at(current).count(key)) parse_error(line, current + "." + key, "unknown key");
        if (sections[current].count(key)) parse_error(line, current + "." + key, "duplicate key");
        sections[current][key] = {value, line};
    }

    RunConfig c;
    const Reader run("run", sections);
    const std::string mode = run.text("mode", "markov");
    if (mode == "markov") c.mode = SolveMode::Markov;
    else if (mode == "general") c.mode = SolveMode::General;
    else parse_error(run.line("mode"), "run.mode", "expected markov or general, got '" + mode + "'");
    c.base_preference = to_bool(run, "base_preference", true);

    const Reader market("market", sections);
    for (const char* key : {"mu", "sigma", "p0", "horizon"}) market.require(key);
    c.market.drift = market.vector("mu");
    c.market.vol = market.matrix("sigma");
    c.market.initial_price = market.vector("p0");
    c.market.step = market.number("step", 1.0);
    c.market.horizon = market.integer("horizon", 1);
    c.market.n_assets = market.integer("n_assets", static_cast<int>(c.market.drift.size()));
    c.market.n_drivers = market.integer("n_drivers", static_cast<int>(c.market.vol.cols()));

    c.agent = read_penalty(Reader("agent", sections));
    c.principal = read_penalty(Reader("principal", sections));

    const Reader cost("cost", sections);
    const std::string kind = cost.text("kind", "quadratic");
    if (kind != "quadratic") parse_error(cost.line("kind"), "cost.kind", "only quadratic costs are supported");
    const int n = c.market.n_assets;
    if (cost.has("q") && cost.has("matrix"))
        fail(ErrorCode::ValidationError, "cost: give either q or matrix, not both");
    if (cost.has("matrix")) {
        c.cost.Q = cost.matrix("matrix");
    } else {
        c.cost.Q = cost.number("q", c.market.step) * Eigen::MatrixXd::Identity(n, n);
    }
    c.cost.linear = cost.has("linear") ? cost.vector("linear") : Eigen::VectorXd::Zero(n);
    c.cost.constant = cost.number("constant", 0.0);

    const Reader contract("contract", sections);
    c.reservation = contract.number("reservation", 0.0);
    c.initial_wealth = contract.number("initial_wealth", 0.0);

    const Reader solver("solver", sections);
    c.solver.tolerance = solver.number("tolerance", c.solver.tolerance);
    c.solver.max_iterations = solver.integer("max_iterations", c.solver.max_iterations);
    c.solver.grid_points = solver.integer("grid_points", c.solver.grid_points);

    const Reader verify("verify", sections);
    if (verify.has("beta_grid")) c.verify.beta_grid = verify.list("beta_grid");
    c.verify.ic_grid_radius = verify.number("ic_grid_radius", c.verify.ic_grid_radius);
    c.verify.ic_grid_points = verify.integer("ic_grid_points", c.verify.ic_grid_points);
    c.verify.ic_tolerance = verify.number("ic_tolerance", c.verify.ic_tolerance);
    c.verify.ir_tolerance = verify.number("ir_tolerance", c.verify.ir_tolerance);
    c.verify.policy_tolerance = verify.number("policy_tolerance", c.verify.policy_tolerance);
    c.verify.beta_tolerance = verify.number("beta_tolerance", c.verify.beta_tolerance);
    c.verify.foc_tolerance = verify.number("foc_tolerance", c.verify.foc_tolerance);
    c.verify.bound_tolerance = verify.number("bound_tolerance", c.verify.bound_tolerance);

    validate_config(c);
    return c;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::ParseError, "cannot open config file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

void validate_config(const RunConfig& c) {
    if (!(c.solver.tolerance > 0.0)) invalid("solver.tolerance must be positive");
    if (c.solver.max_iterations < 1) invalid("solver.max_iterations must be at least 1");
    if (c.solver.grid_points < 3) invalid("solver.grid_points must be at least 3");
    if (std::find(c.verify.beta_grid.begin(), c.verify.beta_grid.end(), 1.0) == c.verify.beta_grid.end())
        invalid("verify.beta_grid must contain 1");
    if (!(c.verify.ic_grid_radius > 0.0)) invalid("verify.ic_grid_radius must be positive");
    if (c.verify.ic_grid_points < 3) invalid("verify.ic_grid_points must be at least 3");
    for (double tol : {c.verify.ic_tolerance, c.verify.ir_tolerance, c.verify.policy_tolerance,
                       c.verify.beta_tolerance, c.verify.foc_tolerance, c.verify.bound_tolerance})
        if (!(tol > 0.0)) invalid("verification tolerances must be positive");
    for (const auto& [side, penalty] : {std::pair{"agent", &c.agent}, std::pair{"principal", &c.principal}}) {
        const ValidityReport report = penalty_report(make_penalty(*penalty));
        if (const PenaltyCheck* failed = report.first_failure())
            invalid(std::string(side) + " penalty " + failed->name + ": " + failed->detail);
    }
    try {
        c.problem().validate();
    } catch (const ContractError& e) {
        switch (e.code()) {
            case ErrorCode::RankDeficient:
            case ErrorCode::PositivityViolation:
            case ErrorCode::ValidationError:
                invalid(std::string("market: ") + e.what());
            case ErrorCode::InvalidPenalty:
                invalid(std::string("penalty: ") + e.what());
            case ErrorCode::InvalidCost:
                invalid(std::string("cost: ") + e.what());
            default:
                throw;
        }
    }
}

}  // namespace contract_forge
