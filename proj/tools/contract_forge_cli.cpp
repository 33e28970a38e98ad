#include "contract_forge/errors.hpp"
#include "contract_forge/pipeline.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace cf = contract_forge;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kSolverError = 3;
constexpr int kBreach = 4;

int exit_code(cf::ErrorCode code) {
    switch (code) {
        case cf::ErrorCode::NonConvergence:
        case cf::ErrorCode::Unbounded:
            return kSolverError;
        default:
            return kConfigError;
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) cf::fail(cf::ErrorCode::ParseError, "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) cf::fail(cf::ErrorCode::ValidationError, "cannot write '" + path + "'");
    out << text;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            cf::fail(cf::ErrorCode::ParseError, "--beta-grid: '" + item + "' is not a number");
        }
    }
    return out;
}

void summarize(const cf::RunReport& r, std::ostream& os) {
    const cf::VerificationRecord& v = r.verification;
    os.precision(10);
    os << "mode " << r.mode << "\n";
    os << "h0 " << r.h0 << "\n";
    os << "principal_value_root " << r.principal_value_root << "\n";
    os << "agent_value_root " << r.agent_value_root << "\n";
    if (r.kappa) os << "kappa " << *r.kappa << "\n";
    if (r.weights) os << "weights " << r.weights->principal << " " << r.weights->agent << "\n";
    os.precision(3);
    os << std::scientific;
    os << "ic_worst_violation " << v.ic_worst_violation << "\n";
    os << "ir_gap " << v.ir_gap << "\n";
    os << "policy_gap " << v.policy_gap << "\n";
    os << "beta_gap " << v.beta_gap << "\n";
    os << "replication_residual " << v.replication_residual << "\n";
    os << std::defaultfloat;
    os << (v.passed ? "verified" : "verification failed") << "\n";
    for (const auto& f : v.failures) os << "  " << f << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contract solver for the dynamic principal-agent problem on scenario trees"};
    app.require_subcommand(1);
    app.fallthrough();
    double tol = 1e-10;
    bool quiet = false;
    auto* tol_opt = app.add_option("--tol", tol, "Solver tolerance")->capture_default_str();
    app.add_flag("--quiet", quiet, "Suppress the summary");

    std::string config_path, out_path, solution_path, mode, beta_grid;
    double ic_radius = 0.0, root_shift = 0.0;
    int ic_points = 0;

    auto* solve = app.add_subcommand("solve", "Solve, assemble and verify; write the report");
    solve->add_option("--config", config_path, "Configuration file")->required();
    solve->add_option("--out", out_path, "Report file")->required();
    solve->add_option("--mode", mode, "Solve mode")->check(CLI::IsMember({"markov", "general"}));
    solve->add_option("--perturb-root-effort", root_shift)->group("");

    auto* verify = app.add_subcommand("verify", "Re-verify a stored report");
    verify->add_option("--config", config_path, "Configuration file")->required();
    verify->add_option("--solution", solution_path, "Report file")->required();
    auto* grid_opt = verify->add_option("--beta-grid", beta_grid, "Comma separated beta grid");
    auto* radius_opt = verify->add_option("--ic-radius", ic_radius, "IC grid radius");
    auto* points_opt = verify->add_option("--ic-points", ic_points, "IC grid points per axis");

    auto* validate = app.add_subcommand("validate", "Check a configuration");
    validate->add_option("--config", config_path, "Configuration file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    try {
        cf::RunConfig config = cf::parse_config(config_path);
        if (tol_opt->count()) config.solver.tolerance = tol;
        if (!mode.empty()) config.mode = mode == "general" ? cf::SolveMode::General : cf::SolveMode::Markov;

        if (*validate) {
            cf::validate_config(config);
            if (!quiet) std::cout << "config ok\n";
            return kOk;
        }
        if (*solve) {
            const cf::PipelineResult result = cf::run(config, root_shift);
            write_file(out_path, cf::serialize_report(result.report));
            if (!quiet) summarize(result.report, std::cout);
            return result.report.verification.passed ? kOk : kBreach;
        }
        if (*grid_opt) config.verify.beta_grid = parse_list(beta_grid);
        if (*radius_opt) config.verify.ic_grid_radius = ic_radius;
        if (*points_opt) config.verify.ic_grid_points = ic_points;
        const cf::RunReport stored = cf::parse_report(read_file(solution_path));
        config.mode = stored.config.mode;
        const cf::RunReport checked = cf::verify_report(config, stored);
        if (!quiet) summarize(checked, std::cout);
        return checked.verification.passed ? kOk : kBreach;
    } catch (const cf::ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    }
}
