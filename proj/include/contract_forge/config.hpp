#pragma once

#include "contract_forge/concave_program.hpp"
#include "contract_forge/principal_solver.hpp"

#include <string>
#include <vector>

namespace contract_forge {

enum class SolveMode { Markov, General };
std::string_view to_string(SolveMode mode);

struct VerifySettings {
    std::vector<double> beta_grid{0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
    double ic_grid_radius = 1.0;
    int ic_grid_points = 41;
    double ic_tolerance = 1e-6;
    double ir_tolerance = 1e-7;
    double policy_tolerance = 1e-7;
    double beta_tolerance = 1e-6;
    double foc_tolerance = 1e-8;
    double bound_tolerance = 1e-8;
};

/// Penalty section as written, kept for the report echo.
struct PenaltyConfig {
    std::string kind = "entropic";
    double parameter = 1.0;  // gamma for entropic, lambda for tvar
};

struct RunConfig {
    SolveMode mode = SolveMode::Markov;
    bool base_preference = true;  // use the base-preference route when both sides are entropic
    MarketSpec market;
    PenaltyConfig agent;
    PenaltyConfig principal;
    QuadraticCost cost;  // stationary over the horizon
    double reservation = 0.0;
    double initial_wealth = 0.0;
    SolverOptions solver;
    VerifySettings verify;

    ProblemSpec problem() const;
};

/// Sectioned key = value text. '#' starts a comment; lists are comma
/// separated; matrix rows are separated by ';'. Throws ParseError naming the
/// line and key, ValidationError naming the violated invariant.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::string& path);

/// Runs every cross-module check; throws ValidationError.
void validate_config(const RunConfig& config);

PenaltySpec make_penalty(const PenaltyConfig& config);

}  // namespace contract_forge
