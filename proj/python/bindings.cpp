#include "contract_forge/errors.hpp"
#include "contract_forge/oce.hpp"
#include "contract_forge/penalty.hpp"
#include "contract_forge/pipeline.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

namespace py = pybind11;
namespace cf = contract_forge;

namespace {

cf::RunConfig load(const std::string& text, const std::optional<std::string>& mode, const std::optional<double>& tol) {
    cf::RunConfig config = cf::parse_config_text(text);
    if (tol) config.solver.tolerance = *tol;
    if (mode) {
        if (*mode != "markov" && *mode != "general")
            cf::fail(cf::ErrorCode::ValidationError, "mode must be 'markov' or 'general'");
        config.mode = *mode == "general" ? cf::SolveMode::General : cf::SolveMode::Markov;
    }
    return config;
}

cf::PenaltySpec penalty(const std::string& kind, double parameter) {
    if (kind == "entropic") return cf::PenaltySpec::entropic(parameter);
    if (kind == "tvar") return cf::PenaltySpec::tvar(parameter);
    cf::fail(cf::ErrorCode::InvalidPenalty, "penalty kind must be 'entropic' or 'tvar'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Contract solver core";

    static py::exception<cf::ContractError> error(m, "ContractError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const cf::ContractError& e) {
            py::object code = py::str(std::string(cf::to_string(e.code())));
            PyErr_SetObject(error.ptr(), py::make_tuple(py::str(e.what()), code).ptr());
        }
    });

    m.def(
        "parse_config",
        [](const std::string& text) { return cf::config_to_json(cf::parse_config_text(text)).dump(); },
        py::arg("text"), "Parse and validate INI text; returns the normalized configuration as JSON.");
    m.def(
        "solve",
        [](const std::string& text, std::optional<std::string> mode, std::optional<double> tol) {
            const cf::RunConfig config = load(text, mode, tol);
            py::gil_scoped_release release;
            return cf::serialize_report(cf::run(config).report);
        },
        py::arg("config"), py::arg("mode") = py::none(), py::arg("tol") = py::none(),
        "Solve, assemble and verify; returns the report as JSON.");
    m.def(
        "verify",
        [](const std::string& text, const std::string& report) {
            const cf::RunReport stored = cf::parse_report(report);
            cf::RunConfig config = cf::parse_config_text(text);
            config.mode = stored.config.mode;
            py::gil_scoped_release release;
            return cf::serialize_report(cf::verify_report(config, stored));
        },
        py::arg("config"), py::arg("report"), "Re-verify a stored report; returns the updated report as JSON.");
    m.def(
        "oce_value",
        [](const Eigen::VectorXd& x, const Eigen::VectorXd& p, const std::string& kind, double parameter) {
            const cf::PenaltySpec pen = penalty(kind, parameter);
            cf::validate_penalty(pen);
            return cf::oce_value(x, p, pen);
        },
        py::arg("values"), py::arg("probs"), py::arg("kind"), py::arg("parameter"),
        "Optimized certainty equivalent of a finite lottery.");
}
