#pragma once

#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace contract_forge {

enum class PenaltyKind { Entropic, Tvar, Generic };

/// User-supplied convex loss H for an optimized certainty equivalent.
/// `conjugate_lo`/`conjugate_hi` bound the closure of dom(H*); `conjugate`
/// may be left empty, in which case H* is computed numerically.
struct GenericPenalty {
    std::string name = "generic";
    std::function<double(double)> value;
    std::function<double(double)> derivative;
    std::function<double(double)> second_derivative;
    double conjugate_lo = 0.0;
    double conjugate_hi = std::numeric_limits<double>::infinity();
    std::function<double(double)> conjugate;
};

/// Loss function H of the one-step utility U(X) = sup_s { s - E[H(s - X)] }.
///   Entropic(gamma): H(l) = exp(gamma l - 1) / gamma
///   Tvar(lambda):    H(l) = max(l, 0) / lambda
class PenaltySpec {
public:
    static PenaltySpec entropic(double gamma);
    static PenaltySpec tvar(double lambda);
    static PenaltySpec generic(GenericPenalty penalty);

    PenaltyKind kind() const noexcept;
    /// Entropic coefficient; throws InvalidPenalty for other kinds.
    double gamma() const;
    /// TVAR level; throws InvalidPenalty for other kinds.
    double lambda() const;
    const GenericPenalty& generic_data() const;

    /// H is twice differentiable (everything except TVAR).
    bool is_smooth() const noexcept { return kind() != PenaltyKind::Tvar; }

    double loss(double l) const;
    double loss_derivative(double l) const;
    double loss_second_derivative(double l) const;
    /// H*(x), +infinity outside the conjugate domain.
    double conjugate(double x) const;
    std::pair<double, double> conjugate_domain() const;

    /// A maximiser of s - H(s); the OCE maximiser of any lottery lies within
    /// [min X + pivot, max X + pivot].
    double pivot() const noexcept { return pivot_; }

    std::string describe() const;

private:
    struct Entropic { double gamma; };
    struct Tvar { double lambda; };
    using Kind = std::variant<Entropic, Tvar, GenericPenalty>;

    explicit PenaltySpec(Kind kind);

    Kind kind_;
    double pivot_ = 0.0;
};

struct PenaltyCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ValidityReport {
    std::vector<PenaltyCheck> checks;
    bool valid() const;
    /// First failed check, or nullptr.
    const PenaltyCheck* first_failure() const;
};

/// Runs every validity check without throwing.
ValidityReport penalty_report(const PenaltySpec& penalty);

/// Same checks; throws InvalidPenalty naming the first failed condition.
ValidityReport validate_penalty(const PenaltySpec& penalty);

}  // namespace contract_forge
