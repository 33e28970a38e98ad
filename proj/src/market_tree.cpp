#include "contract_forge/market_tree.hpp"

#include "contract_forge/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace contract_forge {

namespace {

constexpr std::size_t kMaxNodesPerLevel = std::size_t{1} << 24;

std::string node_name(NodeId node) {
    std::ostringstream out;
    out << "(t=" << node.time << ", k=" << node.index << ")";
    return out.str();
}

}  // namespace

void MarketSpec::validate() const {
    if (n_assets < 1) fail(ErrorCode::ValidationError, "n_assets must be positive");
    if (n_drivers < 1) fail(ErrorCode::ValidationError, "n_drivers must be positive");
    if (n_drivers > 10) fail(ErrorCode::ValidationError, "n_drivers above 10 is not supported");
    if (!(step > 0.0) || !std::isfinite(step)) fail(ErrorCode::ValidationError, "step must be positive");
    if (horizon < 1) fail(ErrorCode::ValidationError, "horizon must be at least 1");
    if (drift.size() != n_assets) fail(ErrorCode::ValidationError, "drift length must equal n_assets");
    if (vol.rows() != n_assets || vol.cols() != n_drivers)
        fail(ErrorCode::ValidationError, "vol must be n_assets x n_drivers");
    if (initial_price.size() != n_assets)
        fail(ErrorCode::ValidationError, "initial_price length must equal n_assets");
    if (!drift.allFinite() || !vol.allFinite() || !initial_price.allFinite())
        fail(ErrorCode::ValidationError, "market parameters must be finite");
    if ((initial_price.array() <= 0.0).any())
        fail(ErrorCode::ValidationError, "initial prices must be strictly positive");
    if (n_drivers < n_assets)
        fail(ErrorCode::RankDeficient, "rank: vol needs n_drivers >= n_assets for independent rows");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(vol.transpose());
    qr.setThreshold(1e-12);
    if (qr.rank() < n_assets) fail(ErrorCode::RankDeficient, "rank: vol rows are linearly dependent");

    // Worst one-step gross return of asset i is 1 + mu_i - sqrt(h) sum_j |sigma_ij|.
    const double root_h = std::sqrt(step);
    for (int i = 0; i < n_assets; ++i) {
        const double worst = 1.0 + drift(i) - root_h * vol.row(i).cwiseAbs().sum();
        if (!(worst > 0.0)) {
            std::ostringstream msg;
            msg << "asset " << i << " reaches a non-positive price (worst gross return " << worst << ")";
            fail(ErrorCode::PositivityViolation, msg.str());
        }
    }

    std::size_t level = 1;
    const std::size_t branching = std::size_t{1} << n_drivers;
    for (int t = 0; t < horizon; ++t) {
        if (level > kMaxNodesPerLevel / branching)
            fail(ErrorCode::ValidationError, "tree too large: branching^horizon exceeds 2^24 leaves");
        level *= branching;
    }
}

std::vector<DriverPattern> complete_drivers(int n_drivers, double step) {
    if (n_drivers < 1) fail(ErrorCode::ValidationError, "n_drivers must be positive");
    if (!(step > 0.0)) fail(ErrorCode::ValidationError, "step must be positive");
    const int outcomes = 1 << n_drivers;
    const double root_h = std::sqrt(step);

    std::vector<std::vector<int>> subsets;
    for (int mask = 1; mask < outcomes; ++mask) {
        std::vector<int> subset;
        for (int i = 0; i < n_drivers; ++i)
            if (mask & (1 << i)) subset.push_back(i);
        subsets.push_back(std::move(subset));
    }
    std::sort(subsets.begin(), subsets.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() < b.size();
        return a < b;
    });

    std::vector<DriverPattern> patterns;
    patterns.reserve(subsets.size());
    for (auto& subset : subsets) {
        DriverPattern pattern{std::move(subset), Eigen::VectorXd(outcomes)};
        for (int j = 0; j < outcomes; ++j) {
            // product of |S| increments of size sqrt(h), divided by h^{(|S|-1)/2}
            double sign = 1.0;
            for (int i : pattern.subset)
                if (j & (1 << i)) sign = -sign;
            pattern.values(j) = sign * root_h;
        }
        patterns.push_back(std::move(pattern));
    }
    return patterns;
}

ScenarioTree::ScenarioTree(MarketSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    const auto patterns = complete_drivers(spec_.n_drivers, spec_.step);
    const int outcomes = 1 << spec_.n_drivers;
    drivers_.resize(outcomes, static_cast<Eigen::Index>(patterns.size()));
    for (std::size_t p = 0; p < patterns.size(); ++p) drivers_.col(static_cast<Eigen::Index>(p)) = patterns[p].values;

    const Eigen::MatrixXd base = drivers_.leftCols(spec_.n_drivers);
    returns_ = (base * spec_.vol.transpose()).rowwise() + spec_.drift.transpose();
    uniform_ = Eigen::VectorXd::Constant(outcomes, 1.0 / outcomes);

    prices_.reserve(static_cast<std::size_t>(spec_.horizon) + 1);
    prices_.push_back(spec_.initial_price.transpose());
    for (int t = 0; t < spec_.horizon; ++t) {
        const Eigen::MatrixXd& parent = prices_.back();
        Eigen::MatrixXd next(parent.rows() * outcomes, spec_.n_assets);
        for (Eigen::Index k = 0; k < parent.rows(); ++k)
            for (int j = 0; j < outcomes; ++j)
                next.row(k * outcomes + j) =
                    parent.row(k).array() * (1.0 + returns_.row(j).array());
        prices_.push_back(std::move(next));
    }
}

std::size_t ScenarioTree::node_count(int t) const {
    if (t < 0 || t > horizon()) fail(ErrorCode::ValidationError, "time index out of range");
    return static_cast<std::size_t>(prices_[static_cast<std::size_t>(t)].rows());
}

void ScenarioTree::require_nonterminal(NodeId node) const {
    if (node.time < 0 || node.time > horizon() || node.index >= node_count(node.time))
        fail(ErrorCode::ValidationError, "node " + node_name(node) + " does not exist");
    if (is_terminal(node)) fail(ErrorCode::TerminalNode, "node " + node_name(node) + " is terminal");
}

NodeId ScenarioTree::child(NodeId node, int outcome) const {
    require_nonterminal(node);
    return {node.time + 1, node.index * static_cast<std::size_t>(branching()) + static_cast<std::size_t>(outcome)};
}

Eigen::VectorXd ScenarioTree::price(NodeId node) const {
    if (node.time < 0 || node.time > horizon() || node.index >= node_count(node.time))
        fail(ErrorCode::ValidationError, "node " + node_name(node) + " does not exist");
    return prices(node.time).row(static_cast<Eigen::Index>(node.index)).transpose();
}

const Eigen::MatrixXd& ScenarioTree::drivers(NodeId node) const {
    require_nonterminal(node);
    return drivers_;
}

const Eigen::MatrixXd& ScenarioTree::returns(NodeId node) const {
    require_nonterminal(node);
    return returns_;
}

Eigen::MatrixXd ScenarioTree::price_increments(NodeId node) const {
    require_nonterminal(node);
    const Eigen::VectorXd p = price(node);
    return returns_ * p.asDiagonal();
}

const Eigen::VectorXd& ScenarioTree::child_probabilities(NodeId node) const {
    require_nonterminal(node);
    if (!overrides_.empty()) {
        auto it = overrides_.find(node);
        if (it != overrides_.end()) return it->second;
    }
    return uniform_;
}

std::vector<int> ScenarioTree::path(NodeId node) const {
    std::vector<int> digits(static_cast<std::size_t>(node.time));
    std::size_t k = node.index;
    const auto b = static_cast<std::size_t>(branching());
    for (int t = node.time - 1; t >= 0; --t) {
        digits[static_cast<std::size_t>(t)] = static_cast<int>(k % b);
        k /= b;
    }
    return digits;
}

std::pair<double, double> ScenarioTree::price_bounds() const {
    double lo = prices_.front().minCoeff();
    double hi = prices_.front().maxCoeff();
    for (const auto& level : prices_) {
        lo = std::min(lo, level.minCoeff());
        hi = std::max(hi, level.maxCoeff());
    }
    return {lo, hi};
}

ScenarioTree ScenarioTree::reweighted(NodeId node, const Eigen::VectorXd& probabilities) const {
    require_nonterminal(node);
    if (probabilities.size() != branching())
        fail(ErrorCode::ValidationError, "probability vector must have one entry per child");
    if ((probabilities.array() < 0.0).any() || !probabilities.allFinite())
        fail(ErrorCode::ValidationError, "probabilities must be finite and non-negative");
    if (std::abs(probabilities.sum() - 1.0) > 1e-12)
        fail(ErrorCode::ValidationError, "probabilities must sum to one");
    ScenarioTree copy = *this;
    copy.overrides_[node] = probabilities;
    return copy;
}

ScenarioTree build_tree(const MarketSpec& spec) { return ScenarioTree(spec); }

Eigen::MatrixXd relative_increments(const ScenarioTree& tree, NodeId node) { return tree.returns(node); }

}  // namespace contract_forge
