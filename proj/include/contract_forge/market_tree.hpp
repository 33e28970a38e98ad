#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <utility>
#include <vector>

namespace contract_forge {

/// Per-step market parameters of the multiplicative Bernoulli price model
///   P_{t+1} = P_t + diag(P_t) (mu + sigma dw_{t+1}).
struct MarketSpec {
    int n_assets = 1;
    int n_drivers = 1;
    Eigen::VectorXd drift;          // length N
    Eigen::MatrixXd vol;            // N x d
    double step = 1.0;              // h
    Eigen::VectorXd initial_price;  // length N
    int horizon = 1;                // T

    /// Throws ValidationError / RankDeficient / PositivityViolation.
    void validate() const;
};

/// One completed driver: the Walsh product over `subset` of the base drivers,
/// normalised so that every increment is +-sqrt(h).
struct DriverPattern {
    std::vector<int> subset;  // zero-based base-driver indices, ascending
    Eigen::VectorXd values;   // one entry per elementary child outcome
};

/// Outcome j of a node sets base driver i to -sqrt(h) when bit i of j is set
/// and to +sqrt(h) otherwise. Subsets are ordered by cardinality, then
/// lexicographically, so the first d patterns are the base drivers.
std::vector<DriverPattern> complete_drivers(int n_drivers, double step);

struct NodeId {
    int time = 0;
    std::size_t index = 0;

    friend bool operator==(const NodeId&, const NodeId&) = default;
    friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

class ScenarioTree {
public:
    explicit ScenarioTree(MarketSpec spec);

    const MarketSpec& spec() const noexcept { return spec_; }
    int horizon() const noexcept { return spec_.horizon; }
    int n_assets() const noexcept { return spec_.n_assets; }
    int n_drivers() const noexcept { return spec_.n_drivers; }
    int n_completed() const noexcept { return static_cast<int>(drivers_.cols()); }
    int branching() const noexcept { return static_cast<int>(drivers_.rows()); }
    double step() const noexcept { return spec_.step; }

    std::size_t node_count(int t) const;
    std::size_t leaf_count() const { return node_count(horizon()); }
    NodeId root() const { return {0, 0}; }
    NodeId child(NodeId node, int outcome) const;
    bool is_terminal(NodeId node) const { return node.time >= horizon(); }

    /// Prices of every node at time t, one row per node.
    const Eigen::MatrixXd& prices(int t) const { return prices_.at(static_cast<std::size_t>(t)); }
    Eigen::VectorXd price(NodeId node) const;

    /// Completed driver increments into each child: branching() x n_completed().
    const Eigen::MatrixXd& drivers(NodeId node) const;
    /// Relative price increments into each child: branching() x n_assets().
    const Eigen::MatrixXd& returns(NodeId node) const;
    /// Absolute price increments into each child: branching() x n_assets().
    Eigen::MatrixXd price_increments(NodeId node) const;
    const Eigen::VectorXd& child_probabilities(NodeId node) const;

    /// Outcome digits of the root-to-node path, oldest first.
    std::vector<int> path(NodeId node) const;

    /// True when every node shares the same one-step law.
    bool is_markov() const noexcept { return overrides_.empty(); }
    /// Smallest and largest component price over the whole tree.
    std::pair<double, double> price_bounds() const;

    /// Copy of this tree with a non-uniform child law at one node.
    ScenarioTree reweighted(NodeId node, const Eigen::VectorXd& probabilities) const;

private:
    void require_nonterminal(NodeId node) const;

    MarketSpec spec_;
    Eigen::MatrixXd drivers_;
    Eigen::MatrixXd returns_;
    Eigen::VectorXd uniform_;
    std::vector<Eigen::MatrixXd> prices_;
    std::map<NodeId, Eigen::VectorXd> overrides_;
};

ScenarioTree build_tree(const MarketSpec& spec);

/// Throws TerminalNode for leaves.
Eigen::MatrixXd relative_increments(const ScenarioTree& tree, NodeId node);

}  // namespace contract_forge
