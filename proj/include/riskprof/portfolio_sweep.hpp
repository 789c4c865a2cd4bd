#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <vector>

#include "riskprof/greedy_flow.hpp"
#include "riskprof/return_model.hpp"

namespace riskprof {

enum class EventKind { Enter, Leave };

/// A grid pair whose membership in the lower region L(alpha, (x1, 1 - x1))
/// flips at a single interior weight x1 = t.
struct SlopeEvent {
    int i;         // stock-1 offset
    int j;         // stock-2 offset
    double t;      // x1 at which the pair lies on the line
    double slope;  // slope of the line through (alpha, alpha) and the pair
    EventKind kind;
};

/// Events for every pair whose membership changes for some x1 in (0, 1),
/// sorted by t ascending (equivalently slope descending). Pairs that are
/// always in or always out on the open interval are omitted.
std::vector<SlopeEvent> enumerate_slope_events(const ReturnGrid& grid, double alpha);

/// Leaf/node label of the flow tree.
struct TreeLabel {
    double e1 = 0.0;  // unmet stock-1 demand (<= 0)
    double e2 = 0.0;  // unused stock-2 supply (>= 0)
};

/// parent[(e1,e2),(f1,f2)] = (e1 + min{e2 + f1, 0}, max{e2 + f1, 0} + f2).
/// (0, 0) is an identity on both sides.
inline TreeLabel combine(const TreeLabel& left, const TreeLabel& right) {
    const double s = left.e2 + right.e1;
    return {left.e1 + std::min(s, 0.0), std::max(s, 0.0) + right.e2};
}

/// Complete binary tree over a leaf sequence, padded with (0, 0) leaves.
class FlowTree {
public:
    explicit FlowTree(const std::vector<TreeLabel>& leaves);

    std::size_t leaf_count() const { return count_; }
    const TreeLabel& leaf(std::size_t pos) const { return nodes_[width_ + pos]; }
    const TreeLabel& root() const { return nodes_[1]; }

    void set_leaf(std::size_t pos, const TreeLabel& label);
    /// Exchanges leaves pos and pos + 1 and refreshes both root paths.
    void swap_adjacent(std::size_t pos);

    /// Largest deviation of any internal node from the parent rule.
    double max_rule_violation() const;

private:
    void refresh(std::size_t pos);

    std::size_t count_;
    std::size_t width_;
    std::vector<TreeLabel> nodes_;  // heap order, nodes_[1] is the root
};

/// Flow value 1 + r1; throws InvariantViolation if it differs from 1 - r2 by
/// more than 1e-9.
double tree_flow_value(const FlowTree& tree);

/// Snapshot handed to a sweep observer after each batch of events.
///
/// `rows`/`cols`/`region` describe the lower-region flow problem the tree is
/// solving at the representative weight `t` (mirrored grids when the
/// objective needs an upper region).
struct SweepState {
    const MarginalDistribution& rows;
    const MarginalDistribution& cols;
    RegionSpec region;
    double t_lo;
    double t_hi;
    double t;
    const FlowTree& tree;
    double flow;
};

using SweepObserver = std::function<void(const SweepState&)>;

struct SweepResult {
    Portfolio portfolio;
    double value = 0.0;
    // x1 range whose (open) interior induces the optimal region; a single
    // point when the optimum sits on an event or at a vertex portfolio.
    double t_lo = 0.0;
    double t_hi = 0.0;
    std::size_t events = 0;
    std::size_t swaps = 0;
};

/// Optimal two-stock portfolio for any non-average objective: sorts the slope
/// events once, then rotates the line through (alpha, alpha), swapping one
/// pair of neighboring tree leaves per event. Vertex portfolios (1, 0) and
/// (0, 1) are evaluated first with direct greedy calls; an interior weight
/// replaces them only on a strict improvement.
SweepResult sweep_optimal_portfolio(const MarginalDistribution& s1, const MarginalDistribution& s2, double alpha,
                                    const Objective& objective, const SweepObserver& observer = {});

/// The stock-2 threshold of each row, i.e. how many columns of row i lie in the
/// lower region, for a staircase mask.
std::vector<int> staircase_thresholds(const ReturnGrid& grid, const RegionSpec& lower);

/// Leaf sequence for a staircase: for rows from the top down, the not yet
/// placed columns under the line followed by the row's demand leaf; trailing
/// columns last.
std::vector<TreeLabel> staircase_leaves(const MarginalDistribution& rows, const MarginalDistribution& cols,
                                        const std::vector<int>& thresholds);

}  // namespace riskprof
