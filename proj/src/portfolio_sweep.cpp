#include "riskprof/portfolio_sweep.hpp"

#include <bit>
#include <cmath>
#include <sstream>

namespace riskprof {

namespace {

/// Events whose t differ by at most this are applied as one batch.
constexpr double kSameSlopeTol = 1e-12;
/// Required improvement before a later candidate replaces the incumbent.
constexpr double kImproveTol = 1e-12;

}  // namespace

std::vector<SlopeEvent> enumerate_slope_events(const ReturnGrid& grid, double alpha) {
    std::vector<SlopeEvent> events;
    const int m = grid.size();
    for (int i = 0; i < m; ++i) {
        const double a = grid.value(i);
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;  // a == b: membership independent of x1
            const double b = grid.value(j);
            // x1*a + (1 - x1)*b = alpha
            const double t = (alpha - b) / (a - b);
            if (!(t > 0.0 && t < 1.0)) continue;
            const double slope = (b - alpha) / (a - alpha);
            events.push_back({i, j, t, slope, a > b ? EventKind::Leave : EventKind::Enter});
        }
    }
    std::sort(events.begin(), events.end(), [](const SlopeEvent& l, const SlopeEvent& r) {
        if (l.t != r.t) return l.t < r.t;
        if (l.i != r.i) return l.i < r.i;
        return l.j < r.j;
    });
    return events;
}

FlowTree::FlowTree(const std::vector<TreeLabel>& leaves)
    : count_(leaves.size()), width_(std::bit_ceil(std::max<std::size_t>(leaves.size(), 1))),
      nodes_(2 * width_) {
    std::copy(leaves.begin(), leaves.end(), nodes_.begin() + static_cast<std::ptrdiff_t>(width_));
    for (std::size_t n = width_ - 1; n >= 1; --n) nodes_[n] = combine(nodes_[2 * n], nodes_[2 * n + 1]);
}

void FlowTree::refresh(std::size_t pos) {
    for (std::size_t n = (width_ + pos) / 2; n >= 1; n /= 2) nodes_[n] = combine(nodes_[2 * n], nodes_[2 * n + 1]);
}

void FlowTree::set_leaf(std::size_t pos, const TreeLabel& label) {
    nodes_[width_ + pos] = label;
    refresh(pos);
}

void FlowTree::swap_adjacent(std::size_t pos) {
    std::swap(nodes_[width_ + pos], nodes_[width_ + pos + 1]);
    refresh(pos);
    // Neighbors share every ancestor above their lowest common one.
    if ((width_ + pos) / 2 != (width_ + pos + 1) / 2) refresh(pos + 1);
}

double FlowTree::max_rule_violation() const {
    double worst = 0.0;
    for (std::size_t n = 1; n < width_; ++n) {
        const TreeLabel expect = combine(nodes_[2 * n], nodes_[2 * n + 1]);
        worst = std::max({worst, std::abs(expect.e1 - nodes_[n].e1), std::abs(expect.e2 - nodes_[n].e2)});
    }
    return worst;
}

double tree_flow_value(const FlowTree& tree) {
    const TreeLabel& r = tree.root();
    const double by_demand = 1.0 + r.e1;
    const double by_supply = 1.0 - r.e2;
    if (std::abs(by_demand - by_supply) > 1e-9) {
        std::ostringstream msg;
        msg << "flow tree root disagrees: 1 + r1 = " << by_demand << ", 1 - r2 = " << by_supply;
        throw Error(ErrorCode::InvariantViolation, msg.str());
    }
    return std::clamp(by_demand, 0.0, 1.0);
}

std::vector<int> staircase_thresholds(const ReturnGrid& grid, const RegionSpec& lower) {
    const auto mask = region_mask(grid, 2, lower);
    const int m = grid.size();
    std::vector<int> th(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        const char* row = mask.data() + static_cast<std::ptrdiff_t>(i) * m;
        int count = 0;
        while (count < m && row[count]) ++count;
        for (int j = count; j < m; ++j)
            if (row[j]) throw Error(ErrorCode::InvariantViolation, "region is not a lower staircase");
        if (i > 0 && count > th[static_cast<std::size_t>(i - 1)])
            throw Error(ErrorCode::InvariantViolation, "region is not a lower staircase");
        th[static_cast<std::size_t>(i)] = count;
    }
    return th;
}

namespace {

enum class LeafKind : char { Row, Col };

struct LeafId {
    LeafKind kind;
    int index;
};

/// Leaf order plus the tree over it. Rows carry (-S1, 0), columns (0, S2).
class StaircaseSequence {
public:
    StaircaseSequence(const MarginalDistribution& rows, const MarginalDistribution& cols,
                      const std::vector<int>& thresholds)
        : row_pos_(static_cast<std::size_t>(rows.size())), col_pos_(static_cast<std::size_t>(cols.size())),
          tree_(staircase_leaves(rows, cols, thresholds)) {
        const int m = rows.size();
        int next_col = 0;
        for (int i = m - 1; i >= 0; --i) {
            for (; next_col < thresholds[static_cast<std::size_t>(i)]; ++next_col) push(LeafKind::Col, next_col);
            push(LeafKind::Row, i);
        }
        for (; next_col < cols.size(); ++next_col) push(LeafKind::Col, next_col);
    }

    const FlowTree& tree() const { return tree_; }

    /// (i, j) joins the region: column j must sit right after row i.
    void insert(int i, int j) {
        const std::size_t p = row_pos_[static_cast<std::size_t>(i)];
        require(p + 1 < order_.size() && order_[p + 1].kind == LeafKind::Col && order_[p + 1].index == j, i, j);
        swap(p);
    }

    /// (i, j) leaves the region: column j must sit right before row i.
    void remove(int i, int j) {
        const std::size_t p = col_pos_[static_cast<std::size_t>(j)];
        require(p + 1 < order_.size() && order_[p + 1].kind == LeafKind::Row && order_[p + 1].index == i, i, j);
        swap(p);
    }

private:
    void push(LeafKind kind, int index) {
        (kind == LeafKind::Row ? row_pos_ : col_pos_)[static_cast<std::size_t>(index)] = order_.size();
        order_.push_back({kind, index});
    }

    void swap(std::size_t p) {
        std::swap(order_[p], order_[p + 1]);
        for (std::size_t q : {p, p + 1})
            (order_[q].kind == LeafKind::Row ? row_pos_ : col_pos_)[static_cast<std::size_t>(order_[q].index)] = q;
        tree_.swap_adjacent(p);
    }

    static void require(bool ok, int i, int j) {
        if (ok) return;
        std::ostringstream msg;
        msg << "event (" << i << ", " << j << ") is not an adjacent leaf transposition";
        throw Error(ErrorCode::InvariantViolation, msg.str());
    }

    std::vector<LeafId> order_;
    std::vector<std::size_t> row_pos_;
    std::vector<std::size_t> col_pos_;
    FlowTree tree_;
};

struct LowerOptimum {
    double flow = 0.0;
    double t_lo = 0.0;
    double t_hi = 0.0;
    double t = 0.0;
    std::size_t events = 0;
    std::size_t swaps = 0;
};

/// Minimizes (or maximizes) the worst-case mass of the lower region over x1.
LowerOptimum sweep_lower(const MarginalDistribution& rows, const MarginalDistribution& cols, double alpha,
                         bool strict, bool maximize, const SweepObserver& observer) {
    const ReturnGrid& grid = rows.grid;
    const int m = grid.size();
    auto lower_at = [&](double t) { return RegionSpec{alpha, two_stock_portfolio(t), Sense::Lower, strict}; };

    LowerOptimum best;
    bool have = false;
    auto offer = [&](double flow, double lo, double hi, double t) {
        const bool better = !have || (maximize ? flow > best.flow + kImproveTol : flow < best.flow - kImproveTol);
        if (!better) return;
        have = true;
        best.flow = flow;
        best.t_lo = lo;
        best.t_hi = hi;
        best.t = t;
    };

    // Vertices first, so an interior portfolio must strictly beat both.
    offer(greedy_flow({rows, cols, lower_at(0.0)}).value, 0.0, 0.0, 0.0);
    offer(greedy_flow({rows, cols, lower_at(1.0)}).value, 1.0, 1.0, 1.0);

    const auto events = enumerate_slope_events(grid, alpha);
    best.events = events.size();

    // Membership on the open interval before the first event.
    std::vector<char> event_pair(static_cast<std::size_t>(m) * m, 0);
    for (const auto& e : events) event_pair[static_cast<std::size_t>(e.i) * m + e.j] = 1;
    std::vector<int> thresholds(static_cast<std::size_t>(m));
    {
        const double x1 = 0.5;
        for (int i = 0; i < m; ++i) {
            int count = 0;
            for (int j = 0; j < m; ++j) {
                bool in;
                if (event_pair[static_cast<std::size_t>(i) * m + j]) in = grid.value(i) > grid.value(j);
                else in = classify_return(x1 * grid.value(i) + (1 - x1) * grid.value(j), alpha, Sense::Lower, strict);
                if (in) {
                    if (count != j) throw Error(ErrorCode::InvariantViolation, "initial region is not a staircase");
                    ++count;
                }
            }
            if (i > 0 && count > thresholds[static_cast<std::size_t>(i - 1)])
                throw Error(ErrorCode::InvariantViolation, "initial region is not a staircase");
            thresholds[static_cast<std::size_t>(i)] = count;
        }
    }

    StaircaseSequence seq(rows, cols, thresholds);
    auto report = [&](double lo, double hi, double t) {
        const double flow = tree_flow_value(seq.tree());
        if (observer) observer(SweepState{rows, cols, lower_at(t), lo, hi, t, seq.tree(), flow});
        offer(flow, lo, hi, t);
    };

    std::vector<const SlopeEvent*> entering;
    std::vector<const SlopeEvent*> leaving;
    auto apply_entering = [&] {
        std::sort(entering.begin(), entering.end(), [](auto* l, auto* r) {
            return l->i != r->i ? l->i < r->i : l->j < r->j;
        });
        for (auto* e : entering) seq.insert(e->i, e->j);
        best.swaps += entering.size();
    };
    auto apply_leaving = [&] {
        std::sort(leaving.begin(), leaving.end(), [](auto* l, auto* r) {
            return l->i != r->i ? l->i > r->i : l->j > r->j;
        });
        for (auto* e : leaving) seq.remove(e->i, e->j);
        best.swaps += leaving.size();
    };

    double prev = 0.0;
    std::size_t k = 0;
    while (k < events.size()) {
        const double t = events[k].t;
        entering.clear();
        leaving.clear();
        for (; k < events.size() && events[k].t - t <= kSameSlopeTol; ++k)
            (events[k].kind == EventKind::Enter ? entering : leaving).push_back(&events[k]);

        report(prev, t, 0.5 * (prev + t));
        // On the line itself every batch member is inside L and outside L**.
        if (strict) {
            apply_leaving();
            report(t, t, t);
            apply_entering();
        } else {
            apply_entering();
            report(t, t, t);
            apply_leaving();
        }
        prev = t;
    }
    report(prev, 1.0, 0.5 * (prev + 1.0));
    return best;
}

MarginalDistribution mirrored(const MarginalDistribution& dist) {
    return MarginalDistribution{ReturnGrid(dist.grid.mu, -dist.grid.m2, -dist.grid.m1), dist.probs.reverse()};
}

}  // namespace

std::vector<TreeLabel> staircase_leaves(const MarginalDistribution& rows, const MarginalDistribution& cols,
                                        const std::vector<int>& thresholds) {
    std::vector<TreeLabel> leaves;
    leaves.reserve(static_cast<std::size_t>(rows.size() + cols.size()));
    int next_col = 0;
    for (int i = rows.size() - 1; i >= 0; --i) {
        for (; next_col < thresholds[static_cast<std::size_t>(i)]; ++next_col)
            leaves.push_back({0.0, cols.probs[next_col]});
        leaves.push_back({-rows.probs[i], 0.0});
    }
    for (; next_col < cols.size(); ++next_col) leaves.push_back({0.0, cols.probs[next_col]});
    return leaves;
}

SweepResult sweep_optimal_portfolio(const MarginalDistribution& s1, const MarginalDistribution& s2, double alpha,
                                    const Objective& objective, const SweepObserver& observer) {
    if (!(s1.grid == s2.grid)) throw Error(ErrorCode::DimensionMismatch, "marginals live on different grids");
    const CanonicalTask task = reduce_objective(objective);

    LowerOptimum opt;
    double ra = 0.0;
    switch (task.kase) {
        case Case::Worst:
            opt = sweep_lower(s1, s2, alpha, task.lower_strict, false, observer);
            ra = opt.flow;
            break;
        case Case::Best: {
            // min_x (1 - flow(U^{!s})) = 1 - max_x flow(U^{!s}); U becomes a
            // lower region after negating both grids and alpha.
            const auto r = mirrored(s1);
            const auto c = mirrored(s2);
            opt = sweep_lower(r, c, -alpha, !task.lower_strict, true, observer);
            ra = 1.0 - opt.flow;
            break;
        }
        case Case::Average:
            throw Error(ErrorCode::AverageCaseNotSupported, "the sweep handles best and worst cases only");
    }

    SweepResult out;
    out.portfolio = two_stock_portfolio(opt.t);
    out.value = std::clamp(task.complement ? 1.0 - ra : ra, 0.0, 1.0);
    out.t_lo = opt.t_lo;
    out.t_hi = opt.t_hi;
    out.events = opt.events;
    out.swaps = opt.swaps;
    return out;
}

}  // namespace riskprof
