#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "riskprof/return_model.hpp"

namespace riskprof {

/// Residual capacities below this are treated as exhausted.
inline constexpr double kResidualZero = 1e-15;

template <class Scalar>
struct StaircaseCell {
    int row;
    int col;
    Scalar mass;
};

/// Output of the staircase greedy flow, in canonical (lower staircase)
/// orientation.
template <class Scalar>
struct StaircaseFlow {
    Scalar value{0};
    std::size_t iterations = 0;
    std::size_t operations = 0;
    std::vector<StaircaseCell<Scalar>> pushes;  // filled when recording
    // Min-cut certificate: source edges of rows [0, cut_row) and sink edges
    // of columns [0, cut_col). Filled when recording.
    int cut_row = 0;
    int cut_col = 0;
    Scalar cut_capacity{0};
};

namespace detail {

template <class Scalar>
struct NeumaierSum {
    Scalar sum{0};
    Scalar carry{0};

    void add(Scalar v) {
        const Scalar t = sum + v;
        if (std::abs(sum) >= std::abs(v)) carry += (sum - t) + v;
        else carry += (v - t) + sum;
        sum = t;
    }
    Scalar value() const { return sum + carry; }
};

template <class Scalar>
Scalar clean_residual(Scalar r) {
    return r < Scalar(kResidualZero) ? Scalar(0) : r;
}

}  // namespace detail

/// Maximum flow on the bipartite network source -> row i (capacity rows[i])
/// -> column j (unit capacity iff in_region(i, j)) -> sink (capacity cols[j]).
///
/// `in_region` must describe a lower staircase: if (i, j) is inside then so is
/// every (i', j') with i' <= i and j' <= j. The scan starts at the highest row
/// and the lowest column; each iteration either saturates a column (j + 1) or
/// retires a row (i - 1), so the loop runs at most rows + cols - 1 times and
/// never materializes the edge set.
template <class Scalar, class InRegion>
StaircaseFlow<Scalar> greedy_staircase_flow(std::span<const Scalar> rows, std::span<const Scalar> cols,
                                            InRegion&& in_region, bool record = false) {
    StaircaseFlow<Scalar> out;
    const int nr = static_cast<int>(rows.size());
    const int nc = static_cast<int>(cols.size());
    if (nr == 0 || nc == 0) return out;

    detail::NeumaierSum<Scalar> flow;
    int i = nr - 1;
    int j = 0;
    Scalar cv = rows[static_cast<std::size_t>(i)];
    Scalar cw = cols[0];
    for (;;) {
        ++out.iterations;
        const bool edge = in_region(i, j);
        ++out.operations;
        if (edge && cw <= cv) {
            flow.add(cw);
            cv = detail::clean_residual<Scalar>(cv - cw);
            out.operations += 3;
            if (record && cw > Scalar(0)) out.pushes.push_back({i, j, cw});
            if (++j >= nc) break;
            cw = cols[static_cast<std::size_t>(j)];
        } else {
            if (edge) {
                flow.add(cv);
                cw = detail::clean_residual<Scalar>(cw - cv);
                out.operations += 3;
                if (record && cv > Scalar(0)) out.pushes.push_back({i, j, cv});
            }
            ++out.operations;
            if (--i < 0) break;
            cv = rows[static_cast<std::size_t>(i)];
        }
    }
    out.value = flow.value();

    if (record) {
        // Cuts of a staircase network: rows [0, k) leave the source side and the
        // columns reachable from row k, which are [0, t_k), are cut. t_k shrinks
        // as k grows, so one pointer walk covers every k.
        std::vector<Scalar> col_prefix(static_cast<std::size_t>(nc) + 1, Scalar(0));
        for (int c = 0; c < nc; ++c)
            col_prefix[static_cast<std::size_t>(c) + 1] = col_prefix[static_cast<std::size_t>(c)] + cols[static_cast<std::size_t>(c)];
        Scalar row_prefix(0);
        int t = nc;
        bool first = true;
        for (int k = 0; k <= nr; ++k) {
            if (k == nr) t = 0;
            else
                while (t > 0 && !in_region(k, t - 1)) --t;
            const Scalar cap = row_prefix + col_prefix[static_cast<std::size_t>(t)];
            if (first || cap < out.cut_capacity) {
                out.cut_row = k;
                out.cut_col = t;
                out.cut_capacity = cap;
                first = false;
            }
            if (k < nr) row_prefix += rows[static_cast<std::size_t>(k)];
        }
    }
    return out;
}

/// A two-stock worst-case flow instance.
struct FlowProblem {
    const MarginalDistribution& s1;
    const MarginalDistribution& s2;
    RegionSpec spec;
};

/// Mass placed on table cell (i, j), as grid offsets (row = stock 1).
struct FlowCell {
    int i;
    int j;
    double mass;
};

struct FlowOptions {
    bool witness = false;
};

struct FlowResult {
    double value = 0.0;
    std::vector<FlowCell> witness;  // only with FlowOptions::witness
    std::size_t iterations = 0;
    std::size_t operations = 0;
    double cut_capacity = 0.0;  // only with FlowOptions::witness
};

/// Maximum mass any joint distribution of s1, s2 can place in the region.
///
/// Lower regions scan rows from the top return down and columns upward; upper
/// regions run the same scan on the reversed grids. Throws DimensionMismatch
/// unless the portfolio has two weights and the marginals share a grid.
FlowResult greedy_flow(const FlowProblem& problem, const FlowOptions& options = {});

/// Objective value of a fixed two-stock portfolio for any non-average
/// objective, routed through reduce_objective.
double worst_case_two_stock(const MarginalDistribution& s1, const MarginalDistribution& s2,
                            const Portfolio& portfolio, double alpha, const Objective& objective);

/// The witness as a full table. Partial when the flow is below one.
JointTable witness_table(const ReturnGrid& grid, std::span<const FlowCell> witness);

}  // namespace riskprof
