#pragma once

#include <cstddef>
#include <vector>

#include "riskprof/return_model.hpp"
#include "riskprof/simplex.hpp"

namespace riskprof {

/// Reference implementations for tests: slow and simple on purpose.

struct FlowEdge {
    int from;
    int to;
    long double capacity;
};

/// Directed capacitated graph with a distinguished source and sink.
class ExplicitFlowNetwork {
public:
    ExplicitFlowNetwork(int nodes, int source, int sink);

    void add_edge(int from, int to, long double capacity);

    int nodes() const { return nodes_; }
    int source() const { return source_; }
    int sink() const { return sink_; }
    const std::vector<FlowEdge>& edges() const { return edges_; }

private:
    int nodes_;
    int source_;
    int sink_;
    std::vector<FlowEdge> edges_;
};

/// s = 0, v_i = 1 + i, w_j = 1 + m + j, t = 2m + 1. s -> v_i carries S1(i),
/// w_j -> t carries S2(j), and v_i -> w_j is uncapacitated whenever the pair
/// lies in the region.
ExplicitFlowNetwork region_network(const MarginalDistribution& s1, const MarginalDistribution& s2,
                                   const RegionSpec& region);

/// Edmonds-Karp in long double.
double maxflow_reference(const ExplicitFlowNetwork& network);

/// Any non-average two-stock objective evaluated through maxflow_reference.
double maxflow_objective(const MarginalDistribution& s1, const MarginalDistribution& s2, const Portfolio& portfolio,
                         double alpha, const Objective& objective);

struct PortfolioValue {
    Portfolio portfolio;
    double value = 0.0;
};

/// Evaluates x1 = 0 and x1 = 1, then every midpoint between consecutive
/// breakpoints and every breakpoint in increasing x1; the first best
/// candidate wins.
/// Breakpoints come straight from the pairwise line equations.
PortfolioValue exhaustive_two_stock_optimum(const MarginalDistribution& s1, const MarginalDistribution& s2,
                                            double alpha, const Objective& objective, bool use_maxflow = false);

struct SegmentAverage {
    double value = 0.0;
    double lo = 0.0;  // range of the (0, 0) entry
    double hi = 0.0;
    bool degenerate = false;  // the feasible set is a single table
};

/// Exact mean of the region mass over the uniform distribution on the 2x2
/// transportation polytope: the (0,0) entry a ranges over an interval and the
/// mass is affine in a, so the mean is the value at the midpoint.
SegmentAverage analytic_2x2_average(const MarginalDistribution& s1, const MarginalDistribution& s2,
                                    const RegionSpec& region);

/// Optimum over all basic feasible solutions; at most 12 original variables.
LpSolution<double> lp_vertex_enumeration(const LpProblem<double>& problem);

}  // namespace riskprof
