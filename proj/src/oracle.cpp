#include "riskprof/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>

#include "riskprof/error.hpp"
#include "riskprof/greedy_flow.hpp"

namespace riskprof {

ExplicitFlowNetwork::ExplicitFlowNetwork(int nodes, int source, int sink)
    : nodes_(nodes), source_(source), sink_(sink) {
    if (nodes < 2 || source < 0 || sink < 0 || source >= nodes || sink >= nodes || source == sink)
        throw Error(ErrorCode::DimensionMismatch, "bad flow network endpoints");
}

void ExplicitFlowNetwork::add_edge(int from, int to, long double capacity) {
    if (from < 0 || to < 0 || from >= nodes_ || to >= nodes_)
        throw Error(ErrorCode::DimensionMismatch, "edge endpoint out of range");
    edges_.push_back({from, to, std::max(capacity, 0.0L)});
}

ExplicitFlowNetwork region_network(const MarginalDistribution& s1, const MarginalDistribution& s2,
                                   const RegionSpec& region) {
    if (!(s1.grid == s2.grid)) throw Error(ErrorCode::GridMismatch, "marginals live on different grids");
    const int m = s1.size();
    ExplicitFlowNetwork net(2 * m + 2, 0, 2 * m + 1);
    for (int i = 0; i < m; ++i) net.add_edge(0, 1 + i, static_cast<long double>(s1.probs[i]));
    for (int j = 0; j < m; ++j) net.add_edge(1 + m + j, 2 * m + 1, static_cast<long double>(s2.probs[j]));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            const double delta[2] = {s1.grid.value(i), s2.grid.value(j)};
            if (region_membership(region, delta)) net.add_edge(1 + i, 1 + m + j, 4.0L);
        }
    return net;
}

double maxflow_reference(const ExplicitFlowNetwork& network) {
    struct Arc {
        int to;
        long double residual;
        std::size_t reverse;
    };
    const auto n = static_cast<std::size_t>(network.nodes());
    std::vector<std::vector<Arc>> adj(n);
    for (const auto& e : network.edges()) {
        const auto f = static_cast<std::size_t>(e.from);
        const auto t = static_cast<std::size_t>(e.to);
        adj[f].push_back({e.to, e.capacity, adj[t].size() + (f == t ? 1 : 0)});
        adj[t].push_back({e.from, 0.0L, adj[f].size() - 1});
    }

    constexpr long double kEps = 1e-30L;
    const auto s = static_cast<std::size_t>(network.source());
    const auto t = static_cast<std::size_t>(network.sink());
    long double total = 0.0L;
    for (;;) {
        // Shortest augmenting path by BFS.
        std::vector<std::pair<std::size_t, std::size_t>> parent(n, {n, 0});
        parent[s] = {s, 0};
        std::deque<std::size_t> queue{s};
        while (!queue.empty() && parent[t].first == n) {
            const std::size_t u = queue.front();
            queue.pop_front();
            for (std::size_t a = 0; a < adj[u].size(); ++a) {
                const auto v = static_cast<std::size_t>(adj[u][a].to);
                if (parent[v].first == n && adj[u][a].residual > kEps) {
                    parent[v] = {u, a};
                    queue.push_back(v);
                }
            }
        }
        if (parent[t].first == n) break;
        long double push = std::numeric_limits<long double>::infinity();
        for (std::size_t v = t; v != s; v = parent[v].first)
            push = std::min(push, adj[parent[v].first][parent[v].second].residual);
        for (std::size_t v = t; v != s; v = parent[v].first) {
            Arc& arc = adj[parent[v].first][parent[v].second];
            arc.residual -= push;
            adj[v][arc.reverse].residual += push;
        }
        total += push;
    }
    return static_cast<double>(total);
}

double maxflow_objective(const MarginalDistribution& s1, const MarginalDistribution& s2, const Portfolio& portfolio,
                         double alpha, const Objective& objective) {
    const RegionSpec region = objective_region(objective, alpha, portfolio);
    const double v = objective_maximizes_mass(objective)
                         ? maxflow_reference(region_network(s1, s2, region))
                         : 1.0 - maxflow_reference(region_network(s1, s2, complement_region(region)));
    return std::clamp(v, 0.0, 1.0);
}

PortfolioValue exhaustive_two_stock_optimum(const MarginalDistribution& s1, const MarginalDistribution& s2,
                                            double alpha, const Objective& objective, bool use_maxflow) {
    const int m = s1.size();
    std::vector<double> breaks;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            const double a = s1.grid.value(i);
            const double b = s2.grid.value(j);
            if (a == b) continue;
            const double t = (alpha - b) / (a - b);
            if (t > 0.0 && t < 1.0) breaks.push_back(t);
        }
    std::sort(breaks.begin(), breaks.end());
    std::vector<double> points;
    for (double t : breaks)
        if (points.empty() || t - points.back() > 1e-12) points.push_back(t);

    std::vector<double> candidates{0.0, 1.0};
    double prev = 0.0;
    for (double t : points) {
        candidates.push_back(0.5 * (prev + t));
        candidates.push_back(t);
        prev = t;
    }
    candidates.push_back(0.5 * (prev + 1.0));

    const bool maximize = maximizes(objective);
    PortfolioValue best;
    bool have = false;
    for (double x1 : candidates) {
        const Portfolio p = two_stock_portfolio(x1);
        const double v = use_maxflow ? maxflow_objective(s1, s2, p, alpha, objective)
                                     : worst_case_two_stock(s1, s2, p, alpha, objective);
        const bool improves = maximize ? v > best.value + 1e-12 : v < best.value - 1e-12;
        if (!have || improves) {
            best = {p, v};
            have = true;
        }
    }
    return best;
}

SegmentAverage analytic_2x2_average(const MarginalDistribution& s1, const MarginalDistribution& s2,
                                    const RegionSpec& region) {
    if (s1.size() != 2 || s2.size() != 2 || !(s1.grid == s2.grid))
        throw Error(ErrorCode::DimensionMismatch, "the closed form needs two stocks on a two-level grid");
    const double r0 = s1.probs[0], r1 = s1.probs[1];
    const double c0 = s2.probs[0];
    SegmentAverage out;
    out.lo = std::max(0.0, c0 - r1);
    out.hi = std::min(r0, c0);
    out.degenerate = out.hi - out.lo <= 1e-15;
    const double a = 0.5 * (out.lo + out.hi);
    const double cells[2][2] = {{a, r0 - a}, {c0 - a, r1 - c0 + a}};
    double mass = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const double delta[2] = {s1.grid.value(i), s2.grid.value(j)};
            if (region_membership(region, delta)) mass += cells[i][j];
        }
    out.value = std::clamp(mass, 0.0, 1.0);
    return out;
}

LpSolution<double> lp_vertex_enumeration(const LpProblem<double>& problem) {
    const Eigen::Index n = problem.variables();
    const Eigen::Index p = problem.eq_lhs.rows();
    const Eigen::Index q = problem.le_lhs.rows();
    if (n > 12) throw Error(ErrorCode::BudgetExceeded, "vertex enumeration is limited to 12 variables");

    // Standard form [A_eq 0; A_le I] z = b over originals plus slacks.
    const Eigen::Index width = n + q;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p + q, width);
    Eigen::VectorXd b(p + q);
    if (p > 0) {
        a.topLeftCorner(p, n) = problem.eq_lhs;
        b.head(p) = problem.eq_rhs;
    }
    if (q > 0) {
        a.bottomLeftCorner(q, n) = problem.le_lhs;
        a.bottomRightCorner(q, q).setIdentity();
        b.tail(q) = problem.le_rhs;
    }
    Eigen::VectorXd c = Eigen::VectorXd::Zero(width);
    c.head(n) = problem.objective;
    const bool maximize = problem.sense == LpSense::Maximize;

    Eigen::Index rank = 0;
    if (a.rows() > 0) rank = Eigen::FullPivLU<Eigen::MatrixXd>(a).rank();

    LpSolution<double> best;
    bool have = false;
    std::vector<Eigen::Index> pick(static_cast<std::size_t>(rank));
    std::iota(pick.begin(), pick.end(), Eigen::Index{0});
    const auto r = static_cast<std::size_t>(rank);
    for (;;) {
        Eigen::VectorXd z = Eigen::VectorXd::Zero(width);
        bool ok = true;
        if (r > 0) {
            Eigen::MatrixXd basis(a.rows(), rank);
            for (std::size_t k = 0; k < r; ++k) basis.col(static_cast<Eigen::Index>(k)) = a.col(pick[k]);
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
            if (qr.rank() < rank) ok = false;
            else {
                const Eigen::VectorXd zb = qr.solve(b);
                if ((basis * zb - b).cwiseAbs().maxCoeff() > 1e-9 || zb.minCoeff() < -1e-9) ok = false;
                else
                    for (std::size_t k = 0; k < r; ++k) z[pick[k]] = std::max(0.0, zb[static_cast<Eigen::Index>(k)]);
            }
        } else if (b.size() > 0 && b.cwiseAbs().maxCoeff() > 1e-9) {
            ok = false;
        }
        if (ok) {
            const double v = c.dot(z);
            if (!have || (maximize ? v > best.value : v < best.value)) {
                best.value = v;
                best.x = z.head(n);
                have = true;
            }
        }
        // Next rank-subset of the columns.
        std::size_t i = r;
        while (i > 0 && pick[i - 1] == width - static_cast<Eigen::Index>(r - i) - 1) --i;
        if (i == 0) break;
        ++pick[i - 1];
        for (std::size_t j = i; j < r; ++j) pick[j] = pick[j - 1] + 1;
    }
    if (!have) throw Error(ErrorCode::Infeasible, "no basic feasible solution");
    return best;
}

}  // namespace riskprof
