#include "riskprof/k_stock.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "riskprof/error.hpp"

namespace riskprof {

namespace {

constexpr double kImprovementTol = 1e-12;

void check_inputs(std::span<const MarginalDistribution> dists, const Portfolio& portfolio) {
    if (dists.size() < 2) throw Error(ErrorCode::DimensionMismatch, "need at least two stocks");
    for (const auto& d : dists) {
        if (!(d.grid == dists[0].grid)) throw Error(ErrorCode::GridMismatch, "stocks live on different grids");
        if (d.probs.size() != d.grid.size())
            throw Error(ErrorCode::GridMismatch, "probability vector does not match the grid");
    }
    if (portfolio.size() != static_cast<Eigen::Index>(dists.size()))
        throw Error(ErrorCode::DimensionMismatch, "portfolio and stock count differ");
}

std::vector<std::vector<int>> supports(std::span<const MarginalDistribution> dists) {
    std::vector<std::vector<int>> out;
    out.reserve(dists.size());
    for (const auto& d : dists) {
        std::vector<int> s;
        for (int o = 0; o < d.size(); ++o)
            if (d.probs[o] > 0.0) s.push_back(o);
        out.push_back(std::move(s));
    }
    return out;
}

/// Visits every cell of the product of the support sets, last axis fastest.
void for_each_support_cell(const std::vector<std::vector<int>>& supp,
                           const std::function<void(const std::vector<int>&)>& visit) {
    const std::size_t k = supp.size();
    for (const auto& s : supp)
        if (s.empty()) return;
    std::vector<std::size_t> pos(k, 0);
    std::vector<int> cell(k);
    for (;;) {
        for (std::size_t a = 0; a < k; ++a) cell[a] = supp[a][pos[a]];
        visit(cell);
        std::size_t a = k;
        while (a > 0) {
            --a;
            if (++pos[a] < supp[a].size()) break;
            pos[a] = 0;
            if (a == 0) return;
        }
    }
}

/// Sparse equality row: sum coeff * var = rhs.
struct SparseRow {
    std::vector<std::pair<std::size_t, double>> terms;
    double rhs = 0.0;
};

LpProblem<double> assemble(std::size_t variables, const std::vector<SparseRow>& rows, Eigen::VectorXd objective,
                           bool maximize) {
    LpProblem<double> lp;
    lp.sense = maximize ? LpSense::Maximize : LpSense::Minimize;
    lp.objective = std::move(objective);
    lp.eq_lhs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(variables));
    lp.eq_rhs.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (const auto& [v, a] : rows[r].terms)
            lp.eq_lhs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(v)) += a;
        lp.eq_rhs[static_cast<Eigen::Index>(r)] = rows[r].rhs;
    }
    return lp;
}

// ---------------------------------------------------------------------------
// Pairwise aggregation tree shared by striping and cents.

enum class BinMode { Strips, Cents };

/// A node's distribution is a list of bins; each bin's mass is a constant
/// (leaves) or a sum of LP cell variables (internal nodes).
struct Bin {
    double value = 0.0;     // return of the node's renormalized sub-portfolio
    long long key = 0;      // sum c_i l_i over the node's stocks (cents mode)
    double constant = 0.0;
    std::vector<std::size_t> vars;
};

struct Node {
    double weight = 0.0;
    std::vector<Bin> bins;
};

struct TreeBuilder {
    BinMode mode = BinMode::Strips;
    std::size_t strips = 1;
    int total_units = 1;
    double mu = 1.0;
    std::size_t variables = 0;
    std::vector<SparseRow> rows;
    std::vector<double> root_values;
    std::vector<long long> root_keys;

    void tie_bins(const Bin& bin, std::vector<std::size_t> cells) {
        SparseRow row;
        for (auto v : cells) row.terms.emplace_back(v, 1.0);
        for (auto v : bin.vars) row.terms.emplace_back(v, -1.0);
        row.rhs = bin.constant;
        rows.push_back(std::move(row));
    }

    Node combine(const Node& a, const Node& b, bool root) {
        const double w = a.weight + b.weight;
        const double fa = w > 0.0 ? a.weight / w : 0.5;
        const double fb = w > 0.0 ? b.weight / w : 0.5;
        const std::size_t na = a.bins.size();
        const std::size_t nb = b.bins.size();
        const std::size_t first = variables;
        variables += na * nb;
        auto cell = [&](std::size_t s, std::size_t t) { return first + s * nb + t; };

        for (std::size_t s = 0; s < na; ++s) {
            std::vector<std::size_t> cells(nb);
            for (std::size_t t = 0; t < nb; ++t) cells[t] = cell(s, t);
            tie_bins(a.bins[s], std::move(cells));
        }
        for (std::size_t t = 0; t < nb; ++t) {
            std::vector<std::size_t> cells(na);
            for (std::size_t s = 0; s < na; ++s) cells[s] = cell(s, t);
            tie_bins(b.bins[t], std::move(cells));
        }

        std::vector<double> values(na * nb);
        std::vector<long long> keys(na * nb);
        for (std::size_t s = 0; s < na; ++s)
            for (std::size_t t = 0; t < nb; ++t) {
                values[s * nb + t] = fa * a.bins[s].value + fb * b.bins[t].value;
                keys[s * nb + t] = a.bins[s].key + b.bins[t].key;
            }

        Node out;
        out.weight = w;
        if (root) {
            root_values = std::move(values);
            root_keys = std::move(keys);
            return out;
        }
        out.bins = mode == BinMode::Cents ? bin_by_key(first, values, keys, w)
                                          : bin_by_strip(first, values);
        return out;
    }

    std::vector<Bin> bin_by_key(std::size_t first, const std::vector<double>& values,
                                const std::vector<long long>& keys, double weight) const {
        (void)values;
        std::map<long long, Bin> by_key;
        const double units = std::round(weight * total_units);
        for (std::size_t q = 0; q < keys.size(); ++q) {
            Bin& bin = by_key[keys[q]];
            bin.key = keys[q];
            bin.value = units > 0.0 ? static_cast<double>(keys[q]) * mu / units : 0.0;
            bin.vars.push_back(first + q);
        }
        std::vector<Bin> out;
        out.reserve(by_key.size());
        for (auto& [key, bin] : by_key) out.push_back(std::move(bin));
        return out;
    }

    std::vector<Bin> bin_by_strip(std::size_t first, const std::vector<double>& values) const {
        const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
        const double lo = *lo_it;
        const double hi = *hi_it;
        const std::size_t ell = hi - lo > kBoundaryTol ? strips : 1;
        const double width = (hi - lo) / static_cast<double>(ell);
        std::vector<Bin> strip(ell);
        std::vector<double> vmin(ell, std::numeric_limits<double>::infinity());
        std::vector<double> vmax(ell, -std::numeric_limits<double>::infinity());
        for (std::size_t q = 0; q < values.size(); ++q) {
            std::size_t idx = 0;
            if (ell > 1) {
                // Half-open [lo + s w, lo + (s+1) w), the last strip closed.
                const double pos = std::floor((values[q] - lo) / width);
                idx = std::min(ell - 1, static_cast<std::size_t>(std::max(0.0, pos)));
            }
            strip[idx].vars.push_back(first + q);
            vmin[idx] = std::min(vmin[idx], values[q]);
            vmax[idx] = std::max(vmax[idx], values[q]);
        }
        std::vector<Bin> out;
        for (std::size_t s = 0; s < ell; ++s) {
            if (strip[s].vars.empty()) continue;
            strip[s].value = 0.5 * (vmin[s] + vmax[s]);
            out.push_back(std::move(strip[s]));
        }
        return out;
    }
};

Node leaf_node(const MarginalDistribution& d, double weight, int units) {
    Node node;
    node.weight = weight;
    for (int o = 0; o < d.size(); ++o) {
        if (!(d.probs[o] > 0.0)) continue;
        Bin bin;
        bin.value = d.grid.value(o);
        bin.key = static_cast<long long>(units) * d.grid.level(o);
        bin.constant = d.probs[o];
        node.bins.push_back(std::move(bin));
    }
    return node;
}

Node dummy_node() {
    Node node;
    node.bins.push_back(Bin{0.0, 0, 1.0, {}});
    return node;
}

KStockResult solve_tree(std::span<const MarginalDistribution> dists, const Portfolio& portfolio, double alpha,
                        const Objective& objective, const KStockOptions& options, TreeBuilder builder,
                        const std::vector<int>& units) {
    const bool maximize = objective_maximizes_mass(objective);
    const RegionSpec region = objective_region(objective, alpha, portfolio);

    std::vector<Node> level;
    const std::size_t padded = std::bit_ceil(dists.size());
    for (std::size_t i = 0; i < padded; ++i) {
        if (i < dists.size())
            level.push_back(leaf_node(dists[i], portfolio[static_cast<Eigen::Index>(i)],
                                      units.empty() ? 0 : units[i]));
        else
            level.push_back(dummy_node());
    }
    while (level.size() > 1) {
        const bool root = level.size() == 2;
        std::vector<Node> next;
        for (std::size_t i = 0; i + 1 < level.size(); i += 2) next.push_back(builder.combine(level[i], level[i + 1], root));
        level = std::move(next);
    }

    Eigen::VectorXd cost = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(builder.variables));
    const std::size_t first_root = builder.variables - builder.root_values.size();
    for (std::size_t q = 0; q < builder.root_values.size(); ++q) {
        double v = builder.root_values[q];
        if (builder.mode == BinMode::Cents)
            v = static_cast<double>(builder.root_keys[q]) * builder.mu / builder.total_units;
        if (classify_return(v, alpha, region.sense, region.strict))
            cost[static_cast<Eigen::Index>(first_root + q)] = 1.0;
    }

    const auto lp = assemble(builder.variables, builder.rows, std::move(cost), maximize);
    const auto sol = solve_lp(lp, options.simplex);
    KStockResult out;
    out.value = std::clamp(sol.value, 0.0, 1.0);
    out.variables = builder.variables;
    out.constraints = builder.rows.size();
    out.pivots = sol.pivots;
    return out;
}

}  // namespace

KStockResult lp_worst_case_exact(std::span<const MarginalDistribution> dists, const Portfolio& portfolio,
                                 double alpha, const Objective& objective, const KStockOptions& options) {
    check_inputs(dists, portfolio);
    const bool maximize = objective_maximizes_mass(objective);
    const RegionSpec region = objective_region(objective, alpha, portfolio);
    const std::size_t k = dists.size();
    const int m = dists[0].size();
    if (std::pow(static_cast<double>(m), static_cast<double>(k)) > options.variable_budget) {
        std::ostringstream msg;
        msg << "m^k = " << m << "^" << k << " exceeds the variable budget " << options.variable_budget;
        throw Error(ErrorCode::BudgetExceeded, msg.str());
    }

    const auto supp = supports(dists);
    std::vector<std::vector<int>> cells;
    for_each_support_cell(supp, [&](const std::vector<int>& c) { cells.push_back(c); });

    // Row index of each (axis, offset) marginal constraint.
    std::vector<std::vector<int>> row_of(k, std::vector<int>(static_cast<std::size_t>(m), -1));
    std::vector<SparseRow> rows;
    for (std::size_t a = 0; a < k; ++a)
        for (int o : supp[a]) {
            row_of[a][static_cast<std::size_t>(o)] = static_cast<int>(rows.size());
            rows.push_back(SparseRow{{}, dists[a].probs[o]});
        }

    Eigen::VectorXd cost = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cells.size()));
    std::vector<double> delta(k);
    for (std::size_t v = 0; v < cells.size(); ++v) {
        for (std::size_t a = 0; a < k; ++a) {
            rows[static_cast<std::size_t>(row_of[a][static_cast<std::size_t>(cells[v][a])])].terms.emplace_back(v, 1.0);
            delta[a] = dists[a].grid.value(cells[v][a]);
        }
        if (region_membership(region, delta)) cost[static_cast<Eigen::Index>(v)] = 1.0;
    }

    const auto lp = assemble(cells.size(), rows, std::move(cost), maximize);
    const auto sol = solve_lp(lp, options.simplex);

    KStockResult out;
    out.value = std::clamp(sol.value, 0.0, 1.0);
    out.variables = cells.size();
    out.constraints = rows.size();
    out.pivots = sol.pivots;
    JointTable joint(dists[0].grid, static_cast<int>(k));
    for (std::size_t v = 0; v < cells.size(); ++v)
        joint.entries()[joint.flat_index(cells[v])] = sol.x[static_cast<Eigen::Index>(v)];
    out.joint = std::move(joint);
    return out;
}

std::size_t strip_count(int m, std::size_t k, double epsilon) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw Error(ErrorCode::InvalidTolerance, "epsilon must be positive");
    const double levels = std::log2(static_cast<double>(std::bit_ceil(std::max<std::size_t>(k, 2))));
    return static_cast<std::size_t>(std::max(1.0, std::ceil(static_cast<double>(m) * levels / epsilon - 1e-9)));
}

KStockResult striping_worst_case(std::span<const MarginalDistribution> dists, const Portfolio& portfolio,
                                 double alpha, double epsilon, const Objective& objective,
                                 const KStockOptions& options) {
    check_inputs(dists, portfolio);
    TreeBuilder builder;
    builder.mode = BinMode::Strips;
    builder.strips = strip_count(dists[0].size(), dists.size(), epsilon);
    builder.mu = dists[0].grid.mu;
    return solve_tree(dists, portfolio, alpha, objective, options, std::move(builder), {});
}

std::vector<int> cent_units(const Portfolio& portfolio, int c) {
    if (c < 1) throw Error(ErrorCode::NotOnCentLattice, "unit count must be positive");
    std::vector<int> units;
    long long total = 0;
    for (Eigen::Index i = 0; i < portfolio.size(); ++i) {
        const double scaled = portfolio[i] * c;
        const double r = std::round(scaled);
        if (std::abs(scaled - r) > 1e-9 * std::max(1.0, static_cast<double>(c)) || r < 0.0) {
            std::ostringstream msg;
            msg << "weight " << portfolio[i] << " is not a multiple of 1/" << c;
            throw Error(ErrorCode::NotOnCentLattice, msg.str());
        }
        units.push_back(static_cast<int>(r));
        total += static_cast<long long>(r);
    }
    if (total != c) throw Error(ErrorCode::NotOnCentLattice, "unit counts do not add up to c");
    return units;
}

KStockResult cents_worst_case_exact(std::span<const MarginalDistribution> dists, const Portfolio& portfolio,
                                    double alpha, int c, const Objective& objective,
                                    const KStockOptions& options) {
    check_inputs(dists, portfolio);
    const auto units = cent_units(portfolio, c);
    // Weights recomputed from the units so renormalized node returns stay on the lattice.
    Eigen::VectorXd w(portfolio.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = static_cast<double>(units[static_cast<std::size_t>(i)]) / c;
    TreeBuilder builder;
    builder.mode = BinMode::Cents;
    builder.total_units = c;
    builder.mu = dists[0].grid.mu;
    return solve_tree(dists, Portfolio{w}, alpha, objective, options, std::move(builder), units);
}

// ---------------------------------------------------------------------------
// Portfolio search.

namespace {

double binomial(double n, double r) {
    if (r < 0 || r > n) return 0.0;
    double out = 1.0;
    for (double i = 1; i <= r; ++i) out = out * (n - r + i) / i;
    return out;
}

bool better(double candidate, double incumbent, bool maximize) {
    return maximize ? candidate > incumbent + kImprovementTol : candidate < incumbent - kImprovementTol;
}

std::vector<long long> rounded_key(const Eigen::VectorXd& v, double scale) {
    std::vector<long long> key(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) key[static_cast<std::size_t>(i)] = std::llround(v[i] * scale);
    return key;
}

/// Visits every r-subset of {0..n-1} in lexicographic order.
void for_each_subset(std::size_t n, std::size_t r, const std::function<void(const std::vector<std::size_t>&)>& visit) {
    if (r > n) return;
    std::vector<std::size_t> idx(r);
    std::iota(idx.begin(), idx.end(), 0);
    for (;;) {
        visit(idx);
        std::size_t i = r;
        while (i > 0 && idx[i - 1] == n - r + i - 1) --i;
        if (i == 0) return;
        ++idx[i - 1];
        for (std::size_t j = i; j < r; ++j) idx[j] = idx[j - 1] + 1;
    }
}

struct MaskHash {
    std::size_t operator()(const std::vector<char>& v) const {
        std::size_t h = 1469598103934665603ULL;
        for (char c : v) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
        return h;
    }
};

SearchResult search_cent_grid(std::span<const MarginalDistribution> dists, double alpha, const Objective& objective,
                              const SearchOptions& options) {
    const std::size_t k = dists.size();
    const int c = options.cents;
    if (c < 1) throw Error(ErrorCode::NotOnCentLattice, "unit count must be positive");
    if (binomial(c + static_cast<double>(k) - 1, static_cast<double>(k) - 1) > options.candidate_budget)
        throw Error(ErrorCode::BudgetExceeded, "cent grid exceeds the candidate budget");
    const bool maximize = maximizes(objective);

    SearchResult best;
    bool have = false;
    std::vector<int> units(k, 0);
    // Compositions of c into k parts, first coordinate largest first.
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
        if (i + 1 == k) {
            units[i] = left;
            Eigen::VectorXd w(static_cast<Eigen::Index>(k));
            for (std::size_t a = 0; a < k; ++a) w[static_cast<Eigen::Index>(a)] = static_cast<double>(units[a]) / c;
            const Portfolio p{w};
            const double v = cents_worst_case_exact(dists, p, alpha, c, objective, options.lp).value;
            ++best.candidates;
            ++best.evaluations;
            if (!have || better(v, best.value, maximize)) {
                best.portfolio = p;
                best.value = v;
                have = true;
            }
            return;
        }
        for (int u = left; u >= 0; --u) {
            units[i] = u;
            rec(i + 1, left - u);
        }
    };
    rec(0, c);
    return best;
}

SearchResult search_hyperplanes(std::span<const MarginalDistribution> dists, double alpha,
                                const Objective& objective, const SearchOptions& options) {
    const std::size_t k = dists.size();
    const auto kk = static_cast<Eigen::Index>(k);
    const bool maximize = maximizes(objective);
    const auto supp = supports(dists);

    std::vector<std::vector<double>> deltas;
    for_each_support_cell(supp, [&](const std::vector<int>& cell) {
        std::vector<double> d(k);
        for (std::size_t a = 0; a < k; ++a) d[a] = dists[a].grid.value(cell[a]);
        deltas.push_back(std::move(d));
    });

    // Distinct plane normals through (alpha, ..., alpha), then the facets.
    std::vector<Eigen::VectorXd> normals;
    std::set<std::vector<long long>> seen;
    for (const auto& d : deltas) {
        Eigen::VectorXd n(kk);
        for (Eigen::Index a = 0; a < kk; ++a) n[a] = d[static_cast<std::size_t>(a)] - alpha;
        const double scale = n.cwiseAbs().maxCoeff();
        if (scale <= kBoundaryTol) continue;
        n /= scale;
        Eigen::Index lead = 0;
        while (std::abs(n[lead]) <= 1e-12) ++lead;
        if (n[lead] < 0) n = -n;
        if (seen.insert(rounded_key(n, 1e9)).second) normals.push_back(n);
    }
    for (Eigen::Index a = 0; a < kk; ++a) normals.push_back(Eigen::VectorXd::Unit(kk, a));

    if (binomial(static_cast<double>(normals.size()), static_cast<double>(k) - 1) > options.candidate_budget)
        throw Error(ErrorCode::BudgetExceeded, "hyperplane arrangement exceeds the candidate budget");

    // Arrangement vertices inside the simplex.
    std::vector<Eigen::VectorXd> vertices;
    std::set<std::vector<long long>> vseen;
    Eigen::MatrixXd sys(kk, kk);
    Eigen::VectorXd rhs = Eigen::VectorXd::Unit(kk, kk - 1);
    for_each_subset(normals.size(), k - 1, [&](const std::vector<std::size_t>& pick) {
        for (std::size_t r = 0; r + 1 < k; ++r) sys.row(static_cast<Eigen::Index>(r)) = normals[pick[r]].transpose();
        sys.row(kk - 1).setOnes();
        Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
        if (lu.rank() < kk) return;
        Eigen::VectorXd x = lu.solve(rhs);
        if (x.minCoeff() < -1e-12) return;
        x = x.cwiseMax(0.0);
        x /= x.sum();
        if (vseen.insert(rounded_key(x, 1e11)).second) vertices.push_back(x);
    });

    double total = 0.0;
    for (std::size_t r = 1; r <= k; ++r) total += binomial(static_cast<double>(vertices.size()), static_cast<double>(r));
    if (total > options.candidate_budget)
        throw Error(ErrorCode::BudgetExceeded, "candidate portfolios exceed the candidate budget");

    SearchResult best;
    bool have = false;
    std::unordered_set<std::vector<char>, MaskHash> regions;
    std::vector<char> mask(deltas.size());
    for (std::size_t r = 1; r <= k && r <= vertices.size(); ++r) {
        for_each_subset(vertices.size(), r, [&](const std::vector<std::size_t>& pick) {
            Eigen::VectorXd x = Eigen::VectorXd::Zero(kk);
            for (auto v : pick) x += vertices[v];
            x /= static_cast<double>(r);
            const Portfolio p = normalized_portfolio(x);
            ++best.candidates;
            const RegionSpec region = objective_region(objective, alpha, p);
            for (std::size_t q = 0; q < deltas.size(); ++q) mask[q] = region_membership(region, deltas[q]) ? 1 : 0;
            if (!regions.insert(mask).second) return;
            const double v = lp_worst_case_exact(dists, p, alpha, objective, options.lp).value;
            ++best.evaluations;
            if (!have || better(v, best.value, maximize)) {
                best.portfolio = p;
                best.value = v;
                have = true;
            }
        });
    }
    return best;
}

}  // namespace

SearchResult optimal_portfolio_fixed_k(std::span<const MarginalDistribution> dists, double alpha,
                                       const Objective& objective, const SearchOptions& options) {
    Portfolio probe{Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dists.size()), 1.0 / std::max<std::size_t>(dists.size(), 1))};
    check_inputs(dists, probe);
    (void)objective_maximizes_mass(objective);  // rejects average objectives
    return options.mode == SearchMode::CentGrid ? search_cent_grid(dists, alpha, objective, options)
                                                : search_hyperplanes(dists, alpha, objective, options);
}

}  // namespace riskprof
