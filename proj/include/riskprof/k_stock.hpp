#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "riskprof/return_model.hpp"
#include "riskprof/simplex.hpp"

namespace riskprof {

struct KStockOptions {
    /// Upper bound on m^k for the exact LP.
    double variable_budget = 1e6;
    SimplexOptions simplex;
};

struct KStockResult {
    double value = 0.0;
    std::size_t variables = 0;
    std::size_t constraints = 0;
    std::size_t pivots = 0;
    /// Optimal joint, filled by the exact LP only.
    std::optional<JointTable> joint;
};

/// Optimal region mass over all joints with the given marginals: the max for
/// RA_w-type objectives, the min for RA_b-type ones (and the matching
/// aggressive variants on the upper region). One variable per support cell of
/// Delta^k, one equality per (stock, support level).
KStockResult lp_worst_case_exact(std::span<const MarginalDistribution> dists, const Portfolio& portfolio,
                                 double alpha, const Objective& objective = {}, const KStockOptions& options = {});

/// ceil((1/eps) * m * log2 k), with log2 k taken on the padded stock count.
std::size_t strip_count(int m, std::size_t k, double epsilon);

/// Pairwise aggregation with ell equal-width strips per internal node. Exact
/// for k = 2, an approximation otherwise.
KStockResult striping_worst_case(std::span<const MarginalDistribution> dists, const Portfolio& portfolio,
                                 double alpha, double epsilon, const Objective& objective = {},
                                 const KStockOptions& options = {});

/// Integer unit counts c_i with x_i = c_i / c; throws NotOnCentLattice.
std::vector<int> cent_units(const Portfolio& portfolio, int c);

/// Pairwise aggregation keyed by the integer partial sums sum c_i l_i; exact
/// for portfolios on the 1/c lattice.
KStockResult cents_worst_case_exact(std::span<const MarginalDistribution> dists, const Portfolio& portfolio,
                                    double alpha, int c, const Objective& objective = {},
                                    const KStockOptions& options = {});

enum class SearchMode { CentGrid, CandidateHyperplanes };

struct SearchOptions {
    SearchMode mode = SearchMode::CentGrid;
    int cents = 100;
    /// Cap on candidate portfolios (and on hyperplane subsets examined).
    double candidate_budget = 2e6;
    KStockOptions lp;
};

struct SearchResult {
    Portfolio portfolio;
    double value = 0.0;
    std::size_t candidates = 0;
    std::size_t evaluations = 0;  // LP solves
};

/// Best portfolio for a non-average objective. CentGrid scans every lattice
/// portfolio with the cents LP. CandidateHyperplanes collects the vertices of
/// the arrangement cut into the simplex by the planes x . (delta - alpha 1) = 0
/// and the facets x_i = 0, takes the centroid of every set of at most k
/// vertices (one point in the relative interior of every face) and solves one
/// exact LP per distinct induced region. Ties keep the first candidate found.
SearchResult optimal_portfolio_fixed_k(std::span<const MarginalDistribution> dists, double alpha,
                                       const Objective& objective, const SearchOptions& options = {});

}  // namespace riskprof
