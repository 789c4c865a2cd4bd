#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "riskprof/error.hpp"

namespace riskprof {

/// Absolute tolerance for "return equals alpha" decisions.
inline constexpr double kBoundaryTol = 1e-12;
/// Tolerance for probability vectors and table marginals.
inline constexpr double kProbTol = 1e-9;
/// Tolerance for portfolio weights summing to one.
inline constexpr double kWeightTol = 1e-12;

/// The return lattice {l * mu : l = m1..m2}, in percent.
///
/// Offsets 0..size()-1 index the lattice from the lowest return; levels are
/// the signed multipliers l. Nothing here assumes nonnegative returns.
struct ReturnGrid {
    double mu = 1.0;
    int m1 = 0;
    int m2 = 1;

    ReturnGrid() = default;
    ReturnGrid(double mu, int m1, int m2);

    int size() const { return m2 - m1 + 1; }
    int level(int offset) const { return m1 + offset; }
    double value(int offset) const { return static_cast<double>(m1 + offset) * mu; }
    double lowest() const { return m1 * mu; }
    double highest() const { return m2 * mu; }

    friend bool operator==(const ReturnGrid&, const ReturnGrid&) = default;
};

/// One stock's return distribution over a grid.
struct MarginalDistribution {
    ReturnGrid grid;
    Eigen::VectorXd probs;  // probs[offset]

    int size() const { return grid.size(); }
    double at_level(int level) const { return probs[level - grid.m1]; }
};

struct ValidationOptions {
    /// Nonzero probabilities must be at least this large. Zero disables the check.
    double floor = 0.0;
};

/// Throws NegativeProbability, SumNotOne, BelowFloor or GridMismatch.
MarginalDistribution validate_marginal(const MarginalDistribution& dist,
                                       const ValidationOptions& options = {});

MarginalDistribution make_marginal(const ReturnGrid& grid, Eigen::VectorXd probs,
                                   const ValidationOptions& options = {});

struct Portfolio {
    Eigen::VectorXd weights;

    Eigen::Index size() const { return weights.size(); }
    double operator[](Eigen::Index i) const { return weights[i]; }
};

/// Validates nonnegativity and unit sum (within kWeightTol).
Portfolio make_portfolio(Eigen::VectorXd weights);
/// Scales nonnegative raw weights to sum to one.
Portfolio normalized_portfolio(const Eigen::VectorXd& raw);
Portfolio two_stock_portfolio(double x1);

enum class Sense { Lower, Upper };

/// Selects L (Lower), L** (Lower strict), U (Upper) or U** (Upper strict).
struct RegionSpec {
    double alpha = 0.0;
    Portfolio portfolio;
    Sense sense = Sense::Lower;
    bool strict = false;
};

/// Classifies a combined return against alpha. Returns within kBoundaryTol of
/// alpha count as inside non-strict regions and outside strict ones.
inline bool classify_return(double combined, double alpha, Sense sense, bool strict) {
    const double diff = sense == Sense::Lower ? combined - alpha : alpha - combined;
    return strict ? diff < -kBoundaryTol : diff <= kBoundaryTol;
}

/// `delta` holds one return (in percent) per stock.
bool region_membership(const RegionSpec& spec, std::span<const double> delta);

/// The complementary region: L <-> U**, L** <-> U.
RegionSpec complement_region(const RegionSpec& spec);

/// A k-dimensional table over Delta^k, stored flat with axis 0 most significant.
class JointTable {
public:
    JointTable(ReturnGrid grid, int k);
    JointTable(ReturnGrid grid, int k, Eigen::VectorXd entries);

    const ReturnGrid& grid() const { return grid_; }
    int dimension() const { return k_; }
    Eigen::Index cell_count() const { return entries_.size(); }

    const Eigen::VectorXd& entries() const { return entries_; }
    Eigen::VectorXd& entries() { return entries_; }

    Eigen::Index flat_index(std::span<const int> offsets) const;
    std::vector<int> offsets(Eigen::Index flat) const;

    double operator()(int i, int j) const { return entries_[static_cast<Eigen::Index>(i) * grid_.size() + j]; }
    double& operator()(int i, int j) { return entries_[static_cast<Eigen::Index>(i) * grid_.size() + j]; }

    /// Copy of a two-dimensional table as a matrix (rows = stock 1).
    Eigen::MatrixXd matrix() const;

    /// Sums over all cells whose coordinate on `axis` equals `offset`.
    Eigen::VectorXd axis_marginal(int axis) const;

    /// Nonnegativity, unit mass and slice sums against `marginals`; throws
    /// InvariantViolation with the first offending check.
    void check(std::span<const MarginalDistribution> marginals, double tol = kProbTol) const;

private:
    ReturnGrid grid_;
    int k_;
    Eigen::VectorXd entries_;
};

/// The product table prod_i S_i(delta_i).
JointTable independence_table(std::span<const MarginalDistribution> dists);

/// Mass of the table inside the region.
double region_mass(const JointTable& table, const RegionSpec& spec);

/// Region indicator over all cells of Delta^k, in JointTable flat order.
std::vector<char> region_mask(const ReturnGrid& grid, int k, const RegionSpec& spec);

enum class Investor { RiskAverse, Aggressive };
enum class Case { Best, Worst, Average };

struct Objective {
    Investor investor = Investor::RiskAverse;
    Case kase = Case::Worst;
    bool strict = false;

    friend bool operator==(const Objective&, const Objective&) = default;
};

/// Parses "ra_w", "ag_b**", "ra_a_strict", ...
Objective parse_objective(std::string_view name);
std::string to_string(const Objective& objective);

/// All twelve objectives, risk-averse first.
std::vector<Objective> all_objectives();

/// Every objective is an optimization over a risk-averse quantity on a lower
/// region, optionally complemented:
///
///   per portfolio, objective(x) = complement ? 1 - ra(x) : ra(x)
///   ra(x) = max / min / mean over joints of the lower-region mass
///
/// where the lower region is L** when `lower_strict`, else L. Risk-averse
/// investors minimize objective(x); aggressive ones maximize it, which is the
/// same as minimizing ra(x).
struct CanonicalTask {
    Case kase = Case::Worst;
    bool lower_strict = false;
    bool complement = false;

    friend bool operator==(const CanonicalTask&, const CanonicalTask&) = default;
};

CanonicalTask reduce_objective(const Objective& objective);

/// True when the investor maximizes the objective.
inline bool maximizes(const Objective& objective) {
    return objective.investor == Investor::Aggressive;
}

/// The region whose mass the objective measures directly: L/L** for
/// risk-averse, U/U** for aggressive.
RegionSpec objective_region(const Objective& objective, double alpha, const Portfolio& portfolio);

/// Whether the objective takes the max (true) or min (false) of the region
/// mass over joints. Average objectives throw AverageCaseNotSupported.
bool objective_maximizes_mass(const Objective& objective);

}  // namespace riskprof
