#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "riskprof/return_model.hpp"

namespace riskprof {

/// P(r, c): nonnegative matrices with row sums r and column sums c.
///
/// Zero rows and columns are eliminated up front; the walk runs on the
/// reduced (strictly positive) polytope and expand() restores full shape.
class TransportationPolytope {
public:
    TransportationPolytope(Eigen::VectorXd r, Eigen::VectorXd c);
    static TransportationPolytope from_marginals(const MarginalDistribution& s1, const MarginalDistribution& s2);

    const Eigen::VectorXd& row_sums() const { return r_; }
    const Eigen::VectorXd& col_sums() const { return c_; }
    Eigen::Index reduced_rows() const { return static_cast<Eigen::Index>(rows_.size()); }
    Eigen::Index reduced_cols() const { return static_cast<Eigen::Index>(cols_.size()); }
    /// (rows - 1)(cols - 1) of the reduced polytope.
    Eigen::Index dimension() const { return (reduced_rows() - 1) * (reduced_cols() - 1); }
    /// Smallest positive marginal entry.
    double ball_radius_hint() const;

    Eigen::VectorXd reduced_row_sums() const;
    Eigen::VectorXd reduced_col_sums() const;
    Eigen::MatrixXd reduce(const Eigen::MatrixXd& full) const;
    Eigen::MatrixXd expand(const Eigen::MatrixXd& reduced) const;

    /// Product of the reduced marginals; interior when all entries are positive.
    Eigen::MatrixXd independence_point() const;

private:
    Eigen::VectorXd r_;
    Eigen::VectorXd c_;
    std::vector<Eigen::Index> rows_;
    std::vector<Eigen::Index> cols_;
};

/// The checkerboard generators b(ij), i < rows - 1, j < cols - 1, with +1 at
/// (i, j) and (i+1, j+1) and -1 at (i+1, j) and (i, j+1).
class MoveBasis {
public:
    MoveBasis(Eigen::Index rows, Eigen::Index cols);

    Eigen::Index size() const { return (rows_ - 1) * (cols_ - 1); }
    Eigen::MatrixXd generator(Eigen::Index i, Eigen::Index j) const;
    /// Coefficients of x in V(0, 0): coefficient (k, l) = sum_{i<=k, j<=l} x_ij.
    Eigen::MatrixXd coordinates(const Eigen::MatrixXd& x) const;
    Eigen::MatrixXd combine(const Eigen::MatrixXd& coefficients) const;

private:
    Eigen::Index rows_;
    Eigen::Index cols_;
};

/// True iff every entry is >= -1e-12. The point is assumed to satisfy the
/// row and column equalities already.
bool membership(const TransportationPolytope& polytope, const Eigen::MatrixXd& point);

struct WalkConfig {
    /// Zero selects 64 * dimension, i.e. 64 (m - 1)^2 for positive marginals.
    std::size_t steps_per_sample = 0;
    std::uint64_t seed = 1;
    /// Full-shape starting table; defaults to the independence table.
    std::optional<Eigen::MatrixXd> warm_start;
};

/// Hit-and-run inside P(r, c): each step draws a direction uniformly from the
/// unit sphere of the move space span{b(ij)}, computes the feasible chord by a
/// min-ratio test over the entries and jumps to a uniform point on it.
class HitAndRunSampler {
public:
    HitAndRunSampler(TransportationPolytope polytope, const WalkConfig& config);

    const TransportationPolytope& polytope() const { return polytope_; }
    std::size_t steps_per_sample() const { return steps_; }

    void step();
    /// Runs steps_per_sample steps from the current point and returns it (reduced shape).
    const Eigen::MatrixXd& advance();
    /// Moves back to the warm start.
    void restart() { x_ = start_; }

    const Eigen::MatrixXd& current() const { return x_; }
    Eigen::MatrixXd current_full() const { return polytope_.expand(x_); }

private:
    TransportationPolytope polytope_;
    std::size_t steps_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_;
    std::uniform_real_distribution<double> uniform_;
    Eigen::MatrixXd qr_;  // orthonormal basis of the zero-sum row space
    Eigen::MatrixXd qc_;
    Eigen::MatrixXd z_;
    Eigen::MatrixXd tmp_;
    Eigen::MatrixXd dir_;
    Eigen::MatrixXd start_;
    Eigen::MatrixXd x_;
};

/// One table from a fresh chain started at the warm start. Throws
/// InfeasibleStart for a warm start outside P(r, c).
JointTable sample_table(const MarginalDistribution& s1, const MarginalDistribution& s2, const WalkConfig& config);

struct EstimateConfig {
    std::uint64_t seed = 1;
    std::size_t steps_per_sample = 0;
    std::size_t chains = 1;
};

struct AverageEstimate {
    double estimate = 0.0;
    std::size_t samples = 0;  // N
    std::size_t chains = 1;
    std::size_t steps_per_sample = 0;
    double sample_variance = 0.0;  // of the single-sample region mass
};

/// ceil(100 / (eps^2 delta)); throws InvalidTolerance outside (0, 1).
std::size_t estimate_sample_count(double epsilon, double delta);

/// Mean region mass over N approximately uniform feasible joints, each drawn
/// by a walk restarted at the warm start. Regions covering all or none of the
/// support return 1 or 0 without sampling.
AverageEstimate estimate_average(const MarginalDistribution& s1, const MarginalDistribution& s2,
                                 const RegionSpec& region, double epsilon, double delta,
                                 const EstimateConfig& config = {});

/// Average-case objective value (RA_a, AG_a and their strict variants).
AverageEstimate average_objective(const MarginalDistribution& s1, const MarginalDistribution& s2, double alpha,
                                  const Portfolio& portfolio, const Objective& objective, double epsilon,
                                  double delta, const EstimateConfig& config = {});

}  // namespace riskprof
