#include "riskprof/contingency_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

#include "riskprof/error.hpp"

namespace riskprof {

namespace {

constexpr double kMarginalTol = 1e-9;
constexpr double kMemberTol = 1e-12;
constexpr double kBoundaryNudge = 1e-6;

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t chain_seed(std::uint64_t seed, std::size_t chain) {
    std::uint64_t state = seed ^ (0xd1b54a32d192ed03ULL * (chain + 1));
    splitmix64(state);
    return splitmix64(state);
}

/// Orthonormal basis (n x (n-1)) of the vectors with zero entry sum.
Eigen::MatrixXd contrast_basis(Eigen::Index n) {
    if (n <= 1) return Eigen::MatrixXd(n, 0);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd::Ones(n, 1));
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    return q.rightCols(n - 1);
}

std::vector<Eigen::Index> positive_indices(const Eigen::VectorXd& v) {
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (v[i] > 0.0) out.push_back(i);
    return out;
}

void check_marginal_vector(const Eigen::VectorXd& v, const char* name) {
    if (v.size() == 0) throw Error(ErrorCode::DimensionMismatch, std::string(name) + " is empty");
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!(v[i] >= 0.0))
            throw Error(ErrorCode::NegativeProbability, std::string(name) + " has a negative entry");
    if (std::abs(v.sum() - 1.0) > kMarginalTol)
        throw Error(ErrorCode::SumNotOne, std::string(name) + " does not sum to one");
}

}  // namespace

TransportationPolytope::TransportationPolytope(Eigen::VectorXd r, Eigen::VectorXd c)
    : r_(std::move(r)), c_(std::move(c)) {
    check_marginal_vector(r_, "row sums");
    check_marginal_vector(c_, "column sums");
    rows_ = positive_indices(r_);
    cols_ = positive_indices(c_);
}

TransportationPolytope TransportationPolytope::from_marginals(const MarginalDistribution& s1,
                                                              const MarginalDistribution& s2) {
    if (!(s1.grid == s2.grid)) throw Error(ErrorCode::GridMismatch, "marginals live on different grids");
    return TransportationPolytope(s1.probs, s2.probs);
}

double TransportationPolytope::ball_radius_hint() const {
    double b = std::numeric_limits<double>::infinity();
    for (auto i : rows_) b = std::min(b, r_[i]);
    for (auto j : cols_) b = std::min(b, c_[j]);
    return b;
}

Eigen::VectorXd TransportationPolytope::reduced_row_sums() const {
    Eigen::VectorXd out(reduced_rows());
    for (std::size_t a = 0; a < rows_.size(); ++a) out[static_cast<Eigen::Index>(a)] = r_[rows_[a]];
    return out;
}

Eigen::VectorXd TransportationPolytope::reduced_col_sums() const {
    Eigen::VectorXd out(reduced_cols());
    for (std::size_t b = 0; b < cols_.size(); ++b) out[static_cast<Eigen::Index>(b)] = c_[cols_[b]];
    return out;
}

Eigen::MatrixXd TransportationPolytope::reduce(const Eigen::MatrixXd& full) const {
    if (full.rows() != r_.size() || full.cols() != c_.size())
        throw Error(ErrorCode::DimensionMismatch, "table shape does not match the marginals");
    Eigen::MatrixXd out(reduced_rows(), reduced_cols());
    for (std::size_t a = 0; a < rows_.size(); ++a)
        for (std::size_t b = 0; b < cols_.size(); ++b)
            out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = full(rows_[a], cols_[b]);
    return out;
}

Eigen::MatrixXd TransportationPolytope::expand(const Eigen::MatrixXd& reduced) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(r_.size(), c_.size());
    for (std::size_t a = 0; a < rows_.size(); ++a)
        for (std::size_t b = 0; b < cols_.size(); ++b)
            out(rows_[a], cols_[b]) = reduced(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    return out;
}

Eigen::MatrixXd TransportationPolytope::independence_point() const {
    return reduced_row_sums() * reduced_col_sums().transpose();
}

MoveBasis::MoveBasis(Eigen::Index rows, Eigen::Index cols) : rows_(rows), cols_(cols) {
    if (rows < 1 || cols < 1) throw Error(ErrorCode::DimensionMismatch, "move basis needs a nonempty shape");
}

Eigen::MatrixXd MoveBasis::generator(Eigen::Index i, Eigen::Index j) const {
    if (i < 0 || j < 0 || i >= rows_ - 1 || j >= cols_ - 1)
        throw Error(ErrorCode::DimensionMismatch, "generator index out of range");
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(rows_, cols_);
    g(i, j) = 1.0;
    g(i + 1, j + 1) = 1.0;
    g(i + 1, j) = -1.0;
    g(i, j + 1) = -1.0;
    return g;
}

Eigen::MatrixXd MoveBasis::coordinates(const Eigen::MatrixXd& x) const {
    if (x.rows() != rows_ || x.cols() != cols_)
        throw Error(ErrorCode::DimensionMismatch, "table shape does not match the basis");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(std::max<Eigen::Index>(rows_ - 1, 0),
                                                std::max<Eigen::Index>(cols_ - 1, 0));
    for (Eigen::Index k = 0; k + 1 < rows_; ++k)
        for (Eigen::Index l = 0; l + 1 < cols_; ++l)
            out(k, l) = x.topLeftCorner(k + 1, l + 1).sum();
    return out;
}

Eigen::MatrixXd MoveBasis::combine(const Eigen::MatrixXd& coefficients) const {
    if (coefficients.rows() != rows_ - 1 || coefficients.cols() != cols_ - 1)
        throw Error(ErrorCode::DimensionMismatch, "coefficient shape does not match the basis");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows_, cols_);
    for (Eigen::Index i = 0; i + 1 < rows_; ++i)
        for (Eigen::Index j = 0; j + 1 < cols_; ++j) {
            const double a = coefficients(i, j);
            out(i, j) += a;
            out(i + 1, j + 1) += a;
            out(i + 1, j) -= a;
            out(i, j + 1) -= a;
        }
    return out;
}

bool membership(const TransportationPolytope& polytope, const Eigen::MatrixXd& point) {
    if (point.rows() != polytope.row_sums().size() || point.cols() != polytope.col_sums().size())
        throw Error(ErrorCode::DimensionMismatch, "table shape does not match the marginals");
    return point.size() == 0 || point.minCoeff() >= -kMemberTol;
}

HitAndRunSampler::HitAndRunSampler(TransportationPolytope polytope, const WalkConfig& config)
    : polytope_(std::move(polytope)),
      steps_(config.steps_per_sample),
      rng_(config.seed),
      normal_(0.0, 1.0),
      uniform_(0.0, 1.0) {
    const Eigen::Index rr = polytope_.reduced_rows();
    const Eigen::Index rc = polytope_.reduced_cols();
    if (steps_ == 0) steps_ = static_cast<std::size_t>(64 * std::max<Eigen::Index>(polytope_.dimension(), 1));

    qr_ = contrast_basis(rr);
    qc_ = contrast_basis(rc);
    z_.resize(rr - 1, rc - 1);
    tmp_.resize(rr, rc - 1);
    dir_.resize(rr, rc);
    if (polytope_.dimension() == 1) {
        // Only the sign of the direction is random and the chord is symmetric.
        dir_ = qr_ * qc_.transpose();
    }

    const Eigen::MatrixXd indep = polytope_.independence_point();
    if (!config.warm_start) {
        start_ = indep;
    } else {
        const Eigen::MatrixXd& full = *config.warm_start;
        const auto& r = polytope_.row_sums();
        const auto& c = polytope_.col_sums();
        if (full.rows() != r.size() || full.cols() != c.size())
            throw Error(ErrorCode::InfeasibleStart, "warm start has the wrong shape");
        if (!membership(polytope_, full)) throw Error(ErrorCode::InfeasibleStart, "warm start has a negative entry");
        if ((full.rowwise().sum() - r).cwiseAbs().maxCoeff() > kMarginalTol ||
            (full.colwise().sum().transpose() - c).cwiseAbs().maxCoeff() > kMarginalTol)
            throw Error(ErrorCode::InfeasibleStart, "warm start misses the marginals");
        start_ = polytope_.reduce(full).cwiseMax(0.0);
        if (start_.size() > 0 && start_.minCoeff() <= 0.0)
            start_ = (1.0 - kBoundaryNudge) * start_ + kBoundaryNudge * indep;
    }
    x_ = start_;
}

void HitAndRunSampler::step() {
    const Eigen::Index dim = polytope_.dimension();
    if (dim <= 0) return;
    if (dim > 1) {
        double* z = z_.data();
        for (Eigen::Index k = 0; k < z_.size(); ++k) z[k] = normal_(rng_);
        tmp_.noalias() = qr_ * z_;
        dir_.noalias() = tmp_ * qc_.transpose();
    }

    double* x = x_.data();
    const double* d = dir_.data();
    const Eigen::Index n = x_.size();
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n; ++k) {
        const double dk = d[k];
        if (dk > 0.0) lo = std::max(lo, -x[k] / dk);
        else if (dk < 0.0) hi = std::min(hi, -x[k] / dk);
    }
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) return;
    const double s = lo + (hi - lo) * uniform_(rng_);
    for (Eigen::Index k = 0; k < n; ++k) x[k] = std::max(0.0, x[k] + s * d[k]);
}

const Eigen::MatrixXd& HitAndRunSampler::advance() {
    for (std::size_t s = 0; s < steps_; ++s) step();
    return x_;
}

JointTable sample_table(const MarginalDistribution& s1, const MarginalDistribution& s2, const WalkConfig& config) {
    HitAndRunSampler sampler(TransportationPolytope::from_marginals(s1, s2), config);
    sampler.advance();
    const Eigen::MatrixXd full = sampler.current_full();
    JointTable table(s1.grid, 2);
    const int m = s1.size();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) table(i, j) = full(i, j);
    return table;
}

std::size_t estimate_sample_count(double epsilon, double delta) {
    if (!(epsilon > 0.0 && epsilon < 1.0) || !(delta > 0.0 && delta < 1.0))
        throw Error(ErrorCode::InvalidTolerance, "epsilon and delta must lie in (0, 1)");
    return static_cast<std::size_t>(std::ceil(100.0 / (epsilon * epsilon * delta) - 1e-9));
}

namespace {

struct ChainTotals {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t count = 0;
};

ChainTotals run_chain(const TransportationPolytope& polytope, const Eigen::MatrixXd& mask, std::size_t samples,
                      std::size_t steps, std::uint64_t seed) {
    WalkConfig wc;
    wc.steps_per_sample = steps;
    wc.seed = seed;
    HitAndRunSampler sampler(polytope, wc);
    ChainTotals out;
    for (std::size_t s = 0; s < samples; ++s) {
        sampler.restart();
        const double v = sampler.advance().cwiseProduct(mask).sum();
        out.sum += v;
        out.sum_sq += v * v;
        ++out.count;
    }
    return out;
}

}  // namespace

AverageEstimate estimate_average(const MarginalDistribution& s1, const MarginalDistribution& s2,
                                 const RegionSpec& region, double epsilon, double delta,
                                 const EstimateConfig& config) {
    const std::size_t n = estimate_sample_count(epsilon, delta);
    if (region.portfolio.size() != 2)
        throw Error(ErrorCode::DimensionMismatch, "the average case needs a two-stock portfolio");
    const TransportationPolytope polytope = TransportationPolytope::from_marginals(s1, s2);

    // Region indicator over the reduced cells.
    const auto rows = positive_indices(s1.probs);
    const auto cols = positive_indices(s2.probs);
    Eigen::MatrixXd mask(polytope.reduced_rows(), polytope.reduced_cols());
    for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = 0; b < cols.size(); ++b) {
            const double delta_ab[2] = {s1.grid.value(static_cast<int>(rows[a])),
                                        s2.grid.value(static_cast<int>(cols[b]))};
            mask(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                region_membership(region, delta_ab) ? 1.0 : 0.0;
        }

    AverageEstimate out;
    out.samples = n;
    out.chains = std::max<std::size_t>(config.chains, 1);
    out.steps_per_sample = config.steps_per_sample != 0
                               ? config.steps_per_sample
                               : static_cast<std::size_t>(64 * std::max<Eigen::Index>(polytope.dimension(), 1));
    const double covered = mask.sum();
    if (covered == 0.0 || covered == static_cast<double>(mask.size())) {
        out.estimate = covered == 0.0 ? 0.0 : 1.0;
        return out;
    }

    std::vector<ChainTotals> totals(out.chains);
    auto work = [&](std::size_t chain) {
        const std::size_t share = n / out.chains + (chain < n % out.chains ? 1 : 0);
        totals[chain] = run_chain(polytope, mask, share, out.steps_per_sample, chain_seed(config.seed, chain));
    };
    if (out.chains == 1) {
        work(0);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(out.chains);
        for (std::size_t c = 0; c < out.chains; ++c) threads.emplace_back(work, c);
        for (auto& t : threads) t.join();
    }

    double sum = 0.0, sum_sq = 0.0;
    std::size_t count = 0;
    for (const auto& t : totals) {
        sum += t.sum;
        sum_sq += t.sum_sq;
        count += t.count;
    }
    const double mean = sum / static_cast<double>(count);
    out.estimate = std::clamp(mean, 0.0, 1.0);
    out.sample_variance = std::max(0.0, sum_sq / static_cast<double>(count) - mean * mean);
    return out;
}

AverageEstimate average_objective(const MarginalDistribution& s1, const MarginalDistribution& s2, double alpha,
                                  const Portfolio& portfolio, const Objective& objective, double epsilon,
                                  double delta, const EstimateConfig& config) {
    const CanonicalTask task = reduce_objective(objective);
    if (task.kase != Case::Average)
        throw Error(ErrorCode::UnsupportedObjective, "average_objective needs an average-case objective");
    RegionSpec lower{alpha, portfolio, Sense::Lower, task.lower_strict};
    AverageEstimate est = estimate_average(s1, s2, lower, epsilon, delta, config);
    if (task.complement) est.estimate = 1.0 - est.estimate;
    return est;
}

}  // namespace riskprof
