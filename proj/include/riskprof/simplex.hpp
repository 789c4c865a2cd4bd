#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "riskprof/error.hpp"

namespace riskprof {

enum class LpSense { Maximize, Minimize };

/// optimize objective . x  subject to  eq_lhs x = eq_rhs,  le_lhs x <= le_rhs,  x >= 0.
template <class Scalar = double>
struct LpProblem {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    LpSense sense = LpSense::Maximize;
    Vector objective;
    Matrix eq_lhs;
    Vector eq_rhs;
    Matrix le_lhs;
    Vector le_rhs;

    Eigen::Index variables() const { return objective.size(); }
};

template <class Scalar = double>
struct LpSolution {
    Scalar value{0};
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;
    std::size_t pivots = 0;
};

struct SimplexOptions {
    double pivot_tol = 1e-11;
    double cost_tol = 1e-11;
    double feasibility_tol = 1e-9;
    std::size_t max_pivots = 5'000'000;
};

namespace detail {

/// Dense tableau; the last row holds reduced costs, the last column the rhs.
template <class Scalar>
class Tableau {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    Tableau(Matrix t, std::vector<Eigen::Index> basis) : t_(std::move(t)), basis_(std::move(basis)) {}

    Eigen::Index rows() const { return t_.rows() - 1; }
    Eigen::Index cols() const { return t_.cols() - 1; }
    Matrix& data() { return t_; }
    const Matrix& data() const { return t_; }
    std::vector<Eigen::Index>& basis() { return basis_; }

    /// Loads cost vector `c` (minimization) into the reduced-cost row.
    void set_costs(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& c) {
        const Eigen::Index obj = rows();
        t_.row(obj).setZero();
        t_.row(obj).head(c.size()) = c.transpose();
        for (Eigen::Index r = 0; r < rows(); ++r) {
            const Scalar cb = t_(obj, basis_[static_cast<std::size_t>(r)]);
            if (cb != Scalar(0)) t_.row(obj) -= cb * t_.row(r);
        }
    }

    /// Current minimization objective value.
    Scalar objective() const { return -t_(rows(), cols()); }

    void pivot(Eigen::Index r, Eigen::Index c) {
        t_.row(r) /= t_(r, c);
        for (Eigen::Index q = 0; q <= rows(); ++q) {
            if (q == r) continue;
            const Scalar f = t_(q, c);
            if (f != Scalar(0)) t_.row(q) -= f * t_.row(r);
        }
        t_.col(c).setZero();
        t_(r, c) = Scalar(1);
        basis_[static_cast<std::size_t>(r)] = c;
    }

    /// Minimizes over columns with allowed[c]. Largest-coefficient pricing,
    /// falling back to Bland's rule while pivots are degenerate.
    /// Returns false when unbounded.
    bool minimize(const std::vector<char>& allowed, const SimplexOptions& opt, std::size_t& pivots) {
        const Eigen::Index obj = rows();
        bool bland = false;
        for (;;) {
            if (pivots >= opt.max_pivots) throw Error(ErrorCode::BudgetExceeded, "simplex pivot limit reached");
            Eigen::Index enter = -1;
            Scalar best = Scalar(-opt.cost_tol);
            for (Eigen::Index c = 0; c < cols(); ++c) {
                if (!allowed[static_cast<std::size_t>(c)]) continue;
                const Scalar d = t_(obj, c);
                if (d < best) {
                    enter = c;
                    if (bland) break;
                    best = d;
                }
            }
            if (enter < 0) return true;

            Eigen::Index leave = -1;
            Scalar ratio = std::numeric_limits<Scalar>::infinity();
            for (Eigen::Index r = 0; r < rows(); ++r) {
                const Scalar a = t_(r, enter);
                if (a <= Scalar(opt.pivot_tol)) continue;
                const Scalar q = t_(r, cols()) / a;
                if (leave < 0 || q < ratio - Scalar(opt.pivot_tol)) {
                    leave = r;
                    ratio = q;
                } else if (q <= ratio + Scalar(opt.pivot_tol) &&
                           basis_[static_cast<std::size_t>(r)] < basis_[static_cast<std::size_t>(leave)]) {
                    // Ties go to the lowest basic index.
                    leave = r;
                    ratio = std::min(ratio, q);
                }
            }
            if (leave < 0) return false;
            bland = ratio <= Scalar(opt.pivot_tol);
            pivot(leave, enter);
            ++pivots;
        }
    }

private:
    Matrix t_;
    std::vector<Eigen::Index> basis_;
};

}  // namespace detail

/// Two-phase dense simplex. Throws Infeasible or Unbounded.
template <class Scalar>
LpSolution<Scalar> solve_lp(const LpProblem<Scalar>& problem, const SimplexOptions& opt = {}) {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    const Eigen::Index n = problem.variables();
    const Eigen::Index p = problem.eq_lhs.rows();
    const Eigen::Index q = problem.le_lhs.rows();
    if ((p > 0 && (problem.eq_lhs.cols() != n || problem.eq_rhs.size() != p)) ||
        (q > 0 && (problem.le_lhs.cols() != n || problem.le_rhs.size() != q)))
        throw Error(ErrorCode::DimensionMismatch, "LP constraint shapes do not match the objective");

    const Eigen::Index m = p + q;
    // Columns: originals, one slack per <= row, one artificial per row.
    const Eigen::Index slack0 = n;
    const Eigen::Index art0 = n + q;
    const Eigen::Index width = art0 + m;

    typename detail::Tableau<Scalar>::Matrix t = detail::Tableau<Scalar>::Matrix::Zero(m + 1, width + 1);
    std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
    std::vector<char> artificial_used(static_cast<std::size_t>(m), 0);
    for (Eigen::Index r = 0; r < m; ++r) {
        const bool eq = r < p;
        Scalar rhs = eq ? problem.eq_rhs[r] : problem.le_rhs[r - p];
        const Scalar sign = rhs < Scalar(0) ? Scalar(-1) : Scalar(1);
        if (eq) t.row(r).head(n) = sign * problem.eq_lhs.row(r);
        else {
            t.row(r).head(n) = sign * problem.le_lhs.row(r - p);
            t(r, slack0 + (r - p)) = sign;
        }
        t(r, width) = sign * rhs;
        if (!eq && sign > Scalar(0)) {
            basis[static_cast<std::size_t>(r)] = slack0 + (r - p);
        } else {
            t(r, art0 + r) = Scalar(1);
            basis[static_cast<std::size_t>(r)] = art0 + r;
            artificial_used[static_cast<std::size_t>(r)] = 1;
        }
    }

    detail::Tableau<Scalar> tab(std::move(t), std::move(basis));
    LpSolution<Scalar> out;

    // Phase 1: minimize the sum of artificials.
    Vector phase1 = Vector::Zero(width);
    for (Eigen::Index r = 0; r < m; ++r)
        if (artificial_used[static_cast<std::size_t>(r)]) phase1[art0 + r] = Scalar(1);
    std::vector<char> allowed(static_cast<std::size_t>(width), 1);
    tab.set_costs(phase1);
    if (!tab.minimize(allowed, opt, out.pivots))
        throw Error(ErrorCode::Unbounded, "phase 1 unbounded");
    if (tab.objective() > Scalar(opt.feasibility_tol))
        throw Error(ErrorCode::Infeasible, "LP has no feasible point");

    // Drive zero-level artificials out of the basis; rows with no other
    // support are redundant and stay inert.
    for (Eigen::Index r = 0; r < m; ++r) {
        if (tab.basis()[static_cast<std::size_t>(r)] < art0) continue;
        for (Eigen::Index c = 0; c < art0; ++c) {
            if (std::abs(tab.data()(r, c)) > Scalar(opt.pivot_tol)) {
                tab.pivot(r, c);
                ++out.pivots;
                break;
            }
        }
    }
    for (Eigen::Index c = art0; c < width; ++c) allowed[static_cast<std::size_t>(c)] = 0;

    // Phase 2.
    Vector phase2 = Vector::Zero(width);
    phase2.head(n) = problem.sense == LpSense::Maximize ? Vector(-problem.objective) : problem.objective;
    tab.set_costs(phase2);
    if (!tab.minimize(allowed, opt, out.pivots)) throw Error(ErrorCode::Unbounded, "LP objective is unbounded");

    out.x = Vector::Zero(n);
    for (Eigen::Index r = 0; r < m; ++r) {
        const Eigen::Index b = tab.basis()[static_cast<std::size_t>(r)];
        if (b < n) out.x[b] = std::max(Scalar(0), tab.data()(r, width));
    }
    out.value = problem.objective.dot(out.x);
    return out;
}

}  // namespace riskprof
