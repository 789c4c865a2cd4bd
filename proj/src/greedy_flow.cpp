#include "riskprof/greedy_flow.hpp"

#include <algorithm>

namespace riskprof {

namespace {

void check_two_stock(const MarginalDistribution& s1, const MarginalDistribution& s2, const RegionSpec& spec) {
    if (spec.portfolio.size() != 2)
        throw Error(ErrorCode::DimensionMismatch, "two-stock flow needs a two-weight portfolio");
    if (!(s1.grid == s2.grid))
        throw Error(ErrorCode::DimensionMismatch, "marginals live on different grids");
    if (s1.probs.size() != s1.grid.size() || s2.probs.size() != s2.grid.size())
        throw Error(ErrorCode::DimensionMismatch, "probability vector does not match its grid");
}

}  // namespace

FlowResult greedy_flow(const FlowProblem& problem, const FlowOptions& options) {
    const auto& [s1, s2, spec] = problem;
    check_two_stock(s1, s2, spec);

    const ReturnGrid& grid = s1.grid;
    const int m = grid.size();
    const double x1 = spec.portfolio[0];
    const double x2 = spec.portfolio[1];

    FlowResult out;
    auto finish = [&](const StaircaseFlow<double>& flow, auto&& to_original) {
        out.value = std::clamp(flow.value, 0.0, 1.0);
        out.iterations = flow.iterations;
        out.operations = flow.operations;
        out.cut_capacity = flow.cut_capacity;
        out.witness.reserve(flow.pushes.size());
        for (const auto& push : flow.pushes) {
            const auto [i, j] = to_original(push.row, push.col);
            out.witness.push_back({i, j, push.mass});
        }
    };

    if (spec.sense == Sense::Lower) {
        auto in_region = [&](int i, int j) {
            return classify_return(x1 * grid.value(i) + x2 * grid.value(j), spec.alpha, Sense::Lower, spec.strict);
        };
        const auto flow = greedy_staircase_flow<double>(
            std::span<const double>(s1.probs.data(), static_cast<std::size_t>(m)),
            std::span<const double>(s2.probs.data(), static_cast<std::size_t>(m)), in_region, options.witness);
        finish(flow, [](int i, int j) { return std::pair{i, j}; });
    } else {
        // An upper region is a lower staircase once both grids are reversed.
        const Eigen::VectorXd rows = s1.probs.reverse();
        const Eigen::VectorXd cols = s2.probs.reverse();
        auto in_region = [&](int i, int j) {
            return classify_return(x1 * grid.value(m - 1 - i) + x2 * grid.value(m - 1 - j), spec.alpha,
                                   Sense::Upper, spec.strict);
        };
        const auto flow = greedy_staircase_flow<double>(
            std::span<const double>(rows.data(), static_cast<std::size_t>(m)),
            std::span<const double>(cols.data(), static_cast<std::size_t>(m)), in_region, options.witness);
        finish(flow, [m](int i, int j) { return std::pair{m - 1 - i, m - 1 - j}; });
    }
    return out;
}

double worst_case_two_stock(const MarginalDistribution& s1, const MarginalDistribution& s2,
                            const Portfolio& portfolio, double alpha, const Objective& objective) {
    const CanonicalTask task = reduce_objective(objective);
    double ra = 0.0;
    switch (task.kase) {
        case Case::Worst:
            ra = greedy_flow({s1, s2, RegionSpec{alpha, portfolio, Sense::Lower, task.lower_strict}}).value;
            break;
        case Case::Best:
            // min mass on a lower region = 1 - max mass on its complement.
            ra = 1.0 - greedy_flow({s1, s2, RegionSpec{alpha, portfolio, Sense::Upper, !task.lower_strict}}).value;
            break;
        case Case::Average:
            throw Error(ErrorCode::AverageCaseNotSupported, "average-case objectives need the sampler");
    }
    return std::clamp(task.complement ? 1.0 - ra : ra, 0.0, 1.0);
}

JointTable witness_table(const ReturnGrid& grid, std::span<const FlowCell> witness) {
    JointTable table(grid, 2);
    for (const auto& cell : witness) table(cell.i, cell.j) += cell.mass;
    return table;
}

}  // namespace riskprof
