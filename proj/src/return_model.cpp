#include "riskprof/return_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace riskprof {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::NegativeProbability: return "NegativeProbability";
        case ErrorCode::SumNotOne: return "SumNotOne";
        case ErrorCode::BelowFloor: return "BelowFloor";
        case ErrorCode::GridMismatch: return "GridMismatch";
        case ErrorCode::InvalidGrid: return "InvalidGrid";
        case ErrorCode::InvalidPortfolio: return "InvalidPortfolio";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::AverageCaseNotSupported: return "AverageCaseNotSupported";
        case ErrorCode::UnsupportedObjective: return "UnsupportedObjective";
        case ErrorCode::InvariantViolation: return "InvariantViolation";
        case ErrorCode::InfeasibleStart: return "InfeasibleStart";
        case ErrorCode::InvalidTolerance: return "InvalidTolerance";
        case ErrorCode::BudgetExceeded: return "BudgetExceeded";
        case ErrorCode::Infeasible: return "Infeasible";
        case ErrorCode::Unbounded: return "Unbounded";
        case ErrorCode::NotOnCentLattice: return "NotOnCentLattice";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::NonPositivePrice: return "NonPositivePrice";
        case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

bool is_validation_error(ErrorCode code) {
    switch (code) {
        case ErrorCode::NegativeProbability:
        case ErrorCode::SumNotOne:
        case ErrorCode::BelowFloor:
        case ErrorCode::GridMismatch:
        case ErrorCode::InvalidGrid:
        case ErrorCode::InvalidPortfolio:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::AverageCaseNotSupported:
        case ErrorCode::UnsupportedObjective:
        case ErrorCode::InvalidTolerance:
        case ErrorCode::NotOnCentLattice:
        case ErrorCode::InsufficientData:
        case ErrorCode::NonPositivePrice:
        case ErrorCode::ParseError:
        case ErrorCode::BudgetExceeded:
            return true;
        default:
            return false;
    }
}

ReturnGrid::ReturnGrid(double mu_, int m1_, int m2_) : mu(mu_), m1(m1_), m2(m2_) {
    if (!(mu > 0.0) || !std::isfinite(mu))
        throw Error(ErrorCode::InvalidGrid, "grid step mu must be positive");
    if (m1 >= m2)
        throw Error(ErrorCode::InvalidGrid, "grid needs m1 < m2");
}

MarginalDistribution validate_marginal(const MarginalDistribution& dist,
                                       const ValidationOptions& options) {
    if (dist.probs.size() != dist.grid.size()) {
        std::ostringstream msg;
        msg << "expected " << dist.grid.size() << " probabilities, got " << dist.probs.size();
        throw Error(ErrorCode::GridMismatch, msg.str());
    }
    for (Eigen::Index i = 0; i < dist.probs.size(); ++i) {
        const double p = dist.probs[i];
        if (!std::isfinite(p) || p < 0.0) {
            std::ostringstream msg;
            msg << "probability at level " << dist.grid.level(static_cast<int>(i)) << " is " << p;
            throw Error(ErrorCode::NegativeProbability, msg.str());
        }
        if (options.floor > 0.0 && p > 0.0 && p < options.floor) {
            std::ostringstream msg;
            msg << "probability " << p << " at level " << dist.grid.level(static_cast<int>(i))
                << " is below floor " << options.floor;
            throw Error(ErrorCode::BelowFloor, msg.str());
        }
    }
    const double deviation = dist.probs.sum() - 1.0;
    if (std::abs(deviation) > kProbTol) {
        std::ostringstream msg;
        msg << "probabilities sum to 1" << (deviation > 0 ? "+" : "") << deviation;
        throw Error(ErrorCode::SumNotOne, msg.str());
    }
    return dist;
}

MarginalDistribution make_marginal(const ReturnGrid& grid, Eigen::VectorXd probs,
                                   const ValidationOptions& options) {
    return validate_marginal(MarginalDistribution{grid, std::move(probs)}, options);
}

Portfolio make_portfolio(Eigen::VectorXd weights) {
    if (weights.size() == 0)
        throw Error(ErrorCode::InvalidPortfolio, "portfolio is empty");
    for (Eigen::Index i = 0; i < weights.size(); ++i)
        if (!std::isfinite(weights[i]) || weights[i] < 0.0)
            throw Error(ErrorCode::InvalidPortfolio, "portfolio weights must be nonnegative");
    if (std::abs(weights.sum() - 1.0) > kWeightTol)
        throw Error(ErrorCode::InvalidPortfolio, "portfolio weights must sum to 1");
    return Portfolio{std::move(weights)};
}

Portfolio normalized_portfolio(const Eigen::VectorXd& raw) {
    if (raw.size() == 0 || (raw.array() < 0.0).any() || !(raw.sum() > 0.0))
        throw Error(ErrorCode::InvalidPortfolio, "cannot normalize portfolio weights");
    return Portfolio{raw / raw.sum()};
}

Portfolio two_stock_portfolio(double x1) {
    if (!(x1 >= 0.0 && x1 <= 1.0))
        throw Error(ErrorCode::InvalidPortfolio, "x1 must lie in [0, 1]");
    return Portfolio{Eigen::Vector2d(x1, 1.0 - x1)};
}

bool region_membership(const RegionSpec& spec, std::span<const double> delta) {
    if (static_cast<Eigen::Index>(delta.size()) != spec.portfolio.size())
        throw Error(ErrorCode::DimensionMismatch, "return vector and portfolio differ in length");
    double combined = 0.0;
    for (std::size_t i = 0; i < delta.size(); ++i)
        combined += spec.portfolio[static_cast<Eigen::Index>(i)] * delta[i];
    return classify_return(combined, spec.alpha, spec.sense, spec.strict);
}

RegionSpec complement_region(const RegionSpec& spec) {
    RegionSpec out = spec;
    out.sense = spec.sense == Sense::Lower ? Sense::Upper : Sense::Lower;
    out.strict = !spec.strict;
    return out;
}

namespace {

Eigen::Index cells_for(const ReturnGrid& grid, int k) {
    Eigen::Index n = 1;
    for (int a = 0; a < k; ++a) n *= grid.size();
    return n;
}

}  // namespace

JointTable::JointTable(ReturnGrid grid, int k)
    : grid_(grid), k_(k), entries_(Eigen::VectorXd::Zero(cells_for(grid, k))) {
    if (k < 1) throw Error(ErrorCode::DimensionMismatch, "table needs at least one axis");
}

JointTable::JointTable(ReturnGrid grid, int k, Eigen::VectorXd entries)
    : grid_(grid), k_(k), entries_(std::move(entries)) {
    if (k < 1 || entries_.size() != cells_for(grid, k))
        throw Error(ErrorCode::DimensionMismatch, "table entry count does not match m^k");
}

Eigen::Index JointTable::flat_index(std::span<const int> offsets) const {
    if (static_cast<int>(offsets.size()) != k_)
        throw Error(ErrorCode::DimensionMismatch, "index arity does not match table dimension");
    Eigen::Index flat = 0;
    for (int o : offsets) flat = flat * grid_.size() + o;
    return flat;
}

std::vector<int> JointTable::offsets(Eigen::Index flat) const {
    std::vector<int> out(static_cast<std::size_t>(k_));
    const int m = grid_.size();
    for (int a = k_ - 1; a >= 0; --a) {
        out[static_cast<std::size_t>(a)] = static_cast<int>(flat % m);
        flat /= m;
    }
    return out;
}

Eigen::MatrixXd JointTable::matrix() const {
    if (k_ != 2) throw Error(ErrorCode::DimensionMismatch, "matrix view needs a two-stock table");
    const int m = grid_.size();
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        entries_.data(), m, m);
}

Eigen::VectorXd JointTable::axis_marginal(int axis) const {
    if (axis < 0 || axis >= k_) throw Error(ErrorCode::DimensionMismatch, "axis out of range");
    const int m = grid_.size();
    Eigen::Index stride = 1;
    for (int a = k_ - 1; a > axis; --a) stride *= m;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
    for (Eigen::Index flat = 0; flat < entries_.size(); ++flat)
        out[(flat / stride) % m] += entries_[flat];
    return out;
}

void JointTable::check(std::span<const MarginalDistribution> marginals, double tol) const {
    if (static_cast<int>(marginals.size()) != k_)
        throw Error(ErrorCode::DimensionMismatch, "marginal count does not match table dimension");
    if (entries_.size() > 0 && entries_.minCoeff() < -kBoundaryTol)
        throw Error(ErrorCode::InvariantViolation, "table has a negative entry");
    if (std::abs(entries_.sum() - 1.0) > tol)
        throw Error(ErrorCode::InvariantViolation, "table mass is not 1");
    for (int a = 0; a < k_; ++a) {
        const auto& dist = marginals[static_cast<std::size_t>(a)];
        if (!(dist.grid == grid_)) throw Error(ErrorCode::GridMismatch, "marginal grid differs from table grid");
        if ((axis_marginal(a) - dist.probs).cwiseAbs().maxCoeff() > tol) {
            std::ostringstream msg;
            msg << "slice sums on axis " << a << " do not match the marginal";
            throw Error(ErrorCode::InvariantViolation, msg.str());
        }
    }
}

JointTable independence_table(std::span<const MarginalDistribution> dists) {
    if (dists.empty()) throw Error(ErrorCode::DimensionMismatch, "need at least one marginal");
    const ReturnGrid grid = dists.front().grid;
    for (const auto& d : dists)
        if (!(d.grid == grid)) throw Error(ErrorCode::GridMismatch, "marginals live on different grids");

    // Kronecker product, axis 0 most significant.
    Eigen::VectorXd entries = dists.front().probs;
    for (std::size_t a = 1; a < dists.size(); ++a) {
        const Eigen::VectorXd& next = dists[a].probs;
        Eigen::VectorXd grown(entries.size() * next.size());
        for (Eigen::Index i = 0; i < entries.size(); ++i)
            grown.segment(i * next.size(), next.size()) = entries[i] * next;
        entries = std::move(grown);
    }
    return JointTable(grid, static_cast<int>(dists.size()), std::move(entries));
}

std::vector<char> region_mask(const ReturnGrid& grid, int k, const RegionSpec& spec) {
    if (spec.portfolio.size() != k)
        throw Error(ErrorCode::DimensionMismatch, "portfolio and table dimension differ");
    const int m = grid.size();
    const Eigen::Index cells = cells_for(grid, k);
    std::vector<char> mask(static_cast<std::size_t>(cells));
    std::vector<int> idx(static_cast<std::size_t>(k), 0);
    for (Eigen::Index flat = 0; flat < cells; ++flat) {
        double combined = 0.0;
        for (int a = 0; a < k; ++a) combined += spec.portfolio[a] * grid.value(idx[static_cast<std::size_t>(a)]);
        mask[static_cast<std::size_t>(flat)] = classify_return(combined, spec.alpha, spec.sense, spec.strict);
        for (int a = k - 1; a >= 0; --a) {
            if (++idx[static_cast<std::size_t>(a)] < m) break;
            idx[static_cast<std::size_t>(a)] = 0;
        }
    }
    return mask;
}

double region_mass(const JointTable& table, const RegionSpec& spec) {
    const auto mask = region_mask(table.grid(), table.dimension(), spec);
    double mass = 0.0;
    for (Eigen::Index flat = 0; flat < table.cell_count(); ++flat)
        if (mask[static_cast<std::size_t>(flat)]) mass += table.entries()[flat];
    return std::clamp(mass, 0.0, 1.0);
}

Objective parse_objective(std::string_view name) {
    Objective out;
    std::string s(name);
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    auto strip_suffix = [&](std::string_view suffix) {
        if (s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
            s.resize(s.size() - suffix.size());
            return true;
        }
        return false;
    };
    out.strict = strip_suffix("**") || strip_suffix("_strict") || strip_suffix("_ss");
    if (s.size() != 4 || s[2] != '_')
        throw Error(ErrorCode::ParseError, "unknown objective '" + std::string(name) + "'");
    const std::string who = s.substr(0, 2);
    if (who == "ra") out.investor = Investor::RiskAverse;
    else if (who == "ag") out.investor = Investor::Aggressive;
    else throw Error(ErrorCode::ParseError, "unknown objective '" + std::string(name) + "'");
    switch (s[3]) {
        case 'b': out.kase = Case::Best; break;
        case 'w': out.kase = Case::Worst; break;
        case 'a': out.kase = Case::Average; break;
        default: throw Error(ErrorCode::ParseError, "unknown objective '" + std::string(name) + "'");
    }
    return out;
}

std::string to_string(const Objective& objective) {
    std::string out = objective.investor == Investor::RiskAverse ? "ra_" : "ag_";
    out += objective.kase == Case::Best ? 'b' : objective.kase == Case::Worst ? 'w' : 'a';
    if (objective.strict) out += "**";
    return out;
}

std::vector<Objective> all_objectives() {
    std::vector<Objective> out;
    for (auto investor : {Investor::RiskAverse, Investor::Aggressive})
        for (bool strict : {false, true})
            for (auto kase : {Case::Best, Case::Worst, Case::Average})
                out.push_back({investor, kase, strict});
    return out;
}

CanonicalTask reduce_objective(const Objective& objective) {
    if (objective.investor == Investor::RiskAverse)
        return {objective.kase, objective.strict, false};
    // AG^s_c(x) = 1 - RA^{!s}_c(x): the upper region U^s is the complement of
    // the lower region with flipped strictness, and max/min swap under 1 - .
    return {objective.kase, !objective.strict, true};
}

RegionSpec objective_region(const Objective& objective, double alpha, const Portfolio& portfolio) {
    return RegionSpec{alpha, portfolio,
                      objective.investor == Investor::RiskAverse ? Sense::Lower : Sense::Upper,
                      objective.strict};
}

bool objective_maximizes_mass(const Objective& objective) {
    if (objective.kase == Case::Average)
        throw Error(ErrorCode::AverageCaseNotSupported, "average-case objective has no extremal joint");
    const bool worst = objective.kase == Case::Worst;
    return objective.investor == Investor::RiskAverse ? worst : !worst;
}

}  // namespace riskprof
