#include <doctest.h>

#include <numeric>

#include "riskprof/greedy_flow.hpp"
#include "riskprof/oracle.hpp"
#include "test_support.hpp"

using namespace riskprof;
using namespace riskprof::testing;

TEST_CASE("maxflow examples") {
    const auto c = coin();
    const Portfolio x = two_stock_portfolio(0.5);
    CHECK(maxflow_reference(region_network(c, c, {50.0, x, Sense::Lower, false})) == doctest::Approx(1.0));
    CHECK(maxflow_reference(region_network(c, c, {-1.0, x, Sense::Lower, false})) == 0.0);
    CHECK(maxflow_reference(region_network(c, c, {200.0, x, Sense::Lower, false})) == doctest::Approx(1.0));
}

TEST_CASE("hand-built network") {
    // Two parallel paths and a cross edge.
    ExplicitFlowNetwork net(4, 0, 3);
    net.add_edge(0, 1, 3.0L);
    net.add_edge(0, 2, 2.0L);
    net.add_edge(1, 2, 1.0L);
    net.add_edge(1, 3, 2.0L);
    net.add_edge(2, 3, 3.0L);
    CHECK(maxflow_reference(net) == doctest::Approx(5.0));
    CHECK_THROWS_AS(ExplicitFlowNetwork(3, 1, 1), Error);
    CHECK_THROWS_AS(net.add_edge(0, 7, 1.0L), Error);
}

TEST_CASE("flow is invariant under relabeling rows and columns") {
    Rng rng(71);
    for (int trial = 0; trial < 30; ++trial) {
        const ReturnGrid g = random_grid(rng, uniform_int(rng, 2, 8));
        const auto s1 = random_marginal(rng, g);
        const auto s2 = random_marginal(rng, g);
        const RegionSpec spec{random_alpha(rng, g), two_stock_portfolio(random_weight(rng)), Sense::Lower, false};
        const auto net = region_network(s1, s2, spec);
        const int m = g.size();
        std::vector<int> perm(static_cast<std::size_t>(2 * m + 2));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin() + 1, perm.end() - 1, rng);
        ExplicitFlowNetwork shuffled(net.nodes(), 0, 2 * m + 1);
        for (const auto& e : net.edges())
            shuffled.add_edge(perm[static_cast<std::size_t>(e.from)], perm[static_cast<std::size_t>(e.to)], e.capacity);
        CHECK(maxflow_reference(shuffled) == doctest::Approx(maxflow_reference(net)).epsilon(1e-12));
    }
}

TEST_CASE("maxflow_objective matches the greedy route") {
    Rng rng(72);
    for (int trial = 0; trial < 50; ++trial) {
        const ReturnGrid g = random_grid(rng, uniform_int(rng, 2, 8));
        const auto s1 = random_marginal(rng, g);
        const auto s2 = random_marginal(rng, g);
        const double alpha = random_alpha(rng, g);
        const Portfolio x = two_stock_portfolio(random_weight(rng));
        for (const auto& obj : all_objectives()) {
            if (obj.kase == Case::Average) continue;
            CHECK(maxflow_objective(s1, s2, x, alpha, obj) ==
                  doctest::Approx(worst_case_two_stock(s1, s2, x, alpha, obj)).epsilon(1e-9));
        }
    }
}

TEST_CASE("exhaustive optimum examples") {
    const ReturnGrid g(1.0, 0, 4);
    Rng rng(73);
    const auto s1 = random_marginal(rng, g);
    const auto s2 = random_marginal(rng, g);
    CHECK(exhaustive_two_stock_optimum(s1, s2, 4.0, objective("ra_w")).value == doctest::Approx(1.0));
    CHECK(exhaustive_two_stock_optimum(s1, s2, -0.5, objective("ra_w")).value == 0.0);
    const auto a = exhaustive_two_stock_optimum(s1, s2, 2.0, objective("ra_w"));
    const auto b = exhaustive_two_stock_optimum(s1, s2, 2.0, objective("ra_w"), true);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-9));
}

TEST_CASE("analytic 2x2 average examples") {
    const auto c = coin();
    const Portfolio x = two_stock_portfolio(0.5);
    const auto avg = analytic_2x2_average(c, c, {50.0, x, Sense::Lower, false});
    CHECK(avg.value == doctest::Approx(0.75));
    CHECK(avg.lo == 0.0);
    CHECK(avg.hi == doctest::Approx(0.5));
    CHECK_FALSE(avg.degenerate);
    CHECK(analytic_2x2_average(c, c, {100.0, x, Sense::Lower, false}).value == doctest::Approx(1.0));
    CHECK(analytic_2x2_average(c, c, {-1.0, x, Sense::Lower, false}).value == 0.0);
    CHECK(analytic_2x2_average(c, c, {50.0, x, Sense::Lower, true}).value == doctest::Approx(0.25));

    const auto point = make_marginal(c.grid, Eigen::Vector2d(1.0, 0.0));
    const auto deg = analytic_2x2_average(point, c, {50.0, x, Sense::Lower, false});
    CHECK(deg.degenerate);
    CHECK(deg.value == doctest::Approx(1.0));
    const ReturnGrid three(1.0, 0, 2);
    const auto u = make_marginal(three, Eigen::Vector3d(0.2, 0.3, 0.5));
    CHECK_THROWS_AS(analytic_2x2_average(u, u, {1.0, x, Sense::Lower, false}), Error);
}

TEST_CASE("analytic average lies between best and worst case") {
    Rng rng(74);
    for (int trial = 0; trial < 100; ++trial) {
        const ReturnGrid g = random_grid(rng, 2);
        const auto s1 = random_marginal(rng, g);
        const auto s2 = random_marginal(rng, g);
        const double alpha = random_alpha(rng, g);
        const Portfolio x = two_stock_portfolio(random_weight(rng));
        const double avg = analytic_2x2_average(s1, s2, {alpha, x, Sense::Lower, false}).value;
        CHECK(avg <= worst_case_two_stock(s1, s2, x, alpha, objective("ra_w")) + 1e-12);
        CHECK(avg >= worst_case_two_stock(s1, s2, x, alpha, objective("ra_b")) - 1e-12);
    }
}

TEST_CASE("vertex enumeration examples and budget") {
    LpProblem<double> lp;
    lp.objective = Eigen::Vector3d(1, 0, 0);
    lp.eq_lhs = Eigen::RowVector3d(1, 1, 1);
    lp.eq_rhs = Eigen::VectorXd::Ones(1);
    CHECK(lp_vertex_enumeration(lp).value == doctest::Approx(1.0));
    lp.objective.setZero();
    CHECK(lp_vertex_enumeration(lp).value == 0.0);

    LpProblem<double> big;
    big.objective = Eigen::VectorXd::Ones(13);
    big.eq_lhs = Eigen::RowVectorXd::Ones(13);
    big.eq_rhs = Eigen::VectorXd::Ones(1);
    try {
        lp_vertex_enumeration(big);
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BudgetExceeded);
    }
}
