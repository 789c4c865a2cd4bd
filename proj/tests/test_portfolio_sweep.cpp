#include <doctest.h>

#include "riskprof/greedy_flow.hpp"
#include "riskprof/oracle.hpp"
#include "riskprof/portfolio_sweep.hpp"
#include "test_support.hpp"

using namespace riskprof;
using namespace riskprof::testing;

TEST_CASE("slope events on the coin grid") {
    // (0,0) is always inside and (100,100) always outside; only the two
    // off-diagonal pairs flip, both at x1 = 1/2.
    const auto ev = enumerate_slope_events(ReturnGrid(100.0, 0, 1), 50.0);
    REQUIRE(ev.size() == 2);
    CHECK(ev[0].t == doctest::Approx(0.5));
    CHECK(ev[1].t == doctest::Approx(0.5));
    CHECK(ev[0].slope == doctest::Approx(-1.0));
    CHECK(ev[0].i == 0);
    CHECK(ev[0].j == 1);
    CHECK(ev[0].kind == EventKind::Enter);
    CHECK(ev[1].kind == EventKind::Leave);
}

TEST_CASE("no events when alpha is outside the grid") {
    const ReturnGrid g(1.0, 0, 5);
    CHECK(enumerate_slope_events(g, 6.5).empty());
    CHECK(enumerate_slope_events(g, -0.5).empty());
}

TEST_CASE("events come sorted by t and by slope descending") {
    Rng rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const ReturnGrid g = random_grid(rng, uniform_int(rng, 2, 12));
        const double alpha = random_alpha(rng, g);
        const auto ev = enumerate_slope_events(g, alpha);
        for (std::size_t k = 1; k < ev.size(); ++k) {
            CHECK(ev[k - 1].t <= ev[k].t);
            CHECK(ev[k - 1].slope >= ev[k].slope - 1e-9);
        }
        for (const auto& e : ev) {
            CHECK(e.t > 0.0);
            CHECK(e.t < 1.0);
            const double on_line = e.t * g.value(e.i) + (1 - e.t) * g.value(e.j);
            CHECK(on_line == doctest::Approx(alpha));
        }
    }
}

TEST_CASE("parent rule and identity padding") {
    const TreeLabel a{-0.3, 0.2};
    const TreeLabel b{-0.5, 0.1};
    const auto p = combine(a, b);
    CHECK(p.e1 == doctest::Approx(-0.3 - 0.3));
    CHECK(p.e2 == doctest::Approx(0.1));
    const auto id_r = combine(a, TreeLabel{});
    const auto id_l = combine(TreeLabel{}, a);
    CHECK(id_r.e1 == a.e1);
    CHECK(id_r.e2 == a.e2);
    CHECK(id_l.e1 == a.e1);
    CHECK(id_l.e2 == a.e2);
}

TEST_CASE("tree_flow_value examples") {
    // Every row under the line: all supplies precede all demands.
    const FlowTree full({{0.0, 0.5}, {0.0, 0.5}, {-0.5, 0.0}, {-0.5, 0.0}});
    CHECK(tree_flow_value(full) == doctest::Approx(1.0));
    // A demand before any supply can receive nothing.
    const FlowTree empty({{-1.0, 0.0}, {0.0, 1.0}});
    CHECK(tree_flow_value(empty) == doctest::Approx(0.0));
    // Unbalanced leaves break the root identity.
    const FlowTree broken({{-0.5, 0.0}});
    CHECK_THROWS_AS(tree_flow_value(broken), Error);
}

TEST_CASE("coin pair tree matches greedy at x = (1/2, 1/2)") {
    const auto c = coin();
    const RegionSpec spec{50.0, two_stock_portfolio(0.5), Sense::Lower, false};
    const auto th = staircase_thresholds(c.grid, spec);
    CHECK(th == std::vector<int>{2, 1});
    const FlowTree tree(staircase_leaves(c, c, th));
    CHECK(tree_flow_value(tree) == doctest::Approx(1.0));
    CHECK(tree.max_rule_violation() == 0.0);
}

TEST_CASE("swap_adjacent keeps the parent rule") {
    Rng rng(1);
    std::vector<TreeLabel> leaves;
    for (int i = 0; i < 13; ++i)
        leaves.push_back(i % 2 ? TreeLabel{0.0, uniform_real(rng, 0, 1)} : TreeLabel{-uniform_real(rng, 0, 1), 0.0});
    FlowTree tree(leaves);
    for (int s = 0; s < 200; ++s) {
        const auto pos = static_cast<std::size_t>(uniform_int(rng, 0, 11));
        tree.swap_adjacent(pos);
        std::swap(leaves[pos], leaves[pos + 1]);
        REQUIRE(tree.max_rule_violation() < 1e-15);
    }
    const FlowTree rebuilt(leaves);
    CHECK(tree.root().e1 == doctest::Approx(rebuilt.root().e1));
    CHECK(tree.root().e2 == doctest::Approx(rebuilt.root().e2));
}

TEST_CASE("sweep examples") {
    const ReturnGrid g(1.0, 0, 100);
    Eigen::VectorXd top = Eigen::VectorXd::Zero(101);
    top[100] = 1.0;
    Eigen::VectorXd bottom = Eigen::VectorXd::Zero(101);
    bottom[0] = 1.0;
    const auto s1 = make_marginal(g, top);
    const auto s2 = make_marginal(g, bottom);

    const auto r = sweep_optimal_portfolio(s1, s2, 50.0, objective("ra_w"));
    CHECK(r.value == 0.0);
    CHECK(r.portfolio[0] == doctest::Approx(1.0));

    const auto all = sweep_optimal_portfolio(s1, s2, 100.0, objective("ra_w"));
    CHECK(all.value == doctest::Approx(1.0));

    CHECK_THROWS_AS(sweep_optimal_portfolio(s1, s2, 50.0, objective("ra_a")), Error);
}

TEST_CASE("sweep matches exhaustive enumeration for every objective") {
    Rng rng(31);
    for (int trial = 0; trial < 60; ++trial) {
        const ReturnGrid g = random_grid(rng, uniform_int(rng, 2, 8));
        const auto s1 = random_marginal(rng, g);
        const auto s2 = random_marginal(rng, g);
        const double alpha = random_alpha(rng, g);
        for (const auto& obj : all_objectives()) {
            if (obj.kase == Case::Average) continue;
            const auto sw = sweep_optimal_portfolio(s1, s2, alpha, obj);
            const auto ex = exhaustive_two_stock_optimum(s1, s2, alpha, obj);
            REQUIRE(sw.value == doctest::Approx(ex.value).epsilon(1e-9));
            // The reported portfolio really attains the value.
            CHECK(worst_case_two_stock(s1, s2, sw.portfolio, alpha, obj) == doctest::Approx(sw.value).epsilon(1e-9));
            CHECK(sw.portfolio[0] >= doctest::Approx(sw.t_lo));
            CHECK(sw.portfolio[0] <= doctest::Approx(sw.t_hi));
        }
    }
}

TEST_CASE("replayed tree agrees with greedy after every batch") {
    Rng rng(77);
    for (int trial = 0; trial < 40; ++trial) {
        const ReturnGrid g = random_grid(rng, uniform_int(rng, 2, 12));
        const auto s1 = random_marginal(rng, g);
        const auto s2 = random_marginal(rng, g);
        const double alpha = random_alpha(rng, g);
        for (const char* name : {"ra_w", "ra_w**", "ra_b", "ag_b**"}) {
            std::size_t reports = 0;
            sweep_optimal_portfolio(s1, s2, alpha, objective(name), [&](const SweepState& st) {
                ++reports;
                const double g_value = greedy_flow({st.rows, st.cols, st.region}).value;
                REQUIRE(st.flow == doctest::Approx(g_value).epsilon(1e-9));
                const auto& root = st.tree.root();
                CHECK(std::abs((1 + root.e1) - (1 - root.e2)) <= 1e-9);
                CHECK(st.tree.max_rule_violation() < 1e-12);
            });
            CHECK(reports >= 1);
        }
    }
}

TEST_CASE("scaling the raw weights does not change the optimum") {
    Rng rng(12);
    const ReturnGrid g(1.0, 0, 7);
    const auto s1 = random_marginal(rng, g);
    const auto s2 = random_marginal(rng, g);
    const auto r = sweep_optimal_portfolio(s1, s2, 3.5, objective("ra_w"));
    const Portfolio scaled = normalized_portfolio(r.portfolio.weights * 7.0);
    CHECK(worst_case_two_stock(s1, s2, scaled, 3.5, objective("ra_w")) == doctest::Approx(r.value));
}
