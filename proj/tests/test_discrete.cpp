#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "natalloc/distortion.hpp"
#include "natalloc/level_view.hpp"
#include "natalloc/outcome_table.hpp"
#include "support.hpp"

using namespace natalloc;
using Catch::Matchers::WithinAbs;
namespace frozen = natalloc::test::frozen;

TEST_CASE("collapse of the worked example") {
    const auto v = collapse(test::eg1_table());
    REQUIRE(v.size() == 8);
    const std::vector<double> x{0, 1, 9, 10, 11, 90, 99, 100};
    const std::vector<double> S{0.75, 0.625, 0.5, 0.3125, 0.25, 0.125, 0.0625, 0.0};
    for (std::size_t j = 0; j < 8; ++j) {
        CHECK(v.x[j] == x[j]);
        CHECK(v.S[j] == S[j]);
    }
    // The two total-10 outcomes (9,1) and (10,0) merge: p = 3/16 and the
    // conditional split is (29/3, 1/3).
    CHECK(v.p[3] == 3.0 / 16.0);
    CHECK_THAT(v.kappa[0][3], WithinAbs(29.0 / 3.0, 1e-12));
    CHECK_THAT(v.kappa[1][3], WithinAbs(1.0 / 3.0, 1e-12));
    // Unmerged levels keep the exact row losses.
    CHECK(v.kappa[0][5] == 0.0);
    CHECK(v.kappa[1][5] == 90.0);
}

TEST_CASE("collapse basics") {
    const auto one = collapse(make_outcome_table({"a", "b"}, {{1.0, {3, 4}}}));
    REQUIRE(one.size() == 1);
    CHECK(one.x[0] == 7.0);
    CHECK(one.S[0] == 0.0);
    CHECK(one.kappa[0][0] == 3.0);
    CHECK(one.kappa[1][0] == 4.0);

    const auto toy = collapse(test::toy_table());
    REQUIRE(toy.size() == 4);
    CHECK(toy.x == std::vector<double>{0, 1, 2, 3});
    CHECK(toy.kappa[0][3] == 1.0);
    CHECK(toy.kappa[1][3] == 2.0);

    const auto marg = marginal_view(test::eg1_table(), 1);
    REQUIRE(marg.size() == 3);  // X2 in {0, 1, 90}
    CHECK(marg.x == std::vector<double>{0, 1, 90});
    CHECK(marg.p == std::vector<double>{0.5, 0.25, 0.25});
}

TEST_CASE("collapse is invariant under row permutations, bit for bit") {
    std::mt19937_64 rng(7);
    auto check_shuffled = [&](const OutcomeTable& t) {
        const auto base = collapse(t);
        OutcomeTable shuf = t;
        std::shuffle(shuf.rows.begin(), shuf.rows.end(), rng);
        const auto v = collapse(shuf);
        CHECK(v.x == base.x);
        CHECK(v.p == base.p);
        CHECK(v.S == base.S);
        CHECK(v.kappa == base.kappa);
    };
    check_shuffled(test::eg1_table());
    for (int trial = 0; trial < 100; ++trial) check_shuffled(test::random_table(rng));
}

TEST_CASE("binding a distortion fills g(S) and the adjusted masses") {
    const auto v = bind_distortion(collapse(test::eg1_table()),
                                   Distortion::proportional_hazard(0.5));
    REQUIRE(v.bound);
    // q at the merged total-10 level, against the independently computed value.
    CHECK_THAT(v.q[3], WithinAbs(frozen::eg1_q_at_10, 1e-15));
    // Masses telescope: sum q = g(1) - g(0) = 1.
    StableSum qs;
    for (double q : v.q) qs.add(q);
    CHECK_THAT(qs.value(), WithinAbs(1.0, 1e-15));

    // Identity binding reproduces the objective masses exactly.
    const auto id = bind_distortion(collapse(test::eg1_table()), Distortion::identity());
    CHECK(id.q == id.p);
    CHECK(id.gS == id.S);
}

TEST_CASE("survival and limited expectation queries") {
    const auto v = collapse(test::eg1_table());
    CHECK(survival(v, 9.0) == 0.5);
    CHECK(survival(v, 9.5) == 0.5);
    CHECK(survival(v, 0.0) == 0.75);
    CHECK(survival(v, 1000.0) == 0.0);
    CHECK_THROWS_AS(survival(v, -1.0), std::invalid_argument);

    CHECK_THAT(expected_limited(v, kInf), WithinAbs(27.5, 1e-12));
    CHECK(expected_limited(v, 0.0) == 0.0);
    CHECK_THAT(expected_limited(v, 10.0), WithinAbs(6.25, 1e-12));  // (2+18+80)/16
    CHECK_THAT(mean(marginal_view(test::eg1_table(), 0)), WithinAbs(4.75, 1e-12));
    CHECK_THAT(mean(marginal_view(test::eg1_table(), 1)), WithinAbs(22.75, 1e-12));
}

TEST_CASE("distorted totals") {
    const auto v = bind_distortion(collapse(test::eg1_table()),
                                   Distortion::proportional_hazard(0.5));
    CHECK_THAT(rho_total(v, kInf), WithinAbs(frozen::eg1_rho, 1e-9));

    const auto toy = bind_distortion(collapse(test::toy_table()),
                                     Distortion::proportional_hazard(0.5));
    CHECK_THAT(rho_total(toy, kInf), WithinAbs(frozen::toy_rho, 1e-12));
    // Layer form at a >= max total agrees with the unlimited form.
    CHECK_THAT(rho_total(toy, 3.0), WithinAbs(frozen::toy_rho, 1e-12));
    CHECK(rho_total(toy, 0.0) == 0.0);
    // One layer by hand: integral over [0,1) of g(3/4).
    CHECK_THAT(rho_total(toy, 1.0), WithinAbs(std::sqrt(0.75), 1e-15));

    // Identity binding prices at the objective mean.
    const auto id = bind_distortion(collapse(test::eg1_table()), Distortion::identity());
    CHECK_THAT(rho_total(id, kInf), WithinAbs(27.5, 1e-12));
}

TEST_CASE("tail value at risk on step quantiles") {
    const auto v = collapse(test::eg1_table());
    CHECK_THAT(tvar(v, 0.0), WithinAbs(27.5, 1e-12));
    CHECK_THAT(tvar(v, 0.75), WithinAbs(frozen::eg1_tvar_75, 1e-12));
    CHECK_THAT(tvar(v, 14.0 / 16.0), WithinAbs(99.5, 1e-12));  // mean of top two
    CHECK_THAT(tvar(v, 15.0 / 16.0), WithinAbs(100.0, 1e-12));
    CHECK_THROWS_AS(tvar(v, 1.0), std::domain_error);
    CHECK_THROWS_AS(tvar(v, -0.1), std::domain_error);

    const auto coin = collapse(make_outcome_table({"c"}, {{0.5, {0}}, {0.5, {10}}}));
    CHECK_THAT(tvar(coin, 0.5), WithinAbs(10.0, 1e-15));
    CHECK_THAT(tvar(coin, 0.25), WithinAbs(20.0 / 3.0, 1e-15));

    // Mixture pricing: 0.5 * mean + 0.5 * tvar_{0.5}.
    const auto mix = make_tvar_mixture({{0.0, 0.5}, {0.5, 0.5}});
    CHECK_THAT(price_via_tvar_mixture(mix, coin), WithinAbs(7.5, 1e-15));
}

TEST_CASE("mixture pricing equals pricing under the matching distortion") {
    std::mt19937_64 rng(20260815);
    for (int trial = 0; trial < 200; ++trial) {
        const auto t = test::random_table(rng);
        const auto d = test::random_piecewise(rng);
        const auto v = bind_distortion(collapse(t), d);
        const double direct = rho_total(v, kInf);
        const double via_mix = price_via_tvar_mixture(to_tvar_mixture(d), v);
        CHECK_THAT(via_mix, WithinAbs(direct, 1e-9 * std::max(1.0, std::abs(direct))));
    }
}

TEST_CASE("equal-priority waterfall") {
    CHECK(equal_priority_payments({3, 4}, 10.0) == std::vector<double>{3, 4});
    CHECK(equal_priority_payments({0, 0}, 5.0) == std::vector<double>{0, 0});
    const auto pay = equal_priority_payments({1000, 5000}, 3272.0);
    CHECK_THAT(pay[0], WithinAbs(1000.0 * 3272 / 6000, 1e-9));
    CHECK_THAT(pay[1], WithinAbs(5000.0 * 3272 / 6000, 1e-9));
    CHECK(pay[0] + pay[1] == 3272.0);  // conservation is exact, not approximate
    CHECK_THROWS_AS(equal_priority_payments({1, 2}, -1.0), std::invalid_argument);

    // Exact conservation across random splits.
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> losses(1 + trial % 7);
        for (auto& l : losses) l = u(rng);
        const double total = [&] {
            StableSum s;
            for (double l : losses) s.add(l);
            return s.value();
        }();
        const double a = u(rng);
        const auto p = equal_priority_payments(losses, a);
        StableSum paid;
        for (double x : p) paid.add(x);
        CHECK(paid.value() == std::min(total, a));
    }
}

TEST_CASE("unlimited premium split of the worked example") {
    const auto d = Distortion::proportional_hazard(0.5);
    const auto v = bind_distortion(collapse(test::eg1_table()), d);
    const auto alloc = natural_allocation_unlimited(v);
    CHECK_THAT(alloc[0], WithinAbs(frozen::eg1_alloc_1, 1e-12));
    CHECK_THAT(alloc[1], WithinAbs(frozen::eg1_alloc_2, 1e-12));

    const auto toyv = bind_distortion(collapse(test::toy_table()), d);
    const auto toya = natural_allocation_unlimited(toyv);
    CHECK_THAT(toya[0], WithinAbs(frozen::toy_alloc_1, 1e-12));
    CHECK_THAT(toya[1], WithinAbs(frozen::toy_alloc_2, 1e-12));
}

TEST_CASE("row-order masses depend on how ties are listed; collapse does not") {
    const auto d = Distortion::proportional_hazard(0.5);
    const auto t = test::eg1_table();
    const auto printed = naive_row_order_allocation(t, d);
    CHECK_THAT(printed[0], WithinAbs(frozen::eg1_naive_1, 1e-12));
    CHECK_THAT(printed[1], WithinAbs(frozen::eg1_naive_2, 1e-12));

    OutcomeTable swapped = t;
    std::swap(swapped.rows[3], swapped.rows[4]);  // the two total-10 rows
    const auto sw = naive_row_order_allocation(swapped, d);
    CHECK_THAT(sw[0], WithinAbs(frozen::eg1_swapped_1, 1e-12));
    CHECK_THAT(sw[1], WithinAbs(frozen::eg1_swapped_2, 1e-12));
    CHECK(printed[0] != sw[0]);

    // Both row orders bracket the collapsed answer and sum to the same total.
    const auto v = bind_distortion(collapse(t), d);
    const auto alloc = natural_allocation_unlimited(v);
    CHECK(alloc[0] > std::min(printed[0], sw[0]));
    CHECK(alloc[0] < std::max(printed[0], sw[0]));
    CHECK_THAT(printed[0] + printed[1], WithinAbs(alloc[0] + alloc[1], 1e-12));
    CHECK_THAT(sw[0] + sw[1], WithinAbs(alloc[0] + alloc[1], 1e-12));
}

TEST_CASE("premium components sum to the total across random portfolios") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 300; ++trial) {
        const auto t = test::random_table(rng, 8, 40);
        const auto d = test::random_distortion(rng);
        const auto v = bind_distortion(collapse(t), d);
        const auto alloc = natural_allocation_unlimited(v);
        StableSum s;
        for (double a : alloc) s.add(a);
        const double total = rho_total(v, kInf);
        CHECK_THAT(s.value(), WithinAbs(total, 1e-9 * std::max(1.0, std::abs(total))));
    }
}

TEST_CASE("no line pays more inside the pool than alone") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        const auto t = test::random_table(rng);
        const auto d = test::random_distortion(rng);
        const auto v = bind_distortion(collapse(t), d);
        const auto alloc = natural_allocation_unlimited(v);
        for (std::size_t i = 0; i < t.lines.size(); ++i) {
            const double standalone =
                rho_total(bind_distortion(marginal_view(t, i), d), kInf);
            CHECK(alloc[i] <= standalone + 1e-10);
        }
    }
}

TEST_CASE("independent lines never subsidise: premium at least the mean") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t k = 2 + trial % 3;
        std::vector<OutcomeTable> parts;
        for (std::size_t i = 0; i < k; ++i) {
            std::vector<OutcomeTable::Row> rows(2 + static_cast<std::size_t>(4 * u(rng)));
            for (auto& r : rows) r = {0.01 + u(rng), {6.0 * u(rng)}};
            test::normalize_probs(rows);
            parts.push_back(make_outcome_table({"L" + std::to_string(i)}, std::move(rows)));
        }
        const auto joint = product_of_independents(parts);
        const auto d = test::random_distortion(rng);
        const auto v = bind_distortion(collapse(joint), d);
        const auto alloc = natural_allocation_unlimited(v);
        for (std::size_t i = 0; i < k; ++i)
            CHECK(alloc[i] >= mean(marginal_view(joint, i)) - 1e-10);
    }
}

TEST_CASE("splitting the total into layers is premium-neutral") {
    // Comonotonic split X = (X ^ a) + (X - a)^+ prices additively.
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const auto t = test::random_table(rng);
        const auto d = test::random_distortion(rng);
        const auto v = bind_distortion(collapse(t), d);
        const double a = u(rng) * v.x.back();

        std::vector<OutcomeTable::Row> excess;
        for (const auto& r : t.rows)
            excess.push_back({r.prob, {std::max(row_total(r) - a, 0.0)}});
        const auto ve = bind_distortion(collapse(make_outcome_table({"xs"}, std::move(excess))), d);
        CHECK_THAT(rho_total(v, a) + rho_total(ve, kInf),
                   WithinAbs(rho_total(v, kInf), 1e-10 * std::max(1.0, rho_total(v, kInf))));
    }
}

TEST_CASE("claim-count thinning shows up in the conditional split") {
    // Two compound Poisson lines (rates 2 and 3, shared severity on {1,2}):
    // claims are exchangeable, so kappa_1(x)/x should sit near 2/5 wherever
    // the level carries real mass.
    std::mt19937_64 rng(20260815);
    std::poisson_distribution<int> n1(2.0), n2(3.0);
    std::uniform_int_distribution<int> sev(1, 2);
    const std::size_t n = 1 << 17;  // power of two: row masses sum to 1 exactly
    std::vector<OutcomeTable::Row> rows;
    rows.reserve(n);
    const double w = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
        double x1 = 0, x2 = 0;
        for (int c = n1(rng); c-- > 0;) x1 += sev(rng);
        for (int c = n2(rng); c-- > 0;) x2 += sev(rng);
        rows.push_back({w, {x1, x2}});
    }
    const auto v = collapse(make_outcome_table({"thin", "thick"}, std::move(rows)));
    int checked = 0;
    for (std::size_t j = 0; j < v.size(); ++j)
        if (v.x[j] > 0.0 && v.p[j] >= 0.02) {
            CHECK_THAT(v.kappa[0][j] / v.x[j], WithinAbs(0.4, 0.02));
            ++checked;
        }
    CHECK(checked >= 5);
}
