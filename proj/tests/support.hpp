#pragma once

// Shared fixtures and randomized-case generators for the test suites.

#include <random>
#include <string>
#include <vector>

#include "natalloc/distortion.hpp"
#include "natalloc/level_view.hpp"
#include "natalloc/outcome_table.hpp"

namespace natalloc::test {

// Two independent lines, X1 in {0,9,10} and X2 in {0,1,90} with masses
// (1/2,1/4,1/4), listed in the ascending-total order used throughout the
// worked example (the two total-10 rows appear as (9,1) then (10,0)).
inline OutcomeTable eg1_table() {
    const double s = 1.0 / 16.0;
    return make_outcome_table(
        {"one", "two"},
        {{4 * s, {0, 0}},
         {2 * s, {0, 1}},
         {2 * s, {9, 0}},
         {1 * s, {9, 1}},
         {2 * s, {10, 0}},
         {1 * s, {10, 1}},
         {2 * s, {0, 90}},
         {1 * s, {9, 90}},
         {1 * s, {10, 90}}});
}

// X1 in {0,1}, X2 in {0,2}, independent uniform: levels 0,1,2,3, p=1/4 each.
inline OutcomeTable toy_table() {
    return make_outcome_table({"a", "b"},
                              {{0.25, {0, 0}},
                               {0.25, {0, 2}},
                               {0.25, {1, 0}},
                               {0.25, {1, 2}}});
}

// Frozen reference values, computed independently (exact rational arithmetic
// where possible) before the library existed.
namespace frozen {
inline constexpr double eg1_rho = 51.388685015022155;
inline constexpr double eg1_alloc_1 = 6.2048487696343315;
inline constexpr double eg1_alloc_2 = 45.18383624538782;
inline constexpr double eg1_naive_1 = 6.208543078484466;
inline constexpr double eg1_naive_2 = 45.180141936537694;
inline constexpr double eg1_swapped_1 = 6.200856590584018;
inline constexpr double eg1_swapped_2 = 45.18782842443814;
inline constexpr double eg1_q_at_10 = 0.14808978681160012;
inline constexpr double eg1_tvar_75 = 94.75;          // (1/0.25)*(2*90+99+100)/16
inline constexpr double toy_rho = 2.0731321849709863;  // (sqrt3+sqrt2+1)/2
inline constexpr double toy_alloc_1 = 0.658918622597891;
inline constexpr double toy_alloc_2 = 1.4142135623730951;
inline constexpr double toy_beta2_15 = 0.7642977396044842;  // (q(2)+2/3*q(3))/sqrt(1/2)
inline constexpr double toy_margin2_15 = 0.12377344785321431;
inline constexpr double toy_iota_15 = 0.7071067811865478;
inline constexpr double toy_equity2_15 = 0.17504208861569465;
}  // namespace frozen

inline void normalize_probs(std::vector<OutcomeTable::Row>& rows) {
    StableSum t;
    for (const auto& r : rows) t.add(r.prob);
    const double total = t.value();
    for (auto& r : rows) r.prob /= total;
    StableSum t2;
    for (const auto& r : rows) t2.add(r.prob);
    std::size_t big = 0;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].prob > rows[big].prob) big = i;
    rows[big].prob += 1.0 - t2.value();
}

// Random table; tie_bias > 0 draws losses from a small integer lattice so
// collapsing has real work to do.
inline OutcomeTable random_table(std::mt19937_64& rng, std::size_t max_lines = 5,
                                 std::size_t max_rows = 30, double tie_bias = 0.5) {
    std::uniform_int_distribution<std::size_t> nl(1, max_lines), nr(2, max_rows);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t lines = nl(rng), rows = nr(rng);
    const bool lattice = u(rng) < tie_bias;
    std::vector<OutcomeTable::Row> rs(rows);
    for (auto& r : rs) {
        r.prob = 0.01 + u(rng);
        r.losses.resize(lines);
        for (auto& l : r.losses)
            l = lattice ? static_cast<double>(std::uniform_int_distribution<int>(0, 6)(rng))
                        : 10.0 * u(rng);
    }
    normalize_probs(rs);
    std::vector<std::string> names(lines);
    for (std::size_t i = 0; i < lines; ++i) names[i] = "L" + std::to_string(i);
    return make_outcome_table(std::move(names), std::move(rs));
}

inline Distortion random_piecewise(std::mt19937_64& rng, std::size_t max_segments = 5) {
    std::uniform_int_distribution<std::size_t> ns(1, max_segments);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    const std::size_t m = ns(rng);
    std::vector<double> s{0.0};
    for (std::size_t k = 1; k < m; ++k) s.push_back(u(rng));
    s.push_back(1.0);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());

    std::vector<double> slope(s.size() - 1);
    double c = 1.0 + 3.0 * u(rng);
    for (auto& sl : slope) {
        sl = c;
        c *= 0.2 + 0.75 * u(rng);  // strictly decreasing: concave
    }
    Distortion::Knots knots{{0.0, 0.0}};
    for (std::size_t k = 0; k + 1 < s.size(); ++k)
        knots.emplace_back(s[k + 1], knots[k].second + slope[k] * (s[k + 1] - s[k]));
    const double top = knots.back().second;
    for (auto& [sk, gk] : knots) gk /= top;  // scale so g(1) = 1 exactly
    return Distortion::piecewise_linear(std::move(knots));
}

inline Distortion random_distortion(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
        case 0: return Distortion::identity();
        case 1: return Distortion::proportional_hazard(0.25 + 0.75 * u(rng));
        case 2: return Distortion::wang(2.0 * u(rng));
        default: return random_piecewise(rng);
    }
}

}  // namespace natalloc::test
