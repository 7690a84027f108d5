#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "natalloc/distortion.hpp"
#include "natalloc/numeric.hpp"

namespace natalloc {

// Canonical collapsed representation shared by both backends: ascending
// distinct total-loss levels with objective mass p, survival S, per-line
// conditional means kappa_i(x_j) = E[X_i | X = x_j], and, once a distortion
// is bound, g(S) and the risk-adjusted mass q_j = g(S_{j-1}) - g(S_j), S_0 := 1.
struct LevelView {
    std::vector<std::string> lines;
    std::vector<double> x;                   // ascending distinct totals
    std::vector<double> p;                   // objective mass, > 0
    std::vector<double> S;                   // P(X > x_j), strictly decreasing to 0
    std::vector<std::vector<double>> kappa;  // [line][level]

    std::vector<double> gS;  // filled by bind_distortion
    std::vector<double> q;
    bool bound = false;

    std::size_t size() const { return x.size(); }
    std::size_t line_count() const { return lines.size(); }
};

inline LevelView make_level_view(std::vector<std::string> lines, std::vector<double> x,
                                 std::vector<double> p,
                                 std::vector<std::vector<double>> kappa) {
    const std::size_t n = x.size();
    require(n > 0, "level view needs at least one level");
    require(p.size() == n, "level/mass size mismatch");
    require(kappa.size() == lines.size(), "kappa rows must match line count");
    for (const auto& row : kappa) require(row.size() == n, "kappa row size mismatch");

    StableSum mass;
    for (std::size_t j = 0; j < n; ++j) {
        require(p[j] > 0.0, "level masses must be positive");
        require(x[j] >= 0.0, "levels must be nonnegative");
        if (j > 0) require(x[j] > x[j - 1], "levels must be strictly ascending");
        mass.add(p[j]);
        StableSum row;
        for (const auto& k : kappa) row.add(k[j]);
        check_invariant(std::abs(row.value() - x[j]) <= 1e-9 * std::max(1.0, x[j]),
                        "kappa columns must sum to the level");
    }
    require(std::abs(mass.value() - 1.0) <= 1e-12, "level masses must sum to 1");

    LevelView v;
    v.lines = std::move(lines);
    v.x = std::move(x);
    v.p = std::move(p);
    v.kappa = std::move(kappa);
    // survival by suffix accumulation: S_{n-1} = 0 exactly
    v.S.assign(n, 0.0);
    StableSum tail;
    for (std::size_t j = n; j-- > 0;) {
        v.S[j] = tail.value();
        tail.add(v.p[j]);
    }
    return v;
}

inline LevelView bind_distortion(LevelView v, const Distortion& d) {
    const std::size_t n = v.size();
    v.gS.assign(n, 0.0);
    v.q.assign(n, 0.0);
    if (d.family() == Family::identity) {
        // q_j = S_{j-1} - S_j = p_j analytically; assign directly so that
        // identity pricing reproduces objective statistics bit for bit.
        v.gS = v.S;
        v.q = v.p;
    } else {
        double g_prev = 1.0;  // g(S_0) with S_0 := 1
        for (std::size_t j = 0; j < n; ++j) {
            v.gS[j] = d.g(v.S[j]);
            v.q[j] = g_prev - v.gS[j];
            g_prev = v.gS[j];
        }
    }
    v.bound = true;
    return v;
}

// Right-continuous step survival P(X > x).
inline double survival(const LevelView& v, double xq) {
    require(xq >= 0.0, "survival argument must be >= 0");
    const auto it = std::upper_bound(v.x.begin(), v.x.end(), xq);
    if (it == v.x.begin()) return 1.0;  // below the lowest level
    return v.S[static_cast<std::size_t>(it - v.x.begin()) - 1];
}

// index of the first level strictly above x (levels <= x lie before it)
inline std::size_t tail_index(const LevelView& v, double xq) {
    return static_cast<std::size_t>(std::upper_bound(v.x.begin(), v.x.end(), xq) -
                                    v.x.begin());
}

inline double expected_limited(const LevelView& v, double a) {
    require(a >= 0.0, "asset level must be >= 0");
    StableSum acc;
    for (std::size_t j = 0; j < v.size(); ++j) acc.add(std::min(v.x[j], a) * v.p[j]);
    return acc.value();
}

inline double mean(const LevelView& v) { return expected_limited(v, kInf); }

// rho_g(X ^ a) = integral_0^a g(S(x)) dx, exact over the step function.
// For a = inf uses the Abel-summed form sum_j x_j q_j.
inline double rho_total(const LevelView& v, double a = kInf) {
    require(v.bound, "view must be bound to a distortion");
    require(a >= 0.0, "asset level must be >= 0");
    StableSum acc;
    if (std::isinf(a)) {
        for (std::size_t j = 0; j < v.size(); ++j) acc.add(v.x[j] * v.q[j]);
        return acc.value();
    }
    double x_prev = 0.0, g_prev = 1.0;  // g(S)=1 on [0, x_1)
    for (std::size_t j = 0; j < v.size() && x_prev < a; ++j) {
        acc.add(g_prev * (std::min(v.x[j], a) - x_prev));
        x_prev = v.x[j];
        g_prev = v.gS[j];
    }
    if (x_prev < a && v.S.back() > 0.0)
        acc.add(g_prev * (a - x_prev));  // unreachable for exact views (S ends at 0)
    return acc.value();
}

// TVaR_p = (1/(1-p)) * integral_p^1 q(t) dt on the step (lower) quantile
// function, computed in survival coordinates for tail accuracy.
inline double tvar(const LevelView& v, double p) {
    require_domain(p >= 0.0 && p < 1.0, "tvar level must lie in [0,1)");
    const double s_cut = 1.0 - p;
    StableSum acc;
    double s_prev = 1.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
        const double hi = std::min(s_prev, s_cut);
        if (hi > v.S[j]) acc.add(v.x[j] * (hi - v.S[j]));
        s_prev = v.S[j];
    }
    return acc.value() / s_cut;
}

inline double price_via_tvar_mixture(const TVaRMixture& m, const LevelView& v) {
    StableSum acc;
    for (const auto& [p, mu] : m.weights) acc.add(mu * tvar(v, p));
    return acc.value();
}

}  // namespace natalloc
