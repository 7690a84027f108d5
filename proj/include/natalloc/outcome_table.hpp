#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "natalloc/distortion.hpp"
#include "natalloc/level_view.hpp"
#include "natalloc/numeric.hpp"

namespace natalloc {

// Exact backend: finite joint outcome list, stable input order preserved.
struct OutcomeTable {
    struct Row {
        double prob;
        std::vector<double> losses;  // one per line, >= 0
    };
    std::vector<std::string> lines;
    std::vector<Row> rows;

    static constexpr double kTieQuantum = 1e-9;  // currency rounding for tie detection
};

inline OutcomeTable make_outcome_table(std::vector<std::string> lines,
                                       std::vector<OutcomeTable::Row> rows) {
    require(!lines.empty(), "outcome table needs at least one line");
    require(!rows.empty(), "outcome table needs at least one row");
    StableSum mass;
    for (const auto& r : rows) {
        require(r.prob > 0.0, "row probabilities must be positive");
        require(r.losses.size() == lines.size(), "row width must match line count");
        for (double l : r.losses) require(l >= 0.0, "losses must be nonnegative");
        mass.add(r.prob);
    }
    require(std::abs(mass.value() - 1.0) <= 1e-12, "row probabilities must sum to 1");
    return OutcomeTable{std::move(lines), std::move(rows)};
}

inline double row_total(const OutcomeTable::Row& r) {
    StableSum t;
    for (double l : r.losses) t.add(l);
    return t.value();
}

inline std::int64_t tie_key(double total, double quantum) {
    return std::llround(total / quantum);
}

namespace detail {

// Rows sorted by (rounded total, losses, prob): a canonical order, so that any
// permutation of the input collapses to bit-identical output.
inline std::vector<std::size_t> canonical_order(const OutcomeTable& t, double quantum) {
    std::vector<double> totals(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) totals[r] = row_total(t.rows[r]);
    std::vector<std::size_t> idx(t.rows.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const auto ka = tie_key(totals[a], quantum), kb = tie_key(totals[b], quantum);
        if (ka != kb) return ka < kb;
        if (t.rows[a].losses != t.rows[b].losses) return t.rows[a].losses < t.rows[b].losses;
        return t.rows[a].prob < t.rows[b].prob;
    });
    return idx;
}

}  // namespace detail

// One level per distinct total (after quantum rounding); kappa_i(x_j) is the
// probability-weighted mean of line-i losses among the tied rows.
inline LevelView collapse(const OutcomeTable& t,
                          double quantum = OutcomeTable::kTieQuantum) {
    const std::size_t m = t.lines.size();
    const auto idx = detail::canonical_order(t, quantum);

    std::vector<double> xs, ps;
    std::vector<std::vector<double>> kap(m);
    std::size_t r = 0;
    while (r < idx.size()) {
        const double x0 = row_total(t.rows[idx[r]]);
        const std::int64_t key = tie_key(x0, quantum);
        StableSum mass;
        std::vector<StableSum> wsum(m);
        std::size_t rr = r;
        for (; rr < idx.size(); ++rr) {
            const auto& row = t.rows[idx[rr]];
            if (tie_key(row_total(row), quantum) != key) break;
            mass.add(row.prob);
            for (std::size_t i = 0; i < m; ++i) wsum[i].add(row.prob * row.losses[i]);
        }
        const double pj = mass.value();
        xs.push_back(x0);  // representative: first canonical member's exact total
        ps.push_back(pj);
        for (std::size_t i = 0; i < m; ++i) kap[i].push_back(wsum[i].value() / pj);
        r = rr;
    }
    return make_level_view(t.lines, std::move(xs), std::move(ps), std::move(kap));
}

// Marginal view of a single line (collapse by that line's own losses).
inline LevelView marginal_view(const OutcomeTable& t, std::size_t i,
                               double quantum = OutcomeTable::kTieQuantum) {
    require(i < t.lines.size(), "line index out of range");
    OutcomeTable single;
    single.lines = {t.lines[i]};
    single.rows.reserve(t.rows.size());
    for (const auto& r : t.rows) single.rows.push_back({r.prob, {r.losses[i]}});
    return collapse(single, quantum);
}

// Equal-priority default waterfall: X_i if X <= a, else X_i * a / X.
inline std::vector<double> equal_priority_payments(const std::vector<double>& losses,
                                                   double a) {
    require(a >= 0.0, "asset level must be >= 0");
    StableSum t;
    for (double l : losses) {
        require(l >= 0.0, "losses must be nonnegative");
        t.add(l);
    }
    const double total = t.value();
    if (total <= a || total == 0.0) return losses;
    std::vector<double> pay(losses.size());
    const double ratio = a / total;
    for (std::size_t i = 0; i < losses.size(); ++i) pay[i] = losses[i] * ratio;
    // The waterfall must conserve min(X, a) with no rounding leakage: fold the
    // residual into the smallest positive payment (finest ulp, so the
    // correction registers) until a compensated re-sum reproduces a exactly.
    // The step is damped on sign flips; an undamped correction can land the
    // exact sum on a round-to-even tie and oscillate one ulp around a forever.
    double damp = 1.0, prev = 0.0;
    for (int pass = 0; pass < 64; ++pass) {
        StableSum paid;
        for (double x : pay) paid.add(x);
        const double resid = a - paid.value();
        if (resid == 0.0) break;
        if (prev != 0.0 && std::signbit(resid) != std::signbit(prev)) damp *= 0.5;
        prev = resid;
        const double step = damp * resid;
        std::size_t target = pay.size();
        for (std::size_t i = 0; i < pay.size(); ++i) {
            if (pay[i] <= 0.0 || pay[i] + step == pay[i] || pay[i] + step < 0.0) continue;
            if (target == pay.size() || pay[i] < pay[target]) target = i;
        }
        if (target == pay.size()) break;
        pay[target] += step;
    }
    return pay;
}

// P_i = E_Q[X_i] = sum_j kappa_i(x_j) q_j; components sum to rho_total(inf).
inline std::vector<double> natural_allocation_unlimited(const LevelView& v) {
    require(v.bound, "view must be bound to a distortion");
    std::vector<double> out(v.line_count());
    for (std::size_t i = 0; i < v.line_count(); ++i) {
        StableSum acc;
        for (std::size_t j = 0; j < v.size(); ++j) acc.add(v.kappa[i][j] * v.q[j]);
        out[i] = acc.value();
    }
    return out;
}

// Diagnostic only: per-row masses from g(S) differences in the table's given
// row order (stable-sorted by total, ties left in input order) WITHOUT
// collapsing. Demonstrates the ordering ambiguity the collapse resolves.
inline std::vector<double> naive_row_order_allocation(const OutcomeTable& t,
                                                      const Distortion& d,
                                                      double quantum = OutcomeTable::kTieQuantum) {
    std::vector<double> totals(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) totals[r] = row_total(t.rows[r]);
    std::vector<std::size_t> idx(t.rows.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return tie_key(totals[a], quantum) < tie_key(totals[b], quantum);
    });

    std::vector<StableSum> acc(t.lines.size());
    StableSum survival_tail(1.0);
    double g_prev = 1.0;
    for (std::size_t r : idx) {
        survival_tail.add(-t.rows[r].prob);
        const double s = std::max(0.0, survival_tail.value());
        const double g_cur = d.g(std::min(1.0, s));
        const double qr = g_prev - g_cur;
        g_prev = g_cur;
        for (std::size_t i = 0; i < t.lines.size(); ++i)
            acc[i].add(t.rows[r].losses[i] * qr);
    }
    std::vector<double> out(t.lines.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = acc[i].value();
    return out;
}

// Joint table for independent single-line tables (property-test helper).
inline OutcomeTable product_of_independents(const std::vector<OutcomeTable>& parts) {
    require(!parts.empty(), "need at least one table");
    std::vector<std::string> lines;
    for (const auto& t : parts) {
        require(t.lines.size() == 1, "product parts must be single-line tables");
        lines.push_back(t.lines[0]);
    }
    std::vector<OutcomeTable::Row> rows{{1.0, {}}};
    for (const auto& t : parts) {
        std::vector<OutcomeTable::Row> next;
        next.reserve(rows.size() * t.rows.size());
        for (const auto& base : rows)
            for (const auto& r : t.rows) {
                OutcomeTable::Row nr = base;
                nr.prob *= r.prob;
                nr.losses.push_back(r.losses[0]);
                next.push_back(std::move(nr));
            }
        rows = std::move(next);
    }
    // renormalise the product masses so the sum-to-1 invariant holds exactly
    StableSum mass;
    for (const auto& r : rows) mass.add(r.prob);
    const double m = mass.value();
    if (m != 1.0)
        for (auto& r : rows) r.prob /= m;
    StableSum mass2;
    for (const auto& r : rows) mass2.add(r.prob);
    const double resid = 1.0 - mass2.value();
    if (resid != 0.0) {
        auto it = std::max_element(rows.begin(), rows.end(),
                                   [](const auto& a, const auto& b) { return a.prob < b.prob; });
        it->prob += resid;
    }
    return make_outcome_table(std::move(lines), std::move(rows));
}

}  // namespace natalloc
