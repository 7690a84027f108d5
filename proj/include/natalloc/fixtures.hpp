#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "natalloc/allocation.hpp"
#include "natalloc/calibrate.hpp"
#include "natalloc/grid.hpp"
#include "natalloc/io.hpp"
#include "natalloc/level_view.hpp"
#include "natalloc/outcome_table.hpp"

// Embedded inputs and expected-value tables for the packaged examples, shared
// by the `reproduce` subcommand and the acceptance tests so both compare the
// same computations against the same constants.
namespace natalloc::fixtures {

// Two-line discrete table with one pair of tied outcomes (rows 4 and 5).
inline constexpr const char* kEg1Csv =
    "prob,one,two\n"
    "4/16,0,0\n"
    "2/16,0,1\n"
    "2/16,9,0\n"
    "1/16,9,1\n"
    "2/16,10,0\n"
    "1/16,10,1\n"
    "2/16,0,90\n"
    "1/16,9,90\n"
    "1/16,10,90\n";

inline OutcomeTable eg1_table() {
    std::istringstream in(kEg1Csv);
    return read_outcome_table_csv(in);
}

// Thin gamma line plus a translated lognormal; assets at the 563-year level.
inline constexpr const char* kEg2PortfolioJson = R"({
  "lines": [
    {"name": "thin", "kind": "gamma", "mean": 1, "cv": 0.25},
    {"name": "thick", "kind": "shifted_lognormal",
     "shift": 0.3, "factor": 0.7, "mean": 1, "cv": 1.25}
  ],
  "grid": {"h": 0.015625, "tail_tol": 1e-10}
})";
inline constexpr double kEg2Assets = 12.5;
inline constexpr double kEg2WangLambda = 0.755;
inline constexpr double kEg2TargetReturn = 0.10;

// A certain loss of 1000 pooled with a volatile lognormal line; assets at the
// 90th percentile of the pooled loss.
inline constexpr const char* kPriorityPortfolioJson = R"({
  "lines": [
    {"name": "fixed", "kind": "point_mass", "mean": 1000},
    {"name": "variable", "kind": "lognormal", "mean": 1000, "cv": 2}
  ],
  "grid": {"h": 1.0, "tail_tol": 1e-10}
})";
inline constexpr double kPriorityAssets = 3272.0;

// One comparison row of a reproduction table.
struct Check {
    enum class Mode {
        abs,       // |computed - expected| <= tol
        rel,       // |computed - expected| <= tol * |expected|
        printed,   // round computed to `sig` significant digits, then abs
        interval,  // lo <= computed <= hi
    };
    std::string name;
    double computed = 0.0;
    double expected = 0.0;
    double tol = 0.0;
    Mode mode = Mode::abs;
    int sig = 7;
    double lo = 0.0, hi = 0.0;

    static double round_sig(double v, int digits) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.*g", digits, v);
        return std::strtod(buf, nullptr);
    }

    bool pass() const {
        switch (mode) {
            case Mode::abs:
                return std::abs(computed - expected) <= tol;
            case Mode::rel:
                return std::abs(computed - expected) <= tol * std::abs(expected);
            case Mode::printed:
                return std::abs(round_sig(computed, sig) - expected) <= tol;
            case Mode::interval:
                return lo <= computed && computed <= hi;
        }
        return false;
    }
};

inline Check abs_check(std::string name, double computed, double expected, double tol) {
    Check c;
    c.name = std::move(name);
    c.computed = computed;
    c.expected = expected;
    c.tol = tol;
    c.mode = Check::Mode::abs;
    return c;
}

inline Check rel_check(std::string name, double computed, double expected, double tol) {
    Check c = abs_check(std::move(name), computed, expected, tol);
    c.mode = Check::Mode::rel;
    return c;
}

// Constants are transcribed at their published precision (7 or 8 significant
// digits); the computed value is rounded to the same precision first.
inline Check printed_check(std::string name, double computed, double expected,
                           int sig) {
    Check c = abs_check(std::move(name), computed, expected, 1e-6);
    c.mode = Check::Mode::printed;
    c.sig = sig;
    return c;
}

inline Check interval_check(std::string name, double computed, double lo, double hi) {
    Check c;
    c.name = std::move(name);
    c.computed = computed;
    c.expected = 0.5 * (lo + hi);
    c.mode = Check::Mode::interval;
    c.lo = lo;
    c.hi = hi;
    return c;
}

namespace detail {

inline double line_mean(const LevelView& v, std::size_t i) {
    StableSum s;
    for (std::size_t j = 0; j < v.size(); ++j) s.add(v.kappa[i][j] * v.p[j]);
    return s.value();
}

inline double total_sd(const LevelView& v) {
    StableSum m1, m2;
    for (std::size_t j = 0; j < v.size(); ++j) {
        m1.add(v.x[j] * v.p[j]);
        m2.add(v.x[j] * v.x[j] * v.p[j]);
    }
    const double mean = m1.value();
    return std::sqrt(m2.value() - mean * mean);
}

}  // namespace detail

// Exact two-line table: means, total premium, the collapsed allocation, the
// two row-order allocations, and the tied-level mass and conditional means.
inline std::vector<Check> eg1_checks() {
    const auto t = eg1_table();
    const auto v = collapse(t);
    const auto d = Distortion::proportional_hazard(0.5);
    const Allocation al(bind_distortion(v, d));

    auto swapped = t;
    std::swap(swapped.rows[3], swapped.rows[4]);  // the tied pair
    const auto naive = naive_row_order_allocation(t, d);
    const auto naive_sw = naive_row_order_allocation(swapped, d);

    const auto& bv = al.view();
    std::size_t j10 = bv.size();
    for (std::size_t j = 0; j < bv.size(); ++j)
        if (bv.x[j] == 10.0) j10 = j;
    require(j10 < bv.size(), "eg1 must have a level at 10");

    std::vector<Check> out;
    out.push_back(printed_check("mean_one", detail::line_mean(v, 0), 4.75, 7));
    out.push_back(printed_check("mean_two", detail::line_mean(v, 1), 22.75, 7));
    out.push_back(printed_check("premium_total", rho_total(al.view(), kInf),
                                51.38869, 7));
    out.push_back(printed_check("alloc_one", al.premium_cumulative(0, kInf),
                                6.2048488, 8));
    out.push_back(printed_check("alloc_two", al.premium_cumulative(1, kInf),
                                45.183836, 8));
    out.push_back(printed_check("row_order_one", naive[0], 6.208543, 7));
    out.push_back(printed_check("row_order_two", naive[1], 45.18014, 7));
    out.push_back(printed_check("row_order_swapped_one", naive_sw[0], 6.200857, 7));
    out.push_back(printed_check("row_order_swapped_two", naive_sw[1], 45.18783, 7));
    out.push_back(printed_check("mass_at_10", bv.q[j10], 0.1480898, 7));
    out.push_back(abs_check("cond_mean_one_at_10", bv.kappa[0][j10], 29.0 / 3.0, 1e-6));
    out.push_back(abs_check("cond_mean_two_at_10", bv.kappa[1][j10], 1.0 / 3.0, 1e-6));
    return out;
}

// Equal-priority recoveries for the certain-loss-plus-lognormal pool.
inline std::vector<Check> priority_checks() {
    const auto spec = portfolio_from_json(nlohmann::json::parse(kPriorityPortfolioJson));
    const auto pooled = grid_view(spec.lines, spec.grid);
    const auto lognormal_only =
        line_view(spec.lines[1].first, discretize(spec.lines[1].second, spec.grid));
    const Allocation al(bind_distortion(pooled, Distortion::identity()));

    const double q90 = matched_asset_level(lognormal_only, 0.9);
    const double rec_fixed = al.loss_cumulative(0, kPriorityAssets);
    const double rec_variable = al.loss_cumulative(1, kPriorityAssets);

    std::vector<Check> out;
    out.push_back(abs_check("lognormal_q90", q90, 2272.0, 1.0));
    out.push_back(abs_check("lognormal_limited_mean",
                            expected_limited(lognormal_only, 2272.0), 732.3, 1.0));
    out.push_back(abs_check("recovery_fixed", rec_fixed, 967.5, 1.0));
    out.push_back(abs_check("recovery_variable", rec_variable, 764.8, 1.0));
    out.push_back(abs_check("pooling_transfer", 1000.0 - rec_fixed, 32.5, 1.0));
    return out;
}

inline LevelView eg2_view() {
    const auto spec = portfolio_from_json(nlohmann::json::parse(kEg2PortfolioJson));
    return grid_view(spec.lines, spec.grid);
}

// Thick/thin pool under the Wang transform: report statistics at a = 12.5,
// stand-alone comparisons at the matched return period, and the two curve
// landmarks (thin margin-density zero crossing, first conditional-mean peak).
inline std::vector<Check> eg2_checks() {
    const auto spec = portfolio_from_json(nlohmann::json::parse(kEg2PortfolioJson));
    const auto v = grid_view(spec.lines, spec.grid);
    const Allocation al(bind_distortion(v, Distortion::wang(kEg2WangLambda)));
    const auto rep = al.report(kEg2Assets);

    std::vector<Check> out;
    const double mean = expected_limited(v, kInf);
    out.push_back(abs_check("total_mean", mean, 2.0, 0.002));
    out.push_back(abs_check("total_cv", detail::total_sd(v) / mean, 0.637, 0.002));
    out.push_back(interval_check("survival_at_assets", survival(v, kEg2Assets),
                                 1.0 / 620.0, 1.0 / 510.0));

    out.push_back(rel_check("premium_thin", rep.premium[0], 1.057, 0.02));
    out.push_back(rel_check("premium_thick", rep.premium[1], 1.889, 0.02));
    out.push_back(abs_check("loss_ratio_thin", rep.loss_ratio[0], 0.946, 0.02));
    out.push_back(abs_check("loss_ratio_thick", rep.loss_ratio[1], 0.524, 0.02));
    out.push_back(abs_check("loss_ratio_total", rep.total_loss_ratio, 0.676, 0.02));
    out.push_back(rel_check("margin_total", rep.total_margin, 0.728, 0.02));
    out.push_back(rel_check("margin_thick", rep.margin[1], 0.698, 0.02));
    out.push_back(abs_check("return_thin", rep.line_return[0], 0.053, 0.01));
    out.push_back(abs_check("return_thick", rep.line_return[1], 0.106, 0.01));
    out.push_back(abs_check("return_total", rep.total_return, 0.100, 0.01));
    out.push_back(rel_check("leverage_total", rep.total_leverage, 0.308, 0.05));
    out.push_back(rel_check("leverage_thin", rep.leverage[0], 0.986, 0.05));
    out.push_back(rel_check("leverage_thick", rep.leverage[1], 0.223, 0.05));

    // stand-alone pricing at the pooled non-exceedance level
    const double p_match = 1.0 - survival(v, kEg2Assets);
    StableSum st_loss, st_prem, st_equity;
    std::vector<StandaloneRow> st;
    for (const auto& [name, marginal] : spec.lines) {
        const auto lv = bind_distortion(line_view(name, discretize(marginal, spec.grid)),
                                        Distortion::wang(kEg2WangLambda));
        const double a_i = matched_asset_level(lv, p_match);
        st.push_back(standalone_price(lv, a_i));
        st_loss.add(st.back().loss);
        st_prem.add(st.back().premium);
        st_equity.add(st.back().equity);
    }
    out.push_back(abs_check("standalone_loss_ratio_thin", st[0].loss_ratio, 0.835, 0.02));
    out.push_back(abs_check("standalone_loss_ratio_thick", st[1].loss_ratio, 0.518, 0.02));
    out.push_back(abs_check("standalone_loss_ratio_avg",
                            st_loss.value() / st_prem.value(), 0.640, 0.02));
    out.push_back(abs_check("standalone_return_thin", st[0].ret, 0.287, 0.02));
    out.push_back(abs_check("standalone_return_thick", st[1].ret, 0.096, 0.02));
    out.push_back(abs_check(
        "standalone_return_avg",
        (st_prem.value() - st_loss.value()) / st_equity.value(), 0.109, 0.02));

    // curve landmarks
    const auto curves = al.curves(al.view().x);
    double crossing = 0.0;
    for (std::size_t j = 0; j < curves.x.size() && curves.x[j] <= 3.0; ++j)
        if (curves.margin_density[0][j] < 0.0) crossing = curves.x[j];
    out.push_back(abs_check("thin_margin_zero_crossing", crossing, 1.38, 0.1));

    double peak_x = 0.0, peak_v = -kInf;
    const auto& bv = al.view();
    for (std::size_t j = 0; j < bv.size(); ++j) {
        if (bv.x[j] < 1.0 || bv.x[j] > 4.0) continue;
        if (bv.kappa[0][j] > peak_v) {
            peak_v = bv.kappa[0][j];
            peak_x = bv.x[j];
        }
    }
    out.push_back(abs_check("thin_cond_mean_peak_x", peak_x, 2.15, 0.1));
    out.push_back(abs_check("thin_cond_mean_peak_value", peak_v, 1.14, 0.02));
    return out;
}

// Wang shift recovered from the pooled target return.
inline Check calibration_check() {
    const auto d = calibrate(Family::wang, eg2_view(), kEg2Assets, kEg2TargetReturn);
    return abs_check("calibrated_wang_shift", d.parameter(), kEg2WangLambda, 0.01);
}

}  // namespace natalloc::fixtures
