#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "natalloc/distortion.hpp"
#include "natalloc/level_view.hpp"
#include "natalloc/numeric.hpp"

namespace natalloc {

// Thrown when no parameter in the search bracket reaches the target return;
// carries the return range the family could actually achieve.
class CalibrationFailure : public std::runtime_error {
public:
    CalibrationFailure(double lo, double hi, const std::string& what)
        : std::runtime_error(what), lo_return(lo), hi_return(hi) {}
    double lo_return;
    double hi_return;
};

namespace detail {

// Clipped layer widths below `a` paired with the survival on each layer.
// The limited premium under any g is then sum g(S) * width, so a parameter
// search re-evaluates only this sum.
struct LayerSlices {
    std::vector<double> S, width;
};

inline LayerSlices layer_slices(const LevelView& v, double a) {
    LayerSlices out;
    double x_prev = 0.0;
    for (std::size_t j = 0; j < v.size() && x_prev < a; ++j) {
        const double w = std::min(v.x[j], a) - x_prev;
        if (w > 0.0) {
            out.S.push_back(j == 0 ? 1.0 : v.S[j - 1]);
            out.width.push_back(w);
        }
        x_prev = v.x[j];
    }
    return out;  // any remainder above the support has S = 0, g(0) = 0
}

inline double limited_premium(const LayerSlices& sl, const Distortion& d) {
    StableSum acc;
    for (std::size_t j = 0; j < sl.S.size(); ++j) acc.add(d.g(sl.S[j]) * sl.width[j]);
    return acc.value();
}

}  // namespace detail

// Finds the scalar family parameter whose portfolio return
// (P-bar - L-bar) / (a - P-bar) at `assets` matches `target_return`.
// Wang: return increases with lambda, bracket [0, 10].
// Proportional hazard: return decreases with r, bracket [1e-6, 1].
inline Distortion calibrate(Family family, const LevelView& v, double assets,
                            double target_return) {
    require(target_return > 0.0, "target return must be > 0");
    require(std::isfinite(assets) && assets > 0.0,
            "calibration needs a finite positive asset level");

    const auto slices = detail::layer_slices(v, assets);
    const double limited_loss = expected_limited(v, assets);
    const auto ret = [&](const Distortion& d) {
        const double prem = detail::limited_premium(slices, d);
        const double equity = assets - prem;
        if (equity <= 0.0) return kInf;
        return (prem - limited_loss) / equity;
    };

    if (family == Family::identity)
        throw CalibrationFailure(0.0, 0.0,
                                 "identity distortion carries zero margin at every "
                                 "asset level; it cannot reach a positive return");
    require(family != Family::piecewise_linear,
            "piecewise-linear shapes have no scalar parameter to calibrate");

    const bool is_wang = family == Family::wang;
    const auto make = [&](double t) {
        return is_wang ? Distortion::wang(t) : Distortion::proportional_hazard(t);
    };
    // Oriented so ret(make(lo)) <= ret(make(hi)).
    double lo = is_wang ? 0.0 : 1.0;
    double hi = is_wang ? 10.0 : 1e-6;
    const double ret_lo = ret(make(lo));
    const double ret_hi = ret(make(hi));
    if (target_return < ret_lo || target_return > ret_hi)
        throw CalibrationFailure(
            ret_lo, ret_hi,
            "target return " + std::to_string(target_return) +
                " outside the achievable range [" + std::to_string(ret_lo) + ", " +
                std::to_string(ret_hi) + "]");

    double mid = lo;
    for (int it = 0; it < 200; ++it) {
        const double next = 0.5 * (lo + hi);
        if (next == lo || next == hi) break;  // bracket exhausted at double precision
        mid = next;
        const double r = ret(make(mid));
        // pin the parameter too: a shallow return slope must not stop early
        if (std::abs(r - target_return) <= 1e-8 &&
            std::abs(hi - lo) <= 1e-9 * std::max(1.0, std::abs(mid)))
            return make(mid);
        (r < target_return ? lo : hi) = mid;
    }
    const double achieved = ret(make(mid));
    check_invariant(std::abs(achieved - target_return) <= 1e-8,
                    "calibrated return within tolerance of target");
    return make(mid);
}

}  // namespace natalloc
