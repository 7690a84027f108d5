#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "natalloc/numeric.hpp"

namespace natalloc {

enum class Family { identity, proportional_hazard, wang, piecewise_linear };

// Concave distortion g: [0,1] -> [0,1], g(0)=0, g(1)=1, g(s) >= s.
// Immutable after construction; eval is pure.
class Distortion {
public:
    using Knots = std::vector<std::pair<double, double>>;  // (s, g(s)), ascending s

    // g' cap where the true limit slope is infinite (PH at s=0). Discrete
    // pricing uses g-differences, never g' at 0, so this only affects
    // diagnostics.
    static constexpr double kSlopeCap = 1e12;
    // Beyond |z| = 8.3 the normal CDF is 0/1 to double precision; clamping
    // keeps the Wang transform continuous to machine precision at the ends.
    static constexpr double kWangClamp = 8.3;

    static Distortion identity() { return Distortion(Family::identity); }

    static Distortion proportional_hazard(double r) {
        require(r > 0.0 && r <= 1.0, "proportional hazard exponent must lie in (0,1]");
        Distortion d(Family::proportional_hazard);
        d.param_ = r;
        return d;
    }

    static Distortion wang(double lambda) {
        require(lambda >= 0.0, "wang shift must be >= 0");
        Distortion d(Family::wang);
        d.param_ = lambda;
        return d;
    }

    static Distortion piecewise_linear(Knots knots) {
        require(knots.size() >= 2, "piecewise distortion needs at least two knots");
        require(knots.front().first == 0.0 && knots.front().second == 0.0,
                "piecewise distortion must start at (0,0)");
        require(knots.back().first == 1.0 && knots.back().second == 1.0,
                "piecewise distortion must end at (1,1)");
        double prev_slope = kInf;
        for (std::size_t k = 1; k < knots.size(); ++k) {
            const double ds = knots[k].first - knots[k - 1].first;
            const double dg = knots[k].second - knots[k - 1].second;
            require(ds > 0.0, "piecewise knots must have strictly increasing s");
            require(dg >= 0.0, "piecewise distortion must be nondecreasing");
            const double slope = dg / ds;
            // concavity up to accumulated rounding in derived knot values
            require(slope <= prev_slope * (1.0 + 1e-12) + 1e-15,
                    "piecewise distortion must be concave");
            prev_slope = slope;
        }
        Distortion d(Family::piecewise_linear);
        d.knots_ = std::move(knots);
        return d;
    }

    Family family() const { return family_; }

    // scalar parameter: r for PH, lambda for Wang
    double parameter() const {
        require(family_ == Family::proportional_hazard || family_ == Family::wang,
                "distortion has no scalar parameter");
        return param_;
    }

    const Knots& knots() const {
        require(family_ == Family::piecewise_linear, "distortion has no knots");
        return knots_;
    }

    double g(double s) const {
        require_domain(s >= 0.0 && s <= 1.0, "distortion argument outside [0,1]");
        if (s <= 0.0) return 0.0;
        if (s >= 1.0) return 1.0;
        switch (family_) {
            case Family::identity:
                return s;
            case Family::proportional_hazard:
                return std::pow(s, param_);
            case Family::wang: {
                const double z = std::clamp(norm_ppf(s), -kWangClamp, kWangClamp);
                return norm_cdf(z + param_);
            }
            case Family::piecewise_linear: {
                const auto [k, slope] = segment(s);
                return knots_[k - 1].second + slope * (s - knots_[k - 1].first);
            }
        }
        return s;  // unreachable
    }

    // Subgradient: derivative for smooth families, left slope at piecewise
    // kinks (matching the mass construction q_j = g(S_{j-1}) - g(S_j)).
    double g_prime(double s) const {
        require_domain(s >= 0.0 && s <= 1.0, "distortion argument outside [0,1]");
        switch (family_) {
            case Family::identity:
                return 1.0;
            case Family::proportional_hazard:
                if (param_ == 1.0) return 1.0;
                if (s <= 0.0) return kSlopeCap;
                return std::min(param_ * std::pow(s, param_ - 1.0), kSlopeCap);
            case Family::wang: {
                const double z = s <= 0.0 ? -kWangClamp
                               : s >= 1.0 ? kWangClamp
                                          : std::clamp(norm_ppf(s), -kWangClamp, kWangClamp);
                // phi(z+lambda)/phi(z) = exp(-lambda z - lambda^2/2)
                return std::min(std::exp(-param_ * z - 0.5 * param_ * param_), kSlopeCap);
            }
            case Family::piecewise_linear: {
                if (s <= 0.0) {  // no left neighbourhood: limit slope from the right
                    return (knots_[1].second - knots_[0].second) /
                           (knots_[1].first - knots_[0].first);
                }
                return segment(s).second;
            }
        }
        return 1.0;  // unreachable
    }

private:
    explicit Distortion(Family f) : family_(f) {}

    // segment index k (s in (s_{k-1}, s_k]) and its slope
    std::pair<std::size_t, double> segment(double s) const {
        const auto it = std::lower_bound(
            knots_.begin() + 1, knots_.end(), s,
            [](const std::pair<double, double>& knot, double v) { return knot.first < v; });
        const std::size_t k = static_cast<std::size_t>(it - knots_.begin());
        const double slope = (knots_[k].second - knots_[k - 1].second) /
                             (knots_[k].first - knots_[k - 1].first);
        return {k, slope};
    }

    Family family_;
    double param_ = 0.0;
    Knots knots_;
};

// Finite mixture of TVaRs: levels p strictly increasing in [0,1), weights
// nonnegative summing to 1. Equivalent to a piecewise-linear distortion
// (Föllmer–Schied 4.69/4.70, finite case).
struct TVaRMixture {
    std::vector<std::pair<double, double>> weights;  // (p, mu)
};

inline TVaRMixture make_tvar_mixture(std::vector<std::pair<double, double>> weights) {
    require(!weights.empty(), "mixture needs at least one weight");
    StableSum total;
    double prev = -1.0;
    for (const auto& [p, mu] : weights) {
        require(p >= 0.0 && p < 1.0, "mixture levels must lie in [0,1)");
        require(p > prev, "mixture levels must be strictly increasing");
        require(mu >= 0.0, "mixture weights must be nonnegative");
        total.add(mu);
        prev = p;
    }
    require(std::abs(total.value() - 1.0) <= 1e-12, "mixture weights must sum to 1");
    return TVaRMixture{std::move(weights)};
}

// g(s) = sum_k mu_k * min(1, s/(1-p_k)); kinks at s = 1-p_k.
inline Distortion to_distortion(const TVaRMixture& m) {
    std::vector<double> ss{0.0, 1.0};
    for (const auto& [p, mu] : m.weights)
        if (p > 0.0) ss.push_back(1.0 - p);
    std::sort(ss.begin(), ss.end());
    ss.erase(std::unique(ss.begin(), ss.end()), ss.end());

    Distortion::Knots knots;
    knots.reserve(ss.size());
    for (double s : ss) {
        StableSum g;
        for (const auto& [p, mu] : m.weights)
            g.add(mu * std::min(1.0, s / (1.0 - p)));
        knots.emplace_back(s, s == 0.0 ? 0.0 : s == 1.0 ? 1.0 : g.value());
    }
    return Distortion::piecewise_linear(std::move(knots));
}

// Inverse map: slope drop at knot s_k carries weight mu = s_k*(c_k - c_{k+1})
// at level p = 1 - s_k; the final slope c_m is the weight of TVaR_0 (the mean).
inline TVaRMixture to_tvar_mixture(const Distortion& d) {
    Distortion::Knots knots;
    if (d.family() == Family::identity) {
        knots = {{0.0, 0.0}, {1.0, 1.0}};
    } else {
        require(d.family() == Family::piecewise_linear,
                "only piecewise-linear distortions convert to a finite TVaR mixture");
        knots = d.knots();
    }
    const std::size_t m = knots.size() - 1;  // segment count
    std::vector<double> slope(m);
    for (std::size_t k = 0; k < m; ++k)
        slope[k] = (knots[k + 1].second - knots[k].second) /
                   (knots[k + 1].first - knots[k].first);

    std::vector<std::pair<double, double>> w;
    if (slope[m - 1] > 0.0) w.emplace_back(0.0, slope[m - 1]);
    for (std::size_t k = m - 1; k >= 1; --k) {
        const double sk = knots[k].first;
        const double mu = sk * (slope[k - 1] - slope[k]);
        if (mu > 0.0) w.emplace_back(1.0 - sk, mu);
    }
    std::sort(w.begin(), w.end());
    // normalisation is exact up to rounding: sum mu = g(1)-g(0) = 1
    StableSum total;
    for (auto& [p, mu] : w) total.add(mu);
    const double t = total.value();
    if (t != 1.0 && t > 0.0)
        for (auto& [p, mu] : w) mu /= t;
    return make_tvar_mixture(std::move(w));
}

}  // namespace natalloc
