#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/normal.hpp>

namespace natalloc {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

inline void require_domain(bool cond, const std::string& msg) {
    if (!cond) throw std::domain_error(msg);
}

// Internal consistency checks (sum identities, two-path agreement). Violations
// are bugs, not bad input, hence logic_error.
inline void check_invariant(bool cond, const std::string& name) {
    if (!cond) throw std::logic_error("invariant violated: " + name);
}

// Neumaier-compensated accumulator. Probability sums over 1e4-row tables must
// hold mass identities to 1e-12, which plain summation does not guarantee.
class StableSum {
public:
    StableSum() = default;
    explicit StableSum(double v) : sum_(v) {}

    void add(double v) noexcept {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }

    // The compensation is meaningless once the raw sum overflows to +-inf.
    double value() const noexcept { return std::isfinite(sum_) ? sum_ + comp_ : sum_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double norm_pdf(double z) {
    static const double inv_sqrt_2pi = 0.3989422804014326779399461;
    return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

inline double norm_cdf(double z) {
    static const double inv_sqrt2 = 0.7071067811865475244008444;
    return 0.5 * std::erfc(-z * inv_sqrt2);
}

// Inverse standard normal CDF; p must lie strictly inside (0,1).
inline double norm_ppf(double p) {
    static const boost::math::normal_distribution<double> unit{};
    return boost::math::quantile(unit, p);
}

// splitmix64: cheap seed derivation so each Monte Carlo batch gets an
// independent, reproducible stream.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace natalloc
