#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/lognormal.hpp>

#include "natalloc/numeric.hpp"

namespace natalloc {

enum class MarginalKind { gamma, lognormal, shifted_lognormal, point_mass };

// Parametric severity on [0, inf). Shifted lognormal is shift + factor * LN(mu, sigma).
struct ParametricMarginal {
    MarginalKind kind;
    double a = 0.0;       // gamma shape / lognormal mu / point value
    double b = 0.0;       // gamma scale / lognormal sigma
    double shift = 0.0;   // shifted_lognormal only
    double factor = 1.0;  // shifted_lognormal only

    static ParametricMarginal gamma(double shape, double scale) {
        require(shape > 0.0 && scale > 0.0, "gamma parameters must be positive");
        return {MarginalKind::gamma, shape, scale, 0.0, 1.0};
    }
    static ParametricMarginal lognormal(double mu, double sigma) {
        require(sigma > 0.0, "lognormal sigma must be positive");
        return {MarginalKind::lognormal, mu, sigma, 0.0, 1.0};
    }
    static ParametricMarginal shifted_lognormal(double shift, double factor, double mu,
                                                double sigma) {
        require(shift >= 0.0, "shift must be nonnegative (support stays in [0,inf))");
        require(factor > 0.0, "scale factor must be positive");
        require(sigma > 0.0, "lognormal sigma must be positive");
        return {MarginalKind::shifted_lognormal, mu, sigma, shift, factor};
    }
    static ParametricMarginal point_mass(double value) {
        require(value >= 0.0, "point mass must be nonnegative");
        return {MarginalKind::point_mass, value, 0.0, 0.0, 1.0};
    }
};

// Method-of-moments inversion. For shifted_lognormal the composite mean/cv are
// given and the component lognormal absorbs (mean - shift) / factor.
inline ParametricMarginal moments_to_params(MarginalKind kind, double mean, double cv,
                                            double shift = 0.0, double factor = 1.0) {
    require(mean > 0.0 && cv > 0.0, "mean and cv must be positive");
    switch (kind) {
        case MarginalKind::gamma:
            return ParametricMarginal::gamma(1.0 / (cv * cv), mean * cv * cv);
        case MarginalKind::lognormal: {
            const double s2 = std::log1p(cv * cv);
            return ParametricMarginal::lognormal(std::log(mean) - 0.5 * s2, std::sqrt(s2));
        }
        case MarginalKind::shifted_lognormal: {
            const double cm = (mean - shift) / factor;        // component mean
            const double csd = mean * cv / factor;            // component sd
            require(cm > 0.0, "shift must lie below the mean");
            const double ccv = csd / cm;
            const double s2 = std::log1p(ccv * ccv);
            return ParametricMarginal::shifted_lognormal(
                shift, factor, std::log(cm) - 0.5 * s2, std::sqrt(s2));
        }
        default:
            throw std::invalid_argument("moments_to_params: unsupported marginal kind");
    }
}

inline double cdf(const ParametricMarginal& m, double x) {
    switch (m.kind) {
        case MarginalKind::gamma:
            return x <= 0.0 ? 0.0
                            : boost::math::cdf(boost::math::gamma_distribution<double>(m.a, m.b), x);
        case MarginalKind::lognormal:
            return x <= 0.0
                       ? 0.0
                       : boost::math::cdf(boost::math::lognormal_distribution<double>(m.a, m.b), x);
        case MarginalKind::shifted_lognormal: {
            const double y = (x - m.shift) / m.factor;
            return y <= 0.0
                       ? 0.0
                       : boost::math::cdf(boost::math::lognormal_distribution<double>(m.a, m.b), y);
        }
        case MarginalKind::point_mass:
            return x >= m.a ? 1.0 : 0.0;
    }
    return 0.0;  // unreachable
}

inline double quantile(const ParametricMarginal& m, double p) {
    require_domain(p >= 0.0 && p < 1.0, "quantile level must lie in [0,1)");
    switch (m.kind) {
        case MarginalKind::gamma:
            return boost::math::quantile(boost::math::gamma_distribution<double>(m.a, m.b), p);
        case MarginalKind::lognormal:
            return boost::math::quantile(boost::math::lognormal_distribution<double>(m.a, m.b), p);
        case MarginalKind::shifted_lognormal:
            return m.shift +
                   m.factor * boost::math::quantile(
                                  boost::math::lognormal_distribution<double>(m.a, m.b), p);
        case MarginalKind::point_mass:
            return m.a;
    }
    return 0.0;  // unreachable
}

inline double mean_of(const ParametricMarginal& m) {
    switch (m.kind) {
        case MarginalKind::gamma:
            return m.a * m.b;
        case MarginalKind::lognormal:
            return std::exp(m.a + 0.5 * m.b * m.b);
        case MarginalKind::shifted_lognormal:
            return m.shift + m.factor * std::exp(m.a + 0.5 * m.b * m.b);
        case MarginalKind::point_mass:
            return m.a;
    }
    return 0.0;  // unreachable
}

// Reproducible draws; the stream is a function of (marginal, n, seed) only.
inline std::vector<double> sample(const ParametricMarginal& m, std::size_t n,
                                  std::uint64_t seed) {
    require(n >= 1, "sample size must be at least 1");
    std::vector<double> out(n);
    if (m.kind == MarginalKind::point_mass) {
        std::fill(out.begin(), out.end(), m.a);
        return out;
    }
    std::mt19937_64 rng(splitmix64(seed));
    switch (m.kind) {
        case MarginalKind::gamma: {
            std::gamma_distribution<double> d(m.a, m.b);
            for (auto& x : out) x = d(rng);
            break;
        }
        case MarginalKind::lognormal: {
            std::lognormal_distribution<double> d(m.a, m.b);
            for (auto& x : out) x = d(rng);
            break;
        }
        case MarginalKind::shifted_lognormal: {
            std::lognormal_distribution<double> d(m.a, m.b);
            for (auto& x : out) x = m.shift + m.factor * d(rng);
            break;
        }
        default:
            break;
    }
    return out;
}

}  // namespace natalloc
