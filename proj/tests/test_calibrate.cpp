#include "natalloc/calibrate.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "natalloc/allocation.hpp"
#include "natalloc/grid.hpp"
#include "support.hpp"

using namespace natalloc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double forward_return(Family fam, double param, const LevelView& v, double a) {
    const auto d = fam == Family::wang ? Distortion::wang(param)
                                       : Distortion::proportional_hazard(param);
    const auto rep = Allocation(bind_distortion(v, d)).report(a);
    return rep.total_return;
}

LevelView coin_flip() {
    return collapse(make_outcome_table({"only"}, {{0.5, {0.0}}, {0.5, {10.0}}}));
}

}  // namespace

TEST_CASE("proportional hazard calibration recovers the coin-flip exponent") {
    const auto v = coin_flip();
    // return at r = 1/2 with assets 10 is (10/sqrt(2) - 5)/(10 - 10/sqrt(2)) = 1/sqrt(2)
    const double target = forward_return(Family::proportional_hazard, 0.5, v, 10.0);
    CHECK_THAT(target, WithinAbs(1.0 / std::sqrt(2.0), 1e-12));

    const auto d = calibrate(Family::proportional_hazard, v, 10.0, target);
    REQUIRE(d.family() == Family::proportional_hazard);
    CHECK_THAT(d.g(0.5), WithinAbs(std::sqrt(0.5), 1e-9));  // g(1/2) pins r
}

TEST_CASE("calibration round trip recovers the parameter") {
    std::mt19937_64 rng(415234);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int trials = 0;
    while (trials < 60) {
        const auto v = collapse(test::random_table(rng));
        const double x_max = v.x.back();
        if (x_max <= 0.0) continue;
        const double a = x_max * (1.05 + 0.5 * u(rng));  // equity stays positive

        const bool wang = u(rng) < 0.5;
        const Family fam = wang ? Family::wang : Family::proportional_hazard;
        const double truth = wang ? 0.1 + 1.5 * u(rng) : 0.2 + 0.75 * u(rng);
        const double target = forward_return(fam, truth, v, a);
        if (!(target > 1e-6) || !std::isfinite(target)) continue;

        const auto d = calibrate(fam, v, a, target);
        // recover the parameter via a point that determines it
        const double fitted = wang ? norm_ppf(d.g(0.5)) : std::log2(1.0 / d.g(0.5));
        CHECK_THAT(fitted, WithinAbs(truth, 1e-6));
        ++trials;
    }
}

TEST_CASE("calibrated distortion hits the target return through the full report") {
    const auto v = collapse(test::eg1_table());
    const double target = 0.35;
    const auto d = calibrate(Family::wang, v, 20.0, target);
    const auto rep = Allocation(bind_distortion(v, d)).report(20.0);
    CHECK_THAT(rep.total_return, WithinAbs(target, 1e-7));

    const auto d2 = calibrate(Family::proportional_hazard, v, 20.0, target);
    const auto rep2 = Allocation(bind_distortion(v, d2)).report(20.0);
    CHECK_THAT(rep2.total_return, WithinAbs(target, 1e-7));
}

TEST_CASE("calibration on a gridded portfolio") {
    const GridSpec g{1.0 / 64.0, 1e-10, 1 << 22};
    const std::vector<std::pair<std::string, ParametricMarginal>> lines{
        {"a", moments_to_params(MarginalKind::gamma, 1.0, 0.4)},
        {"b", moments_to_params(MarginalKind::gamma, 2.0, 0.6)}};
    const auto v = grid_view(lines, g);
    const auto d = calibrate(Family::wang, v, 6.0, 0.08);
    const auto rep = Allocation(bind_distortion(v, d)).report(6.0);
    CHECK_THAT(rep.total_return, WithinAbs(0.08, 1e-7));
}

TEST_CASE("identity family cannot be calibrated to a positive return") {
    const auto v = coin_flip();
    try {
        calibrate(Family::identity, v, 10.0, 0.10);
        FAIL("expected CalibrationFailure");
    } catch (const CalibrationFailure& e) {
        CHECK(e.lo_return == 0.0);
        CHECK(e.hi_return == 0.0);
    }
}

TEST_CASE("unreachable target reports the achievable range") {
    const auto v = coin_flip();
    // assets above the support cap the return at (10 - 5)/(20 - 10) = 1/2
    try {
        calibrate(Family::proportional_hazard, v, 20.0, 0.6);
        FAIL("expected CalibrationFailure");
    } catch (const CalibrationFailure& e) {
        CHECK(e.lo_return == 0.0);                    // r = 1 is the identity
        CHECK_THAT(e.hi_return, WithinAbs(0.5, 1e-4));  // r -> 0 saturates g
    }

    try {
        calibrate(Family::wang, v, 20.0, 10.0);
        FAIL("expected CalibrationFailure");
    } catch (const CalibrationFailure& e) {
        CHECK(e.hi_return < 10.0);
    }
}

TEST_CASE("calibration input validation") {
    const auto v = coin_flip();
    CHECK_THROWS_AS(calibrate(Family::wang, v, 10.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(calibrate(Family::wang, v, 10.0, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(calibrate(Family::wang, v, kInf, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(calibrate(Family::piecewise_linear, v, 10.0, 0.1),
                    std::invalid_argument);
}
