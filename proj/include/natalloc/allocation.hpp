#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "natalloc/level_view.hpp"
#include "natalloc/numeric.hpp"

namespace natalloc {

// Per-line pricing at one asset level; lines plus a validated TOTAL column.
struct PricingReport {
    double assets = kInf;
    double delta = 0.0;
    bool has_delta = false;
    bool degenerate_layers = false;  // some equity used the pro-rata fallback
    std::vector<std::string> lines;
    std::vector<double> loss, premium, margin, equity;
    std::vector<double> loss_ratio, line_return, leverage, intermediated;
    double total_loss = 0, total_premium = 0, total_margin = 0, total_equity = 0;
    double total_loss_ratio = 0, total_return = 0, total_leverage = 0;
    double total_intermediated = 0;
};

// Density curves sampled at caller-chosen points; values describe the layer
// just above each point.
struct AllocationCurves {
    std::vector<std::string> lines;
    std::vector<double> x, S, gS, iota;
    std::vector<char> degenerate;  // zero-margin layer (g(S) == S) at this point
    std::vector<std::vector<double>> alpha, beta;            // [line][point]
    std::vector<std::vector<double>> loss_density, premium_density;
    std::vector<std::vector<double>> margin_density, equity_density;
};

// Quantile-coordinate curves: loss curve (F, x), premium curve (Fq, x) with
// Fq = 1 - g(S), and per-line conditional means against either coordinate.
struct LeeCurves {
    std::vector<std::string> lines;
    std::vector<double> x, F, Fq;
    std::vector<std::vector<double>> kappa;  // [line][level]
};

struct StandaloneRow {
    double assets = 0, loss = 0, premium = 0, margin = 0, equity = 0;
    double loss_ratio = 0, ret = 0, leverage = 0;
};

// Area between the premium and loss curves below height a, computed from the
// emitted curve pairs alone; equals the cumulative margin.
inline double lee_margin_area(const LeeCurves& c, double a) {
    require(a >= 0.0, "asset level must be >= 0");
    StableSum acc;
    for (std::size_t j = 0; j < c.x.size(); ++j) {
        const double lo = std::min(c.x[j], a);
        const double hi = std::min(j + 1 < c.x.size() ? c.x[j + 1] : a, a);
        if (hi > lo) acc.add((c.F[j] - c.Fq[j]) * (hi - lo));
    }
    return acc.value();
}

// Lower quantile of the view at non-exceedance level p (stand-alone asset
// matching: same return period as the pooled portfolio).
inline double matched_asset_level(const LevelView& v, double p) {
    require_domain(p >= 0.0 && p <= 1.0, "non-exceedance level must lie in [0,1]");
    for (std::size_t j = 0; j < v.size(); ++j)
        if (1.0 - v.S[j] >= p) return v.x[j];
    return v.x.back();
}

// The allocation machinery over one distortion-bound view: conditional layer
// shares alpha/beta, per-line loss/premium/margin/equity densities, exact
// cumulative integrals, and report/curve assembly.
class Allocation {
public:
    explicit Allocation(LevelView view) : v_(std::move(view)) {
        require(v_.bound, "view must be bound to a distortion");
        const std::size_t m = v_.line_count(), n = v_.size();
        ratio_.assign(m, std::vector<double>(n, 0.0));
        A_.assign(m, std::vector<double>(n + 1, 0.0));
        B_.assign(m, std::vector<double>(n + 1, 0.0));
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j)
                ratio_[i][j] = v_.x[j] > 0.0 ? v_.kappa[i][j] / v_.x[j] : 0.0;
            StableSum ap, bq;
            for (std::size_t j = n; j-- > 0;) {
                ap.add(ratio_[i][j] * v_.p[j]);
                bq.add(ratio_[i][j] * v_.q[j]);
                A_[i][j] = ap.value();
                B_[i][j] = bq.value();
            }
        }
        // top-layer shares: the limit of alpha as x approaches the last level
        top_share_.assign(m, 1.0 / static_cast<double>(m));
        if (v_.x.back() > 0.0)
            for (std::size_t i = 0; i < m; ++i)
                top_share_[i] = v_.kappa[i][n - 1] / v_.x.back();
    }

    const LevelView& view() const { return v_; }
    std::size_t line_count() const { return v_.line_count(); }

    // -- densities (values on the layer just above x) ------------------------

    double alpha(std::size_t i, double x) const {
        const auto [j, S, gS] = layer_at(x);
        (void)gS;
        require_domain(S > 0.0, "alpha undefined where S(x) = 0");
        return A_[i][j] / S;
    }

    double beta(std::size_t i, double x) const {
        const auto [j, S, gS] = layer_at(x);
        (void)S;
        require_domain(gS > 0.0, "beta undefined where g(S(x)) = 0");
        return B_[i][j] / gS;
    }

    double margin_density(std::size_t i, double x) const {
        const auto [j, S, gS] = layer_at(x);
        require_domain(S > 0.0, "margin density undefined where S(x) = 0");
        (void)gS;
        return B_[i][j] - A_[i][j];
    }

    // Layer return on (x, next level]: infinite when the layer is pure margin.
    double iota(double x) const {
        const auto [j, S, gS] = layer_at(x);
        (void)j;
        if (gS >= 1.0) return S >= 1.0 ? 0.0 : kInf;
        return (gS - S) / (1.0 - gS);
    }

    bool degenerate_at(double x) const {
        const auto [j, S, gS] = layer_at(x);
        (void)j;
        return gS == S;
    }

    // Equity density; zero-margin layers (g(S) = S) fall back to pro rata on
    // alpha, so the per-layer sum 1 - g(S) always splits across lines.
    double equity_density(std::size_t i, double x) const {
        const auto [j, S, gS] = layer_at(x);
        const double q_total = 1.0 - gS;
        if (gS == S) return pro_rata_share(i, j, S) * q_total;
        return (B_[i][j] - A_[i][j]) * q_total / (gS - S);
    }

    // -- cumulative integrals over [0, a] ------------------------------------

    // S-bar_i(a): direct form sum kappa_i min(x,a)/x p, cross-checked against
    // the exact step integral of alpha_i S.
    double loss_cumulative(std::size_t i, double a) const {
        return cumulative_checked(i, a, v_.p, A_[i]);
    }

    // P-bar_i(a): the two routes of the premium (direct expectation of the
    // equal-priority payment under the adjusted masses vs the step integral
    // of beta_i g(S)) must agree; returns the direct form.
    double premium_cumulative(std::size_t i, double a) const {
        return cumulative_checked(i, a, v_.q, B_[i]);
    }

    double margin_cumulative(std::size_t i, double a) const {
        return premium_cumulative(i, a) - loss_cumulative(i, a);
    }

    double equity_cumulative(std::size_t i, double a) const {
        require(a >= 0.0, "asset level must be >= 0");
        if (std::isinf(a)) return kInf;  // integrand tends to 1 beyond the support
        StableSum acc;
        double x_prev = 0.0;
        for (std::size_t j = 0; j < v_.size() && x_prev < a; ++j) {
            const double S = j == 0 ? 1.0 : v_.S[j - 1];
            const double gS = j == 0 ? 1.0 : v_.gS[j - 1];
            const double width = std::min(v_.x[j], a) - x_prev;
            if (width > 0.0) {
                const double q_total = 1.0 - gS;
                const double dens = gS == S
                                        ? pro_rata_share(i, j, S) * q_total
                                        : (B_[i][j] - A_[i][j]) * q_total / (gS - S);
                acc.add(dens * width);
            }
            x_prev = v_.x[j];
        }
        if (a > x_prev) acc.add(top_share_[i] * (a - x_prev));  // S = 0 slab
        return acc.value();
    }

    // Average return to line i with assets a, validated against the
    // margin-weighted harmonic mean of the layer returns.
    double line_return(std::size_t i, double a) const {
        const double q_bar = equity_cumulative(i, a);
        require_domain(q_bar > 0.0, "return undefined with zero equity");
        const double m_bar = margin_cumulative(i, a);
        const double direct = m_bar / q_bar;
        if (direct != 0.0 && std::isfinite(a)) {
            // 1/return = margin-weighted harmonic sum of 1/iota(x); layers
            // with infinite return carry zero margin weight, zero-margin
            // layers contribute their (fallback) equity directly.
            StableSum inv;
            double x_prev = 0.0;
            for (std::size_t j = 0; j < v_.size() && x_prev < a; ++j) {
                const double S = j == 0 ? 1.0 : v_.S[j - 1];
                const double gS = j == 0 ? 1.0 : v_.gS[j - 1];
                const double width = std::min(v_.x[j], a) - x_prev;
                x_prev = v_.x[j];
                if (width <= 0.0) continue;
                if (gS == S) {
                    inv.add(pro_rata_share(i, j, S) * (1.0 - gS) * width);
                    continue;
                }
                const double iota_layer = (gS - S) / (1.0 - gS);
                if (std::isinf(iota_layer)) continue;  // zero weight
                inv.add((B_[i][j] - A_[i][j]) * width / iota_layer);
            }
            if (a > x_prev) inv.add(top_share_[i] * (a - x_prev));
            const double harmonic = m_bar / inv.value();
            check_invariant(std::abs(harmonic - direct) <=
                                1e-6 * std::max(1.0, std::abs(direct)),
                            "harmonic mean of layer returns");
        }
        return direct;
    }

    std::vector<double> intermediated_price(double a, double delta) const {
        require(delta >= 0.0, "frictional rate must be >= 0");
        std::vector<double> out(line_count());
        StableSum total;
        for (std::size_t i = 0; i < line_count(); ++i) {
            out[i] = premium_cumulative(i, a) + delta * equity_cumulative(i, a);
            total.add(out[i]);
        }
        const double want = rho_total(v_, a) + delta * (a - rho_total(v_, a));
        if (std::isfinite(a))
            check_invariant(std::abs(total.value() - want) <=
                                1e-9 * std::max(1.0, std::abs(want)),
                            "intermediated premiums sum to P + delta Q");
        return out;
    }

    // -- assembled outputs ----------------------------------------------------

    PricingReport report(double a) const { return build_report(a, 0.0, false); }
    PricingReport report(double a, double delta) const {
        return build_report(a, delta, true);
    }

    AllocationCurves curves(const std::vector<double>& xs) const {
        AllocationCurves c;
        c.lines = v_.lines;
        const std::size_t m = line_count();
        c.alpha.assign(m, {});
        c.beta.assign(m, {});
        c.loss_density.assign(m, {});
        c.premium_density.assign(m, {});
        c.margin_density.assign(m, {});
        c.equity_density.assign(m, {});
        for (double x : xs) {
            const auto [j, S, gS] = layer_at(x);
            c.x.push_back(x);
            c.S.push_back(S);
            c.gS.push_back(gS);
            c.iota.push_back(gS >= 1.0 ? (S >= 1.0 ? 0.0 : kInf)
                                       : (gS - S) / (1.0 - gS));
            c.degenerate.push_back(gS == S ? 1 : 0);
            for (std::size_t i = 0; i < m; ++i) {
                // beyond the support the shares continue at their last value
                const double ai = S > 0.0 ? A_[i][j] / S : top_share_[i];
                const double bi = gS > 0.0 ? B_[i][j] / gS : top_share_[i];
                c.alpha[i].push_back(ai);
                c.beta[i].push_back(bi);
                c.loss_density[i].push_back(A_[i][j]);
                c.premium_density[i].push_back(B_[i][j]);
                c.margin_density[i].push_back(B_[i][j] - A_[i][j]);
                const double q_total = 1.0 - gS;
                c.equity_density[i].push_back(
                    gS == S ? pro_rata_share(i, j, S) * q_total
                            : (B_[i][j] - A_[i][j]) * q_total / (gS - S));
            }
        }
        return c;
    }

    LeeCurves lee_curves() const {
        LeeCurves c;
        c.lines = v_.lines;
        c.x = v_.x;
        c.kappa = v_.kappa;
        c.F.resize(v_.size());
        c.Fq.resize(v_.size());
        for (std::size_t j = 0; j < v_.size(); ++j) {
            c.F[j] = 1.0 - v_.S[j];
            c.Fq[j] = 1.0 - v_.gS[j];
        }
        return c;
    }

private:
    struct Layer {
        std::size_t j;  // first level strictly above x
        double S, gS;
    };

    Layer layer_at(double x) const {
        require(x >= 0.0, "evaluation point must be >= 0");
        const std::size_t j = tail_index(v_, x);
        if (j == 0) return {0, 1.0, 1.0};
        return {j, v_.S[j - 1], v_.gS[j - 1]};
    }

    double pro_rata_share(std::size_t i, std::size_t j, double S) const {
        return S > 0.0 ? A_[i][j] / S : top_share_[i];
    }

    // Shared body of loss_cumulative / premium_cumulative: direct form
    // sum_j ratio_ij min(x_j, a) mass_j, cross-checked against the step
    // integral with suffix densities. The two aggregation routes are kept
    // deliberately separate.
    double cumulative_checked(std::size_t i, double a,
                              const std::vector<double>& mass,
                              const std::vector<double>& suffix) const {
        require(a >= 0.0, "asset level must be >= 0");
        StableSum direct;
        for (std::size_t j = 0; j < v_.size(); ++j)
            direct.add(ratio_[i][j] * std::min(v_.x[j], a) * mass[j]);
        const double d = direct.value();

        StableSum integral;
        double x_prev = 0.0;
        for (std::size_t j = 0; j < v_.size() && x_prev < a; ++j) {
            integral.add(suffix[j] * (std::min(v_.x[j], a) - x_prev));
            x_prev = v_.x[j];
        }
        check_invariant(std::abs(integral.value() - d) <=
                            1e-9 * std::max(1.0, std::abs(d)),
                        "two-path cumulative agreement");
        return d;
    }

    PricingReport build_report(double a, double delta, bool with_delta) const {
        require(a >= 0.0, "asset level must be >= 0");
        PricingReport r;
        r.assets = a;
        r.delta = delta;
        r.has_delta = with_delta;
        r.lines = v_.lines;
        const std::size_t m = line_count();
        StableSum tl, tp, tm, tq, ti;
        for (std::size_t i = 0; i < m; ++i) {
            const double loss = loss_cumulative(i, a);
            const double prem = premium_cumulative(i, a);
            const double marg = prem - loss;
            const double eq = equity_cumulative(i, a);
            r.loss.push_back(loss);
            r.premium.push_back(prem);
            r.margin.push_back(marg);
            r.equity.push_back(eq);
            r.loss_ratio.push_back(loss / prem);
            r.line_return.push_back(std::isinf(eq) ? 0.0 : marg / eq);
            r.leverage.push_back(std::isinf(eq) ? 0.0 : prem / eq);
            tl.add(loss);
            tp.add(prem);
            tm.add(marg);
            tq.add(eq);
            if (with_delta) {
                const double pi = prem + delta * eq;
                r.intermediated.push_back(pi);
                ti.add(pi);
            }
        }
        // Totals are the sums of the line columns; validate them against the
        // single-line formulas before freezing them into the report.
        r.total_loss = tl.value();
        r.total_premium = tp.value();
        r.total_margin = tm.value();
        r.total_equity = tq.value();
        const double rho = rho_total(v_, a);
        const double el = expected_limited(v_, a);
        check_invariant(std::abs(r.total_premium - rho) <= 1e-9 * std::max(1.0, std::abs(rho)),
                        "line premiums sum to the distorted total");
        check_invariant(std::abs(r.total_loss - el) <= 1e-9 * std::max(1.0, std::abs(el)),
                        "line losses sum to the limited expectation");
        if (std::isfinite(a))
            check_invariant(std::abs(r.total_premium + r.total_equity - a) <=
                                1e-9 * std::max(1.0, a),
                            "assets are funded by premium and equity");
        r.total_loss_ratio = r.total_loss / r.total_premium;
        r.total_return = std::isinf(r.total_equity) ? 0.0 : r.total_margin / r.total_equity;
        r.total_leverage = std::isinf(r.total_equity) ? 0.0 : r.total_premium / r.total_equity;
        if (with_delta) r.total_intermediated = ti.value();
        // flag if any layer below a ran on the pro-rata fallback
        double x_prev = 0.0;
        for (std::size_t j = 0; j < v_.size() && x_prev < a && !r.degenerate_layers; ++j) {
            const double S = j == 0 ? 1.0 : v_.S[j - 1];
            const double gS = j == 0 ? 1.0 : v_.gS[j - 1];
            if (std::min(v_.x[j], a) > x_prev && gS == S && S < 1.0)
                r.degenerate_layers = true;
            x_prev = v_.x[j];
        }
        if (a > x_prev) r.degenerate_layers = true;
        return r;
    }

    LevelView v_;
    std::vector<std::vector<double>> ratio_;  // kappa_i / x per level, 0 at x = 0
    std::vector<std::vector<double>> A_;      // suffix sums of ratio * p
    std::vector<std::vector<double>> B_;      // suffix sums of ratio * q
    std::vector<double> top_share_;
};

// Stand-alone pricing of a single-line view at asset level a (the caller
// matches a to the pooled return period via matched_asset_level).
inline StandaloneRow standalone_price(const LevelView& line, double a) {
    require(line.bound, "view must be bound to a distortion");
    require(line.line_count() == 1, "stand-alone pricing expects a single-line view");
    StandaloneRow r;
    r.assets = a;
    r.loss = expected_limited(line, a);
    r.premium = rho_total(line, a);
    r.margin = r.premium - r.loss;
    r.equity = std::isinf(a) ? kInf : a - r.premium;
    r.loss_ratio = r.loss / r.premium;
    r.ret = std::isinf(a) ? 0.0 : r.margin / r.equity;
    r.leverage = std::isinf(a) ? 0.0 : r.premium / r.equity;
    return r;
}

}  // namespace natalloc
