#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "natalloc/level_view.hpp"
#include "natalloc/marginal.hpp"
#include "natalloc/numeric.hpp"

namespace natalloc {

struct GridSpec {
    double h = 1.0 / 64.0;
    double tail_mass_tol = 1e-10;
    std::size_t max_buckets = std::size_t{1} << 24;
};

// pmf on the lattice {0, h, 2h, ...}; mass[k] sits at x = k*h.
struct GriddedPmf {
    double h = 0.0;
    std::vector<double> mass;
};

// Mass matching: bucket k takes F((k+1/2)h) - F((k-1/2)h), so total mass is
// conserved and limited-expectation errors stay O(h). The truncation deficit
// (< tail_mass_tol) is folded into the last bucket.
inline GriddedPmf discretize(const ParametricMarginal& m, const GridSpec& g) {
    require(g.h > 0.0, "bucket width must be positive");
    require(g.tail_mass_tol > 0.0 && g.tail_mass_tol < 1.0, "tail tolerance must lie in (0,1)");

    if (m.kind == MarginalKind::point_mass) {
        const auto k = static_cast<std::size_t>(std::llround(m.a / g.h));
        require(k < g.max_buckets, "point mass lies beyond max_buckets");
        GriddedPmf out{g.h, std::vector<double>(k + 1, 0.0)};
        out.mass[k] = 1.0;
        return out;
    }

    const double x_max = quantile(m, 1.0 - g.tail_mass_tol);
    const auto n = static_cast<std::size_t>(std::ceil(x_max / g.h + 0.5)) + 1;
    if (n > g.max_buckets)
        throw std::runtime_error("discretize: max_buckets exceeded before tail tolerance met");

    GriddedPmf out{g.h, std::vector<double>(n, 0.0)};
    double f_prev = 0.0;  // F((k-1/2)h), starting at F(below support) = 0
    StableSum total;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double f_cur = cdf(m, (static_cast<double>(k) + 0.5) * g.h);
        out.mass[k] = f_cur - f_prev;
        total.add(out.mass[k]);
        f_prev = f_cur;
    }
    out.mass[n - 1] = 1.0 - total.value();  // tail bucket absorbs the deficit
    return out;
}

namespace detail {

// One convolution fold in long double; carried[i] holds kappa_i * f of the
// partial sum and is pushed through the same kernel so conditional means
// survive the fold.
inline void convolve_fold(std::vector<long double>& f,
                          std::vector<std::vector<long double>>& carried,
                          const std::vector<double>& g_mass, double h) {
    const std::size_t na = f.size(), nb = g_mass.size(), n = na + nb - 1;
    std::vector<std::pair<std::size_t, long double>> nz;  // sparse incoming pmf
    nz.reserve(nb);
    for (std::size_t l = 0; l < nb; ++l)
        if (g_mass[l] != 0.0) nz.emplace_back(l, static_cast<long double>(g_mass[l]));

    std::vector<long double> nf(n, 0.0L), nw_new(n, 0.0L);
    std::vector<std::vector<long double>> nw(carried.size(),
                                             std::vector<long double>(n, 0.0L));
    for (std::size_t j = 0; j < na; ++j) {
        if (f[j] == 0.0L) continue;
        for (const auto& [l, gb] : nz) {
            const long double fg = f[j] * gb;
            nf[j + l] += fg;
            nw_new[j + l] += fg * static_cast<long double>(l) * h;
            for (std::size_t i = 0; i < carried.size(); ++i)
                nw[i][j + l] += carried[i][j] * gb;
        }
    }
    f = std::move(nf);
    carried = std::move(nw);
    carried.push_back(std::move(nw_new));
}

}  // namespace detail

// Independent sum across lines on a shared lattice. Produces the same
// LevelView shape as the exact backend: levels with zero mass are dropped,
// kappa_i(x) = (sum over partitions of x_i * prod f) / f_total(x).
inline LevelView convolve_independent(const std::vector<std::string>& names,
                                      const std::vector<GriddedPmf>& pmfs) {
    require(!pmfs.empty(), "need at least one pmf");
    require(names.size() == pmfs.size(), "one name per pmf");
    const double h = pmfs[0].h;
    for (const auto& p : pmfs) require(p.h == h, "bucket widths must match across lines");

    std::vector<long double> f(pmfs[0].mass.begin(), pmfs[0].mass.end());
    std::vector<std::vector<long double>> carried;
    {
        // A single line conditions on itself: kappa(x) = x.
        std::vector<long double> w(f.size());
        for (std::size_t k = 0; k < f.size(); ++k)
            w[k] = f[k] * static_cast<long double>(k) * h;
        carried.push_back(std::move(w));
    }
    for (std::size_t i = 1; i < pmfs.size(); ++i)
        detail::convolve_fold(f, carried, pmfs[i].mass, h);

    std::vector<double> x, p;
    std::vector<std::vector<double>> kappa(names.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
        if (f[k] <= 0.0L) continue;
        x.push_back(static_cast<double>(k) * h);
        p.push_back(static_cast<double>(f[k]));
        for (std::size_t i = 0; i < names.size(); ++i)
            kappa[i].push_back(static_cast<double>(carried[i][k] / f[k]));
    }
    require(!x.empty(), "convolution produced no mass");

    // Long-double fold keeps the mass near 1 but not exactly; renormalise so
    // the view's mass invariant holds bit-tight.
    StableSum total;
    for (double v : p) total.add(v);
    const double t = total.value();
    if (t != 1.0)
        for (auto& v : p) v /= t;
    StableSum total2;
    for (double v : p) total2.add(v);
    const double resid = 1.0 - total2.value();
    if (resid != 0.0)
        *std::max_element(p.begin(), p.end()) += resid;

    return make_level_view(names, std::move(x), std::move(p), std::move(kappa));
}

// Single line on its own lattice (stand-alone pricing path).
inline LevelView line_view(const std::string& name, const GriddedPmf& pmf) {
    return convolve_independent({name}, {pmf});
}

inline LevelView grid_view(const std::vector<std::pair<std::string, ParametricMarginal>>& lines,
                           const GridSpec& g) {
    require(!lines.empty(), "portfolio needs at least one line");
    std::vector<std::string> names;
    std::vector<GriddedPmf> pmfs;
    for (const auto& [name, m] : lines) {
        names.push_back(name);
        pmfs.push_back(discretize(m, g));
    }
    return convolve_independent(names, pmfs);
}

}  // namespace natalloc
