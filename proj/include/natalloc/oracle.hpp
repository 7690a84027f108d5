#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <random>
#include <thread>
#include <vector>

#include "natalloc/allocation.hpp"
#include "natalloc/distortion.hpp"
#include "natalloc/marginal.hpp"
#include "natalloc/numeric.hpp"
#include "natalloc/outcome_table.hpp"

namespace natalloc {

struct McConfig {
    std::size_t n = 1'000'000;  // rounded up to whole batches
    std::uint64_t seed = 0;
    std::size_t batch = 65536;
};

struct McResult {
    std::vector<double> mean;       // expected recovery per line
    std::vector<double> std_error;  // batch-means s.e.; 0 with a single batch
    std::size_t n = 0;              // draws actually used
};

// Worker-thread cap: NATALLOC_THREADS, else the hardware concurrency.
inline std::size_t thread_cap() {
    if (const char* env = std::getenv("NATALLOC_THREADS")) {
        const unsigned long long v = std::strtoull(env, nullptr, 10);
        if (v >= 1) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// Monte Carlo expected equal-priority recoveries for independent lines.
// Batches are independent sample streams keyed by (cfg.seed, batch index,
// line), and the reduction runs in batch-index order, so the result is
// bit-identical for a given cfg regardless of the thread schedule.
inline McResult mc_equal_priority(const std::vector<ParametricMarginal>& marginals,
                                  double a, const McConfig& cfg) {
    require(!marginals.empty(), "need at least one line");
    require(cfg.n >= 1, "sample count must be at least 1");
    require(cfg.batch >= 1, "batch size must be at least 1");
    require(a >= 0.0, "asset level must be >= 0");

    const std::size_t m = marginals.size();
    const std::size_t batches = (cfg.n + cfg.batch - 1) / cfg.batch;
    std::vector<std::vector<double>> batch_mean(batches, std::vector<double>(m));

    const auto run_batch = [&](std::size_t b) {
        std::vector<std::vector<double>> draw(m);
        for (std::size_t i = 0; i < m; ++i) {
            const std::uint64_t stream =
                splitmix64(cfg.seed + 0x9E3779B97F4A7C15ULL * b) + i;
            draw[i] = sample(marginals[i], cfg.batch, stream);
        }
        std::vector<StableSum> acc(m);
        for (std::size_t k = 0; k < cfg.batch; ++k) {
            double total = 0.0;
            for (std::size_t i = 0; i < m; ++i) total += draw[i][k];
            if (total <= 0.0) continue;  // nothing owed, nothing paid
            const double share = std::min(total, a) / total;
            for (std::size_t i = 0; i < m; ++i) acc[i].add(draw[i][k] * share);
        }
        for (std::size_t i = 0; i < m; ++i)
            batch_mean[b][i] = acc[i].value() / static_cast<double>(cfg.batch);
    };

    const std::size_t workers = std::min(thread_cap(), batches);
    if (workers <= 1) {
        for (std::size_t b = 0; b < batches; ++b) run_batch(b);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t b = next.fetch_add(1); b < batches;
                     b = next.fetch_add(1))
                    run_batch(b);
            });
        for (auto& th : pool) th.join();
    }

    McResult res;
    res.n = batches * cfg.batch;
    res.mean.resize(m);
    res.std_error.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        StableSum s;
        for (std::size_t b = 0; b < batches; ++b) s.add(batch_mean[b][i]);
        const double mean = s.value() / static_cast<double>(batches);
        res.mean[i] = mean;
        if (batches > 1) {
            StableSum sq;
            for (std::size_t b = 0; b < batches; ++b) {
                const double dev = batch_mean[b][i] - mean;
                sq.add(dev * dev);
            }
            res.std_error[i] = std::sqrt(
                sq.value() / (static_cast<double>(batches - 1) *
                              static_cast<double>(batches)));
        }
    }
    return res;
}

// Reference premiums by brute force: group rows with a std::map (a different
// algorithm from the production sort-based collapse so the two cross-check),
// accumulate in long double, and sum the distorted masses directly.
// Returns one row per requested asset level, one column per line.
inline std::vector<std::vector<double>> enumerate_allocation(
    const OutcomeTable& t, const Distortion& d, const std::vector<double>& assets) {
    require(t.rows.size() <= 100000, "enumeration capped at 1e5 rows");
    const std::size_t m = t.lines.size();

    struct Cell {
        long double p = 0.0L;
        long double x = 0.0L;  // probability-weighted total
        std::vector<long double> loss;
    };
    std::map<std::int64_t, Cell> levels;
    for (const auto& row : t.rows) {
        const double total = row_total(row);
        auto& c = levels[tie_key(total, OutcomeTable::kTieQuantum)];
        if (c.loss.empty()) c.loss.assign(m, 0.0L);
        c.p += row.prob;
        c.x += static_cast<long double>(row.prob) * total;
        for (std::size_t i = 0; i < m; ++i)
            c.loss[i] += static_cast<long double>(row.prob) * row.losses[i];
    }

    // survival just above each level, walking keys from the top
    std::vector<const Cell*> cells;
    cells.reserve(levels.size());
    for (const auto& [key, c] : levels) cells.push_back(&c);
    std::vector<long double> S(cells.size(), 0.0L);
    long double tail = 0.0L;
    for (std::size_t j = cells.size(); j-- > 0;) {
        S[j] = tail;
        tail += cells[j]->p;
    }

    std::vector<std::vector<double>> out;
    out.reserve(assets.size());
    for (const double a : assets) {
        require(a >= 0.0, "asset level must be >= 0");
        std::vector<long double> prem(m, 0.0L);
        long double g_prev = 1.0L;  // g(S) just below the smallest level
        for (std::size_t j = 0; j < cells.size(); ++j) {
            const double s = std::clamp(static_cast<double>(S[j]), 0.0, 1.0);
            const long double g_cur = d.g(s);
            const long double q = g_prev - g_cur;
            g_prev = g_cur;
            const long double x = cells[j]->x / cells[j]->p;
            if (x <= 0.0L) continue;
            const long double share =
                std::min(x, static_cast<long double>(a)) / x;
            for (std::size_t i = 0; i < m; ++i)
                prem[i] += q * (cells[j]->loss[i] / cells[j]->p) * share;
        }
        std::vector<double> row(m);
        for (std::size_t i = 0; i < m; ++i) row[i] = static_cast<double>(prem[i]);
        out.push_back(std::move(row));
    }
    return out;
}

struct OrderingReport {
    bool has_ties = false;
    bool exhaustive = true;     // false when permutations were subsampled
    std::size_t permutations = 0;
    std::vector<double> naive_min;   // per line, row-order allocation extremes
    std::vector<double> naive_max;
    std::vector<double> collapsed;   // the order-free value, asserted invariant
};

// How far the row-order ("naive") allocation moves as tied rows are permuted,
// against the collapsed allocation, which must not move at all.
inline OrderingReport ordering_sensitivity(const OutcomeTable& t, const Distortion& d,
                                           std::size_t cap = 3628800,
                                           std::uint64_t seed = 1) {
    require(cap >= 1, "permutation cap must be >= 1");
    OrderingReport rep;

    std::map<std::int64_t, std::vector<std::size_t>> by_total;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        by_total[tie_key(row_total(t.rows[r]), OutcomeTable::kTieQuantum)].push_back(r);
    std::vector<std::vector<std::size_t>> groups;  // tied row positions
    for (auto& [key, rows] : by_total)
        if (rows.size() > 1) groups.push_back(rows);
    if (groups.empty()) return rep;
    rep.has_ties = true;

    // total permutation count, saturating at cap + 1
    std::size_t count = 1;
    for (const auto& g : groups)
        for (std::size_t k = 2; k <= g.size() && count <= cap; ++k) count *= k;
    rep.exhaustive = count <= cap;

    const std::size_t m = t.lines.size();
    const auto reference = [&](const OutcomeTable& tab) {
        const Allocation al(bind_distortion(collapse(tab), d));
        std::vector<double> out(m);
        for (std::size_t i = 0; i < m; ++i) out[i] = al.premium_cumulative(i, kInf);
        return out;
    };
    rep.collapsed = reference(t);
    rep.naive_min.assign(m, kInf);
    rep.naive_max.assign(m, -kInf);

    const auto slots = groups;  // fixed target positions, ascending
    const auto evaluate = [&](const std::vector<std::vector<std::size_t>>& members) {
        OutcomeTable perm = t;
        for (std::size_t g = 0; g < groups.size(); ++g)
            for (std::size_t k = 0; k < slots[g].size(); ++k)
                perm.rows[slots[g][k]] = t.rows[members[g][k]];
        const auto naive = naive_row_order_allocation(perm, d);
        for (std::size_t i = 0; i < m; ++i) {
            rep.naive_min[i] = std::min(rep.naive_min[i], naive[i]);
            rep.naive_max[i] = std::max(rep.naive_max[i], naive[i]);
        }
        const auto ref = reference(perm);
        for (std::size_t i = 0; i < m; ++i)
            check_invariant(ref[i] == rep.collapsed[i],
                            "collapsed allocation is permutation-invariant");
        ++rep.permutations;
    };

    auto members = groups;
    if (rep.exhaustive) {
        // odometer over per-group permutations
        for (;;) {
            evaluate(members);
            std::size_t g = 0;
            while (g < members.size() &&
                   !std::next_permutation(members[g].begin(), members[g].end()))
                ++g;  // wrapped around; carry into the next group
            if (g == members.size()) break;
        }
    } else {
        std::mt19937_64 rng(splitmix64(seed));
        for (std::size_t it = 0; it < cap; ++it) {
            for (auto& g : members) std::shuffle(g.begin(), g.end(), rng);
            evaluate(members);
        }
    }
    return rep;
}

}  // namespace natalloc
