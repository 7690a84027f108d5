// Command-line front end: price portfolios, sweep allocations, calibrate
// distortions, reproduce the packaged examples, and emit plot-data bundles.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "natalloc/natalloc.hpp"

namespace fs = std::filesystem;
using namespace natalloc;

namespace {

// Exactly one input backend: .json selects the parametric grid, anything
// else is read as a discrete outcome table.
struct Input {
    LevelView view;  // unbound
    std::optional<OutcomeTable> table;
    std::vector<std::pair<std::string, ParametricMarginal>> marginals;
    GridSpec grid;
};

Input load_input(const std::string& path, double grid_h) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open input file '" + path + "'");
    Input r;
    if (fs::path(path).extension() == ".json") {
        auto spec = portfolio_from_json(nlohmann::json::parse(in));
        if (grid_h > 0.0) spec.grid.h = grid_h;
        r.grid = spec.grid;
        r.marginals = std::move(spec.lines);
        r.view = grid_view(r.marginals, r.grid);
    } else {
        r.table = read_outcome_table_csv(in);
        r.view = collapse(*r.table);
    }
    return r;
}

// Inline JSON (leading '{') or a path to a JSON file.
Distortion load_distortion(const std::string& arg) {
    const auto pos = arg.find_first_not_of(" \t\n");
    if (pos != std::string::npos && arg[pos] == '{')
        return distortion_from_json(nlohmann::json::parse(arg));
    std::ifstream in(arg);
    if (!in) throw std::invalid_argument("cannot open distortion file '" + arg + "'");
    return distortion_from_json(nlohmann::json::parse(in));
}

std::vector<double> parse_assets(const std::vector<std::string>& raw) {
    std::vector<double> out;
    for (const auto& s : raw) {
        const double a = detail::parse_number(s, 0, 0);
        require(a >= 0.0, "asset level must be >= 0");
        out.push_back(a);
    }
    if (out.empty()) out.push_back(kInf);
    return out;
}

std::string level_tag(double a) { return std::isinf(a) ? "inf" : detail::fmt7(a); }

// Stand-alone (single-line) views, reusing whichever backend priced the pool.
std::vector<LevelView> line_views(const Input& in) {
    std::vector<LevelView> out;
    if (!in.marginals.empty()) {
        for (const auto& [name, m] : in.marginals)
            out.push_back(line_view(name, discretize(m, in.grid)));
    } else {
        for (std::size_t i = 0; i < in.table->lines.size(); ++i) {
            std::vector<OutcomeTable::Row> rows;
            for (const auto& r : in.table->rows)
                rows.push_back({r.prob, {r.losses[i]}});
            out.push_back(collapse(make_outcome_table({in.table->lines[i]}, rows)));
        }
    }
    return out;
}

// Writes through `fn` to stdout when no output directory was requested.
void emit(const std::string& out_dir, const std::string& fname,
          const std::function<void(std::ostream&)>& fn) {
    if (out_dir.empty()) {
        fn(std::cout);
        return;
    }
    fs::create_directories(out_dir);
    const auto path = fs::path(out_dir) / fname;
    std::ofstream f(path);
    if (!f) throw std::invalid_argument("cannot write '" + path.string() + "'");
    fn(f);
    std::cerr << "wrote " << path.string() << '\n';
}

int cmd_price(const Input& in, const Distortion& d, const std::vector<double>& assets,
              std::optional<double> delta, const std::string& out_dir,
              const std::string& format) {
    const Allocation al(bind_distortion(in.view, d));
    for (double a : assets) {
        const auto rep = delta ? al.report(a, *delta) : al.report(a);
        const auto name = "report_a" + level_tag(a) + "." + format;
        emit(out_dir, name, [&](std::ostream& os) {
            if (format == "json")
                os << report_to_json(rep).dump(2) << '\n';
            else
                write_report_csv(os, rep);
        });
    }
    return 0;
}

int cmd_allocate(const Input& in, const Distortion& d,
                 const std::vector<double>& assets, const std::string& out_dir,
                 const std::string& format) {
    const Allocation al(bind_distortion(in.view, d));
    const auto& v = al.view();
    if (format == "json") {
        auto levels = nlohmann::json::array();
        for (double a : assets) {
            nlohmann::json e;
            e["assets"] = detail::num_to_json(a);
            auto lines = nlohmann::json::array();
            for (std::size_t i = 0; i < v.line_count(); ++i) {
                nlohmann::json l;
                l["name"] = v.lines[i];
                l["loss"] = detail::num_to_json(al.loss_cumulative(i, a));
                l["premium"] = detail::num_to_json(al.premium_cumulative(i, a));
                l["margin"] = detail::num_to_json(al.margin_cumulative(i, a));
                l["equity"] = detail::num_to_json(al.equity_cumulative(i, a));
                lines.push_back(std::move(l));
            }
            e["lines"] = std::move(lines);
            levels.push_back(std::move(e));
        }
        emit(out_dir, "allocation.json",
             [&](std::ostream& os) { os << levels.dump(2) << '\n'; });
        return 0;
    }
    emit(out_dir, "allocation.csv", [&](std::ostream& os) {
        os << "assets,line,loss,premium,margin,equity\n";
        for (double a : assets) {
            for (std::size_t i = 0; i < v.line_count(); ++i)
                os << level_tag(a) << ',' << v.lines[i] << ','
                   << detail::fmt7(al.loss_cumulative(i, a)) << ','
                   << detail::fmt7(al.premium_cumulative(i, a)) << ','
                   << detail::fmt7(al.margin_cumulative(i, a)) << ','
                   << detail::fmt7(al.equity_cumulative(i, a)) << '\n';
            const double prem = rho_total(v, a), loss = expected_limited(v, a);
            os << level_tag(a) << ",TOTAL," << detail::fmt7(loss) << ','
               << detail::fmt7(prem) << ',' << detail::fmt7(prem - loss) << ','
               << detail::fmt7(a - prem) << '\n';
        }
    });
    return 0;
}

int cmd_calibrate(const Input& in, const std::string& family, double assets,
                  double target, const std::string& out_dir) {
    Family f;
    if (family == "wang")
        f = Family::wang;
    else if (family == "ph")
        f = Family::proportional_hazard;
    else if (family == "identity")
        f = Family::identity;
    else
        f = Family::piecewise_linear;
    const auto d = calibrate(f, in.view, assets, target);
    emit(out_dir, "calibration.json",
         [&](std::ostream& os) { os << distortion_to_json(d).dump(2) << '\n'; });
    return 0;
}

int cmd_reproduce(const std::string& name) {
    std::vector<fixtures::Check> checks;
    if (name == "eg1") {
        checks = fixtures::eg1_checks();
    } else if (name == "priority") {
        checks = fixtures::priority_checks();
    } else {
        checks = fixtures::eg2_checks();
        checks.push_back(fixtures::calibration_check());
    }

    std::printf("%-32s %15s %18s %10s  %s\n", "check", "computed", "expected", "diff",
                "status");
    std::size_t failed = 0;
    for (const auto& c : checks) {
        char expected[64];
        double diff = 0.0;
        if (c.mode == fixtures::Check::Mode::interval) {
            std::snprintf(expected, sizeof expected, "[%.6g, %.6g]", c.lo, c.hi);
            if (c.computed < c.lo) diff = c.lo - c.computed;
            if (c.computed > c.hi) diff = c.computed - c.hi;
        } else {
            std::snprintf(expected, sizeof expected, "%.9g", c.expected);
            const double v = c.mode == fixtures::Check::Mode::printed
                                 ? fixtures::Check::round_sig(c.computed, c.sig)
                                 : c.computed;
            diff = std::abs(v - c.expected);
        }
        const bool ok = c.pass();
        failed += !ok;
        std::printf("%-32s %15.9g %18s %10.2e  %s\n", c.name.c_str(), c.computed,
                    expected, diff, ok ? "pass" : "FAIL");
    }
    if (failed == 0) {
        std::printf("all %zu checks passed\n", checks.size());
        return 0;
    }
    std::printf("%zu of %zu checks failed\n", failed, checks.size());
    return 1;
}

int cmd_plotdata(const Input& in, const Distortion& d, const std::string& out_dir) {
    const Allocation al(bind_distortion(in.view, d));
    const auto& v = al.view();
    const auto c = al.curves(v.x);
    const std::size_t m = v.line_count();

    const auto write = [&](const std::string& fname, const std::string& x_name,
                           const std::vector<double>& x,
                           const std::vector<Series>& cols) {
        emit(out_dir, fname,
             [&](std::ostream& os) { write_series_csv(os, x_name, x, cols); });
    };

    // (1,1)/(1,2): aggregate mass under both measures, linear and log scale
    std::vector<double> logp(v.size()), logq(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) {
        logp[j] = std::log10(v.p[j]);
        logq[j] = v.q[j] > 0.0 ? std::log10(v.q[j]) : -kInf;
    }
    write("panel_11_density.csv", "x", v.x, {{"p", &v.p}, {"q", &v.q}});
    write("panel_12_log_density.csv", "x", v.x,
          {{"log10_p", &logp}, {"log10_q", &logq}});

    // (2,1): conditional means by total loss level
    {
        std::vector<Series> cols;
        for (std::size_t i = 0; i < m; ++i)
            cols.push_back({"kappa_" + v.lines[i], &v.kappa[i]});
        write("panel_21_conditional_means.csv", "x", v.x, cols);
    }

    // (2,2)/(2,3): objective recovery shares, then both measures overlaid
    {
        std::vector<Series> a_cols, ab_cols;
        for (std::size_t i = 0; i < m; ++i) {
            a_cols.push_back({"alpha_" + v.lines[i], &c.alpha[i]});
            ab_cols.push_back({"alpha_" + v.lines[i], &c.alpha[i]});
            ab_cols.push_back({"beta_" + v.lines[i], &c.beta[i]});
        }
        write("panel_22_alpha.csv", "x", v.x, a_cols);
        write("panel_23_alpha_beta.csv", "x", v.x, ab_cols);
    }

    // (3,1)/(4,1): per-line loss vs premium density overlays
    for (std::size_t i = 0; i < m; ++i)
        write("panel_31_line_" + v.lines[i] + ".csv", "x", v.x,
              {{"loss_density", &c.loss_density[i]},
               {"premium_density", &c.premium_density[i]}});

    // (3,2)/(4,2): margin densities and their running integrals
    {
        std::vector<Series> cols;
        for (std::size_t i = 0; i < m; ++i)
            cols.push_back({"margin_" + v.lines[i], &c.margin_density[i]});
        write("panel_32_margin_density.csv", "x", v.x, cols);

        // exact step integral over the level partition, one layer at a time
        std::vector<std::vector<double>> cum(m, std::vector<double>(v.size()));
        for (std::size_t i = 0; i < m; ++i) {
            StableSum run;
            double x_prev = 0.0;
            for (std::size_t j = 0; j < v.size(); ++j) {
                if (v.x[j] > x_prev) run.add(al.margin_density(i, x_prev) * (v.x[j] - x_prev));
                x_prev = v.x[j];
                cum[i][j] = run.value();
            }
        }
        std::vector<Series> ccols;
        for (std::size_t i = 0; i < m; ++i)
            ccols.push_back({"margin_" + v.lines[i], &cum[i]});
        write("panel_42_cumulative_margin.csv", "x", v.x, ccols);
    }

    // (3,3): stand-alone quantile curves per line
    for (const auto& lv : line_views(in)) {
        const Allocation one(bind_distortion(lv, d));
        const auto lee = one.lee_curves();
        write("panel_33_standalone_" + lee.lines[0] + ".csv", "x", lee.x,
              {{"F", &lee.F}, {"Fq", &lee.Fq}});
    }

    // (4,3): pooled quantile curves with per-line conditional means
    {
        const auto lee = al.lee_curves();
        std::vector<Series> cols{{"F", &lee.F}, {"Fq", &lee.Fq}};
        for (std::size_t i = 0; i < m; ++i)
            cols.push_back({"kappa_" + lee.lines[i], &lee.kappa[i]});
        write("panel_43_lee.csv", "x", lee.x, cols);
    }
    return 0;
}

int cmd_verify(const Input& in, const Distortion& d, std::vector<double> assets,
               std::uint64_t seed) {
    const Allocation al(bind_distortion(in.view, d));
    const auto& v = al.view();
    const double x_max = v.x.back();
    for (double f : {0.25, 0.5, 1.0}) assets.push_back(f * x_max);
    assets.push_back(kInf);

    std::size_t groups = 0;
    for (double a : assets) {
        StableSum prem, loss;
        for (std::size_t i = 0; i < v.line_count(); ++i) {
            prem.add(al.premium_cumulative(i, a));  // dual-route checked inside
            loss.add(al.loss_cumulative(i, a));
        }
        const double want_p = rho_total(v, a), want_l = expected_limited(v, a);
        check_invariant(std::abs(prem.value() - want_p) <=
                            1e-9 * std::max(1.0, std::abs(want_p)),
                        "premium additivity across lines");
        check_invariant(std::abs(loss.value() - want_l) <=
                            1e-9 * std::max(1.0, std::abs(want_l)),
                        "loss additivity across lines");
        (void)al.report(a);  // report identities validate internally
        ++groups;
    }

    if (in.table) {
        const auto rep = ordering_sensitivity(*in.table, d, 40320, seed);
        if (rep.has_ties)
            std::printf("ordering: %llu row orders examined%s; collapsed values "
                        "order-free\n",
                        static_cast<unsigned long long>(rep.permutations),
                        rep.exhaustive ? "" : " (sampled)");
        const auto ref = enumerate_allocation(*in.table, d, {kInf});
        for (std::size_t i = 0; i < v.line_count(); ++i)
            check_invariant(std::abs(ref[0][i] - al.premium_cumulative(i, kInf)) <=
                                1e-9 * std::max(1.0, std::abs(ref[0][i])),
                            "enumeration agreement");
        ++groups;
    }

    std::printf("verified %zu invariant groups; no violations\n", groups);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiline pricing and capital allocation under distortion risk "
                 "measures"};
    app.require_subcommand(1);

    std::string input, distortion_arg, out_dir, format = "csv", family, repro_name;
    std::vector<std::string> assets_raw;
    std::optional<double> delta;
    double grid_h = 0.0, target_return = 0.0;
    std::uint64_t seed = 1;

    const auto add_input = [&](CLI::App* cmd, bool need_distortion) {
        cmd->add_option("--input", input,
                        ".json portfolio spec or CSV outcome table")
            ->required();
        auto* opt = cmd->add_option("--distortion", distortion_arg,
                                    "inline JSON or path to a distortion spec");
        if (need_distortion) opt->required();
        cmd->add_option("--grid-h", grid_h, "override the grid step for .json input");
    };

    auto* price = app.add_subcommand("price", "full pricing report per asset level");
    add_input(price, true);
    price->add_option("--assets", assets_raw, "asset level(s), number or 'inf'");
    price->add_option("--delta", delta, "frictional capital rate");
    price->add_option("--out", out_dir, "output directory (default: stdout)");
    price->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));

    auto* alloc = app.add_subcommand("allocate",
                                     "cumulative allocation sweep across asset levels");
    add_input(alloc, true);
    alloc->add_option("--assets", assets_raw, "asset level(s), number or 'inf'");
    alloc->add_option("--out", out_dir, "output directory (default: stdout)");
    alloc->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));

    auto* cal = app.add_subcommand("calibrate",
                                   "solve the family parameter for a target return");
    add_input(cal, false);
    cal->add_option("--family", family)
        ->required()
        ->check(CLI::IsMember({"wang", "ph", "identity", "piecewise"}));
    cal->add_option("--assets", assets_raw, "asset level")->required();
    cal->add_option("--target-return", target_return, "expected return on equity")
        ->required();
    cal->add_option("--out", out_dir, "output directory (default: stdout)");

    auto* repro = app.add_subcommand("reproduce",
                                     "re-run a packaged example against its "
                                     "expected values");
    repro->add_option("name", repro_name, "eg1 | eg2 | priority")
        ->required()
        ->check(CLI::IsMember({"eg1", "eg2", "priority"}));

    auto* plot = app.add_subcommand("plot-data", "emit per-panel curve CSVs");
    add_input(plot, true);
    plot->add_option("--out", out_dir, "output directory (default: plots)");

    auto* verify = app.add_subcommand("verify",
                                      "run internal invariant checks on an input");
    add_input(verify, true);
    verify->add_option("--assets", assets_raw, "extra asset level(s) to check");
    verify->add_option("--seed", seed, "seed for sampled row orderings");

    CLI11_PARSE(app, argc, argv);

    try {
        if (repro->parsed()) return cmd_reproduce(repro_name);

        const Input in = load_input(input, grid_h);
        if (cal->parsed()) {
            const auto levels = parse_assets(assets_raw);
            require(levels.size() == 1, "calibrate takes exactly one asset level");
            return cmd_calibrate(in, family, levels[0], target_return, out_dir);
        }
        const Distortion d = load_distortion(distortion_arg);
        if (price->parsed())
            return cmd_price(in, d, parse_assets(assets_raw), delta, out_dir, format);
        if (alloc->parsed())
            return cmd_allocate(in, d, parse_assets(assets_raw), out_dir, format);
        if (plot->parsed()) return cmd_plotdata(in, d, out_dir.empty() ? "plots" : out_dir);
        if (verify->parsed()) {
            std::vector<double> extra;
            if (!assets_raw.empty()) extra = parse_assets(assets_raw);
            return cmd_verify(in, d, extra, seed);
        }
    } catch (const CalibrationFailure& e) {
        std::cerr << "calibration failure: " << e.what() << '\n';
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::logic_error& e) {
        std::cerr << "invariant failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
