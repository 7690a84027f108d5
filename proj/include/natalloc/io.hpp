#pragma once

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "natalloc/allocation.hpp"
#include "natalloc/distortion.hpp"
#include "natalloc/grid.hpp"
#include "natalloc/marginal.hpp"
#include "natalloc/numeric.hpp"
#include "natalloc/outcome_table.hpp"

namespace natalloc {

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, std::size_t column, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ", column " +
                             std::to_string(column) + ": " + what),
          line(line),
          column(column) {}
    std::size_t line;
    std::size_t column;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv(std::string_view row) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= row.size(); ++i) {
        if (i == row.size() || row[i] == ',') {
            out.push_back(trim(row.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

inline double parse_plain(std::string_view s, std::size_t line, std::size_t col) {
    if (s == "inf") return kInf;
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ParseError(line, col, "expected a number, got '" + std::string(s) + "'");
    return v;
}

// decimals or fractions "a/b"
inline double parse_number(std::string_view s, std::size_t line, std::size_t col) {
    if (s.empty()) throw ParseError(line, col, "empty field");
    const auto slash = s.find('/');
    if (slash == std::string_view::npos) return parse_plain(s, line, col);
    const double num = parse_plain(trim(s.substr(0, slash)), line, col);
    const double den = parse_plain(trim(s.substr(slash + 1)), line, col);
    if (den == 0.0) throw ParseError(line, col, "fraction with zero denominator");
    return num / den;
}

}  // namespace detail

// Header `prob,<line1>,<line2>,...`, one outcome per row, numbers as decimals
// or fractions "a/b". Positions in errors are 1-based (line, field).
inline OutcomeTable read_outcome_table_csv(std::istream& in) {
    std::string row;
    std::size_t lineno = 0;
    std::vector<std::string> names;
    while (std::getline(in, row)) {
        ++lineno;
        if (detail::trim(row).empty()) continue;
        const auto header = detail::split_csv(row);
        if (header.empty() || header[0] != "prob")
            throw ParseError(lineno, 1, "header must start with 'prob'");
        if (header.size() < 2)
            throw ParseError(lineno, 1, "header needs at least one line column");
        for (std::size_t i = 1; i < header.size(); ++i) {
            if (header[i].empty())
                throw ParseError(lineno, i + 1, "empty line name");
            names.emplace_back(header[i]);
        }
        break;
    }
    if (names.empty()) throw ParseError(lineno + 1, 1, "missing header row");

    std::vector<OutcomeTable::Row> rows;
    while (std::getline(in, row)) {
        ++lineno;
        if (detail::trim(row).empty()) continue;
        const auto fields = detail::split_csv(row);
        if (fields.size() != names.size() + 1)
            throw ParseError(lineno, 1,
                             "expected " + std::to_string(names.size() + 1) +
                                 " fields, got " + std::to_string(fields.size()));
        OutcomeTable::Row r;
        r.prob = detail::parse_number(fields[0], lineno, 1);
        for (std::size_t i = 1; i < fields.size(); ++i)
            r.losses.push_back(detail::parse_number(fields[i], lineno, i + 1));
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw ParseError(lineno + 1, 1, "table has no outcome rows");
    return make_outcome_table(std::move(names), std::move(rows));
}

// {"family":"wang","lambda":l} | {"family":"ph","r":r} | {"family":"identity"}
// | {"family":"piecewise","knots":[[s,g],...]}
inline Distortion distortion_from_json(const nlohmann::json& j) {
    require(j.is_object() && j.contains("family"),
            "distortion spec needs a 'family' field");
    const std::string fam = j.at("family").get<std::string>();
    if (fam == "identity") return Distortion::identity();
    if (fam == "ph") {
        require(j.contains("r"), "ph distortion needs field 'r'");
        return Distortion::proportional_hazard(j.at("r").get<double>());
    }
    if (fam == "wang") {
        require(j.contains("lambda"), "wang distortion needs field 'lambda'");
        return Distortion::wang(j.at("lambda").get<double>());
    }
    if (fam == "piecewise") {
        require(j.contains("knots"), "piecewise distortion needs field 'knots'");
        Distortion::Knots knots;
        for (const auto& k : j.at("knots")) {
            require(k.is_array() && k.size() == 2, "knots must be [s, g] pairs");
            knots.emplace_back(k[0].get<double>(), k[1].get<double>());
        }
        return Distortion::piecewise_linear(std::move(knots));
    }
    throw std::invalid_argument("unknown distortion family '" + fam + "'");
}

inline nlohmann::json distortion_to_json(const Distortion& d) {
    nlohmann::json j;
    switch (d.family()) {
        case Family::identity:
            j["family"] = "identity";
            break;
        case Family::proportional_hazard:
            j["family"] = "ph";
            j["r"] = d.parameter();
            break;
        case Family::wang:
            j["family"] = "wang";
            j["lambda"] = d.parameter();
            break;
        case Family::piecewise_linear: {
            j["family"] = "piecewise";
            auto knots = nlohmann::json::array();
            for (const auto& [s, g] : d.knots()) knots.push_back({s, g});
            j["knots"] = std::move(knots);
            break;
        }
    }
    return j;
}

struct PortfolioSpec {
    std::vector<std::pair<std::string, ParametricMarginal>> lines;
    GridSpec grid;
};

// {"lines":[{"name","kind","mean","cv","shift","factor"}...],
//  "grid":{"h","tail_tol"}}; point_mass lines need only name/kind/mean.
inline PortfolioSpec portfolio_from_json(const nlohmann::json& j) {
    require(j.is_object() && j.contains("lines") && j.at("lines").is_array() &&
                !j.at("lines").empty(),
            "portfolio spec needs a nonempty 'lines' array");
    PortfolioSpec spec;
    for (const auto& e : j.at("lines")) {
        require(e.contains("name") && e.contains("kind") && e.contains("mean"),
                "each line needs 'name', 'kind', 'mean'");
        const std::string name = e.at("name").get<std::string>();
        const std::string kind = e.at("kind").get<std::string>();
        const double mean = e.at("mean").get<double>();
        if (kind == "point_mass") {
            spec.lines.emplace_back(name, ParametricMarginal::point_mass(mean));
            continue;
        }
        require(e.contains("cv"), "parametric line '" + name + "' needs 'cv'");
        const double cv = e.at("cv").get<double>();
        const double shift = e.value("shift", 0.0);
        const double factor = e.value("factor", 1.0);
        MarginalKind mk;
        if (kind == "gamma")
            mk = MarginalKind::gamma;
        else if (kind == "lognormal")
            mk = MarginalKind::lognormal;
        else if (kind == "shifted_lognormal")
            mk = MarginalKind::shifted_lognormal;
        else
            throw std::invalid_argument("unknown marginal kind '" + kind + "'");
        spec.lines.emplace_back(name, moments_to_params(mk, mean, cv, shift, factor));
    }
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        spec.grid.h = g.value("h", spec.grid.h);
        spec.grid.tail_mass_tol = g.value("tail_tol", spec.grid.tail_mass_tol);
        require(spec.grid.h > 0.0, "grid step must be positive");
        require(spec.grid.tail_mass_tol > 0.0, "grid tail tolerance must be positive");
    }
    return spec;
}

namespace detail {

// All human-readable numerics carry 7 significant digits.
inline std::string fmt7(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.7g", v);
    return buf;
}

}  // namespace detail

// One row per line plus TOTAL. Intermediated premiums appear only on runs
// that priced a frictional rate.
inline void write_report_csv(std::ostream& out, const PricingReport& r) {
    out << "line,loss,premium,margin,equity,loss_ratio,return,leverage";
    if (r.has_delta) out << ",intermediated";
    out << '\n';
    const auto row = [&](const std::string& name, double loss, double prem,
                         double marg, double eq, double lr, double ret, double lev,
                         double inter) {
        out << name << ',' << detail::fmt7(loss) << ',' << detail::fmt7(prem) << ','
            << detail::fmt7(marg) << ',' << detail::fmt7(eq) << ',' << detail::fmt7(lr)
            << ',' << detail::fmt7(ret) << ',' << detail::fmt7(lev);
        if (r.has_delta) out << ',' << detail::fmt7(inter);
        out << '\n';
    };
    for (std::size_t i = 0; i < r.lines.size(); ++i)
        row(r.lines[i], r.loss[i], r.premium[i], r.margin[i], r.equity[i],
            r.loss_ratio[i], r.line_return[i], r.leverage[i],
            r.has_delta ? r.intermediated[i] : 0.0);
    row("TOTAL", r.total_loss, r.total_premium, r.total_margin, r.total_equity,
        r.total_loss_ratio, r.total_return, r.total_leverage,
        r.has_delta ? r.total_intermediated : 0.0);
}

namespace detail {

// JSON has no literal for non-finite doubles; they travel as strings.
inline nlohmann::json num_to_json(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

inline double num_from_json(const nlohmann::json& j) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "inf") return kInf;
        if (s == "-inf") return -kInf;
        if (s == "nan") return std::nan("");
        throw std::invalid_argument("expected a number, got '" + s + "'");
    }
    return j.get<double>();
}

}  // namespace detail

// Full-precision report: values round-trip bit-for-bit through dump/parse.
inline nlohmann::json report_to_json(const PricingReport& r) {
    using detail::num_to_json;
    nlohmann::json j;
    j["assets"] = num_to_json(r.assets);
    if (r.has_delta) j["delta"] = r.delta;
    j["degenerate_layers"] = r.degenerate_layers;
    auto lines = nlohmann::json::array();
    for (std::size_t i = 0; i < r.lines.size(); ++i) {
        nlohmann::json e;
        e["name"] = r.lines[i];
        e["loss"] = num_to_json(r.loss[i]);
        e["premium"] = num_to_json(r.premium[i]);
        e["margin"] = num_to_json(r.margin[i]);
        e["equity"] = num_to_json(r.equity[i]);
        e["loss_ratio"] = num_to_json(r.loss_ratio[i]);
        e["return"] = num_to_json(r.line_return[i]);
        e["leverage"] = num_to_json(r.leverage[i]);
        if (r.has_delta) e["intermediated"] = num_to_json(r.intermediated[i]);
        lines.push_back(std::move(e));
    }
    j["lines"] = std::move(lines);
    nlohmann::json t;
    t["loss"] = num_to_json(r.total_loss);
    t["premium"] = num_to_json(r.total_premium);
    t["margin"] = num_to_json(r.total_margin);
    t["equity"] = num_to_json(r.total_equity);
    t["loss_ratio"] = num_to_json(r.total_loss_ratio);
    t["return"] = num_to_json(r.total_return);
    t["leverage"] = num_to_json(r.total_leverage);
    if (r.has_delta) t["intermediated"] = num_to_json(r.total_intermediated);
    j["total"] = std::move(t);
    return j;
}

inline PricingReport report_from_json(const nlohmann::json& j) {
    using detail::num_from_json;
    PricingReport r;
    r.assets = num_from_json(j.at("assets"));
    r.has_delta = j.contains("delta");
    if (r.has_delta) r.delta = j.at("delta").get<double>();
    r.degenerate_layers = j.value("degenerate_layers", false);
    for (const auto& e : j.at("lines")) {
        r.lines.push_back(e.at("name").get<std::string>());
        r.loss.push_back(num_from_json(e.at("loss")));
        r.premium.push_back(num_from_json(e.at("premium")));
        r.margin.push_back(num_from_json(e.at("margin")));
        r.equity.push_back(num_from_json(e.at("equity")));
        r.loss_ratio.push_back(num_from_json(e.at("loss_ratio")));
        r.line_return.push_back(num_from_json(e.at("return")));
        r.leverage.push_back(num_from_json(e.at("leverage")));
        if (r.has_delta) r.intermediated.push_back(num_from_json(e.at("intermediated")));
    }
    const auto& t = j.at("total");
    r.total_loss = num_from_json(t.at("loss"));
    r.total_premium = num_from_json(t.at("premium"));
    r.total_margin = num_from_json(t.at("margin"));
    r.total_equity = num_from_json(t.at("equity"));
    r.total_loss_ratio = num_from_json(t.at("loss_ratio"));
    r.total_return = num_from_json(t.at("return"));
    r.total_leverage = num_from_json(t.at("leverage"));
    if (r.has_delta)
        r.total_intermediated = num_from_json(t.at("intermediated"));
    return r;
}

// Generic plot-data writer: abscissa plus named series of equal length.
struct Series {
    std::string name;
    const std::vector<double>* values;
};

inline void write_series_csv(std::ostream& out, const std::string& x_name,
                             const std::vector<double>& x,
                             const std::vector<Series>& cols) {
    out << x_name;
    for (const auto& c : cols) {
        require(c.values->size() == x.size(), "series length mismatch");
        out << ',' << c.name;
    }
    out << '\n';
    for (std::size_t k = 0; k < x.size(); ++k) {
        out << detail::fmt7(x[k]);
        for (const auto& c : cols) out << ',' << detail::fmt7((*c.values)[k]);
        out << '\n';
    }
}

}  // namespace natalloc
