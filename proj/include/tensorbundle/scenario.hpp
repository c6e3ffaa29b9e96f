#pragma once
#include <cctype>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tensorbundle/chart.hpp"
#include "tensorbundle/errors.hpp"
#include "tensorbundle/expr.hpp"
#include "tensorbundle/fiber.hpp"

// Scenario: one fully specified verification subject. Base chart (preset or
// custom metric entries), rescale factor, fiber type, optional box and
// tolerance overrides, seed and sample count. Parsed from flat key=value
// text so configs stay trivially writable and diffable.

namespace tbundle {

struct Scenario {
    std::string name;    // report label; defaults to a short synthesis
    std::string preset;  // euclidean | sphere | hyperbolic | custom
    int n = 2;
    double radius = 1.0;                          // sphere only
    std::map<std::pair<int, int>, std::string> g; // custom metric entries, 1-based
    std::string f_expr = "1";
    int p = 1;
    int q = 1;
    std::map<int, double> box_min; // 1-based coordinate overrides
    std::map<int, double> box_max;
    std::map<std::string, double> tol; // check id -> tolerance override
    std::uint64_t seed = 42;
    int samples = 6;
};

namespace detail {

inline std::string trim_ws(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline long long parse_int_field(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + value + "'");
    }
}

inline double parse_double_field(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + value + "'");
    }
}

// "base.g.2.1" -> (2,1); throws with the full key on malformed pieces.
inline int parse_index_piece(const std::string& key, const std::string& piece) {
    long long v = parse_int_field(key, piece);
    if (v < 1 || v > 4) throw ConfigError(key + ": coordinate index out of range 1..4");
    return static_cast<int>(v);
}

} // namespace detail

// Parses flat key=value text. '#' starts a comment (whole line or trailing),
// blank lines are skipped, unknown keys are rejected so typos surface as
// ConfigError instead of silently ignored configuration.
inline Scenario parse_scenario(const std::string& text) {
    Scenario sc;
    std::size_t pos = 0;
    int lineno = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim_ws(line);
        if (line.empty()) {
            if (pos > text.size()) break;
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim_ws(line.substr(0, eq));
        const std::string value = detail::trim_ws(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (value.empty()) throw ConfigError(key + ": empty value");

        if (key == "name") {
            sc.name = value;
        } else if (key == "base.preset") {
            if (value != "euclidean" && value != "sphere" && value != "hyperbolic" &&
                value != "product" && value != "custom")
                throw ConfigError("base.preset: unknown preset '" + value + "'");
            sc.preset = value;
        } else if (key == "base.n") {
            long long v = detail::parse_int_field(key, value);
            if (v < 1 || v > 4) throw ConfigError("base.n: must be within 1..4");
            sc.n = static_cast<int>(v);
        } else if (key == "base.radius") {
            double v = detail::parse_double_field(key, value);
            if (!(v > 0.0)) throw ConfigError("base.radius: must be positive");
            sc.radius = v;
        } else if (key.rfind("base.g.", 0) == 0) {
            const std::string rest = key.substr(7);
            auto dot = rest.find('.');
            if (dot == std::string::npos)
                throw ConfigError(key + ": expected base.g.<i>.<j>");
            int i = detail::parse_index_piece(key, rest.substr(0, dot));
            int j = detail::parse_index_piece(key, rest.substr(dot + 1));
            sc.g[{i, j}] = value;
        } else if (key == "f.expr") {
            sc.f_expr = value;
        } else if (key == "bundle.p" || key == "bundle.q") {
            long long v = detail::parse_int_field(key, value);
            if (v < 0 || v > 8) throw ConfigError(key + ": must be within 0..8");
            (key == "bundle.p" ? sc.p : sc.q) = static_cast<int>(v);
        } else if (key.rfind("box.", 0) == 0) {
            const std::string rest = key.substr(4);
            auto dot = rest.find('.');
            if (dot == std::string::npos) throw ConfigError(key + ": expected box.<i>.min or box.<i>.max");
            int i = detail::parse_index_piece(key, rest.substr(0, dot));
            const std::string which = rest.substr(dot + 1);
            double v = detail::parse_double_field(key, value);
            if (which == "min")
                sc.box_min[i] = v;
            else if (which == "max")
                sc.box_max[i] = v;
            else
                throw ConfigError(key + ": expected box.<i>.min or box.<i>.max");
        } else if (key.rfind("tol.", 0) == 0) {
            const std::string id = key.substr(4);
            if (id.empty()) throw ConfigError(key + ": missing check id");
            double v = detail::parse_double_field(key, value);
            if (!(v > 0.0)) throw ConfigError(key + ": tolerance must be positive");
            sc.tol[id] = v;
        } else if (key == "seed") {
            long long v = detail::parse_int_field(key, value);
            if (v < 0) throw ConfigError("seed: must be non-negative");
            sc.seed = static_cast<std::uint64_t>(v);
        } else if (key == "samples") {
            long long v = detail::parse_int_field(key, value);
            if (v < 1 || v > 1000) throw ConfigError("samples: must be within 1..1000");
            sc.samples = static_cast<int>(v);
        } else {
            throw ConfigError(key + ": unknown key");
        }
        if (pos > text.size()) break;
    }
    if (sc.preset.empty()) throw ConfigError("base.preset: required");
    if (sc.name.empty())
        sc.name = sc.preset + " f=" + sc.f_expr + " p=" + std::to_string(sc.p) +
                  " q=" + std::to_string(sc.q);
    return sc;
}

// The chart a scenario describes, with box overrides applied. Custom presets
// take entries for i <= j and mirror them; a missing diagonal entry is an
// error, a missing off-diagonal one defaults to 0.
inline ManifoldChart scenario_chart(const Scenario& sc) {
    ManifoldChart ch;
    try {
        if (sc.preset == "euclidean") {
            ch = euclidean_chart(sc.n);
        } else if (sc.preset == "sphere") {
            ch = sphere_chart(sc.radius);
        } else if (sc.preset == "hyperbolic") {
            ch = hyperbolic_chart(sc.n);
        } else if (sc.preset == "product") {
            ch = product_chart();
        } else if (sc.preset == "custom") {
            std::vector<std::vector<std::string>> entries(
                static_cast<std::size_t>(sc.n),
                std::vector<std::string>(static_cast<std::size_t>(sc.n), "0"));
            for (int i = 1; i <= sc.n; ++i)
                for (int j = i; j <= sc.n; ++j) {
                    auto it = sc.g.find({i, j});
                    if (it == sc.g.end()) it = sc.g.find({j, i});
                    if (it == sc.g.end()) {
                        if (i == j)
                            throw ConfigError("base.g." + std::to_string(i) + "." +
                                              std::to_string(j) + ": required for a custom base");
                        continue;
                    }
                    entries[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)] = it->second;
                    entries[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(i - 1)] = it->second;
                }
            std::vector<std::pair<double, double>> box(static_cast<std::size_t>(sc.n), {-1.0, 1.0});
            ch = custom_chart(sc.n, entries, box);
        } else {
            throw ConfigError("base.preset: unknown preset '" + sc.preset + "'");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError("base: " + std::string(e.what()));
    }
    for (const auto& [i, v] : sc.box_min) {
        if (i > ch.n) throw ConfigError("box." + std::to_string(i) + ".min: coordinate beyond base dimension");
        ch.box[static_cast<std::size_t>(i - 1)].first = v;
    }
    for (const auto& [i, v] : sc.box_max) {
        if (i > ch.n) throw ConfigError("box." + std::to_string(i) + ".max: coordinate beyond base dimension");
        ch.box[static_cast<std::size_t>(i - 1)].second = v;
    }
    for (int i = 0; i < ch.n; ++i)
        if (!(ch.box[static_cast<std::size_t>(i)].first < ch.box[static_cast<std::size_t>(i)].second))
            throw ConfigError("box." + std::to_string(i + 1) + ": min must stay below max");
    return ch;
}

inline RescaleFunction scenario_rescale(const Scenario& sc) {
    try {
        return RescaleFunction::from(sc.f_expr);
    } catch (const Error& e) {
        throw ConfigError("f.expr: " + std::string(e.what()));
    }
}

// Fiber type with the dense-size guard: n^(p+q) fiber components.
inline TensorType scenario_type(const Scenario& sc) {
    if (sc.p + sc.q < 1) throw ConfigError("bundle.p/bundle.q: p + q must be at least 1");
    double size = 1.0;
    for (int k = 0; k < sc.p + sc.q; ++k) size *= sc.n;
    if (size > 256.0)
        throw ConfigError("bundle.p/bundle.q: fiber dimension n^(p+q) exceeds the 256 guard");
    return TensorType{sc.p, sc.q};
}

// Shipped default scenarios: a curved base with a live factor, a flat base
// whose factor still curves the bundle, and the fully flat reference.
inline std::vector<std::pair<std::string, std::string>> builtin_scenarios() {
    return {
        {"sphere-exp",
         "name = sphere-exp\n"
         "base.preset = sphere\n"
         "base.radius = 1\n"
         "f.expr = exp(x1/5)\n"
         "bundle.p = 1\nbundle.q = 1\n"
         "seed = 42\nsamples = 6\n"},
        {"flat-poly",
         "name = flat-poly\n"
         "base.preset = euclidean\n"
         "base.n = 2\n"
         "f.expr = 1 + x1^2/10\n"
         "bundle.p = 1\nbundle.q = 1\n"
         "seed = 43\nsamples = 6\n"},
        {"flat-unit",
         "name = flat-unit\n"
         "base.preset = euclidean\n"
         "base.n = 2\n"
         "f.expr = 1\n"
         "bundle.p = 1\nbundle.q = 1\n"
         "seed = 44\nsamples = 6\n"},
    };
}

} // namespace tbundle
