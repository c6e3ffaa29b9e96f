#pragma once
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "tensorbundle/errors.hpp"
#include "tensorbundle/expr.hpp"

namespace tbundle {

// A coordinate chart with the metric given entrywise as expressions in
// x1..xn. `box` is the sampling region used by verification runs; preset
// boxes keep a safety margin away from coordinate singularities (0.2 rad
// off the sphere poles).
struct ManifoldChart {
    int n = 0;
    std::string name;
    std::vector<std::vector<ExprPtr>> g;
    std::vector<std::pair<double, double>> box;

    void check() const {
        if (n < 1 || n > 4) throw BadParameter("base dimension must be within 1..4");
        if (static_cast<int>(g.size()) != n) throw ShapeMismatch("metric row count != n");
        for (const auto& row : g)
            if (static_cast<int>(row.size()) != n) throw ShapeMismatch("metric column count != n");
        if (static_cast<int>(box.size()) != n) throw ShapeMismatch("box entry count != n");
    }
};

namespace detail {

inline std::string fmt_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::vector<ExprPtr>> diag_metric(const std::vector<std::string>& entries) {
    const int n = static_cast<int>(entries.size());
    std::vector<std::vector<ExprPtr>> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        g[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j)
            g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                parse(i == j ? entries[static_cast<std::size_t>(i)] : "0");
    }
    return g;
}

} // namespace detail

// Flat space in Cartesian coordinates.
inline ManifoldChart euclidean_chart(int n) {
    if (n < 1 || n > 4) throw BadParameter("euclidean preset: n must be within 1..4");
    ManifoldChart c;
    c.n = n;
    c.name = "euclidean" + std::to_string(n);
    c.g = detail::diag_metric(std::vector<std::string>(static_cast<std::size_t>(n), "1"));
    c.box.assign(static_cast<std::size_t>(n), {-1.0, 1.0});
    return c;
}

// Round 2-sphere of the given radius in polar coordinates:
// g = diag(R^2, R^2 sin(x1)^2), sectional curvature 1/R^2.
inline ManifoldChart sphere_chart(double radius) {
    if (!(radius > 0.0)) throw BadParameter("sphere preset: radius must be positive");
    ManifoldChart c;
    c.n = 2;
    c.name = "sphere";
    const std::string r2 = detail::fmt_num(radius * radius);
    c.g = detail::diag_metric({r2, r2 + "*sin(x1)^2"});
    const double margin = 0.2; // stay off the poles
    c.box = {{margin, M_PI - margin}, {-M_PI + margin, M_PI - margin}};
    return c;
}

// Hyperbolic space of curvature -1, upper half-space model:
// g_ij = delta_ij / xn^2 on { xn > 0 }.
inline ManifoldChart hyperbolic_chart(int n) {
    if (n < 2 || n > 4) throw BadParameter("hyperbolic preset: n must be within 2..4");
    ManifoldChart c;
    c.n = n;
    c.name = "hyperbolic" + std::to_string(n);
    const std::string entry = "1/x" + std::to_string(n) + "^2";
    c.g = detail::diag_metric(std::vector<std::string>(static_cast<std::size_t>(n), entry));
    c.box.assign(static_cast<std::size_t>(n), {-1.0, 1.0});
    c.box[static_cast<std::size_t>(n - 1)] = {0.5, 2.0};
    return c;
}

// Product of the unit sphere with a flat line: diag(1, sin(x1)^2, 1).
// Curved but not of constant curvature, which makes it a useful probe.
inline ManifoldChart product_chart() {
    ManifoldChart c;
    c.n = 3;
    c.name = "product";
    c.g = detail::diag_metric({"1", "sin(x1)^2", "1"});
    const double margin = 0.2;
    c.box = {{margin, M_PI - margin}, {-M_PI + margin, M_PI - margin}, {-1.0, 1.0}};
    return c;
}

// User-supplied metric entries (full matrix, symmetric).
inline ManifoldChart custom_chart(int n, const std::vector<std::vector<std::string>>& entries,
                                  std::vector<std::pair<double, double>> box) {
    ManifoldChart c;
    c.n = n;
    c.name = "custom";
    c.g.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        c.g[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j)
            c.g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                parse(entries[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
    }
    c.box = std::move(box);
    c.check();
    return c;
}

// The positive rescale factor f in front of the horizontal block of the
// bundle metric. Carried around as an expression; second-order towers are
// all the geometry ever needs (f, df, d2f).
struct RescaleFunction {
    ExprPtr expr;

    static RescaleFunction one() { return RescaleFunction{parse("1")}; }
    static RescaleFunction from(const std::string& src) { return RescaleFunction{parse(src)}; }

    bool is_constant_one() const {
        return expr->kind == ExprKind::Number && expr->number == 1.0;
    }

    Tower tower_at(const std::vector<double>& x, int order = 2) const {
        Tower t = eval_tower(*expr, x, order);
        if (!(t.value() > 0.0)) {
            std::string msg = "rescale function must be positive; got " +
                              std::to_string(t.value()) + " at (";
            for (std::size_t k = 0; k < x.size(); ++k)
                msg += (k ? "," : "") + std::to_string(x[k]);
            throw NonPositiveRescale(msg + ")");
        }
        return t;
    }

    double value_at(const std::vector<double>& x) const { return tower_at(x, 0).value(); }
};

} // namespace tbundle
