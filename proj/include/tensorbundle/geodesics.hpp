#pragma once
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "tensorbundle/bundle_metric.hpp"
#include "tensorbundle/chart.hpp"
#include "tensorbundle/connections.hpp"
#include "tensorbundle/errors.hpp"
#include "tensorbundle/fiber.hpp"
#include "tensorbundle/frames.hpp"
#include "tensorbundle/metric_connections.hpp"
#include "tensorbundle/oracle.hpp"
#include "tensorbundle/tensor.hpp"

// Geodesics of the rescaled bundle metric, integrated in frame variables.
//
// A bundle curve is carried as (x, t, xdot, wbar) where xdot doubles as the
// horizontal frame velocity and wbar is the covariant fiber velocity (the
// vertical frame component of the curve's tangent). In these variables the
// geodesic equation of ANY connection given in the adapted frame reads
//
//     d/ds(w^alpha) + Gamma^alpha_{gamma beta} w^gamma w^beta = 0,
//
// so a single fixed-step RK4 integrator serves the Levi-Civita connection
// and the torsionful metric connection alike; the connection enters only
// through a ConnectionRule. The raw fiber velocity, needed to reconstruct
// the curve itself, comes from the horizontal correction:
//
//     dt^K/ds = wbar^K + B(l,K) dx^l/ds.
//
// Residuals of the geodesic equation are measured after the fact with
// fourth-order finite-difference stencils on the stored frame velocities,
// so they reflect the integrator, not the stencil.

namespace tbundle {

struct BundleCurveState {
    std::vector<double> x;     // base coordinates
    std::vector<double> t;     // fiber components, flat order
    std::vector<double> xdot;  // dx/ds = horizontal frame velocity
    std::vector<double> wbar;  // covariant fiber velocity (vertical frame component)
};

struct GeodesicSample {
    double s = 0.0;
    BundleCurveState state;
    double energy = 0.0;  // bundle metric paired with the tangent, both slots
    double residual = std::numeric_limits<double>::quiet_NaN();  // filled by geodesic_residuals
};

struct GeodesicTrace {
    int n = 0;
    TensorType type;
    std::vector<GeodesicSample> samples;
};

// Named rules for the two connections the integrator is used with.
inline ConnectionRule levi_civita_rule() {
    return [](const PointContext& ctx) { return levi_civita_pq(ctx); };
}
inline ConnectionRule metric_connection_rule() {
    return [](const PointContext& ctx) { return metric_connection_pq(ctx); };
}

namespace detail {

inline void check_curve_state(const TensorType& type, int n, const BundleCurveState& st) {
    const auto N = static_cast<std::size_t>(type.fiber_dim(n));
    if (st.x.size() != static_cast<std::size_t>(n) || st.xdot.size() != static_cast<std::size_t>(n))
        throw ShapeMismatch("curve state base slots do not match the chart dimension");
    if (st.t.size() != N || st.wbar.size() != N)
        throw ShapeMismatch("curve state fiber slots do not match the fiber dimension");
}

inline void check_inside_box(const ManifoldChart& chart, const std::vector<double>& x, double s) {
    for (int i = 0; i < chart.n; ++i) {
        if (x[static_cast<std::size_t>(i)] < chart.box[static_cast<std::size_t>(i)].first ||
            x[static_cast<std::size_t>(i)] > chart.box[static_cast<std::size_t>(i)].second)
            throw ChartExit("curve left the chart box in coordinate x" + std::to_string(i + 1) +
                            " near s=" + std::to_string(s));
    }
}

// Floor under the rescale factor: the vv block carries 1/f, so a curve
// entering an f->0 region cannot be advanced at any step size.
inline constexpr double kMinRescale = 1e-12;

// Step count such that the last sample lands exactly on s_max. The actual
// step equals the requested one whenever it divides s_max evenly.
inline long long step_count(double s_max, double step) {
    if (!(step > 0.0)) throw BadParameter("step must be positive");
    if (!(s_max > 0.0)) throw BadParameter("s_max must be positive");
    if (step < 1e-12 * std::fmax(1.0, s_max))
        throw StepUnderflow("step too small to advance the curve parameter");
    long long nsteps = std::llround(s_max / step);
    if (nsteps < 1) nsteps = 1;
    if (nsteps > 4000000LL) throw BadParameter("step count exceeds the 4e6 guard");
    return nsteps;
}

// Packed state layout: [x(n), t(N), xdot(n), wbar(N)].
struct PackedGeodesic {
    const ManifoldChart& chart;
    const RescaleFunction& f;
    TensorType type;
    const ConnectionRule& rule;
    int order;
    int n;
    int N;
    int D;

    // Derivative of the packed state; also reports the energy at the state
    // when asked, reusing the context built for the connection.
    std::vector<double> rhs(const std::vector<double>& y, double s, double* energy) const {
        const auto un = static_cast<std::size_t>(n);
        const auto uN = static_cast<std::size_t>(N);
        FiberPoint fp;
        fp.type = type;
        fp.x.assign(y.begin(), y.begin() + n);
        fp.t.assign(y.begin() + n, y.begin() + n + N);
        check_inside_box(chart, fp.x, s);
        PointContext ctx = point_context_at(chart, f, fp, order);
        if (ctx.rs.f < kMinRescale)
            throw StepUnderflow("rescale factor fell below 1e-12 along the curve near s=" +
                                std::to_string(s));
        ConnectionField conn = rule(ctx);

        std::vector<double> v(y.begin() + n + N, y.end());  // frame velocity (xdot, wbar)
        std::vector<double> dy(y.size(), 0.0);
        for (int l = 0; l < n; ++l) dy[static_cast<std::size_t>(l)] = v[static_cast<std::size_t>(l)];
        for (int K = 0; K < N; ++K) {
            double acc = v[un + static_cast<std::size_t>(K)];
            for (int l = 0; l < n; ++l) acc += ctx.frame.B(l, K) * v[static_cast<std::size_t>(l)];
            dy[un + static_cast<std::size_t>(K)] = acc;
        }
        for (int a = 0; a < D; ++a) {
            double acc = 0.0;
            for (int g = 0; g < D; ++g)
                for (int b = 0; b < D; ++b)
                    acc -= conn.at(g, b, a) * v[static_cast<std::size_t>(g)] * v[static_cast<std::size_t>(b)];
            dy[un + uN + static_cast<std::size_t>(a)] = acc;
        }
        if (energy) {
            double e = 0.0;
            for (int a = 0; a < D; ++a)
                for (int b = 0; b < D; ++b)
                    e += ctx.metric.at(a, b) * v[static_cast<std::size_t>(a)] * v[static_cast<std::size_t>(b)];
            *energy = e;
        }
        return dy;
    }
};

inline BundleCurveState unpack_state(const std::vector<double>& y, int n, int N) {
    BundleCurveState st;
    st.x.assign(y.begin(), y.begin() + n);
    st.t.assign(y.begin() + n, y.begin() + n + N);
    st.xdot.assign(y.begin() + n + N, y.begin() + 2 * n + N);
    st.wbar.assign(y.begin() + 2 * n + N, y.end());
    return st;
}

} // namespace detail

// One evaluation of the frame-variable geodesic right-hand side, plus the
// energy at the state. `rate` holds (dx/ds, dt/ds, dxdot/ds, dwbar/ds).
struct StateDerivative {
    BundleCurveState rate;
    double energy = 0.0;
};

inline StateDerivative geodesic_rhs(const ManifoldChart& chart, const RescaleFunction& f,
                                    const TensorType& type, const BundleCurveState& state,
                                    const ConnectionRule& rule, int geometry_order = 2) {
    chart.check();
    detail::check_curve_state(type, chart.n, state);
    const int n = chart.n;
    const int N = static_cast<int>(type.fiber_dim(n));
    detail::PackedGeodesic sys{chart, f, type, rule, geometry_order, n, N, n + N};
    std::vector<double> y;
    y.reserve(2 * static_cast<std::size_t>(n + N));
    y.insert(y.end(), state.x.begin(), state.x.end());
    y.insert(y.end(), state.t.begin(), state.t.end());
    y.insert(y.end(), state.xdot.begin(), state.xdot.end());
    y.insert(y.end(), state.wbar.begin(), state.wbar.end());
    StateDerivative out;
    auto dy = sys.rhs(y, 0.0, &out.energy);
    out.rate = detail::unpack_state(dy, n, N);
    return out;
}

// Fixed-step classical RK4 on the frame-variable system. Samples are stored
// at every step boundary; the residual column stays NaN until
// geodesic_residuals runs over the trace.
inline GeodesicTrace integrate_geodesic(const ManifoldChart& chart, const RescaleFunction& f,
                                        const TensorType& type, const BundleCurveState& start,
                                        const ConnectionRule& rule, double s_max, double step,
                                        int geometry_order = 2) {
    chart.check();
    detail::check_curve_state(type, chart.n, start);
    const int n = chart.n;
    const int N = static_cast<int>(type.fiber_dim(n));
    const long long nsteps = detail::step_count(s_max, step);
    const double h = s_max / static_cast<double>(nsteps);

    detail::PackedGeodesic sys{chart, f, type, rule, geometry_order, n, N, n + N};
    std::vector<double> y;
    y.reserve(2 * static_cast<std::size_t>(n + N));
    y.insert(y.end(), start.x.begin(), start.x.end());
    y.insert(y.end(), start.t.begin(), start.t.end());
    y.insert(y.end(), start.xdot.begin(), start.xdot.end());
    y.insert(y.end(), start.wbar.begin(), start.wbar.end());

    GeodesicTrace trace;
    trace.n = n;
    trace.type = type;
    trace.samples.reserve(static_cast<std::size_t>(nsteps) + 1);

    const std::size_t m = y.size();
    std::vector<double> yk(m);
    for (long long i = 0; i <= nsteps; ++i) {
        const double s = h * static_cast<double>(i);
        double energy = 0.0;
        auto k1 = sys.rhs(y, s, &energy);
        GeodesicSample sample;
        sample.s = s;
        sample.state = detail::unpack_state(y, n, N);
        sample.energy = energy;
        trace.samples.push_back(std::move(sample));
        if (i == nsteps) break;

        for (std::size_t j = 0; j < m; ++j) yk[j] = y[j] + 0.5 * h * k1[j];
        auto k2 = sys.rhs(yk, s + 0.5 * h, nullptr);
        for (std::size_t j = 0; j < m; ++j) yk[j] = y[j] + 0.5 * h * k2[j];
        auto k3 = sys.rhs(yk, s + 0.5 * h, nullptr);
        for (std::size_t j = 0; j < m; ++j) yk[j] = y[j] + h * k3[j];
        auto k4 = sys.rhs(yk, s + h, nullptr);
        for (std::size_t j = 0; j < m; ++j)
            y[j] += (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    return trace;
}

// Horizontal lift of a base geodesic: the base curve is integrated from the
// base equation alone and the fiber tensor is parallel-transported along it,
// so wbar vanishes identically. Whether the lift solves the bundle geodesic
// equation is exactly what geodesic_residuals then measures.
inline GeodesicTrace horizontal_lift_curve(const ManifoldChart& chart, const RescaleFunction& f,
                                           const TensorType& type, const std::vector<double>& x0,
                                           const std::vector<double>& xdot0,
                                           const std::vector<double>& t0, double s_max, double step) {
    chart.check();
    const int n = chart.n;
    const int N = static_cast<int>(type.fiber_dim(n));
    BundleCurveState start{x0, t0, xdot0, std::vector<double>(static_cast<std::size_t>(N), 0.0)};
    detail::check_curve_state(type, n, start);
    const long long nsteps = detail::step_count(s_max, step);
    const double h = s_max / static_cast<double>(nsteps);
    const auto un = static_cast<std::size_t>(n);

    // Packed layout [x(n), t(N), xdot(n)]: transport rides along the base
    // integration, dt^K/ds = B(l,K) xdot^l.
    auto rhs = [&](const std::vector<double>& y, double s) {
        FiberPoint fp;
        fp.type = type;
        fp.x.assign(y.begin(), y.begin() + n);
        fp.t.assign(y.begin() + n, y.begin() + n + N);
        detail::check_inside_box(chart, fp.x, s);
        BaseGeometry geo = geometry_at(chart, fp.x, 1);
        DTensor B = horizontal_correction(geo, fp);
        std::vector<double> dy(y.size(), 0.0);
        for (int l = 0; l < n; ++l) dy[static_cast<std::size_t>(l)] = y[un + static_cast<std::size_t>(N) + static_cast<std::size_t>(l)];
        for (int K = 0; K < N; ++K) {
            double acc = 0.0;
            for (int l = 0; l < n; ++l) acc += B(l, K) * y[un + static_cast<std::size_t>(N) + static_cast<std::size_t>(l)];
            dy[un + static_cast<std::size_t>(K)] = acc;
        }
        for (int r = 0; r < n; ++r) {
            double acc = 0.0;
            for (int l = 0; l < n; ++l)
                for (int j = 0; j < n; ++j)
                    acc -= geo.gamma(r, l, j) * y[un + static_cast<std::size_t>(N) + static_cast<std::size_t>(l)] *
                           y[un + static_cast<std::size_t>(N) + static_cast<std::size_t>(j)];
            dy[un + static_cast<std::size_t>(N) + static_cast<std::size_t>(r)] = acc;
        }
        return dy;
    };

    std::vector<double> y;
    y.reserve(static_cast<std::size_t>(2 * n + N));
    y.insert(y.end(), x0.begin(), x0.end());
    y.insert(y.end(), t0.begin(), t0.end());
    y.insert(y.end(), xdot0.begin(), xdot0.end());

    GeodesicTrace trace;
    trace.n = n;
    trace.type = type;
    trace.samples.reserve(static_cast<std::size_t>(nsteps) + 1);

    const std::size_t m = y.size();
    std::vector<double> yk(m);
    for (long long i = 0; i <= nsteps; ++i) {
        const double s = h * static_cast<double>(i);
        GeodesicSample sample;
        sample.s = s;
        sample.state.x.assign(y.begin(), y.begin() + n);
        sample.state.t.assign(y.begin() + n, y.begin() + n + N);
        sample.state.xdot.assign(y.begin() + n + N, y.end());
        sample.state.wbar.assign(static_cast<std::size_t>(N), 0.0);
        {
            FiberPoint fp{sample.state.x, sample.state.t, type};
            PointContext ctx = point_context_at(chart, f, fp, 1);
            double e = 0.0;
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b)
                    e += ctx.metric.at(a, b) * sample.state.xdot[static_cast<std::size_t>(a)] *
                         sample.state.xdot[static_cast<std::size_t>(b)];
            sample.energy = e;
        }
        trace.samples.push_back(std::move(sample));
        if (i == nsteps) break;

        auto k1 = rhs(y, s);
        for (std::size_t j = 0; j < m; ++j) yk[j] = y[j] + 0.5 * h * k1[j];
        auto k2 = rhs(yk, s + 0.5 * h);
        for (std::size_t j = 0; j < m; ++j) yk[j] = y[j] + 0.5 * h * k2[j];
        auto k3 = rhs(yk, s + 0.5 * h);
        for (std::size_t j = 0; j < m; ++j) yk[j] = y[j] + h * k3[j];
        auto k4 = rhs(yk, s + h);
        for (std::size_t j = 0; j < m; ++j)
            y[j] += (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    return trace;
}

namespace detail {

// d/ds of a uniformly sampled column, fourth order at every node: the
// classical central stencil inside, one-sided and offset stencils at the
// two samples on each end.
inline std::vector<double> stencil_derivative(const std::vector<double>& col, double h) {
    const std::size_t m = col.size();
    if (m < 5) throw BadParameter("derivative stencils need at least five samples");
    std::vector<double> d(m, 0.0);
    d[0] = (-25.0 / 12.0 * col[0] + 4.0 * col[1] - 3.0 * col[2] + 4.0 / 3.0 * col[3] - 0.25 * col[4]) / h;
    d[1] = (-0.25 * col[0] - 5.0 / 6.0 * col[1] + 1.5 * col[2] - 0.5 * col[3] + col[4] / 12.0) / h;
    for (std::size_t i = 2; i + 2 < m; ++i)
        d[i] = (col[i - 2] - 8.0 * col[i - 1] + 8.0 * col[i + 1] - col[i + 2]) / (12.0 * h);
    d[m - 2] = (-col[m - 5] / 12.0 + 0.5 * col[m - 4] - 1.5 * col[m - 3] + 5.0 / 6.0 * col[m - 2] + 0.25 * col[m - 1]) / h;
    d[m - 1] = (0.25 * col[m - 5] - 4.0 / 3.0 * col[m - 4] + 3.0 * col[m - 3] - 4.0 * col[m - 2] + 25.0 / 12.0 * col[m - 1]) / h;
    return d;
}

} // namespace detail

// Worst geodesic-equation residuals over a trace, split by block: `base`
// covers the horizontal components, `fiber` the vertical ones (for both
// connections the latter is the covariant fiber acceleration).
struct ResidualSummary {
    double max_total = 0.0;
    double max_base = 0.0;
    double max_fiber = 0.0;
};

// Measures d/ds(w) + Gamma w w on the stored samples for the connection
// produced by `rule`, writing each sample's max-abs component back into the
// trace. The trace must be uniformly sampled (integrate_geodesic and
// horizontal_lift_curve both guarantee that).
inline ResidualSummary geodesic_residuals(const ManifoldChart& chart, const RescaleFunction& f,
                                          GeodesicTrace& trace, const ConnectionRule& rule,
                                          int geometry_order = 2) {
    const std::size_t m = trace.samples.size();
    if (m < 5) throw BadParameter("residual stencils need at least five samples");
    const int n = trace.n;
    const int N = static_cast<int>(trace.type.fiber_dim(n));
    const int D = n + N;
    const double h = trace.samples[1].s - trace.samples[0].s;
    for (std::size_t i = 1; i < m; ++i)
        if (std::fabs(trace.samples[i].s - trace.samples[i - 1].s - h) > 1e-9 * std::fmax(1.0, h))
            throw BadParameter("residuals need a uniformly sampled trace");

    // Frame-velocity columns.
    std::vector<std::vector<double>> dv(static_cast<std::size_t>(D));
    {
        std::vector<double> col(m);
        for (int a = 0; a < D; ++a) {
            for (std::size_t i = 0; i < m; ++i) {
                const auto& st = trace.samples[i].state;
                col[i] = a < n ? st.xdot[static_cast<std::size_t>(a)]
                               : st.wbar[static_cast<std::size_t>(a - n)];
            }
            dv[static_cast<std::size_t>(a)] = detail::stencil_derivative(col, h);
        }
    }

    ResidualSummary out;
    std::vector<double> v(static_cast<std::size_t>(D));
    for (std::size_t i = 0; i < m; ++i) {
        const auto& st = trace.samples[i].state;
        for (int a = 0; a < n; ++a) v[static_cast<std::size_t>(a)] = st.xdot[static_cast<std::size_t>(a)];
        for (int K = 0; K < N; ++K) v[static_cast<std::size_t>(n + K)] = st.wbar[static_cast<std::size_t>(K)];
        FiberPoint fp{st.x, st.t, trace.type};
        PointContext ctx = point_context_at(chart, f, fp, geometry_order);
        ConnectionField conn = rule(ctx);
        double worst = 0.0;
        for (int a = 0; a < D; ++a) {
            double res = dv[static_cast<std::size_t>(a)][i];
            for (int g = 0; g < D; ++g)
                for (int b = 0; b < D; ++b)
                    res += conn.at(g, b, a) * v[static_cast<std::size_t>(g)] * v[static_cast<std::size_t>(b)];
            const double mag = std::fabs(res);
            worst = std::fmax(worst, mag);
            if (a < n)
                out.max_base = std::fmax(out.max_base, mag);
            else
                out.max_fiber = std::fmax(out.max_fiber, mag);
        }
        trace.samples[i].residual = worst;
        out.max_total = std::fmax(out.max_total, worst);
    }
    return out;
}

// Stacked induced-coordinate position and velocity of a curve state; the raw
// fiber velocity restores the horizontal correction that the frame variables
// absorb.
inline std::pair<std::vector<double>, std::vector<double>> induced_state(
    const ManifoldChart& chart, const TensorType& type, const BundleCurveState& st) {
    detail::check_curve_state(type, chart.n, st);
    const int n = chart.n;
    const int N = static_cast<int>(type.fiber_dim(n));
    BaseGeometry geo = geometry_at(chart, st.x, 1);
    FiberPoint fp{st.x, st.t, type};
    DTensor B = horizontal_correction(geo, fp);
    std::vector<double> y;
    y.reserve(static_cast<std::size_t>(n + N));
    y.insert(y.end(), st.x.begin(), st.x.end());
    y.insert(y.end(), st.t.begin(), st.t.end());
    std::vector<double> v(static_cast<std::size_t>(n + N), 0.0);
    for (int l = 0; l < n; ++l) v[static_cast<std::size_t>(l)] = st.xdot[static_cast<std::size_t>(l)];
    for (int K = 0; K < N; ++K) {
        double acc = st.wbar[static_cast<std::size_t>(K)];
        for (int l = 0; l < n; ++l) acc += B(l, K) * st.xdot[static_cast<std::size_t>(l)];
        v[static_cast<std::size_t>(n + K)] = acc;
    }
    return {std::move(y), std::move(v)};
}

// Geodesic of the induced-coordinate metric, driven entirely by the oracle's
// finite-difference Christoffel symbols. Nothing here touches the adapted
// frame, so the result is an independent comparison trajectory.
struct InducedTrace {
    std::vector<double> s;
    std::vector<std::vector<double>> y;  // stacked (x, t)
    std::vector<std::vector<double>> v;  // stacked (dx/ds, dt/ds)
};

inline InducedTrace oracle_geodesic(const InducedOracle& oracle, const std::vector<double>& y0,
                                    const std::vector<double>& v0, double s_max, double step) {
    const int D = oracle.dim();
    if (static_cast<int>(y0.size()) != D || static_cast<int>(v0.size()) != D)
        throw ShapeMismatch("oracle geodesic state must match the stacked bundle dimension");
    const long long nsteps = detail::step_count(s_max, step);
    const double h = s_max / static_cast<double>(nsteps);
    const auto uD = static_cast<std::size_t>(D);

    auto rhs = [&](const std::vector<double>& z) {
        std::vector<double> pos(z.begin(), z.begin() + D);
        DTensor gamma = oracle.christoffels(pos);
        std::vector<double> dz(2 * uD, 0.0);
        for (int a = 0; a < D; ++a) dz[static_cast<std::size_t>(a)] = z[uD + static_cast<std::size_t>(a)];
        for (int K = 0; K < D; ++K) {
            double acc = 0.0;
            for (int I = 0; I < D; ++I)
                for (int J = 0; J < D; ++J)
                    acc -= gamma(K, I, J) * z[uD + static_cast<std::size_t>(I)] * z[uD + static_cast<std::size_t>(J)];
            dz[uD + static_cast<std::size_t>(K)] = acc;
        }
        return dz;
    };

    std::vector<double> z;
    z.reserve(2 * uD);
    z.insert(z.end(), y0.begin(), y0.end());
    z.insert(z.end(), v0.begin(), v0.end());

    InducedTrace trace;
    trace.s.reserve(static_cast<std::size_t>(nsteps) + 1);
    const std::size_t m = z.size();
    std::vector<double> zk(m);
    for (long long i = 0; i <= nsteps; ++i) {
        trace.s.push_back(h * static_cast<double>(i));
        trace.y.emplace_back(z.begin(), z.begin() + D);
        trace.v.emplace_back(z.begin() + D, z.end());
        if (i == nsteps) break;
        auto k1 = rhs(z);
        for (std::size_t j = 0; j < m; ++j) zk[j] = z[j] + 0.5 * h * k1[j];
        auto k2 = rhs(zk);
        for (std::size_t j = 0; j < m; ++j) zk[j] = z[j] + 0.5 * h * k2[j];
        auto k3 = rhs(zk);
        for (std::size_t j = 0; j < m; ++j) zk[j] = z[j] + h * k3[j];
        auto k4 = rhs(zk);
        for (std::size_t j = 0; j < m; ++j)
            z[j] += (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    return trace;
}

// CSV export. Column order, fixed and stable:
//   s, x1..xn, t_<digits> (flat fiber order, upper digits first),
//   xdot1..xdotn, tdot_<digits>, residual, energy
// with every number printed as %.12e. tdot is the raw coordinate fiber
// velocity, reconstructed from wbar through the horizontal correction. The
// residual column is NaN unless geodesic_residuals ran over the trace.
inline void write_trace_csv(std::ostream& os, const ManifoldChart& chart,
                            const GeodesicTrace& trace) {
    const int n = trace.n;
    const int N = static_cast<int>(trace.type.fiber_dim(n));
    const int rank = trace.type.rank();

    auto digit_name = [&](int K) {
        std::string name;
        if (rank == 0) return name;
        auto idx = unflat_index(K, n, rank);
        name.reserve(static_cast<std::size_t>(rank));
        for (int d : idx) name += static_cast<char>('1' + d);
        return name;
    };

    os << "s";
    for (int i = 1; i <= n; ++i) os << ",x" << i;
    for (int K = 0; K < N; ++K) os << ",t_" << digit_name(K);
    for (int i = 1; i <= n; ++i) os << ",xdot" << i;
    for (int K = 0; K < N; ++K) os << ",tdot_" << digit_name(K);
    os << ",residual,energy\n";

    char buf[40];
    auto emit = [&](double value) {
        std::snprintf(buf, sizeof buf, "%.12e", value);
        os << ',' << buf;
    };
    for (const auto& sample : trace.samples) {
        std::snprintf(buf, sizeof buf, "%.12e", sample.s);
        os << buf;
        auto [y, v] = induced_state(chart, trace.type, sample.state);
        for (int i = 0; i < n; ++i) emit(y[static_cast<std::size_t>(i)]);
        for (int K = 0; K < N; ++K) emit(y[static_cast<std::size_t>(n + K)]);
        for (int i = 0; i < n; ++i) emit(v[static_cast<std::size_t>(i)]);
        for (int K = 0; K < N; ++K) emit(v[static_cast<std::size_t>(n + K)]);
        emit(sample.residual);
        emit(sample.energy);
        os << '\n';
    }
}

} // namespace tbundle
