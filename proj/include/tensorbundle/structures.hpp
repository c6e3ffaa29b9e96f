#pragma once
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "tensorbundle/connections.hpp"
#include "tensorbundle/rng.hpp"

namespace tbundle {

// Endomorphisms of the bundle tangent space that act blockwise in the
// adapted frame: horizontal components scale by h_mult, vertical ones by
// v_mult. The named instances:
//   para_structure()               (-1, +1)  involution reflecting the
//                                            horizontal distribution
//   diagonal_identity_structure()  (+1, -1)  involution reflecting the
//                                            vertical distribution
//   golden_structure()             ((1-s5)/2, (1+s5)/2)
//   conjugate_golden_structure()   ((1+s5)/2, (1-s5)/2)
// with s5 = sqrt(5); the golden multipliers are the two roots of
// x^2 = x + 1, so those structures square to themselves plus the identity.
struct StructureTensor {
    double h_mult = 1.0;
    double v_mult = 1.0;
};

inline StructureTensor para_structure() { return {-1.0, 1.0}; }

inline StructureTensor diagonal_identity_structure() { return {1.0, -1.0}; }

inline StructureTensor golden_structure() {
    const double s5 = std::sqrt(5.0);
    return {0.5 * (1.0 - s5), 0.5 * (1.0 + s5)};
}

inline StructureTensor conjugate_golden_structure() {
    const double s5 = std::sqrt(5.0);
    return {0.5 * (1.0 + s5), 0.5 * (1.0 - s5)};
}

// A golden structure sits over an involution: F = (2 psi - id)/sqrt(5)
// squares to the identity, and psi = (id + sqrt(5) F)/2 recovers it.
inline StructureTensor product_from_golden(const StructureTensor& psi) {
    const double s5 = std::sqrt(5.0);
    return {(2.0 * psi.h_mult - 1.0) / s5, (2.0 * psi.v_mult - 1.0) / s5};
}

inline StructureTensor golden_from_product(const StructureTensor& F) {
    const double s5 = std::sqrt(5.0);
    return {0.5 * (1.0 + s5 * F.h_mult), 0.5 * (1.0 + s5 * F.v_mult)};
}

inline AdaptedField apply_structure(const StructureTensor& S, const AdaptedField& X) {
    AdaptedField out = X;
    for (double& c : out.h) c *= S.h_mult;
    for (double& c : out.v) c *= S.v_mult;
    return out;
}

inline AdaptedField random_adapted(int n, int N, Rng& rng, double lo = -1.0, double hi = 1.0) {
    return AdaptedField{rng.uniform_vec(n, lo, hi), rng.uniform_vec(N, lo, hi)};
}

// Purity defect of the bundle metric: max |g(SX, Y) - g(X, SY)| over random
// component pairs. Block structures are always pure because the metric has
// no mixed block; the matrix overload lets a test feed a deliberately
// block-mixing map and watch the defect appear.
inline double purity_check(const PointContext& ctx, const StructureTensor& S, int samples,
                           Rng& rng) {
    const int n = ctx.n();
    const int N = ctx.N();
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const AdaptedField X = random_adapted(n, N, rng);
        const AdaptedField Y = random_adapted(n, N, rng);
        const double d = std::fabs(ctx.metric.pair(apply_structure(S, X), Y) -
                                   ctx.metric.pair(X, apply_structure(S, Y)));
        if (d > worst) worst = d;
    }
    return worst;
}

inline double purity_check(const PointContext& ctx, const Matrix& S, int samples, Rng& rng) {
    const int D = ctx.dim();
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const std::vector<double> x = rng.uniform_vec(D, -1.0, 1.0);
        const std::vector<double> y = rng.uniform_vec(D, -1.0, 1.0);
        const std::vector<double> Sx = mat_vec(S, x);
        const std::vector<double> Sy = mat_vec(S, y);
        double g1 = 0.0, g2 = 0.0;
        for (int a = 0; a < D; ++a)
            for (int b = 0; b < D; ++b) {
                const double m = ctx.metric.at(a, b);
                if (m == 0.0) continue;
                g1 += m * Sx[static_cast<std::size_t>(a)] * y[static_cast<std::size_t>(b)];
                g2 += m * x[static_cast<std::size_t>(a)] * Sy[static_cast<std::size_t>(b)];
            }
        const double d = std::fabs(g1 - g2);
        if (d > worst) worst = d;
    }
    return worst;
}

// ---------------------------------------------------------------------------
// The derivation measuring whether the bundle metric is holomorphic with
// respect to a structure S:
//
//   (phi_S g)(X, Y, Z) = (SX)(g(Y, Z)) - X(g(SY, Z))
//                        + g((L_Y S)X, Z) + g(Y, (L_Z S)X)
//
// with L the Lie derivative, everything evaluated by finite differences in
// the induced coordinates (x, t): directional derivatives of the pairing as
// central differences, Lie brackets as commutators of the induced component
// functions. The adapted-frame anholonomy never enters, so closed forms
// checked against this routine are confirmed by an independent route.

inline std::vector<double> stacked_point(const FiberPoint& fp) {
    std::vector<double> y = fp.x;
    y.insert(y.end(), fp.t.begin(), fp.t.end());
    return y;
}

inline FiberPoint fiber_point_from_stacked(const TensorType& type, int n,
                                           const std::vector<double>& y) {
    FiberPoint fp;
    fp.type = type;
    fp.x.assign(y.begin(), y.begin() + n);
    fp.t.assign(y.begin() + n, y.end());
    return fp;
}

// Induced components of a bundle field at a stacked point: push the adapted
// components through the frame there. First-order geometry suffices.
inline std::vector<double> induced_field_at(const ManifoldChart& chart, const TensorType& type,
                                            const BundleField& F, const std::vector<double>& y) {
    const FiberPoint fp = fiber_point_from_stacked(type, chart.n, y);
    const BaseGeometry geo = geometry_at(chart, fp.x, 1);
    return to_induced(adapted_frame_at(geo, fp), F(fp));
}

// Lie bracket [F1, F2] at y0 in induced components, by central differences
// of the induced component functions.
inline std::vector<double> bundle_lie_bracket(const ManifoldChart& chart, const TensorType& type,
                                              const BundleField& F1, const BundleField& F2,
                                              const std::vector<double>& y0, double step) {
    const int D = static_cast<int>(y0.size());
    const std::vector<double> a = induced_field_at(chart, type, F1, y0);
    const std::vector<double> b = induced_field_at(chart, type, F2, y0);
    std::vector<double> out(static_cast<std::size_t>(D), 0.0);
    std::vector<double> y = y0;
    const double inv2h = 0.5 / step;
    for (int I = 0; I < D; ++I) {
        y[static_cast<std::size_t>(I)] = y0[static_cast<std::size_t>(I)] + step;
        const std::vector<double> ap = induced_field_at(chart, type, F1, y);
        const std::vector<double> bp = induced_field_at(chart, type, F2, y);
        y[static_cast<std::size_t>(I)] = y0[static_cast<std::size_t>(I)] - step;
        const std::vector<double> am = induced_field_at(chart, type, F1, y);
        const std::vector<double> bm = induced_field_at(chart, type, F2, y);
        y[static_cast<std::size_t>(I)] = y0[static_cast<std::size_t>(I)];
        for (int K = 0; K < D; ++K)
            out[static_cast<std::size_t>(K)] +=
                a[static_cast<std::size_t>(I)] *
                    (bp[static_cast<std::size_t>(K)] - bm[static_cast<std::size_t>(K)]) * inv2h -
                b[static_cast<std::size_t>(I)] *
                    (ap[static_cast<std::size_t>(K)] - am[static_cast<std::size_t>(K)]) * inv2h;
    }
    return out;
}

// The metric pairing of two fields as a scalar function of the stacked point.
inline double metric_pairing_at(const ManifoldChart& chart, const RescaleFunction& f,
                                const TensorType& type, const BundleField& F1,
                                const BundleField& F2, const std::vector<double>& y) {
    const FiberPoint fp = fiber_point_from_stacked(type, chart.n, y);
    const BaseGeometry geo = geometry_at(chart, fp.x, 1);
    const RescaleData rs = rescale_data_at(geo, f);
    const BundleMetric bm = bundle_metric_at(geo, rs, type);
    return bm.pair(F1(fp), F2(fp));
}

inline double phi_operator(const ManifoldChart& chart, const RescaleFunction& f,
                           const FiberPoint& at, const StructureTensor& S, const BundleField& X,
                           const BundleField& Y, const BundleField& Z, double step = 1e-5) {
    if (!(step > 0.0)) throw BadParameter("phi operator step must be positive");
    at.check();
    const TensorType type = at.type;
    const std::vector<double> y0 = stacked_point(at);

    const BaseGeometry geo0 = geometry_at(chart, at.x, 1);
    const RescaleData rs0 = rescale_data_at(geo0, f);
    const AdaptedFrame fr0 = adapted_frame_at(geo0, at);
    const BundleMetric bm0 = bundle_metric_at(geo0, rs0, type);

    const BundleField SX = [&S, &X](const FiberPoint& p) { return apply_structure(S, X(p)); };
    const BundleField SY = [&S, &Y](const FiberPoint& p) { return apply_structure(S, Y(p)); };

    // derivative of the pairing g(F1, F2) along the value of `dir` at y0
    auto directional = [&](const BundleField& dir, const BundleField& F1, const BundleField& F2) {
        const std::vector<double> u = to_induced(fr0, dir(at));
        std::vector<double> yp = y0, ym = y0;
        for (std::size_t k = 0; k < y0.size(); ++k) {
            yp[k] += step * u[k];
            ym[k] -= step * u[k];
        }
        return (metric_pairing_at(chart, f, type, F1, F2, yp) -
                metric_pairing_at(chart, f, type, F1, F2, ym)) /
               (2.0 * step);
    };

    // (L_V S)X = [V, SX] - S [V, X], in adapted components at y0
    auto lie_applied = [&](const BundleField& V) {
        const std::vector<double> br_s = bundle_lie_bracket(chart, type, V, SX, y0, step);
        const std::vector<double> br = bundle_lie_bracket(chart, type, V, X, y0, step);
        AdaptedField w = from_induced(fr0, br_s);
        const AdaptedField sb = apply_structure(S, from_induced(fr0, br));
        for (std::size_t k = 0; k < w.h.size(); ++k) w.h[k] -= sb.h[k];
        for (std::size_t k = 0; k < w.v.size(); ++k) w.v[k] -= sb.v[k];
        return w;
    };

    return directional(SX, Y, Z) - directional(X, SY, Z) + bm0.pair(lie_applied(Y), Z(at)) +
           bm0.pair(Y(at), lie_applied(Z));
}

// Closed form of phi for the horizontal reflection: only slots with a
// horizontal first argument and exactly one vertical argument among the last
// two survive, contracting that vertical part against the anholonomy of the
// horizontal distribution:
//   phi(X, Y, Z) = 2 g_vv(Y_v, [X_h, Z_h]_v) + 2 g_vv([X_h, Y_h]_v, Z_v).
// A flat base kills the anholonomy and with it every slot, whatever the
// rescale factor does.
inline double phi_para_closed_form(const PointContext& ctx, const AdaptedField& X,
                                   const AdaptedField& Y, const AdaptedField& Z) {
    if (ctx.geo.order < 2)
        throw BadParameter("closed-form phi needs second-order geometry");
    const int n = ctx.n();
    const int N = ctx.N();
    std::vector<double> rxz(static_cast<std::size_t>(N), 0.0);
    std::vector<double> rxy(static_cast<std::size_t>(N), 0.0);
    for (int l = 0; l < n; ++l) {
        const double xl = X.h[static_cast<std::size_t>(l)];
        if (xl == 0.0) continue;
        for (int j = 0; j < n; ++j)
            for (int K = 0; K < N; ++K) {
                const double br = ctx.frame.bracket_hh(l, j, K);
                rxz[static_cast<std::size_t>(K)] += xl * Z.h[static_cast<std::size_t>(j)] * br;
                rxy[static_cast<std::size_t>(K)] += xl * Y.h[static_cast<std::size_t>(j)] * br;
            }
    }
    double acc = 0.0;
    for (int K = 0; K < N; ++K)
        for (int L = 0; L < N; ++L)
            acc += ctx.metric.vv[static_cast<std::size_t>(K)][static_cast<std::size_t>(L)] *
                   (Y.v[static_cast<std::size_t>(K)] * rxz[static_cast<std::size_t>(L)] +
                    rxy[static_cast<std::size_t>(K)] * Z.v[static_cast<std::size_t>(L)]);
    return 2.0 * acc;
}

// Cyclic sum of phi over its three arguments for the horizontal reflection.
// It vanishes identically because the anholonomy is antisymmetric in its two
// horizontal slots; evaluating it through the finite-difference phi observes
// the cancellation instead of assuming it.
inline double para_cyclic_sum(const ManifoldChart& chart, const RescaleFunction& f,
                              const FiberPoint& at, const BundleField& X, const BundleField& Y,
                              const BundleField& Z, double step = 1e-5) {
    const StructureTensor J = para_structure();
    return phi_operator(chart, f, at, J, X, Y, Z, step) +
           phi_operator(chart, f, at, J, Y, Z, X, step) +
           phi_operator(chart, f, at, J, Z, X, Y, step);
}

// Field with the same adapted components at every bundle point; horizontal
// and vertical lifts of chart-constant base data have exactly this shape.
inline BundleField constant_bundle_field(AdaptedField value) {
    return [value = std::move(value)](const FiberPoint&) { return value; };
}

// Max |cyclic sum| over random points of the chart box and random constant
// field triples.
inline double quasi_para_kahler_check(const ManifoldChart& chart, const RescaleFunction& f,
                                      const TensorType& type, int samples, Rng& rng,
                                      double step = 1e-5) {
    const int n = chart.n;
    const int N = static_cast<int>(type.fiber_dim(n));
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        FiberPoint fp;
        fp.type = type;
        fp.x.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            fp.x[static_cast<std::size_t>(i)] =
                rng.uniform(chart.box[static_cast<std::size_t>(i)].first,
                            chart.box[static_cast<std::size_t>(i)].second);
        fp.t = rng.uniform_vec(N, -0.9, 0.9);
        const BundleField X = constant_bundle_field(random_adapted(n, N, rng));
        const BundleField Y = constant_bundle_field(random_adapted(n, N, rng));
        const BundleField Z = constant_bundle_field(random_adapted(n, N, rng));
        const double d = std::fabs(para_cyclic_sum(chart, f, fp, X, Y, Z, step));
        if (d > worst) worst = d;
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Almost product connection associated with the horizontal reflection:
//   P = LC - S,  S(X, Y) = 1/2 { (nabla_{JY} J)X + J((nabla_Y J)X) - J((nabla_X J)Y) }
// with LC the bundle Levi-Civita connection. J is frame-diagonal with
// constant multipliers j(a), so (nabla_{E_b} J) E_g = LC(b, g, a) (j(g) - j(a)) E_a
// and the deformation touches only block-crossing coefficients: the result
// keeps the horizontal-horizontal block without its vertical part, keeps the
// vertical output of the horizontal-direction mixed block, triples the
// horizontal output of the vertical-direction mixed block, and has no
// vertical-vertical block. Its torsion in the horizontal-horizontal slot is
// minus the frame anholonomy, so it is symmetric exactly on flat bases.
inline ConnectionField product_connection(const PointContext& ctx) {
    if (ctx.geo.order < 2) throw BadParameter("product connection needs second-order geometry");
    const ConnectionField lc = levi_civita_pq(ctx);
    const int n = ctx.n();
    const int N = ctx.N();
    const int D = n + N;
    auto jsign = [n](int a) { return a < n ? -1.0 : 1.0; };
    auto nj = [&](int b, int g, int a) { return lc.at(b, g, a) * (jsign(g) - jsign(a)); };
    ConnectionField P = zero_connection(n, N);
    for (int b = 0; b < D; ++b)
        for (int g = 0; g < D; ++g)
            for (int a = 0; a < D; ++a) {
                const double dS =
                    0.5 * ((jsign(g) + jsign(a)) * nj(g, b, a) - jsign(a) * nj(b, g, a));
                P.c(b, g, a) = lc.at(b, g, a) - dS;
            }
    return P;
}

} // namespace tbundle
