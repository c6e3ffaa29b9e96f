#pragma once
#include <functional>
#include <vector>

#include "tensorbundle/bundle_metric.hpp"

namespace tbundle {

// Connection coefficients in the adapted frame: c(gamma, beta, alpha) is the
// E_alpha component of nabla_{E_gamma} E_beta. The direction comes first.
// Bundle indices: 0..n-1 horizontal, n..n+N-1 vertical.
struct ConnectionField {
    int n = 0;
    int N = 0;
    DTensor c;

    int dim() const { return n + N; }
    double at(int gamma, int beta, int alpha) const { return c(gamma, beta, alpha); }
};

inline ConnectionField zero_connection(int n, int N) {
    ConnectionField cf;
    cf.n = n;
    cf.N = N;
    cf.c = DTensor({n + N, n + N, n + N});
    return cf;
}

// Levi-Civita connection of the rescaled bundle metric for a general (p,q)
// fiber. Block structure in the adapted frame:
//   nabla_{E_l} E_j      = (Gamma^r_{lj} + W^r_{lj}) E_r + 1/2 [E_l, E_j]
//   nabla_{E_l} E_Jbar   = mixed(J, l) E_r - (dB(l,.)/dt^J) E_rbar
//   nabla_{E_Lbar} E_j   = mixed(L, j) E_r
//   nabla_{E_Lbar} E_Jbar = 0
// where the horizontal mixed block couples through the curvature action
//   mixed(J, j)^r = 1/(2f) g^{xr} G_vv(J, K) [E_x, E_j]^K.
inline ConnectionField levi_civita_pq(const PointContext& ctx) {
    const int n = ctx.n();
    const int N = ctx.N();
    ConnectionField cf = zero_connection(n, N);

    for (int l = 0; l < n; ++l)
        for (int j = 0; j < n; ++j) {
            for (int r = 0; r < n; ++r) cf.c(l, j, r) = ctx.geo.gamma(r, l, j) + ctx.rs.W(r, l, j);
            for (int K = 0; K < N; ++K) cf.c(l, j, n + K) = 0.5 * ctx.frame.bracket_hh(l, j, K);
        }

    DTensor mixed({N, n, n}); // mixed(J, j, r)
    const double half_inv_f = 0.5 / ctx.rs.f;
    for (int J = 0; J < N; ++J)
        for (int j = 0; j < n; ++j)
            for (int r = 0; r < n; ++r) {
                double acc = 0.0;
                for (int x = 0; x < n; ++x) {
                    double inner = 0.0;
                    for (int K = 0; K < N; ++K)
                        inner += ctx.metric.vv[static_cast<std::size_t>(J)][static_cast<std::size_t>(K)] *
                                 ctx.frame.bracket_hh(x, j, K);
                    acc += ctx.geo.g_inv[x][r] * inner;
                }
                mixed(J, j, r) = half_inv_f * acc;
            }

    for (int l = 0; l < n; ++l)
        for (int J = 0; J < N; ++J) {
            for (int r = 0; r < n; ++r) {
                cf.c(l, n + J, r) = mixed(J, l, r);
                cf.c(n + J, l, r) = mixed(J, l, r);
            }
            for (int K = 0; K < N; ++K) cf.c(l, n + J, n + K) = -ctx.frame.dB(l, K, J);
        }
    return cf;
}

// The same connection for the endomorphism fiber (p = q = 1), written out
// with the explicit index formulas instead of the curvature-action
// contractions. Kept as an independent code path so the two can be compared.
inline ConnectionField levi_civita_11(const PointContext& ctx) {
    if (!(ctx.fp.type == TensorType{1, 1}))
        throw BadParameter("explicit (1,1) connection requires an endomorphism fiber");
    const int n = ctx.n();
    const int N = ctx.N();
    const auto& geo = ctx.geo;
    const auto& t = ctx.fp.t;
    auto tv = [&](int a, int b) { return t[static_cast<std::size_t>(a * n + b)]; };
    const double inv2f = 0.5 / ctx.rs.f;

    ConnectionField cf = zero_connection(n, N);
    for (int l = 0; l < n; ++l)
        for (int j = 0; j < n; ++j) {
            for (int r = 0; r < n; ++r)
                cf.c(l, j, r) = geo.gamma(r, l, j) + inv2f * ctx.rs.A(r, l, j);
            for (int v = 0; v < n; ++v)
                for (int r = 0; r < n; ++r) {
                    double acc = 0.0;
                    for (int s = 0; s < n; ++s)
                        acc += 0.5 * geo.riemann(l, j, r, s) * tv(v, s) -
                               0.5 * geo.riemann(l, j, s, v) * tv(s, r);
                    cf.c(l, j, n + v * n + r) = acc;
                }
        }

    // Horizontal output of the mixed derivatives; the two argument orders
    // agree because the connection is torsion free and [E_l, E_Jbar] is
    // purely vertical.
    for (int l = 0; l < n; ++l)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int r = 0; r < n; ++r) {
                    double acc = 0.0;
                    for (int a = 0; a < n; ++a)
                        for (int s = 0; s < n; ++s)
                            acc += geo.g[i][a] * geo.riemann_uu(s, j, l, r) * tv(a, s);
                    for (int b = 0; b < n; ++b)
                        for (int s = 0; s < n; ++s)
                            acc -= geo.g_inv[j][b] * geo.riemann(i, s, l, r) * tv(s, b);
                    cf.c(l, n + i * n + j, r) = inv2f * acc;
                    cf.c(n + i * n + j, l, r) = inv2f * acc;
                }

    for (int l = 0; l < n; ++l)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int v = 0; v < n; ++v)
                    for (int r = 0; r < n; ++r)
                        cf.c(l, n + i * n + j, n + v * n + r) =
                            geo.gamma(v, l, i) * (j == r ? 1.0 : 0.0) -
                            geo.gamma(j, l, r) * (v == i ? 1.0 : 0.0);
    return cf;
}

// Structure constants of the adapted frame at one point:
//   [E_beta, E_gamma] = C(beta, gamma, alpha) E_alpha.
// Horizontal pairs close onto the vertical anholonomy, mixed pairs onto the
// fiber gradient of the horizontal correction, vertical pairs commute; every
// bracket of frame fields is purely vertical.
inline DTensor frame_structure_constants(const AdaptedFrame& fr) {
    // dB_dx is only populated alongside the anholonomy data; its absence
    // marks a frame built from first-order geometry.
    if (fr.dB_dx.size() == 0)
        throw BadParameter("frame structure constants need second-order geometry");
    const int n = fr.n;
    const int N = fr.N;
    const int D = n + N;
    DTensor C({D, D, D});
    for (int l = 0; l < n; ++l) {
        for (int j = 0; j < n; ++j)
            for (int K = 0; K < N; ++K) C(l, j, n + K) = fr.bracket_hh(l, j, K);
        for (int J = 0; J < N; ++J)
            for (int K = 0; K < N; ++K) {
                C(l, n + J, n + K) = bracket_hv(fr, l, K, J);
                C(n + J, l, n + K) = -bracket_hv(fr, l, K, J);
            }
    }
    return C;
}

// Torsion of a frame connection, including the anholonomy term:
//   T(beta, gamma, alpha) E_alpha = nabla_{E_beta} E_gamma
//                                   - nabla_{E_gamma} E_beta - [E_beta, E_gamma].
inline DTensor connection_torsion(const AdaptedFrame& fr, const ConnectionField& conn) {
    const DTensor C = frame_structure_constants(fr);
    const int D = conn.dim();
    DTensor T({D, D, D});
    for (int b = 0; b < D; ++b)
        for (int g = 0; g < D; ++g)
            for (int a = 0; a < D; ++a)
                T(b, g, a) = conn.at(b, g, a) - conn.at(g, b, a) - C(b, g, a);
    return T;
}

// A bundle vector field given by its adapted components as a function of the
// bundle point.
using BundleField = std::function<AdaptedField(const FiberPoint&)>;

// Frame derivative E_gamma(h) of a scalar-valued function of the bundle
// point, by a central difference along the frame direction in induced
// coordinates. Used for covariant derivatives of general fields and for the
// structure-tensor derivative checks.
inline FiberPoint shift_along_frame(const AdaptedFrame& fr, const FiberPoint& fp, int gamma,
                                    double step) {
    FiberPoint q = fp;
    if (gamma < fr.n) {
        q.x[static_cast<std::size_t>(gamma)] += step;
        for (int K = 0; K < fr.N; ++K) q.t[static_cast<std::size_t>(K)] += step * fr.B(gamma, K);
    } else {
        q.t[static_cast<std::size_t>(gamma - fr.n)] += step;
    }
    return q;
}

inline AdaptedField covariant_derivative_bundle(const ConnectionField& conn,
                                                const AdaptedFrame& fr, const FiberPoint& fp,
                                                const AdaptedField& X, const BundleField& Y,
                                                double h = 1e-6) {
    const int n = conn.n;
    const int N = conn.N;
    const int D = n + N;
    AdaptedField Y0 = Y(fp);
    std::vector<double> y0 = Y0.flat();
    std::vector<double> out(static_cast<std::size_t>(D), 0.0);
    std::vector<double> Xf = X.flat();

    for (int gamma = 0; gamma < D; ++gamma) {
        const double xg = Xf[static_cast<std::size_t>(gamma)];
        if (xg == 0.0) continue;
        std::vector<double> yp = Y(shift_along_frame(fr, fp, gamma, h)).flat();
        std::vector<double> ym = Y(shift_along_frame(fr, fp, gamma, -h)).flat();
        for (int a = 0; a < D; ++a)
            out[static_cast<std::size_t>(a)] +=
                xg * (yp[static_cast<std::size_t>(a)] - ym[static_cast<std::size_t>(a)]) / (2.0 * h);
        for (int b = 0; b < D; ++b) {
            const double yb = y0[static_cast<std::size_t>(b)];
            if (yb == 0.0) continue;
            for (int a = 0; a < D; ++a) out[static_cast<std::size_t>(a)] += xg * conn.at(gamma, b, a) * yb;
        }
    }
    AdaptedField r = AdaptedField::zero(n, N);
    for (int i = 0; i < n; ++i) r.h[static_cast<std::size_t>(i)] = out[static_cast<std::size_t>(i)];
    for (int K = 0; K < N; ++K) r.v[static_cast<std::size_t>(K)] = out[static_cast<std::size_t>(n + K)];
    return r;
}

} // namespace tbundle
