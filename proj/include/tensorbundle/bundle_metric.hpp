#pragma once
#include <vector>

#include "tensorbundle/base_geometry.hpp"
#include "tensorbundle/chart.hpp"
#include "tensorbundle/fiber.hpp"
#include "tensorbundle/frames.hpp"
#include "tensorbundle/tensor.hpp"

namespace tbundle {

// Everything derived from the rescale factor f at a base point:
//   A^h_{ji}   = f_j d^h_i + f_i d^h_j - f^h g_ji      (f_j = d_j f, f^h = g^{ha} f_a)
//   W          = A / (2f)
//   nablaW     = covariant derivative of W
//   Bcomb^r_{mlj} = nabla_m W^r_{lj} - nabla_l W^r_{mj}
//                   + W^r_{ms} W^s_{lj} - W^r_{ls} W^s_{mj}
//   fL         = (1/f) g^{lj} Bcomb^r_{rlj}
// W shifts the horizontal connection, Bcomb its curvature, fL the scalar
// curvature. A constant f kills all of them.
struct RescaleData {
    double f = 1.0;
    std::vector<double> df;
    Matrix d2f;
    DTensor A;      // [h][j][i]
    DTensor W;      // [h][j][i]
    DTensor dW;     // [m][h][j][i]: plain partial derivative
    DTensor nablaW; // [m][h][j][i]
    DTensor Bcomb;  // [r][m][l][j]
    double fL = 0.0;
};

inline RescaleData rescale_data_at(const BaseGeometry& geo, const RescaleFunction& f) {
    const int n = geo.n;
    RescaleData rs;
    Tower ft = f.tower_at(geo.x, 2);
    rs.f = ft.value();
    rs.df.resize(static_cast<std::size_t>(n));
    rs.d2f = make_matrix(n, n);
    for (int i = 0; i < n; ++i) {
        rs.df[static_cast<std::size_t>(i)] = ft.partial(i);
        for (int j = 0; j < n; ++j) rs.d2f[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = ft.partial(i, j);
    }

    std::vector<double> fup(static_cast<std::size_t>(n), 0.0);
    for (int h = 0; h < n; ++h)
        for (int a = 0; a < n; ++a) fup[static_cast<std::size_t>(h)] += geo.g_inv[h][a] * rs.df[static_cast<std::size_t>(a)];

    rs.A = DTensor({n, n, n});
    for (int h = 0; h < n; ++h)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                rs.A(h, j, i) = rs.df[static_cast<std::size_t>(j)] * (h == i ? 1.0 : 0.0) +
                                rs.df[static_cast<std::size_t>(i)] * (h == j ? 1.0 : 0.0) -
                                fup[static_cast<std::size_t>(h)] * geo.g[j][i];

    rs.W = DTensor({n, n, n});
    const double half_inv_f = 0.5 / rs.f;
    for (int h = 0; h < n; ++h)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) rs.W(h, j, i) = half_inv_f * rs.A(h, j, i);

    // d_m g^{ha} = -g^{hb} (d_m g_bc) g^{ca}
    DTensor dginv({n, n, n});
    for (int m = 0; m < n; ++m)
        for (int h = 0; h < n; ++h)
            for (int a = 0; a < n; ++a) {
                double acc = 0.0;
                for (int b = 0; b < n; ++b)
                    for (int c = 0; c < n; ++c)
                        acc -= geo.g_inv[h][b] * geo.dg(m, b, c) * geo.g_inv[c][a];
                dginv(m, h, a) = acc;
            }

    rs.dW = DTensor({n, n, n, n});
    rs.nablaW = DTensor({n, n, n, n});
    for (int m = 0; m < n; ++m) {
        std::vector<double> dfup(static_cast<std::size_t>(n), 0.0);
        for (int h = 0; h < n; ++h)
            for (int a = 0; a < n; ++a)
                dfup[static_cast<std::size_t>(h)] += dginv(m, h, a) * rs.df[static_cast<std::size_t>(a)] +
                                                     geo.g_inv[h][a] * rs.d2f[static_cast<std::size_t>(m)][static_cast<std::size_t>(a)];
        for (int h = 0; h < n; ++h)
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i) {
                    const double dA = rs.d2f[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)] * (h == i ? 1.0 : 0.0) +
                                      rs.d2f[static_cast<std::size_t>(m)][static_cast<std::size_t>(i)] * (h == j ? 1.0 : 0.0) -
                                      dfup[static_cast<std::size_t>(h)] * geo.g[j][i] -
                                      fup[static_cast<std::size_t>(h)] * geo.dg(m, j, i);
                    rs.dW(m, h, j, i) = half_inv_f * dA -
                                        rs.df[static_cast<std::size_t>(m)] / (2.0 * rs.f * rs.f) * rs.A(h, j, i);
                }
    }
    for (int m = 0; m < n; ++m)
        for (int r = 0; r < n; ++r)
            for (int l = 0; l < n; ++l)
                for (int j = 0; j < n; ++j) {
                    double acc = rs.dW(m, r, l, j);
                    for (int a = 0; a < n; ++a)
                        acc += geo.gamma(r, m, a) * rs.W(a, l, j) - geo.gamma(a, m, l) * rs.W(r, a, j) -
                               geo.gamma(a, m, j) * rs.W(r, l, a);
                    rs.nablaW(m, r, l, j) = acc;
                }

    rs.Bcomb = DTensor({n, n, n, n});
    for (int r = 0; r < n; ++r)
        for (int m = 0; m < n; ++m)
            for (int l = 0; l < n; ++l)
                for (int j = 0; j < n; ++j) {
                    double acc = rs.nablaW(m, r, l, j) - rs.nablaW(l, r, m, j);
                    for (int s = 0; s < n; ++s)
                        acc += rs.W(r, m, s) * rs.W(s, l, j) - rs.W(r, l, s) * rs.W(s, m, j);
                    rs.Bcomb(r, m, l, j) = acc;
                }

    rs.fL = 0.0;
    for (int l = 0; l < n; ++l)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int r = 0; r < n; ++r) acc += rs.Bcomb(r, r, l, j);
            rs.fL += geo.g_inv[l][j] * acc;
        }
    rs.fL /= rs.f;
    return rs;
}

// The rescaled bundle metric in the adapted frame. It is block diagonal:
//   horizontal block  f g_jl
//   vertical block    G_{IJ} = prod_lambda g_{i_lambda t_lambda}
//                              prod_mu g^{j_mu l_mu}
// between fiber indices I = (i...; j...) and J = (t...; l...). The inverse
// swaps the two kinds of factor.
struct BundleMetric {
    int n = 0;
    int N = 0;
    double f = 1.0;
    Matrix hh, hh_inv; // n x n
    Matrix vv, vv_inv; // N x N

    // Full metric / inverse on stacked adapted components, zero off-block.
    double at(int a, int b) const {
        if (a < n && b < n) return hh[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
        if (a >= n && b >= n) return vv[static_cast<std::size_t>(a - n)][static_cast<std::size_t>(b - n)];
        return 0.0;
    }
    double inv_at(int a, int b) const {
        if (a < n && b < n) return hh_inv[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
        if (a >= n && b >= n) return vv_inv[static_cast<std::size_t>(a - n)][static_cast<std::size_t>(b - n)];
        return 0.0;
    }

    double pair(const AdaptedField& a, const AdaptedField& b) const {
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                acc += hh[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * a.h[static_cast<std::size_t>(i)] * b.h[static_cast<std::size_t>(j)];
        for (int I = 0; I < N; ++I)
            for (int J = 0; J < N; ++J)
                acc += vv[static_cast<std::size_t>(I)][static_cast<std::size_t>(J)] * a.v[static_cast<std::size_t>(I)] * b.v[static_cast<std::size_t>(J)];
        return acc;
    }
};

inline BundleMetric bundle_metric_at(const BaseGeometry& geo, const RescaleData& rs,
                                     const TensorType& type) {
    const int n = geo.n;
    const int N = static_cast<int>(type.fiber_dim(n));
    BundleMetric bm;
    bm.n = n;
    bm.N = N;
    bm.f = rs.f;
    bm.hh = make_matrix(n, n);
    bm.hh_inv = make_matrix(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            bm.hh[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = rs.f * geo.g[i][j];
            bm.hh_inv[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = geo.g_inv[i][j] / rs.f;
        }
    bm.vv = make_matrix(N, N);
    bm.vv_inv = make_matrix(N, N);
    const int rank = type.rank();
    std::vector<int> I(static_cast<std::size_t>(rank), 0);
    int iflat = 0;
    do {
        std::vector<int> J(static_cast<std::size_t>(rank), 0);
        int jflat = 0;
        do {
            double lower = 1.0, upper = 1.0;
            for (int lam = 0; lam < type.p; ++lam) {
                lower *= geo.g[I[static_cast<std::size_t>(lam)]][J[static_cast<std::size_t>(lam)]];
                upper *= geo.g_inv[I[static_cast<std::size_t>(lam)]][J[static_cast<std::size_t>(lam)]];
            }
            for (int mu = type.p; mu < rank; ++mu) {
                lower *= geo.g_inv[I[static_cast<std::size_t>(mu)]][J[static_cast<std::size_t>(mu)]];
                upper *= geo.g[I[static_cast<std::size_t>(mu)]][J[static_cast<std::size_t>(mu)]];
            }
            bm.vv[static_cast<std::size_t>(iflat)][static_cast<std::size_t>(jflat)] = lower;
            bm.vv_inv[static_cast<std::size_t>(iflat)][static_cast<std::size_t>(jflat)] = upper;
            ++jflat;
        } while (next_index(J, n));
        ++iflat;
    } while (next_index(I, n));
    return bm;
}

// All per-point data the bundle constructions consume, built in one call.
struct PointContext {
    FiberPoint fp;
    BaseGeometry geo;
    RescaleData rs;
    AdaptedFrame frame;
    BundleMetric metric;

    int n() const { return geo.n; }
    int N() const { return frame.N; }
    int dim() const { return geo.n + frame.N; }
};

inline PointContext point_context_at(const ManifoldChart& chart, const RescaleFunction& f,
                                     const FiberPoint& fp, int order = 3) {
    PointContext ctx;
    ctx.fp = fp;
    ctx.geo = geometry_at(chart, fp.x, order);
    ctx.rs = rescale_data_at(ctx.geo, f);
    ctx.frame = adapted_frame_at(ctx.geo, fp);
    ctx.metric = bundle_metric_at(ctx.geo, ctx.rs, fp.type);
    return ctx;
}

} // namespace tbundle
