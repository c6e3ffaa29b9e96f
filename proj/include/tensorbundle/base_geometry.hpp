#pragma once
#include <cmath>
#include <string>
#include <vector>

#include "tensorbundle/chart.hpp"
#include "tensorbundle/errors.hpp"
#include "tensorbundle/fiber.hpp"
#include "tensorbundle/tensor.hpp"
#include "tensorbundle/tower.hpp"

namespace tbundle {

// Gauss-Jordan inverse over tower-valued entries; pivoting by the magnitude
// of the constant coefficient. Entries come in row-major order.
inline std::vector<Tower> invert_tower_matrix(std::vector<Tower> a, int n) {
    const int nv = a[0].nvars();
    const int ord = a[0].order();
    std::vector<Tower> inv(static_cast<std::size_t>(n) * n, Tower::constant(nv, ord, 0.0));
    for (int i = 0; i < n; ++i) inv[static_cast<std::size_t>(i) * n + i] = Tower::constant(nv, ord, 1.0);
    auto A = [&](int r, int c) -> Tower& { return a[static_cast<std::size_t>(r) * n + c]; };
    auto I = [&](int r, int c) -> Tower& { return inv[static_cast<std::size_t>(r) * n + c]; };
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(A(r, col).value()) > std::abs(A(piv, col).value())) piv = r;
        if (A(piv, col).value() == 0.0) throw NotPositiveDefinite("singular metric matrix");
        if (piv != col)
            for (int c = 0; c < n; ++c) {
                std::swap(A(piv, c), A(col, c));
                std::swap(I(piv, c), I(col, c));
            }
        const Tower d = A(col, col);
        for (int c = 0; c < n; ++c) {
            A(col, c) = A(col, c) / d;
            I(col, c) = I(col, c) / d;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const Tower m = A(r, col);
            if (m.is_zero()) continue;
            for (int c = 0; c < n; ++c) {
                A(r, c) = A(r, c) - m * A(col, c);
                I(r, c) = I(r, c) - m * I(col, c);
            }
        }
    }
    return inv;
}

// Everything the downstream bundle constructions need about the base
// Riemannian geometry at one point, computed by exact derivative
// propagation from the metric expressions.
//
// Index conventions, used consistently everywhere:
//   Gamma^h_{ij}   = 1/2 g^{hm} (d_i g_{mj} + d_j g_{im} - d_m g_{ij})
//   R_{klj}{}^s    = d_k Gamma^s_{lj} - d_l Gamma^s_{kj}
//                    + Gamma^s_{km} Gamma^m_{lj} - Gamma^s_{lm} Gamma^m_{kj}
//   Ricci_{lj}     = R_{slj}{}^s,   scalar = g^{lj} Ricci_{lj}
struct BaseGeometry {
    int n = 0;
    int order = 0; // tower order the metric was expanded to
    std::vector<double> x;

    Matrix g, g_inv;
    DTensor dg;              // [m][i][j] = d_m g_{ij}
    DTensor gamma;           // [h][i][j]
    DTensor dgamma;          // [m][h][i][j]           (order >= 2)
    DTensor riemann;         // [k][l][j][s]           (order >= 2)
    DTensor nabla_riemann;   // [m][k][l][j][s]        (order >= 3)
    Matrix ricci;
    double scalar = 0.0;
    DTensor riemann_uu;       // [s][j][l][r] = g^{as} g^{bj} R_{abl}{}^r
    DTensor nabla_riemann_uu; // [m][s][j][l][r]

    // Towers kept for downstream exact differentiation (rescale tensor, its
    // covariant derivative). gamma_t has order-1 less than the metric.
    std::vector<Tower> g_t, ginv_t;
    std::vector<Tower> gamma_t; // [h*n*n + i*n + j]

    const Tower& gamma_tower(int h, int i, int j) const {
        return gamma_t[static_cast<std::size_t>((h * n + i) * n + j)];
    }
};

inline BaseGeometry geometry_at(const ManifoldChart& chart, const std::vector<double>& x,
                                int order = 3) {
    chart.check();
    const int n = chart.n;
    if (static_cast<int>(x.size()) != n) throw ShapeMismatch("point dimension != chart dimension");
    if (order < 1 || order > 4) throw BadParameter("geometry order must be within 1..4");

    BaseGeometry geo;
    geo.n = n;
    geo.order = order;
    geo.x = x;

    geo.g_t.reserve(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            geo.g_t.push_back(eval_tower(*chart.g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], x, order));

    geo.g = make_matrix(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) geo.g[i][j] = geo.g_t[static_cast<std::size_t>(i) * n + j].value();

    // symmetry + positivity gate
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::abs(geo.g[i][j] - geo.g[j][i]) > 1e-12 * (1.0 + std::abs(geo.g[i][j])))
                throw ShapeMismatch("metric expressions are not symmetric");
    Matrix chol;
    if (!cholesky(geo.g, chol)) {
        std::string msg = "metric not positive definite at (";
        for (std::size_t k = 0; k < x.size(); ++k) msg += (k ? "," : "") + std::to_string(x[k]);
        throw NotPositiveDefinite(msg + ")");
    }

    geo.ginv_t = invert_tower_matrix(geo.g_t, n);
    geo.g_inv = make_matrix(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) geo.g_inv[i][j] = geo.ginv_t[static_cast<std::size_t>(i) * n + j].value();

    geo.dg = DTensor({n, n, n});
    for (int m = 0; m < n; ++m)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                geo.dg(m, i, j) = geo.g_t[static_cast<std::size_t>(i) * n + j].partial(m);

    // Christoffel towers at order-1.
    const int gord = order - 1;
    std::vector<Tower> dgt; // [m][i][j] towers of d_m g_{ij}
    dgt.reserve(static_cast<std::size_t>(n) * n * n);
    for (int m = 0; m < n; ++m)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                dgt.push_back(geo.g_t[static_cast<std::size_t>(i) * n + j].partial_tower(m));
    auto dg_t = [&](int m, int i, int j) -> const Tower& {
        return dgt[static_cast<std::size_t>((m * n + i) * n + j)];
    };

    geo.gamma_t.reserve(static_cast<std::size_t>(n) * n * n);
    for (int h = 0; h < n; ++h)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                Tower acc = Tower::constant(n, gord, 0.0);
                for (int m = 0; m < n; ++m) {
                    Tower ginv_hm = geo.ginv_t[static_cast<std::size_t>(h) * n + m].truncated(gord);
                    acc = acc + ginv_hm * (dg_t(i, m, j) + dg_t(j, i, m) - dg_t(m, i, j));
                }
                geo.gamma_t.push_back(acc * 0.5);
            }

    geo.gamma = DTensor({n, n, n});
    for (int h = 0; h < n; ++h)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) geo.gamma(h, i, j) = geo.gamma_tower(h, i, j).value();

    if (order >= 2) {
        geo.dgamma = DTensor({n, n, n, n});
        for (int m = 0; m < n; ++m)
            for (int h = 0; h < n; ++h)
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) geo.dgamma(m, h, i, j) = geo.gamma_tower(h, i, j).partial(m);

        // Curvature as towers (order-2) so its first derivatives are exact.
        const int rord = order - 2;
        std::vector<Tower> riem_t(static_cast<std::size_t>(n) * n * n * n,
                                  Tower::constant(n, rord, 0.0));
        auto R_t = [&](int k, int l, int j, int s) -> Tower& {
            return riem_t[static_cast<std::size_t>(((k * n + l) * n + j)) * n + s];
        };
        for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l)
                for (int j = 0; j < n; ++j)
                    for (int s = 0; s < n; ++s) {
                        Tower acc = geo.gamma_tower(s, l, j).partial_tower(k) -
                                    geo.gamma_tower(s, k, j).partial_tower(l);
                        for (int m = 0; m < n; ++m)
                            acc = acc + geo.gamma_tower(s, k, m).truncated(rord) * geo.gamma_tower(m, l, j).truncated(rord) -
                                  geo.gamma_tower(s, l, m).truncated(rord) * geo.gamma_tower(m, k, j).truncated(rord);
                        R_t(k, l, j, s) = acc;
                    }

        geo.riemann = DTensor({n, n, n, n});
        for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l)
                for (int j = 0; j < n; ++j)
                    for (int s = 0; s < n; ++s) geo.riemann(k, l, j, s) = R_t(k, l, j, s).value();

        geo.ricci = make_matrix(n, n);
        for (int l = 0; l < n; ++l)
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int s = 0; s < n; ++s) acc += geo.riemann(s, l, j, s);
                geo.ricci[l][j] = acc;
            }
        geo.scalar = 0.0;
        for (int l = 0; l < n; ++l)
            for (int j = 0; j < n; ++j) geo.scalar += geo.g_inv[l][j] * geo.ricci[l][j];

        geo.riemann_uu = DTensor({n, n, n, n});
        for (int s = 0; s < n; ++s)
            for (int j = 0; j < n; ++j)
                for (int l = 0; l < n; ++l)
                    for (int r = 0; r < n; ++r) {
                        double acc = 0.0;
                        for (int a = 0; a < n; ++a)
                            for (int b = 0; b < n; ++b)
                                acc += geo.g_inv[a][s] * geo.g_inv[b][j] * geo.riemann(a, b, l, r);
                        geo.riemann_uu(s, j, l, r) = acc;
                    }

        if (order >= 3) {
            geo.nabla_riemann = DTensor({n, n, n, n, n});
            for (int m = 0; m < n; ++m)
                for (int k = 0; k < n; ++k)
                    for (int l = 0; l < n; ++l)
                        for (int j = 0; j < n; ++j)
                            for (int s = 0; s < n; ++s) {
                                double acc = R_t(k, l, j, s).partial(m);
                                for (int a = 0; a < n; ++a) {
                                    acc += geo.gamma(s, m, a) * geo.riemann(k, l, j, a);
                                    acc -= geo.gamma(a, m, k) * geo.riemann(a, l, j, s);
                                    acc -= geo.gamma(a, m, l) * geo.riemann(k, a, j, s);
                                    acc -= geo.gamma(a, m, j) * geo.riemann(k, l, a, s);
                                }
                                geo.nabla_riemann(m, k, l, j, s) = acc;
                            }

            geo.nabla_riemann_uu = DTensor({n, n, n, n, n});
            for (int m = 0; m < n; ++m)
                for (int s = 0; s < n; ++s)
                    for (int j = 0; j < n; ++j)
                        for (int l = 0; l < n; ++l)
                            for (int r = 0; r < n; ++r) {
                                double acc = 0.0;
                                for (int a = 0; a < n; ++a)
                                    for (int b = 0; b < n; ++b)
                                        acc += geo.g_inv[a][s] * geo.g_inv[b][j] * geo.nabla_riemann(m, a, b, l, r);
                                geo.nabla_riemann_uu(m, s, j, l, r) = acc;
                            }
        }
    }
    return geo;
}

// Covariant derivative of a (p,q) tensor along a curve:
//   (DS/dt)^{I} = dS/dt^{I}
//     + sum_lambda Gamma^{i_lambda}_{l s} S^{..s..} xdot^l   (upper slots)
//     - sum_mu     Gamma^{s}_{l j_mu}  S_{..s..} xdot^l      (lower slots)
inline std::vector<double> covariant_derivative_along(const BaseGeometry& geo,
                                                      const std::vector<double>& xdot,
                                                      const TensorType& type,
                                                      const std::vector<double>& S,
                                                      const std::vector<double>& Sdot) {
    const int n = geo.n;
    const int rank = type.rank();
    const int N = static_cast<int>(type.fiber_dim(n));
    if (static_cast<int>(S.size()) != N || static_cast<int>(Sdot.size()) != N)
        throw ShapeMismatch("tensor component count does not match type");
    std::vector<double> out = Sdot;
    std::vector<int> idx(static_cast<std::size_t>(rank), 0);
    int flat = 0;
    do {
        double acc = 0.0;
        for (int l = 0; l < n; ++l) {
            if (xdot[static_cast<std::size_t>(l)] == 0.0) continue;
            double corr = 0.0;
            for (int slot = 0; slot < rank; ++slot) {
                const bool upper = slot < type.p;
                std::vector<int> jdx = idx;
                for (int s = 0; s < n; ++s) {
                    jdx[static_cast<std::size_t>(slot)] = s;
                    const double Sv = S[static_cast<std::size_t>(flat_index(jdx, n))];
                    if (upper)
                        corr += geo.gamma(idx[static_cast<std::size_t>(slot)], l, s) * Sv;
                    else
                        corr -= geo.gamma(s, l, idx[static_cast<std::size_t>(slot)]) * Sv;
                }
            }
            acc += corr * xdot[static_cast<std::size_t>(l)];
        }
        out[static_cast<std::size_t>(flat)] += acc;
        ++flat;
    } while (next_index(idx, n));
    return out;
}

} // namespace tbundle
