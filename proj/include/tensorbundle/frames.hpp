#pragma once
#include <vector>

#include "tensorbundle/base_geometry.hpp"
#include "tensorbundle/fiber.hpp"
#include "tensorbundle/tensor.hpp"

namespace tbundle {

// Action of an endomorphism A^a_b on a (p,q) fiber tensor, one block of
// slots at a time:
//   endo_on_upper: sum_lambda A^{k_lambda}_s t^{k_1..s..k_p}_{h_1..h_q}
//   endo_on_lower: sum_mu     A^s_{h_mu}    t^{k_1..k_p}_{h_1..s..h_q}
// Their difference is how a curvature operator R(X,Y) acts on the fiber.
inline std::vector<double> endo_on_upper(const TensorType& type, int n,
                                         const std::vector<double>& t, const Matrix& A) {
    const int N = static_cast<int>(type.fiber_dim(n));
    std::vector<double> out(static_cast<std::size_t>(N), 0.0);
    std::vector<int> idx(static_cast<std::size_t>(type.rank()), 0);
    int flat = 0;
    do {
        double acc = 0.0;
        for (int lam = 0; lam < type.p; ++lam) {
            std::vector<int> jdx = idx;
            const int k = idx[static_cast<std::size_t>(lam)];
            for (int s = 0; s < n; ++s) {
                jdx[static_cast<std::size_t>(lam)] = s;
                acc += A[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)] *
                       t[static_cast<std::size_t>(flat_index(jdx, n))];
            }
        }
        out[static_cast<std::size_t>(flat)] = acc;
        ++flat;
    } while (next_index(idx, n));
    return out;
}

inline std::vector<double> endo_on_lower(const TensorType& type, int n,
                                         const std::vector<double>& t, const Matrix& A) {
    const int N = static_cast<int>(type.fiber_dim(n));
    std::vector<double> out(static_cast<std::size_t>(N), 0.0);
    std::vector<int> idx(static_cast<std::size_t>(type.rank()), 0);
    int flat = 0;
    do {
        double acc = 0.0;
        for (int mu = type.p; mu < type.rank(); ++mu) {
            std::vector<int> jdx = idx;
            const int h = idx[static_cast<std::size_t>(mu)];
            for (int s = 0; s < n; ++s) {
                jdx[static_cast<std::size_t>(mu)] = s;
                acc += A[static_cast<std::size_t>(s)][static_cast<std::size_t>(h)] *
                       t[static_cast<std::size_t>(flat_index(jdx, n))];
            }
        }
        out[static_cast<std::size_t>(flat)] = acc;
        ++flat;
    } while (next_index(idx, n));
    return out;
}

// endo_on_lower - endo_on_upper: the vertical vector produced when the
// endomorphism acts on the fiber point as a derivation.
inline std::vector<double> endo_fiber_action(const TensorType& type, int n,
                                             const std::vector<double>& t, const Matrix& A) {
    auto lo = endo_on_lower(type, n, t, A);
    auto up = endo_on_upper(type, n, t, A);
    for (std::size_t k = 0; k < lo.size(); ++k) lo[k] -= up[k];
    return lo;
}

// The adapted frame at one bundle point (x, t):
//   E_j    = d_j + B(j,K) d_K        (horizontal, j < n)
//   E_Jbar = d_J                     (vertical fiber directions)
// with B(j,K) the connection correction that makes E_j the horizontal lift
// of d_j. B is linear in t; dB stores its t-gradient, dB_dx its x-gradient.
struct AdaptedFrame {
    int n = 0;
    TensorType type;
    int N = 0;

    DTensor B;          // [n][N]
    DTensor dB;         // [n][N][N]: dB(j,K,J) = dB(j,K)/dt^J
    DTensor dB_dx;      // [n][N][n]: x-derivative (present when order >= 2)
    DTensor bracket_hh; // [n][n][N]: vertical components of [E_l, E_j]
};

// Vertical component of [E_l, E_Jbar] at fiber slot K.
inline double bracket_hv(const AdaptedFrame& fr, int l, int K, int J) {
    return -fr.dB(l, K, J);
}

// Just the correction B(j,K), without the gradient bookkeeping; cheap
// enough to call inside finite-difference loops.
inline DTensor horizontal_correction(const BaseGeometry& geo, const FiberPoint& fp) {
    const int n = geo.n;
    const int N = fp.fiber_dim();
    DTensor B({n, N});
    Matrix G = make_matrix(n, n);
    for (int j = 0; j < n; ++j) {
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) G[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = geo.gamma(a, j, b);
        auto col = endo_fiber_action(fp.type, n, fp.t, G);
        for (int K = 0; K < N; ++K) B(j, K) = col[static_cast<std::size_t>(K)];
    }
    return B;
}

inline AdaptedFrame adapted_frame_at(const BaseGeometry& geo, const FiberPoint& fp) {
    fp.check();
    if (fp.n() != geo.n) throw ShapeMismatch("fiber point dimension != geometry dimension");
    const int n = geo.n;
    const int N = fp.fiber_dim();

    AdaptedFrame fr;
    fr.n = n;
    fr.type = fp.type;
    fr.N = N;
    fr.B = horizontal_correction(geo, fp);
    fr.dB = DTensor({n, N, N});
    fr.bracket_hh = DTensor({n, n, N});

    Matrix G = make_matrix(n, n);
    auto b_column = [&](int j, const std::vector<double>& t) {
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) G[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = geo.gamma(a, j, b);
        return endo_fiber_action(fp.type, n, t, G);
    };

    std::vector<double> basis(static_cast<std::size_t>(N), 0.0);
    for (int j = 0; j < n; ++j) {
        // Linearity in t turns the t-gradient into columns over basis tensors.
        for (int J = 0; J < N; ++J) {
            basis[static_cast<std::size_t>(J)] = 1.0;
            auto dcol = b_column(j, basis);
            basis[static_cast<std::size_t>(J)] = 0.0;
            for (int K = 0; K < N; ++K) fr.dB(j, K, J) = dcol[static_cast<std::size_t>(K)];
        }
    }

    if (geo.order >= 2) {
        fr.dB_dx = DTensor({n, N, n});
        for (int j = 0; j < n; ++j)
            for (int m = 0; m < n; ++m) {
                for (int a = 0; a < n; ++a)
                    for (int b = 0; b < n; ++b)
                        G[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = geo.dgamma(m, a, j, b);
                auto col = endo_fiber_action(fp.type, n, fp.t, G);
                for (int K = 0; K < N; ++K) fr.dB_dx(j, K, m) = col[static_cast<std::size_t>(K)];
            }

        for (int l = 0; l < n; ++l)
            for (int j = 0; j < n; ++j) {
                for (int a = 0; a < n; ++a)
                    for (int b = 0; b < n; ++b)
                        G[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = geo.riemann(l, j, b, a);
                auto col = endo_fiber_action(fp.type, n, fp.t, G);
                for (int K = 0; K < N; ++K) fr.bracket_hh(l, j, K) = col[static_cast<std::size_t>(K)];
            }
    }
    return fr;
}

// Columns are the frame vectors written in the induced coordinates (x, t):
// adapted components a map to induced components M a.
inline Matrix transition_matrix(const AdaptedFrame& fr) {
    const int D = fr.n + fr.N;
    Matrix M = make_matrix(D, D);
    for (int i = 0; i < D; ++i) M[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;
    for (int j = 0; j < fr.n; ++j)
        for (int K = 0; K < fr.N; ++K)
            M[static_cast<std::size_t>(fr.n + K)][static_cast<std::size_t>(j)] = fr.B(j, K);
    return M;
}

inline Matrix transition_matrix_inverse(const AdaptedFrame& fr) {
    Matrix M = transition_matrix(fr);
    for (int j = 0; j < fr.n; ++j)
        for (int K = 0; K < fr.N; ++K)
            M[static_cast<std::size_t>(fr.n + K)][static_cast<std::size_t>(j)] =
                -fr.B(j, K);
    return M;
}

inline std::vector<double> to_induced(const AdaptedFrame& fr, const AdaptedField& a) {
    std::vector<double> y = a.h;
    y.insert(y.end(), a.v.begin(), a.v.end());
    for (int K = 0; K < fr.N; ++K) {
        double acc = 0.0;
        for (int j = 0; j < fr.n; ++j) acc += fr.B(j, K) * a.h[static_cast<std::size_t>(j)];
        y[static_cast<std::size_t>(fr.n + K)] += acc;
    }
    return y;
}

inline AdaptedField from_induced(const AdaptedFrame& fr, const std::vector<double>& y) {
    AdaptedField a = AdaptedField::zero(fr.n, fr.N);
    for (int j = 0; j < fr.n; ++j) a.h[static_cast<std::size_t>(j)] = y[static_cast<std::size_t>(j)];
    for (int K = 0; K < fr.N; ++K) {
        double acc = y[static_cast<std::size_t>(fr.n + K)];
        for (int j = 0; j < fr.n; ++j) acc -= fr.B(j, K) * y[static_cast<std::size_t>(j)];
        a.v[static_cast<std::size_t>(K)] = acc;
    }
    return a;
}

} // namespace tbundle
