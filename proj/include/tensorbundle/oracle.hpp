#pragma once
#include <vector>

#include "tensorbundle/bundle_metric.hpp"
#include "tensorbundle/chart.hpp"
#include "tensorbundle/fiber.hpp"
#include "tensorbundle/frames.hpp"
#include "tensorbundle/tensor.hpp"

namespace tbundle {

// Independent verification path. The bundle metric is evaluated in the
// induced coordinates (x, t) directly, its Christoffel symbols and curvature
// come from finite differences of the metric entries, and the results are
// pushed through the frame transition matrices for comparison against the
// closed-form adapted-frame constructions. Nothing here reuses those
// constructions: only the metric blocks, the frame columns, and their
// analytic derivatives enter.
class InducedOracle {
public:
    InducedOracle(ManifoldChart chart, RescaleFunction f, TensorType type)
        : chart_(std::move(chart)), f_(std::move(f)), type_(type) {
        chart_.check();
        n_ = chart_.n;
        N_ = static_cast<int>(type_.fiber_dim(n_));
        D_ = n_ + N_;
        if (D_ > 12) throw DimensionGuard("induced-coordinate oracle limited to 12 bundle dimensions");
    }

    int n() const { return n_; }
    int N() const { return N_; }
    int dim() const { return D_; }

    // Finite-difference steps: h1 drives first derivatives, h2 second ones.
    void set_steps(double h1, double h2) {
        if (!(h1 > 0.0) || !(h2 > 0.0)) throw BadParameter("oracle steps must be positive");
        h1_ = h1;
        h2_ = h2;
    }

    // The bundle metric at the stacked induced point y = (x, t).
    Matrix metric(const std::vector<double>& y) const {
        FiberPoint fp = split(y);
        auto geo = geometry_at(chart_, fp.x, 1);
        const double fv = positive_f(fp.x);
        DTensor B = horizontal_correction(geo, fp);

        // ghat = blockdiag(f g, G); pull back through Minv = [[I,0],[-B,I]].
        Matrix ghat = make_matrix(D_, D_);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) ghat[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = fv * geo.g[i][j];
        auto rsless = bundle_metric_vv(geo);
        for (int I = 0; I < N_; ++I)
            for (int J = 0; J < N_; ++J)
                ghat[static_cast<std::size_t>(n_ + I)][static_cast<std::size_t>(n_ + J)] =
                    rsless[static_cast<std::size_t>(I)][static_cast<std::size_t>(J)];

        Matrix Minv = make_matrix(D_, D_);
        for (int i = 0; i < D_; ++i) Minv[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;
        for (int j = 0; j < n_; ++j)
            for (int K = 0; K < N_; ++K)
                Minv[static_cast<std::size_t>(n_ + K)][static_cast<std::size_t>(j)] = -B(j, K);

        Matrix tmp = make_matrix(D_, D_); // Minv^T ghat
        for (int a = 0; a < D_; ++a)
            for (int b = 0; b < D_; ++b) {
                double acc = 0.0;
                for (int c = 0; c < D_; ++c)
                    acc += Minv[static_cast<std::size_t>(c)][static_cast<std::size_t>(a)] *
                           ghat[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)];
                tmp[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = acc;
            }
        return mat_mul(tmp, Minv);
    }

    // Christoffel symbols Gamma^K_{IJ} of the induced-coordinate metric via
    // central differences of the metric entries.
    DTensor christoffels(const std::vector<double>& y) const {
        auto dG = metric_gradient(y);
        Matrix ginv = invert(metric(y));
        return assemble_christoffels(dG, ginv);
    }

    // Curvature R_{IJL}{}^K of the induced metric. First derivatives of the
    // Christoffels are assembled exactly from the first and second metric
    // differences, so the only error is the finite-difference error of the
    // metric itself.
    DTensor riemann(const std::vector<double>& y) const {
        Matrix g0 = metric(y);
        Matrix ginv = invert(g0);
        auto dG = metric_gradient(y);

        // Richardson pair on the hessian: the 4th-order truncation term is
        // eliminated while the step stays large enough that roundoff in the
        // ill-conditioned pole-margin entries does not surface.
        DTensor d2G = metric_hessian(y, g0, h2_);
        DTensor d2Gh = metric_hessian(y, g0, 0.5 * h2_);
        for (std::size_t k = 0; k < d2G.size(); ++k) d2G[k] = (16.0 * d2Gh[k] - d2G[k]) / 15.0;

        // dginv[P] = -ginv dG[P] ginv
        std::vector<Matrix> dginv(static_cast<std::size_t>(D_));
        for (int P = 0; P < D_; ++P)
            dginv[static_cast<std::size_t>(P)] = scale_mat(
                mat_mul(mat_mul(ginv, dG[static_cast<std::size_t>(P)]), ginv), -1.0);

        DTensor gamma = assemble_christoffels(dG, ginv);
        DTensor dgamma({D_, D_, D_, D_}); // [P][K][I][J]
        for (int P = 0; P < D_; ++P)
            for (int K = 0; K < D_; ++K)
                for (int I = 0; I < D_; ++I)
                    for (int J = 0; J < D_; ++J) {
                        double acc = 0.0;
                        for (int M = 0; M < D_; ++M) {
                            acc += 0.5 * dginv[static_cast<std::size_t>(P)][static_cast<std::size_t>(K)][static_cast<std::size_t>(M)] *
                                   (dG[static_cast<std::size_t>(I)][static_cast<std::size_t>(M)][static_cast<std::size_t>(J)] +
                                    dG[static_cast<std::size_t>(J)][static_cast<std::size_t>(I)][static_cast<std::size_t>(M)] -
                                    dG[static_cast<std::size_t>(M)][static_cast<std::size_t>(I)][static_cast<std::size_t>(J)]);
                            acc += 0.5 * ginv[static_cast<std::size_t>(K)][static_cast<std::size_t>(M)] *
                                   (d2G(P, I, M, J) + d2G(P, J, I, M) - d2G(P, M, I, J));
                        }
                        dgamma(P, K, I, J) = acc;
                    }

        DTensor R({D_, D_, D_, D_}); // [I][J][L][K]
        for (int I = 0; I < D_; ++I)
            for (int J = 0; J < D_; ++J)
                for (int L = 0; L < D_; ++L)
                    for (int K = 0; K < D_; ++K) {
                        double acc = dgamma(I, K, J, L) - dgamma(J, K, I, L);
                        for (int M = 0; M < D_; ++M)
                            acc += gamma(K, I, M) * gamma(M, J, L) - gamma(K, J, M) * gamma(M, I, L);
                        R(I, J, L, K) = acc;
                    }
        return R;
    }

    // Connection coefficients of the induced metric re-expressed in the
    // adapted frame: C(gamma,beta)^alpha = Minv^alpha_K (E_gamma^I d_I E_beta^K
    // + Gamma^K_{IJ} E_gamma^I E_beta^J). The frame derivative d_I E_beta^K is
    // analytic (B is linear in t with known x-gradient).
    DTensor adapted_connection(const FiberPoint& fp) const {
        auto geo = geometry_at(chart_, fp.x, 2);
        auto fr = adapted_frame_at(geo, fp);
        auto gamma = christoffels(stack(fp));
        Matrix M = transition_matrix(fr);
        Matrix Minv = transition_matrix_inverse(fr);

        DTensor C({D_, D_, D_});
        for (int g = 0; g < D_; ++g)
            for (int b = 0; b < D_; ++b) {
                std::vector<double> comp(static_cast<std::size_t>(D_), 0.0);
                // E_g^I d_I E_b^K: nonzero only for horizontal b and fiber row K.
                if (b < n_) {
                    for (int K = 0; K < N_; ++K) {
                        double acc = 0.0;
                        if (g < n_) {
                            acc += fr.dB_dx(b, K, g); // I = g (base direction)
                            for (int Mf = 0; Mf < N_; ++Mf)
                                acc += fr.B(g, Mf) * fr.dB(b, K, Mf); // I fiber, E_g^I = B
                        } else {
                            acc += fr.dB(b, K, g - n_);
                        }
                        comp[static_cast<std::size_t>(n_ + K)] += acc;
                    }
                }
                for (int K = 0; K < D_; ++K) {
                    double acc = 0.0;
                    for (int I = 0; I < D_; ++I) {
                        const double eg = M[static_cast<std::size_t>(I)][static_cast<std::size_t>(g)];
                        if (eg == 0.0) continue;
                        for (int J = 0; J < D_; ++J)
                            acc += gamma(K, I, J) * eg * M[static_cast<std::size_t>(J)][static_cast<std::size_t>(b)];
                    }
                    comp[static_cast<std::size_t>(K)] += acc;
                }
                for (int a = 0; a < D_; ++a) {
                    double acc = 0.0;
                    for (int K = 0; K < D_; ++K)
                        acc += Minv[static_cast<std::size_t>(a)][static_cast<std::size_t>(K)] * comp[static_cast<std::size_t>(K)];
                    C(g, b, a) = acc;
                }
            }
        return C;
    }

    // Curvature in the adapted frame: a purely tensorial transform of the
    // induced-coordinate curvature, R~[a][b][c][d] = coeff of E_d in
    // R(E_a, E_b) E_c.
    DTensor adapted_riemann(const FiberPoint& fp) const {
        auto geo = geometry_at(chart_, fp.x, 1);
        auto fr = adapted_frame_at(geo, fp);
        Matrix M = transition_matrix(fr);
        Matrix Minv = transition_matrix_inverse(fr);
        DTensor R = riemann(stack(fp));

        // Contract one slot at a time to keep the cost at D^5.
        DTensor R1({D_, D_, D_, D_});
        for (int a = 0; a < D_; ++a)
            for (int J = 0; J < D_; ++J)
                for (int L = 0; L < D_; ++L)
                    for (int K = 0; K < D_; ++K) {
                        double acc = 0.0;
                        for (int I = 0; I < D_; ++I)
                            acc += M[static_cast<std::size_t>(I)][static_cast<std::size_t>(a)] * R(I, J, L, K);
                        R1(a, J, L, K) = acc;
                    }
        DTensor R2({D_, D_, D_, D_});
        for (int a = 0; a < D_; ++a)
            for (int b = 0; b < D_; ++b)
                for (int L = 0; L < D_; ++L)
                    for (int K = 0; K < D_; ++K) {
                        double acc = 0.0;
                        for (int J = 0; J < D_; ++J)
                            acc += M[static_cast<std::size_t>(J)][static_cast<std::size_t>(b)] * R1(a, J, L, K);
                        R2(a, b, L, K) = acc;
                    }
        DTensor R3({D_, D_, D_, D_});
        for (int a = 0; a < D_; ++a)
            for (int b = 0; b < D_; ++b)
                for (int c = 0; c < D_; ++c)
                    for (int K = 0; K < D_; ++K) {
                        double acc = 0.0;
                        for (int L = 0; L < D_; ++L)
                            acc += M[static_cast<std::size_t>(L)][static_cast<std::size_t>(c)] * R2(a, b, L, K);
                        R3(a, b, c, K) = acc;
                    }
        DTensor out({D_, D_, D_, D_});
        for (int a = 0; a < D_; ++a)
            for (int b = 0; b < D_; ++b)
                for (int c = 0; c < D_; ++c)
                    for (int d = 0; d < D_; ++d) {
                        double acc = 0.0;
                        for (int K = 0; K < D_; ++K)
                            acc += Minv[static_cast<std::size_t>(d)][static_cast<std::size_t>(K)] * R3(a, b, c, K);
                        out(a, b, c, d) = acc;
                    }
        return out;
    }

    FiberPoint split(const std::vector<double>& y) const {
        FiberPoint fp;
        fp.type = type_;
        fp.x.assign(y.begin(), y.begin() + n_);
        fp.t.assign(y.begin() + n_, y.end());
        return fp;
    }

    static std::vector<double> stack(const FiberPoint& fp) {
        std::vector<double> y = fp.x;
        y.insert(y.end(), fp.t.begin(), fp.t.end());
        return y;
    }

private:
    double positive_f(const std::vector<double>& x) const {
        double v = eval(*f_.expr, x);
        if (!(v > 0.0)) throw NonPositiveRescale("rescale function must be positive");
        return v;
    }

    Matrix bundle_metric_vv(const BaseGeometry& geo) const {
        Matrix vv = make_matrix(N_, N_);
        const int rank = type_.rank();
        std::vector<int> I(static_cast<std::size_t>(rank), 0);
        int iflat = 0;
        do {
            std::vector<int> J(static_cast<std::size_t>(rank), 0);
            int jflat = 0;
            do {
                double prod = 1.0;
                for (int lam = 0; lam < type_.p; ++lam)
                    prod *= geo.g[I[static_cast<std::size_t>(lam)]][J[static_cast<std::size_t>(lam)]];
                for (int mu = type_.p; mu < rank; ++mu)
                    prod *= geo.g_inv[I[static_cast<std::size_t>(mu)]][J[static_cast<std::size_t>(mu)]];
                vv[static_cast<std::size_t>(iflat)][static_cast<std::size_t>(jflat)] = prod;
                ++jflat;
            } while (next_index(J, n_));
            ++iflat;
        } while (next_index(I, n_));
        return vv;
    }

    static Matrix scale_mat(Matrix m, double s) {
        for (auto& row : m)
            for (auto& v : row) v *= s;
        return m;
    }

    // 4th-order first differences: near chart-box edges the trig metric
    // entries have large high derivatives, and a 2nd-order stencil leaves a
    // visible footprint in the curvature comparison.
    std::vector<Matrix> metric_gradient(const std::vector<double>& y) const {
        static const int off[4] = {-2, -1, 1, 2};
        static const double w1[4] = {1.0 / 12.0, -2.0 / 3.0, 2.0 / 3.0, -1.0 / 12.0};
        std::vector<Matrix> dG(static_cast<std::size_t>(D_));
        for (int I = 0; I < D_; ++I) {
            Matrix d = make_matrix(D_, D_);
            for (int u = 0; u < 4; ++u) {
                auto ys = y;
                ys[static_cast<std::size_t>(I)] += off[u] * h1_;
                Matrix gs = metric(ys);
                for (int a = 0; a < D_; ++a)
                    for (int b = 0; b < D_; ++b)
                        d[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] +=
                            w1[u] / h1_ * gs[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
            }
            dG[static_cast<std::size_t>(I)] = d;
        }
        return dG;
    }

    // Fourth-order stencils: the metric hessian feeds the curvature, where
    // second-order truncation error on trig metrics is measurable at the
    // sphere-box edges. Diagonal uses the 5-point second-derivative stencil;
    // mixed entries apply the 4-point first-derivative stencil on each axis.
    DTensor metric_hessian(const std::vector<double>& y, const Matrix& g0, double step) const {
        DTensor d2G({D_, D_, D_, D_}); // [P][I][a][b] = d_P d_I g_ab
        auto at = [&](const std::vector<int>& shifts) {
            auto ys = y;
            for (std::size_t k = 0; k < shifts.size(); k += 2)
                ys[static_cast<std::size_t>(shifts[k])] += shifts[k + 1] * step;
            return metric(ys);
        };
        static const int off[4] = {-2, -1, 1, 2};
        static const double w1[4] = {1.0 / 12.0, -2.0 / 3.0, 2.0 / 3.0, -1.0 / 12.0};
        for (int P = 0; P < D_; ++P) {
            Matrix gp2 = at({P, 2}), gp1 = at({P, 1}), gm1 = at({P, -1}), gm2 = at({P, -2});
            for (int a = 0; a < D_; ++a)
                for (int b = 0; b < D_; ++b)
                    d2G(P, P, a, b) = (-gp2[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] +
                                       16.0 * gp1[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] -
                                       30.0 * g0[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] +
                                       16.0 * gm1[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] -
                                       gm2[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]) /
                                      (12.0 * step * step);
            for (int I = P + 1; I < D_; ++I) {
                for (int u = 0; u < 4; ++u)
                    for (int v = 0; v < 4; ++v) {
                        Matrix gs = at({P, off[u], I, off[v]});
                        const double w = w1[u] * w1[v] / (step * step);
                        for (int a = 0; a < D_; ++a)
                            for (int b = 0; b < D_; ++b)
                                d2G(P, I, a, b) += w * gs[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
                    }
                for (int a = 0; a < D_; ++a)
                    for (int b = 0; b < D_; ++b) d2G(I, P, a, b) = d2G(P, I, a, b);
            }
        }
        return d2G;
    }

    DTensor assemble_christoffels(const std::vector<Matrix>& dG, const Matrix& ginv) const {
        DTensor gamma({D_, D_, D_}); // [K][I][J]
        for (int K = 0; K < D_; ++K)
            for (int I = 0; I < D_; ++I)
                for (int J = 0; J < D_; ++J) {
                    double acc = 0.0;
                    for (int M = 0; M < D_; ++M)
                        acc += ginv[static_cast<std::size_t>(K)][static_cast<std::size_t>(M)] *
                               (dG[static_cast<std::size_t>(I)][static_cast<std::size_t>(M)][static_cast<std::size_t>(J)] +
                                dG[static_cast<std::size_t>(J)][static_cast<std::size_t>(I)][static_cast<std::size_t>(M)] -
                                dG[static_cast<std::size_t>(M)][static_cast<std::size_t>(I)][static_cast<std::size_t>(J)]);
                    gamma(K, I, J) = 0.5 * acc;
                }
        return gamma;
    }

    ManifoldChart chart_;
    RescaleFunction f_;
    TensorType type_;
    int n_ = 0, N_ = 0, D_ = 0;
    double h1_ = 1e-5;
    double h2_ = 2e-3;
};

} // namespace tbundle
