#pragma once
#include <cmath>
#include <functional>
#include <vector>

#include "tensorbundle/bundle_curvature.hpp"
#include "tensorbundle/rng.hpp"
#include "tensorbundle/structures.hpp"

namespace tbundle {

// Metric connections of the rescaled bundle metric other than Levi-Civita.
//
// The principal one trades the curvature couplings of the Levi-Civita
// connection for torsion: prescribing the purely vertical skew torsion below
// (base curvature contracted into the fiber tensor, which is exactly minus
// the horizontal anholonomy of the adapted frame) produces the unique metric
// connection whose vertical-direction derivatives vanish and whose remaining
// blocks are the rescaled horizontal Christoffels and the fiber action of
// the base connection. A second family arises by conjugating Levi-Civita
// with an involutive block structure.

// Draw a bundle point with the base coordinates uniform over the chart box
// and each fiber component uniform over [t_lo, t_hi]. Shared by the audits
// here and by scenario sampling.
inline FiberPoint random_fiber_point(const ManifoldChart& chart, const TensorType& type, Rng& rng,
                                     double t_lo = -0.9, double t_hi = 0.9) {
    FiberPoint fp;
    fp.type = type;
    fp.x.reserve(chart.box.size());
    for (const auto& side : chart.box) fp.x.push_back(rng.uniform(side.first, side.second));
    fp.t = rng.uniform_vec(static_cast<int>(type.fiber_dim(chart.n)), t_lo, t_hi);
    return fp;
}

// Position strides of the flattened fiber multi-index: replacing digit k of
// a flat index K by value v lands on K + (v - digit_k) * stride[k].
inline std::vector<int> fiber_strides(int n, int rank) {
    std::vector<int> stride(static_cast<std::size_t>(rank), 1);
    for (int k = rank - 2; k >= 0; --k)
        stride[static_cast<std::size_t>(k)] = stride[static_cast<std::size_t>(k + 1)] * n;
    return stride;
}

// The prescribed torsion: skew in its two direction slots, vanishing unless
// both are horizontal, and then purely vertical with
//   T(E_l, E_j)^(K) = sum_lambda R_ljs^{k_lambda} t^{k..s..k}_{h..h}
//                   - sum_mu     R_ljh_mu^{s}     t^{k..k}_{h..s..h}
// for the fiber index K = (k_1..k_p; h_1..h_q). Layout matches
// connection_torsion: T(beta, gamma, alpha).
inline DTensor prescribed_torsion(const PointContext& ctx) {
    if (ctx.geo.order < 2)
        throw BadParameter("prescribed torsion needs base curvature (order >= 2)");
    const int n = ctx.n();
    const int N = ctx.N();
    const int D = n + N;
    const TensorType& type = ctx.fp.type;
    const int rank = type.rank();
    const std::vector<int> stride = fiber_strides(n, rank);
    const auto& t = ctx.fp.t;

    DTensor T({D, D, D});
    for (int K = 0; K < N; ++K) {
        const std::vector<int> dig = unflat_index(K, n, rank);
        for (int l = 0; l < n; ++l)
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int lam = 0; lam < type.p; ++lam) {
                    const int base = K - dig[static_cast<std::size_t>(lam)] *
                                             stride[static_cast<std::size_t>(lam)];
                    for (int s = 0; s < n; ++s)
                        acc += ctx.geo.riemann(l, j, s, dig[static_cast<std::size_t>(lam)]) *
                               t[static_cast<std::size_t>(base + s * stride[static_cast<std::size_t>(lam)])];
                }
                for (int mu = type.p; mu < rank; ++mu) {
                    const int base = K - dig[static_cast<std::size_t>(mu)] *
                                             stride[static_cast<std::size_t>(mu)];
                    for (int s = 0; s < n; ++s)
                        acc -= ctx.geo.riemann(l, j, dig[static_cast<std::size_t>(mu)], s) *
                               t[static_cast<std::size_t>(base + s * stride[static_cast<std::size_t>(mu)])];
                }
                T(l, j, n + K) = acc;
            }
    }
    return T;
}

// The torsionful metric connection for a general (p,q) fiber, stated
// directly in blocks:
//   nabla_{E_l} E_j    = (Gamma^r_{lj} + W^r_{lj}) E_r
//   nabla_{E_l} E_Jbar = (fiber action of Gamma in direction l) E_Kbar
//   nabla_{E_Lbar} .   = 0
// The fiber action raises each upper digit and lowers each lower digit with
// one base Christoffel, the pattern whose t-contraction appears in the
// horizontal frame correction.
inline ConnectionField metric_connection_pq(const PointContext& ctx) {
    const int n = ctx.n();
    const int N = ctx.N();
    const TensorType& type = ctx.fp.type;
    const int rank = type.rank();
    const std::vector<int> stride = fiber_strides(n, rank);

    ConnectionField cf = zero_connection(n, N);
    for (int l = 0; l < n; ++l)
        for (int j = 0; j < n; ++j)
            for (int r = 0; r < n; ++r) cf.c(l, j, r) = ctx.geo.gamma(r, l, j) + ctx.rs.W(r, l, j);

    for (int J = 0; J < N; ++J) {
        const std::vector<int> dig = unflat_index(J, n, rank);
        for (int l = 0; l < n; ++l) {
            for (int lam = 0; lam < type.p; ++lam) {
                const int base = J - dig[static_cast<std::size_t>(lam)] *
                                         stride[static_cast<std::size_t>(lam)];
                for (int v = 0; v < n; ++v)
                    cf.c(l, n + J, n + base + v * stride[static_cast<std::size_t>(lam)]) +=
                        ctx.geo.gamma(v, l, dig[static_cast<std::size_t>(lam)]);
            }
            for (int mu = type.p; mu < rank; ++mu) {
                const int base = J - dig[static_cast<std::size_t>(mu)] *
                                         stride[static_cast<std::size_t>(mu)];
                for (int r = 0; r < n; ++r)
                    cf.c(l, n + J, n + base + r * stride[static_cast<std::size_t>(mu)]) -=
                        ctx.geo.gamma(dig[static_cast<std::size_t>(mu)], l, r);
            }
        }
    }
    return cf;
}

// The same connection on the endomorphism fiber with the index formulas
// written out, kept as an independent transcription to compare against.
inline ConnectionField metric_connection_11(const PointContext& ctx) {
    if (!(ctx.fp.type == TensorType{1, 1}))
        throw BadParameter("explicit (1,1) metric connection requires an endomorphism fiber");
    const int n = ctx.n();
    const int N = ctx.N();
    const auto& geo = ctx.geo;
    const double inv2f = 0.5 / ctx.rs.f;

    ConnectionField cf = zero_connection(n, N);
    for (int l = 0; l < n; ++l)
        for (int j = 0; j < n; ++j)
            for (int r = 0; r < n; ++r)
                cf.c(l, j, r) = geo.gamma(r, l, j) + inv2f * ctx.rs.A(r, l, j);

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

// The unique metric connection realizing a prescribed skew torsion:
// Levi-Civita plus the contorsion
//   U_{beta gamma delta} = 1/2 (T_{beta gamma delta} + T_{delta beta gamma}
//                               + T_{delta gamma beta})
// with all index moves through the bundle metric. Serves as the construction
// route the stated blocks are checked against.
inline ConnectionField contorsion_connection(const PointContext& ctx, const DTensor& torsion) {
    const int D = ctx.dim();
    DTensor low({D, D, D});
    for (int b = 0; b < D; ++b)
        for (int g = 0; g < D; ++g)
            for (int c = 0; c < D; ++c) {
                double acc = 0.0;
                for (int a = 0; a < D; ++a) acc += torsion(b, g, a) * ctx.metric.at(a, c);
                low(b, g, c) = acc;
            }

    ConnectionField cf = levi_civita_pq(ctx);
    for (int b = 0; b < D; ++b)
        for (int g = 0; g < D; ++g)
            for (int a = 0; a < D; ++a) {
                double acc = 0.0;
                for (int c = 0; c < D; ++c)
                    acc += 0.5 * (low(b, g, c) + low(c, b, g) + low(c, g, b)) *
                           ctx.metric.inv_at(c, a);
                cf.c(b, g, a) += acc;
            }
    return cf;
}

// Conjugation of a connection by an involutive block structure:
//   nabla'_X Y = S(nabla_X (SY))
// which for a frame-diagonal S multiplies each coefficient by the signs of
// its argument and output slots. Preserves metricity whenever the metric is
// pure for S. Restricted to involutions; the golden multipliers do not
// square to one and are rejected.
inline ConnectionField conjugate_connection(const ConnectionField& conn,
                                            const StructureTensor& S) {
    if (std::fabs(S.h_mult * S.h_mult - 1.0) > 1e-12 ||
        std::fabs(S.v_mult * S.v_mult - 1.0) > 1e-12)
        throw BadParameter("conjugation requires an involutive structure");
    const int n = conn.n;
    const int D = conn.dim();
    auto sign = [&](int a) { return a < n ? S.h_mult : S.v_mult; };

    ConnectionField out = zero_connection(conn.n, conn.N);
    for (int g = 0; g < D; ++g)
        for (int b = 0; b < D; ++b)
            for (int a = 0; a < D; ++a) out.c(g, b, a) = sign(b) * sign(a) * conn.at(g, b, a);
    return out;
}

// Curvature of a conjugated connection from the curvature of the original:
//   R'(X, Y) Z = S(R(X, Y)(SZ))
// so each block picks up the signs of the argument and output slots.
inline DTensor conjugate_curvature(const DTensor& blocks, const StructureTensor& S, int n) {
    if (std::fabs(S.h_mult * S.h_mult - 1.0) > 1e-12 ||
        std::fabs(S.v_mult * S.v_mult - 1.0) > 1e-12)
        throw BadParameter("conjugation requires an involutive structure");
    const int D = blocks.shape()[0];
    auto sign = [&](int a) { return a < n ? S.h_mult : S.v_mult; };

    DTensor out({D, D, D, D});
    for (int c = 0; c < D; ++c)
        for (int b = 0; b < D; ++b)
            for (int d = 0; d < D; ++d)
                for (int a = 0; a < D; ++a) out(c, b, d, a) = sign(d) * sign(a) * blocks(c, b, d, a);
    return out;
}

// Curvature blocks of the torsionful metric connection, in the layout of
// bundle_curvature_11 / frame_curvature_fd (first two slots the directions,
// then the argument, then the output):
//   R(E_m, E_l) E_j    = (R_mlj^r + Bcomb^r_{mlj}) E_r
//   R(E_m, E_l) E_Jbar = (fiber action of R(E_m, E_l)) E_Kbar
// and every family with a vertical direction vanishes. Unlike Levi-Civita,
// the blocks carry no fiber coordinate: over a flat base the connection is
// flat exactly when the rescale obstruction vanishes.
inline DTensor metric_connection_curvature(const PointContext& ctx) {
    if (ctx.geo.order < 2)
        throw BadParameter("metric connection curvature needs base curvature (order >= 2)");
    const int n = ctx.n();
    const int N = ctx.N();
    const int D = n + N;
    const TensorType& type = ctx.fp.type;
    const int rank = type.rank();
    const std::vector<int> stride = fiber_strides(n, rank);

    DTensor Rt({D, D, D, D});
    for (int m = 0; m < n; ++m)
        for (int l = 0; l < n; ++l) {
            for (int j = 0; j < n; ++j)
                for (int r = 0; r < n; ++r)
                    Rt(m, l, j, r) = ctx.geo.riemann(m, l, j, r) + ctx.rs.Bcomb(r, m, l, j);
            for (int J = 0; J < N; ++J) {
                const std::vector<int> dig = unflat_index(J, n, rank);
                for (int lam = 0; lam < type.p; ++lam) {
                    const int base = J - dig[static_cast<std::size_t>(lam)] *
                                             stride[static_cast<std::size_t>(lam)];
                    for (int v = 0; v < n; ++v)
                        Rt(m, l, n + J, n + base + v * stride[static_cast<std::size_t>(lam)]) +=
                            ctx.geo.riemann(m, l, dig[static_cast<std::size_t>(lam)], v);
                }
                for (int mu = type.p; mu < rank; ++mu) {
                    const int base = J - dig[static_cast<std::size_t>(mu)] *
                                             stride[static_cast<std::size_t>(mu)];
                    for (int r = 0; r < n; ++r)
                        Rt(m, l, n + J, n + base + r * stride[static_cast<std::size_t>(mu)]) -=
                            ctx.geo.riemann(m, l, r, dig[static_cast<std::size_t>(mu)]);
                }
            }
        }
    return Rt;
}

// Ricci tensor of the torsionful metric connection. Only the horizontal
// block survives the contraction; it is the base Ricci tensor plus the trace
// of the rescale obstruction.
inline DTensor metric_connection_ricci(const PointContext& ctx) {
    if (ctx.geo.order < 2)
        throw BadParameter("metric connection Ricci needs base curvature (order >= 2)");
    const int n = ctx.n();
    const int D = ctx.dim();
    DTensor ric({D, D});
    for (int l = 0; l < n; ++l)
        for (int j = 0; j < n; ++j) {
            double acc = ctx.geo.ricci[l][j];
            for (int r = 0; r < n; ++r) acc += ctx.rs.Bcomb(r, r, l, j);
            ric(l, j) = acc;
        }
    return ric;
}

// Scalar curvature of the torsionful metric connection, split into its two
// closed-form contributions: the rescaled base scalar and the obstruction
// trace. It vanishes exactly when both parts do.
struct ScalarSplit {
    double base_part = 0.0;    // base scalar / f
    double rescale_part = 0.0; // (1/f) g^{lj} Bcomb^r_{rlj}
    double total = 0.0;
};

inline ScalarSplit metric_connection_scalar(const PointContext& ctx) {
    if (ctx.geo.order < 2)
        throw BadParameter("metric connection scalar needs base curvature (order >= 2)");
    ScalarSplit s;
    s.base_part = ctx.geo.scalar / ctx.rs.f;
    s.rescale_part = ctx.rs.fL;
    s.total = s.base_part + s.rescale_part;
    return s;
}

// Metric-compatibility defect of a connection at one point: the largest
// component of nabla g over all frame slots, with the frame derivative of
// each metric component taken by a central difference along the frame
// direction. The frame components of the bundle metric depend only on the
// base point, so vertical directions differentiate to zero and test the
// algebraic cancellation alone.
inline double metricity_defect(const ManifoldChart& chart, const RescaleFunction& f,
                               const PointContext& ctx, const ConnectionField& conn,
                               double step = 1e-5) {
    if (step <= 0.0) throw BadParameter("metricity defect needs a positive step");
    const int D = ctx.dim();
    const TensorType& type = ctx.fp.type;

    double worst = 0.0;
    for (int al = 0; al < D; ++al) {
        const FiberPoint qp = shift_along_frame(ctx.frame, ctx.fp, al, step);
        const FiberPoint qm = shift_along_frame(ctx.frame, ctx.fp, al, -step);
        const BaseGeometry gp = geometry_at(chart, qp.x, 1);
        const BaseGeometry gm = geometry_at(chart, qm.x, 1);
        const BundleMetric bp = bundle_metric_at(gp, rescale_data_at(gp, f), type);
        const BundleMetric bm = bundle_metric_at(gm, rescale_data_at(gm, f), type);
        for (int b = 0; b < D; ++b)
            for (int g = 0; g < D; ++g) {
                double d = (bp.at(b, g) - bm.at(b, g)) / (2.0 * step);
                for (int e = 0; e < D; ++e)
                    d -= conn.at(al, b, e) * ctx.metric.at(e, g) +
                         conn.at(al, g, e) * ctx.metric.at(b, e);
                worst = std::max(worst, std::fabs(d));
            }
    }
    return worst;
}

// Sampled audit of a connection rule: the worst metric-compatibility defect
// and the worst gap between the realized torsion and the prescribed one.
// Feeding a rule with different torsion (Levi-Civita, say) leaves the first
// number small and makes the second the size of the prescription.
using ConnectionRule = std::function<ConnectionField(const PointContext&)>;

struct ConnectionAudit {
    double metricity_max = 0.0;
    double torsion_gap_max = 0.0;
};

inline ConnectionAudit audit_connection(const ManifoldChart& chart, const RescaleFunction& f,
                                        const TensorType& type, const ConnectionRule& rule,
                                        int samples, Rng& rng, double step = 1e-5) {
    if (samples < 1) throw BadParameter("connection audit needs at least one sample");
    ConnectionAudit audit;
    for (int s = 0; s < samples; ++s) {
        const FiberPoint fp = random_fiber_point(chart, type, rng);
        const PointContext ctx = point_context_at(chart, f, fp, 2);
        const ConnectionField conn = rule(ctx);
        audit.metricity_max =
            std::max(audit.metricity_max, metricity_defect(chart, f, ctx, conn, step));
        const DTensor realized = connection_torsion(ctx.frame, conn);
        const DTensor wanted = prescribed_torsion(ctx);
        const int D = ctx.dim();
        for (int b = 0; b < D; ++b)
            for (int g = 0; g < D; ++g)
                for (int a = 0; a < D; ++a)
                    audit.torsion_gap_max = std::max(
                        audit.torsion_gap_max, std::fabs(realized(b, g, a) - wanted(b, g, a)));
    }
    return audit;
}

} // namespace tbundle
