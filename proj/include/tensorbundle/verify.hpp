#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "tensorbundle/bundle_curvature.hpp"
#include "tensorbundle/geodesics.hpp"
#include "tensorbundle/metric_connections.hpp"
#include "tensorbundle/oracle.hpp"
#include "tensorbundle/rng.hpp"
#include "tensorbundle/scenario.hpp"
#include "tensorbundle/structures.hpp"

// Verification registry: every analytic identity the library implements,
// re-checked numerically on a configured scenario. Each check reports one
// measured value against a threshold; mode "below" means the value must stay
// under the threshold (a deviation), mode "above" that it must exceed it
// (a quantity required to be genuinely nonzero, e.g. a convergence ratio).
// All sampling is seeded per check id, so a report is a pure function of the
// scenario text and reruns are byte-identical.

namespace tbundle {

struct CheckResult {
    std::string id;
    double value = 0.0;
    double tol = 0.0;
    bool live = false; // mode "above"
    bool pass = false;
    bool tol_from_config = false;
    std::vector<double> worst; // sample coordinates at the extremum, may be empty
};

// Immutable per-scenario context shared by all checks.
struct VerifyEnv {
    Scenario sc;
    ManifoldChart chart;
    RescaleFunction f;
    TensorType type{1, 1};
    int n = 0;
    int N = 0;
    int D = 0;
    bool is_11 = false;
    bool oracle_ok = false;  // induced-coordinate oracle dimension guard
    bool f_constant = false; // df vanished on the probe grid
    double kappa = std::numeric_limits<double>::quiet_NaN(); // preset curvature if known
    FlatnessReport flat;
};

namespace detail {

inline std::uint64_t fnv1a64(const char* s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (; *s; ++s) {
        h ^= static_cast<unsigned char>(*s);
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::vector<double> sample_x(const ManifoldChart& chart, Rng& rng) {
    std::vector<double> x(static_cast<std::size_t>(chart.n));
    for (int i = 0; i < chart.n; ++i)
        x[static_cast<std::size_t>(i)] = rng.uniform(chart.box[static_cast<std::size_t>(i)].first,
                                                     chart.box[static_cast<std::size_t>(i)].second);
    return x;
}

inline void track(CheckResult& r, double candidate, const std::vector<double>& at) {
    if (candidate > r.value) {
        r.value = candidate;
        r.worst = at;
    }
}

// track() for checks whose value is a minimum over samples (live ratios).
inline void track_min(CheckResult& r, double candidate, const std::vector<double>& at) {
    if (candidate < r.value) {
        r.value = candidate;
        r.worst = at;
    }
}

inline double conn_gap(const ConnectionField& a, const ConnectionField& b) {
    double worst = 0.0;
    for (int g = 0; g < a.dim(); ++g)
        for (int be = 0; be < a.dim(); ++be)
            for (int al = 0; al < a.dim(); ++al)
                worst = std::max(worst, std::abs(a.at(g, be, al) - b.at(g, be, al)));
    return worst;
}

inline double conn_gap(const ConnectionField& a, const DTensor& b) {
    double worst = 0.0;
    for (int g = 0; g < a.dim(); ++g)
        for (int be = 0; be < a.dim(); ++be)
            for (int al = 0; al < a.dim(); ++al)
                worst = std::max(worst, std::abs(a.at(g, be, al) - b(g, be, al)));
    return worst;
}

inline double tensor_gap(const DTensor& a, const DTensor& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    return worst;
}

// Start state for geodesic checks: positioned near the box center with a
// velocity scaled to the box so one unit of parameter stays mostly inside.
inline BundleCurveState geo_start(const VerifyEnv& env, Rng& rng, double wbar_amp) {
    BundleCurveState st;
    st.x.resize(static_cast<std::size_t>(env.n));
    st.xdot.resize(static_cast<std::size_t>(env.n));
    for (int i = 0; i < env.n; ++i) {
        const auto& [lo, hi] = env.chart.box[static_cast<std::size_t>(i)];
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        st.x[static_cast<std::size_t>(i)] = mid + 0.25 * half * rng.uniform(-1.0, 1.0);
        st.xdot[static_cast<std::size_t>(i)] = 0.4 * half * rng.uniform(-1.0, 1.0);
    }
    st.t = rng.uniform_vec(env.N, -0.8, 0.8);
    st.wbar = rng.uniform_vec(env.N, -wbar_amp, wbar_amp);
    return st;
}

// Runs a geodesic, halving the parameter span when the curve leaves the
// chart or the rescale floor; the last attempt propagates its error.
inline GeodesicTrace geo_ladder(const VerifyEnv& env, const BundleCurveState& st,
                                const ConnectionRule& rule, double& s_max, double step) {
    for (int k = 0; k < 5; ++k) {
        try {
            return integrate_geodesic(env.chart, env.f, env.type, st, rule, s_max, step);
        } catch (const ChartExit&) {
        } catch (const StepUnderflow&) {
        } catch (const NonPositiveRescale&) {
        }
        s_max *= 0.5;
    }
    return integrate_geodesic(env.chart, env.f, env.type, st, rule, s_max, step);
}

inline GeodesicTrace lift_ladder(const VerifyEnv& env, const BundleCurveState& st, double& s_max,
                                 double step) {
    for (int k = 0; k < 5; ++k) {
        try {
            return horizontal_lift_curve(env.chart, env.f, env.type, st.x, st.xdot, st.t, s_max,
                                         step);
        } catch (const ChartExit&) {
        } catch (const StepUnderflow&) {
        } catch (const NonPositiveRescale&) {
        }
        s_max *= 0.5;
    }
    return horizontal_lift_curve(env.chart, env.f, env.type, st.x, st.xdot, st.t, s_max, step);
}

inline std::vector<double> start_coords(const BundleCurveState& st) {
    std::vector<double> out = st.x;
    out.insert(out.end(), st.t.begin(), st.t.end());
    return out;
}

} // namespace detail

// ---- base geometry checks -------------------------------------------------

inline void check_base_inverse(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    for (int s = 0; s < env.sc.samples; ++s) {
        const auto x = detail::sample_x(env.chart, rng);
        const BaseGeometry geo = geometry_at(env.chart, x, 1);
        double worst = 0.0;
        for (int i = 0; i < env.n; ++i)
            for (int j = 0; j < env.n; ++j) {
                double acc = 0.0;
                for (int k = 0; k < env.n; ++k) acc += geo.g[i][k] * geo.g_inv[k][j];
                worst = std::max(worst, std::abs(acc - (i == j ? 1.0 : 0.0)));
            }
        detail::track(r, worst, x);
    }
}

inline void check_base_metricity(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    for (int s = 0; s < env.sc.samples; ++s) {
        const auto x = detail::sample_x(env.chart, rng);
        const BaseGeometry geo = geometry_at(env.chart, x, 1);
        double worst = 0.0;
        for (int m = 0; m < env.n; ++m)
            for (int i = 0; i < env.n; ++i)
                for (int j = 0; j < env.n; ++j) {
                    double acc = geo.dg(m, i, j);
                    for (int h = 0; h < env.n; ++h)
                        acc -= geo.gamma(h, m, i) * geo.g[h][j] + geo.gamma(h, m, j) * geo.g[i][h];
                    worst = std::max(worst, std::abs(acc));
                }
        detail::track(r, worst, x);
    }
}

inline void check_base_bianchi(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    for (int s = 0; s < env.sc.samples; ++s) {
        const auto x = detail::sample_x(env.chart, rng);
        const BaseGeometry geo = geometry_at(env.chart, x, 2);
        double worst = 0.0;
        for (int k = 0; k < env.n; ++k)
            for (int l = 0; l < env.n; ++l)
                for (int j = 0; j < env.n; ++j)
                    for (int t = 0; t < env.n; ++t)
                        worst = std::max(
                            worst, std::abs(geo.riemann(k, l, j, t) + geo.riemann(l, j, k, t) +
                                            geo.riemann(j, k, l, t)));
        detail::track(r, worst, x);
    }
}

// ---- frame and metric checks ----------------------------------------------

// Horizontal-horizontal frame brackets against the curvature contraction
// that the torsion prescription predicts for them.
inline void check_frames_brackets(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    for (int s = 0; s < env.sc.samples; ++s) {
        const FiberPoint fp = random_fiber_point(env.chart, env.type, rng, -0.8, 0.8);
        const PointContext ctx = point_context_at(env.chart, env.f, fp, 2);
        const DTensor T = prescribed_torsion(ctx);
        double worst = 0.0;
        for (int l = 0; l < env.n; ++l)
            for (int j = 0; j < env.n; ++j)
                for (int K = 0; K < env.N; ++K)
                    worst = std::max(
                        worst, std::abs(T(l, j, env.n + K) + ctx.frame.bracket_hh(l, j, K)));
        detail::track(r, worst, stacked_point(fp));
    }
}

inline void check_metric_blockdiag(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    for (int s = 0; s < env.sc.samples; ++s) {
        const FiberPoint fp = random_fiber_point(env.chart, env.type, rng, -0.8, 0.8);
        const PointContext ctx = point_context_at(env.chart, env.f, fp, 1);
        double worst = 0.0;
        for (int a = 0; a < env.D; ++a)
            for (int b = 0; b < env.D; ++b) {
                worst = std::max(worst, std::abs(ctx.metric.at(a, b) - ctx.metric.at(b, a)));
                double acc = 0.0;
                for (int e = 0; e < env.D; ++e) acc += ctx.metric.at(a, e) * ctx.metric.inv_at(e, b);
                worst = std::max(worst, std::abs(acc - (a == b ? 1.0 : 0.0)));
            }
        for (int i = 0; i < env.n; ++i) {
            for (int K = 0; K < env.N; ++K)
                worst = std::max(worst, std::abs(ctx.metric.at(i, env.n + K)));
            for (int j = 0; j < env.n; ++j)
                worst = std::max(worst,
                                 std::abs(ctx.metric.at(i, j) - ctx.rs.f * ctx.geo.g[i][j]));
        }
        detail::track(r, worst, stacked_point(fp));
    }
}

// ---- Levi-Civita connection checks ----------------------------------------

inline void check_lc_oracle(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    InducedOracle oracle(env.chart, env.f, env.type);
    const int pts = std::min(env.sc.samples, 5);
    for (int s = 0; s < pts; ++s) {
        const FiberPoint fp = random_fiber_point(env.chart, env.type, rng, -0.8, 0.8);
        const PointContext ctx = point_context_at(env.chart, env.f, fp, 2);
        detail::track(r, detail::conn_gap(levi_civita_pq(ctx), oracle.adapted_connection(fp)),
                      stacked_point(fp));
    }
}

inline void check_lc_torsionfree(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    for (int s = 0; s < env.sc.samples; ++s) {
        const FiberPoint fp = random_fiber_point(env.chart, env.type, rng, -0.8, 0.8);
        const PointContext ctx = point_context_at(env.chart, env.f, fp, 2);
        detail::track(r, connection_torsion(ctx.frame, levi_civita_pq(ctx)).max_abs(),
                      stacked_point(fp));
    }
}

inline void check_lc_metricity(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    const int pts = std::min(env.sc.samples, 4);
    for (int s = 0; s < pts; ++s) {
        const FiberPoint fp = random_fiber_point(env.chart, env.type, rng, -0.8, 0.8);
        const PointContext ctx = point_context_at(env.chart, env.f, fp, 2);
        detail::track(r, metricity_defect(env.chart, env.f, ctx, levi_civita_pq(ctx)),
                      stacked_point(fp));
    }
}

inline void check_lc_pq_consistency(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    for (int s = 0; s < env.sc.samples; ++s) {
        const FiberPoint fp = random_fiber_point(env.chart, env.type, rng, -0.8, 0.8);
        const PointContext ctx = point_context_at(env.chart, env.f, fp, 2);
        detail::track(r, detail::conn_gap(levi_civita_11(ctx), levi_civita_pq(ctx).c),
                      stacked_point(fp));
    }
}

// ---- curvature checks ------------------------------------------------------

inline void check_curv_oracle(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    InducedOracle oracle(env.chart, env.f, env.type);
    const int pts = std::min(env.sc.samples, 5);
    for (int s = 0; s < pts; ++s) {
        const FiberPoint fp = random_fiber_point(env.chart, env.type, rng, -0.8, 0.8);
        const PointContext ctx = point_context_at(env.chart, env.f, fp, 3);
        const DTensor blocks = bundle_curvature_11(ctx);
        const DTensor ref = oracle.adapted_riemann(fp);
        double worst = 0.0;
        for (const auto& fam : curvature_family_deviations(blocks, ref, env.n))
            worst = std::max(worst, fam.max_dev);
        detail::track(r, worst, stacked_point(fp));
    }
}

inline void check_curv_antisym(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    for (int s = 0; s < env.sc.samples; ++s) {
        const FiberPoint fp = random_fiber_point(env.chart, env.type, rng, -0.8, 0.8);
        const PointContext ctx = point_context_at(env.chart, env.f, fp, 3);
        const DTensor blocks = bundle_curvature_11(ctx);
        double worst = 0.0;
        for (int c = 0; c < env.D; ++c)
            for (int b = 0; b < env.D; ++b)
                for (int d = 0; d < env.D; ++d)
                    for (int a = 0; a < env.D; ++a)
                        worst = std::max(worst, std::abs(blocks(c, b, d, a) + blocks(b, c, d, a)));
        detail::track(r, worst, stacked_point(fp));
    }
}

inline void check_curv_ricci_paths(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    for (int s = 0; s < env.sc.samples; ++s) {
        const FiberPoint fp = random_fiber_point(env.chart, env.type, rng, -0.8, 0.8);
        const PointContext ctx = point_context_at(env.chart, env.f, fp, 3);
        const BundleCurvature rep = bundle_curvature_report_11(ctx);
        detail::track(r, detail::tensor_gap(rep.ricci_contracted, rep.ricci_direct),
                      stacked_point(fp));
    }
}

inline void check_curv_scalar_paths(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    for (int s = 0; s < env.sc.samples; ++s) {
        const FiberPoint fp = random_fiber_point(env.chart, env.type, rng, -0.8, 0.8);
        const PointContext ctx = point_context_at(env.chart, env.f, fp, 3);
        const double via = scalar_from_ricci(ctx, ricci_from_curvature(bundle_curvature_11(ctx)));
        detail::track(r, std::abs(via - bundle_scalar_direct_11(ctx)), stacked_point(fp));
    }
}

inline void check_curv_const_scalar(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    for (int s = 0; s < env.sc.samples; ++s) {
        const FiberPoint fp = random_fiber_point(env.chart, env.type, rng, -0.8, 0.8);
        const PointContext ctx = point_context_at(env.chart, env.f, fp, 3);
        const double via = scalar_from_ricci(ctx, ricci_from_curvature(bundle_curvature_11(ctx)));
        const double closed =
            constant_curvature_scalar(ctx.geo, env.kappa, ctx.rs.f, fp.t, ctx.rs.fL);
        detail::track(r, std::abs(via - closed), stacked_point(fp));
    }
}

// Two-condition flatness verdict plus the matching curvature magnitude: when
// the verdict says flat the full curvature must vanish, otherwise it must be
// measurably nonzero.
inline void check_curv_flatness(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    r.live = !env.flat.flat;
    if (!r.tol_from_config) r.tol = r.live ? 1e-8 : 1e-10;
    const int pts = std::min(env.sc.samples, 4);
    if (r.live) r.value = std::numeric_limits<double>::infinity();
    for (int s = 0; s < pts; ++s) {
        const FiberPoint fp = random_fiber_point(env.chart, env.type, rng, -0.8, 0.8);
        const PointContext ctx = point_context_at(env.chart, env.f, fp, 3);
        const double mag = bundle_curvature_11(ctx).max_abs();
        if (r.live)
            detail::track_min(r, mag, stacked_point(fp));
        else
            detail::track(r, mag, stacked_point(fp));
    }
}

// ---- structure checks -------------------------------------------------------

inline void check_structures_identities(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    const StructureTensor J = para_structure();
    const StructureTensor psi = golden_structure();
    const StructureTensor psi2 = conjugate_golden_structure();
    const StructureTensor DI = diagonal_identity_structure();
    for (int s = 0; s < env.sc.samples; ++s) {
        const AdaptedField X = random_adapted(env.n, env.N, rng);
        double worst = 0.0;
        auto gap = [&](const AdaptedField& a, const AdaptedField& b) {
            double w = 0.0;
            for (int i = 0; i < env.n; ++i)
                w = std::max(w, std::abs(a.h[static_cast<std::size_t>(i)] -
                                         b.h[static_cast<std::size_t>(i)]));
            for (int K = 0; K < env.N; ++K)
                w = std::max(w, std::abs(a.v[static_cast<std::size_t>(K)] -
                                         b.v[static_cast<std::size_t>(K)]));
            return w;
        };
        worst = std::max(worst, gap(apply_structure(J, apply_structure(J, X)), X));
        worst = std::max(worst, gap(apply_structure(DI, apply_structure(DI, X)), X));
        for (const StructureTensor& g : {psi, psi2}) {
            AdaptedField want = apply_structure(g, X);
            for (int i = 0; i < env.n; ++i)
                want.h[static_cast<std::size_t>(i)] += X.h[static_cast<std::size_t>(i)];
            for (int K = 0; K < env.N; ++K)
                want.v[static_cast<std::size_t>(K)] += X.v[static_cast<std::size_t>(K)];
            worst = std::max(worst, gap(apply_structure(g, apply_structure(g, X)), want));
        }
        detail::track(r, worst, {});
    }
}

inline void check_structures_purity(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    const int pts = std::min(env.sc.samples, 3);
    for (int s = 0; s < pts; ++s) {
        const FiberPoint fp = random_fiber_point(env.chart, env.type, rng, -0.8, 0.8);
        const PointContext ctx = point_context_at(env.chart, env.f, fp, 1);
        double worst = 0.0;
        for (const StructureTensor& S : {para_structure(), golden_structure(),
                                         diagonal_identity_structure(),
                                         conjugate_golden_structure()})
            worst = std::max(worst, purity_check(ctx, S, 20, rng));
        detail::track(r, worst, stacked_point(fp));
    }
}

inline void check_structures_phi_closed_form(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    const int pts = std::min(env.sc.samples, 3);
    for (int s = 0; s < pts; ++s) {
        const FiberPoint fp = random_fiber_point(env.chart, env.type, rng, -0.8, 0.8);
        const PointContext ctx = point_context_at(env.chart, env.f, fp, 2);
        for (int rep = 0; rep < 4; ++rep) {
            const AdaptedField X = random_adapted(env.n, env.N, rng);
            const AdaptedField Y = random_adapted(env.n, env.N, rng);
            const AdaptedField Z = random_adapted(env.n, env.N, rng);
            const double fd = phi_operator(env.chart, env.f, fp, para_structure(),
                                           constant_bundle_field(X), constant_bundle_field(Y),
                                           constant_bundle_field(Z));
            detail::track(r, std::abs(fd - phi_para_closed_form(ctx, X, Y, Z)),
                          stacked_point(fp));
        }
    }
}

// The closed-form obstruction to the vertical-reflection structure being
// parallel: identically zero over a flat base, necessarily live otherwise.
inline void check_structures_parakahler(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    r.live = !env.flat.base_flat;
    if (!r.tol_from_config) r.tol = r.live ? 1e-8 : 1e-10;
    if (r.live) r.value = std::numeric_limits<double>::infinity();
    for (int s = 0; s < env.sc.samples; ++s) {
        const FiberPoint fp = random_fiber_point(env.chart, env.type, rng, -0.8, 0.8);
        const PointContext ctx = point_context_at(env.chart, env.f, fp, 2);
        double local = 0.0;
        for (int rep = 0; rep < 6; ++rep) {
            const AdaptedField X = random_adapted(env.n, env.N, rng);
            const AdaptedField Y = random_adapted(env.n, env.N, rng);
            const AdaptedField Z = random_adapted(env.n, env.N, rng);
            local = std::max(local, std::abs(phi_para_closed_form(ctx, X, Y, Z)));
        }
        if (r.live)
            detail::track_min(r, local, stacked_point(fp));
        else
            detail::track(r, local, stacked_point(fp));
    }
}

inline void check_structures_quasi(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    const int inner = std::min(env.sc.samples, 8);
    r.value = quasi_para_kahler_check(env.chart, env.f, env.type, inner, rng);
}

// ---- metric connection checks -----------------------------------------------

inline void check_mconn_blocks(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    for (int s = 0; s < env.sc.samples; ++s) {
        const FiberPoint fp = random_fiber_point(env.chart, env.type, rng, -0.8, 0.8);
        const PointContext ctx = point_context_at(env.chart, env.f, fp, 2);
        const ConnectionField direct = metric_connection_pq(ctx);
        double worst =
            detail::conn_gap(contorsion_connection(ctx, prescribed_torsion(ctx)), direct.c);
        if (env.is_11) worst = std::max(worst, detail::conn_gap(metric_connection_11(ctx), direct.c));
        detail::track(r, worst, stacked_point(fp));
    }
}

inline void check_mconn_metricity(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    const ConnectionAudit audit = audit_connection(env.chart, env.f, env.type,
                                                   metric_connection_rule(),
                                                   std::min(env.sc.samples, 4), rng);
    r.value = audit.metricity_max;
}

inline void check_mconn_torsion(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    const ConnectionAudit audit = audit_connection(env.chart, env.f, env.type,
                                                   metric_connection_rule(),
                                                   std::min(env.sc.samples, 4), rng);
    r.value = audit.torsion_gap_max;
}

inline void check_mconn_curvature(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    const int pts = std::min(env.sc.samples, 3);
    for (int s = 0; s < pts; ++s) {
        const FiberPoint fp = random_fiber_point(env.chart, env.type, rng, -0.8, 0.8);
        const PointContext ctx = point_context_at(env.chart, env.f, fp, 3);
        const DTensor fd = frame_curvature_fd(env.chart, env.f, fp, metric_connection_rule());
        detail::track(r, detail::tensor_gap(metric_connection_curvature(ctx), fd),
                      stacked_point(fp));
    }
}

inline void check_mconn_scalar(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    for (int s = 0; s < env.sc.samples; ++s) {
        const FiberPoint fp = random_fiber_point(env.chart, env.type, rng, -0.8, 0.8);
        const PointContext ctx = point_context_at(env.chart, env.f, fp, 3);
        const ScalarSplit split = metric_connection_scalar(ctx);
        const double via =
            scalar_from_ricci(ctx, ricci_from_curvature(metric_connection_curvature(ctx)));
        detail::track(r, std::abs(split.total - via), stacked_point(fp));
    }
}

inline void check_mconn_conjugate(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    const int pts = std::min(env.sc.samples, 3);
    for (int s = 0; s < pts; ++s) {
        const FiberPoint fp = random_fiber_point(env.chart, env.type, rng, -0.8, 0.8);
        const PointContext ctx = point_context_at(env.chart, env.f, fp, 2);
        const ConnectionField cj =
            conjugate_connection(metric_connection_pq(ctx), para_structure());
        detail::track(r, metricity_defect(env.chart, env.f, ctx, cj), stacked_point(fp));
    }
}

// ---- geodesic checks ---------------------------------------------------------

inline void check_geo_energy(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    const BundleCurveState st = detail::geo_start(env, rng, 0.3);
    double s_max = 1.0;
    const GeodesicTrace trace = detail::geo_ladder(env, st, levi_civita_rule(), s_max, 2e-3);
    const double e0 = trace.samples.front().energy;
    double drift = 0.0;
    for (const auto& smp : trace.samples)
        drift = std::max(drift, std::abs(smp.energy - e0));
    r.value = drift / std::max(1.0, std::abs(e0));
    r.worst = detail::start_coords(st);
}

inline void check_geo_residual(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    const BundleCurveState st = detail::geo_start(env, rng, 0.3);
    double s_max = 1.0;
    GeodesicTrace trace = detail::geo_ladder(env, st, levi_civita_rule(), s_max, 5e-3);
    r.value = geodesic_residuals(env.chart, env.f, trace, levi_civita_rule()).max_total;
    r.worst = detail::start_coords(st);
}

inline void check_geo_fiber_accel(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    const BundleCurveState st = detail::geo_start(env, rng, 0.3);
    double s_max = 1.0;
    GeodesicTrace trace = detail::geo_ladder(env, st, levi_civita_rule(), s_max, 5e-3);
    r.value = geodesic_residuals(env.chart, env.f, trace, levi_civita_rule()).max_fiber;
    r.worst = detail::start_coords(st);
}

// Horizontal lift of a base geodesic: the residual must equal the rescale
// gradient contraction at every node, which makes constant factors (zero
// prediction) and varying factors (live prediction) one uniform check.
inline void check_geo_hlift(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    const BundleCurveState st = detail::geo_start(env, rng, 0.0);
    double s_max = 1.0;
    GeodesicTrace trace = detail::lift_ladder(env, st, s_max, 5e-3);
    geodesic_residuals(env.chart, env.f, trace, levi_civita_rule());
    for (const auto& smp : trace.samples) {
        const FiberPoint fp{smp.state.x, smp.state.t, env.type};
        const PointContext ctx = point_context_at(env.chart, env.f, fp, 1);
        double pred = 0.0;
        for (int h = 0; h < env.n; ++h) {
            double acc = 0.0;
            for (int l = 0; l < env.n; ++l)
                for (int j = 0; j < env.n; ++j)
                    acc += ctx.rs.W(h, l, j) * smp.state.xdot[static_cast<std::size_t>(l)] *
                           smp.state.xdot[static_cast<std::size_t>(j)];
            pred = std::max(pred, std::abs(acc));
        }
        detail::track(r, std::abs(smp.residual - pred), detail::start_coords(st));
    }
}

inline void check_geo_convergence(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    const BundleCurveState st = detail::geo_start(env, rng, 0.3);
    double s_max = 0.5;
    detail::geo_ladder(env, st, levi_civita_rule(), s_max, 2e-2); // settle the span
    // Coarse steps keep truncation well above the residual stencil's noise
    // floor; scaling them to the span keeps the sample count fixed.
    std::vector<double> res;
    for (int divs : {5, 10, 20}) {
        GeodesicTrace tr = integrate_geodesic(env.chart, env.f, env.type, st, levi_civita_rule(),
                                              s_max, s_max / divs);
        res.push_back(geodesic_residuals(env.chart, env.f, tr, levi_civita_rule()).max_total);
    }
    r.value = std::min(res[0] / res[1], res[1] / res[2]);
    r.worst = detail::start_coords(st);
}

inline void check_geo_oracle(const VerifyEnv& env, Rng& rng, CheckResult& r) {
    InducedOracle oracle(env.chart, env.f, env.type);
    const BundleCurveState st = detail::geo_start(env, rng, 0.3);
    double s_max = 0.5;
    detail::geo_ladder(env, st, levi_civita_rule(), s_max, 1e-3); // settle the span
    // Lock the two grids together: the bundle run takes exactly twice the
    // oracle's steps, so every oracle node lands on a bundle node.
    const long long half = std::max<long long>(1, std::llround(s_max / 2e-3));
    const double bundle_step = s_max / static_cast<double>(2 * half);
    const double oracle_step = s_max / static_cast<double>(half);
    const GeodesicTrace trace =
        integrate_geodesic(env.chart, env.f, env.type, st, levi_civita_rule(), s_max, bundle_step);
    const auto [y0, v0] = induced_state(env.chart, env.type, st);
    const InducedTrace ref = oracle_geodesic(oracle, y0, v0, s_max, oracle_step);
    double worst = 0.0;
    for (std::size_t k = 0; k < ref.s.size() && 2 * k < trace.samples.size(); ++k) {
        const auto& smp = trace.samples[2 * k];
        const auto [y, v] = induced_state(env.chart, env.type, smp.state);
        for (int a = 0; a < env.D; ++a) {
            worst = std::max(worst, std::abs(y[static_cast<std::size_t>(a)] -
                                             ref.y[k][static_cast<std::size_t>(a)]));
            worst = std::max(worst, std::abs(v[static_cast<std::size_t>(a)] -
                                             ref.v[k][static_cast<std::size_t>(a)]));
        }
    }
    r.value = worst;
    r.worst = detail::start_coords(st);
}

// ---- registry ----------------------------------------------------------------

struct CheckSpec {
    const char* id;
    double tol;
    bool live;
    bool (*applicable)(const VerifyEnv&);
    void (*run)(const VerifyEnv&, Rng&, CheckResult&);
};

namespace detail {
inline bool always(const VerifyEnv&) { return true; }
inline bool only_11(const VerifyEnv& env) { return env.is_11; }
inline bool only_oracle(const VerifyEnv& env) { return env.oracle_ok; }
inline bool only_11_oracle(const VerifyEnv& env) { return env.is_11 && env.oracle_ok; }
inline bool only_const_curv(const VerifyEnv& env) { return env.is_11 && env.kappa == env.kappa; }
// A flat base with a constant factor integrates exactly, leaving no
// truncation error for the ratio to measure.
inline bool only_truncating(const VerifyEnv& env) {
    return !(env.flat.base_flat && env.f_constant);
}
} // namespace detail

inline const std::vector<CheckSpec>& check_registry() {
    static const std::vector<CheckSpec> specs = {
        {"base.bianchi", 1e-10, false, detail::always, check_base_bianchi},
        {"base.inverse", 1e-10, false, detail::always, check_base_inverse},
        {"base.metricity", 1e-10, false, detail::always, check_base_metricity},
        {"curv.antisym", 1e-10, false, detail::only_11, check_curv_antisym},
        {"curv.const_scalar", 1e-6, false, detail::only_const_curv, check_curv_const_scalar},
        {"curv.flatness", 1e-10, false, detail::only_11, check_curv_flatness},
        {"curv.oracle", 1e-5, false, detail::only_11_oracle, check_curv_oracle},
        {"curv.ricci_paths", 1e-10, false, detail::only_11, check_curv_ricci_paths},
        {"curv.scalar_paths", 1e-10, false, detail::only_11, check_curv_scalar_paths},
        {"frames.brackets", 1e-10, false, detail::always, check_frames_brackets},
        {"geo.convergence", 8.0, true, detail::only_truncating, check_geo_convergence},
        {"geo.energy", 1e-6, false, detail::always, check_geo_energy},
        {"geo.fiber_accel", 1e-6, false, detail::always, check_geo_fiber_accel},
        {"geo.hlift", 1e-6, false, detail::always, check_geo_hlift},
        {"geo.oracle", 1e-4, false, detail::only_oracle, check_geo_oracle},
        {"geo.residual", 1e-6, false, detail::always, check_geo_residual},
        {"lc.metricity", 1e-5, false, detail::always, check_lc_metricity},
        {"lc.oracle", 1e-5, false, detail::only_oracle, check_lc_oracle},
        {"lc.pq_consistency", 1e-10, false, detail::only_11, check_lc_pq_consistency},
        {"lc.torsionfree", 1e-10, false, detail::always, check_lc_torsionfree},
        {"mconn.blocks", 1e-10, false, detail::always, check_mconn_blocks},
        {"mconn.conjugate", 1e-5, false, detail::always, check_mconn_conjugate},
        {"mconn.curvature", 1e-5, false, detail::always, check_mconn_curvature},
        {"mconn.metricity", 1e-5, false, detail::always, check_mconn_metricity},
        {"mconn.scalar", 1e-6, false, detail::always, check_mconn_scalar},
        {"mconn.torsion", 1e-6, false, detail::always, check_mconn_torsion},
        {"metric.blockdiag", 1e-10, false, detail::always, check_metric_blockdiag},
        {"structures.identities", 1e-12, false, detail::always, check_structures_identities},
        {"structures.parakahler", 1e-10, false, detail::always, check_structures_parakahler},
        {"structures.phi_closed_form", 1e-5, false, detail::always,
         check_structures_phi_closed_form},
        {"structures.purity", 1e-12, false, detail::always, check_structures_purity},
        {"structures.quasi", 1e-5, false, detail::always, check_structures_quasi},
    };
    return specs;
}

// Expands --checks tokens: an exact id, or a group prefix covering every id
// under "<token>.". Unknown tokens are configuration errors.
inline std::vector<std::string> expand_check_filters(const std::vector<std::string>& tokens) {
    std::vector<std::string> ids;
    for (const auto& tok : tokens) {
        bool hit = false;
        for (const auto& spec : check_registry()) {
            const std::string id = spec.id;
            if (id == tok || id.rfind(tok + ".", 0) == 0) {
                ids.push_back(id);
                hit = true;
            }
        }
        if (!hit) throw ConfigError("checks: unknown check id '" + tok + "'");
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

inline VerifyEnv make_verify_env(const Scenario& sc) {
    VerifyEnv env;
    env.sc = sc;
    env.chart = scenario_chart(sc);
    env.f = scenario_rescale(sc);
    env.type = scenario_type(sc);
    env.n = env.chart.n;
    env.N = static_cast<int>(env.type.fiber_dim(env.n));
    env.D = env.n + env.N;
    env.is_11 = env.type.p == 1 && env.type.q == 1;
    env.oracle_ok = env.D <= 12;
    if (sc.preset == "euclidean") env.kappa = 0.0;
    if (sc.preset == "sphere") env.kappa = 1.0 / (sc.radius * sc.radius);
    if (sc.preset == "hyperbolic") env.kappa = -1.0;

    Rng rng(sc.seed ^ detail::fnv1a64("env.probe"));
    std::vector<std::vector<double>> pts;
    const int probe = std::max(8, sc.samples);
    pts.reserve(static_cast<std::size_t>(probe));
    for (int i = 0; i < probe; ++i) pts.push_back(detail::sample_x(env.chart, rng));
    env.flat = flatness_check(env.chart, env.f, pts);
    double dfmax = 0.0;
    for (const auto& x : pts) {
        const Tower ft = env.f.tower_at(x, 1);
        for (int i = 0; i < env.n; ++i) dfmax = std::max(dfmax, std::abs(ft.partial(i)));
    }
    env.f_constant = dfmax < 1e-13;
    return env;
}

struct VerificationReport {
    Scenario scenario;
    bool base_flat = false;
    double obstruction = 0.0;
    std::vector<CheckResult> results;

    int failed() const {
        int k = 0;
        for (const auto& r : results)
            if (!r.pass) ++k;
        return k;
    }
};

// Runs the (optionally filtered) registry on one scenario. Checks the
// scenario cannot express are omitted; every emitted result carries its
// threshold and direction so the report stands alone.
inline VerificationReport run_verification(const Scenario& sc,
                                           const std::vector<std::string>& filters = {}) {
    for (const auto& [key, val] : sc.tol) {
        bool known = false;
        for (const auto& spec : check_registry()) known |= key == spec.id;
        if (!known) throw ConfigError("tol." + key + ": unknown check id");
    }
    const VerifyEnv env = make_verify_env(sc);
    VerificationReport report;
    report.scenario = sc;
    report.base_flat = env.flat.base_flat;
    report.obstruction = env.flat.max_obstruction;
    for (const auto& spec : check_registry()) {
        if (!filters.empty() &&
            std::find(filters.begin(), filters.end(), spec.id) == filters.end())
            continue;
        if (!spec.applicable(env)) continue;
        CheckResult r;
        r.id = spec.id;
        r.live = spec.live;
        auto it = sc.tol.find(r.id);
        r.tol_from_config = it != sc.tol.end();
        r.tol = r.tol_from_config ? it->second : spec.tol;
        Rng rng(sc.seed ^ detail::fnv1a64(spec.id));
        spec.run(env, rng, r);
        r.pass = r.live ? (r.value > r.tol) : (r.value < r.tol);
        report.results.push_back(std::move(r));
    }
    std::sort(report.results.begin(), report.results.end(),
              [](const CheckResult& a, const CheckResult& b) { return a.id < b.id; });
    return report;
}

// ---- report writer -------------------------------------------------------------

namespace detail {

inline std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

inline std::string json_num(double v) {
    char buf[40];
    if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
    std::snprintf(buf, sizeof buf, "%.12e", v);
    return buf;
}

} // namespace detail

inline void write_report(std::ostream& os, const VerificationReport& rep) {
    const Scenario& sc = rep.scenario;
    os << "{\"scenario\":\"" << detail::json_escape(sc.name) << "\",\"base\":\"" << sc.preset
       << "\",\"n\":" << sc.n << ",\"f\":\"" << detail::json_escape(sc.f_expr)
       << "\",\"p\":" << sc.p << ",\"q\":" << sc.q << ",\"seed\":" << sc.seed
       << ",\"samples\":" << sc.samples << ",\"base_flat\":" << (rep.base_flat ? "true" : "false")
       << ",\"obstruction\":" << detail::json_num(rep.obstruction) << "}\n";
    for (const auto& r : rep.results) {
        os << "{\"check\":\"" << r.id << "\",\"value\":" << detail::json_num(r.value)
           << ",\"tol\":" << detail::json_num(r.tol) << ",\"mode\":\""
           << (r.live ? "above" : "below") << "\",\"pass\":" << (r.pass ? "true" : "false")
           << ",\"worst\":[";
        for (std::size_t k = 0; k < r.worst.size(); ++k)
            os << (k ? "," : "") << detail::json_num(r.worst[k]);
        os << "]}\n";
    }
    os << "{\"summary\":\"" << detail::json_escape(sc.name)
       << "\",\"checks\":" << rep.results.size() << ",\"failed\":" << rep.failed()
       << ",\"pass\":" << (rep.failed() == 0 ? "true" : "false") << "}\n";
}

} // namespace tbundle
