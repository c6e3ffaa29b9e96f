#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "tensorbundle/bundle_curvature.hpp"
#include "tensorbundle/oracle.hpp"
#include "tensorbundle/rng.hpp"

using namespace tbundle;

namespace {

std::vector<double> sample_point(const ManifoldChart& chart, Rng& rng) {
    std::vector<double> x;
    for (const auto& b : chart.box) x.push_back(rng.uniform(b.first, b.second));
    return x;
}

ManifoldChart bumpy_chart() {
    return custom_chart(2, {{"1 + x2^2", "x1*x2/2"}, {"x1*x2/2", "1 + x1^2"}},
                        {{-0.8, 0.8}, {-0.8, 0.8}});
}

FiberPoint endo_point(std::vector<double> x, std::vector<double> t) {
    FiberPoint fp;
    fp.x = std::move(x);
    fp.t = std::move(t);
    fp.type = TensorType{1, 1};
    return fp;
}

struct Scenario {
    const char* label;
    ManifoldChart chart;
    RescaleFunction f;
    std::vector<double> t; // empty = draw randomly per point
};

std::vector<Scenario> curvature_scenarios(Rng& rng) {
    std::vector<Scenario> out;
    out.push_back({"sphere f=1 t=0", sphere_chart(1.0), RescaleFunction::one(), {0, 0, 0, 0}});
    out.push_back({"sphere f=1 t=id", sphere_chart(1.0), RescaleFunction::one(), {1, 0, 0, 1}});
    out.push_back({"sphere f=1 t=rand", sphere_chart(1.0), RescaleFunction::one(), {}});
    out.push_back({"sphere f=exp(x1/5)", sphere_chart(1.0), RescaleFunction::from("exp(x1/5)"), {}});
    out.push_back({"flat f=1+x1^2/10", euclidean_chart(2), RescaleFunction::from("1 + x1^2/10"), {}});
    out.push_back({"bumpy f=exp(x1/5)", bumpy_chart(), RescaleFunction::from("exp(x1/5)"), {}});
    (void)rng;
    return out;
}

} // namespace

TEST_CASE("closed-form bundle curvature matches the induced-coordinate oracle") {
    Rng rng(0x5eedULL);
    for (auto& sc : curvature_scenarios(rng)) {
        INFO(sc.label);
        InducedOracle oracle(sc.chart, sc.f, TensorType{1, 1});
        for (int rep = 0; rep < 3; ++rep) {
            auto t = sc.t.empty() ? rng.uniform_vec(4, -0.9, 0.9) : sc.t;
            FiberPoint fp = endo_point(sample_point(sc.chart, rng), t);
            PointContext ctx = point_context_at(sc.chart, sc.f, fp, 3);
            DTensor blocks = bundle_curvature_11(ctx);
            DTensor ref = oracle.adapted_riemann(fp);
            // Oracle truncation grows near the pole margins (amplified by the
            // csc^2 entries); interior points sit at ~1e-9, margin points at
            // ~2e-6. Tighter cross-checks live in the frame-difference and
            // dual-route tests below.
            for (const auto& d : curvature_family_deviations(blocks, ref, 2)) {
                INFO(d.family);
                REQUIRE(d.max_dev < 1e-5);
            }
        }
    }
}

TEST_CASE("bundle curvature is antisymmetric in the two direction slots") {
    Rng rng(0xa11ceULL);
    for (auto& sc : curvature_scenarios(rng)) {
        INFO(sc.label);
        auto t = sc.t.empty() ? rng.uniform_vec(4, -0.9, 0.9) : sc.t;
        FiberPoint fp = endo_point(sample_point(sc.chart, rng), t);
        PointContext ctx = point_context_at(sc.chart, sc.f, fp, 3);
        DTensor blocks = bundle_curvature_11(ctx);
        const int D = ctx.dim();
        double defect = 0.0;
        double vvv = 0.0;
        for (int a = 0; a < D; ++a)
            for (int b = 0; b < D; ++b)
                for (int c = 0; c < D; ++c)
                    for (int d = 0; d < D; ++d) {
                        defect = std::max(defect, std::fabs(blocks(a, b, c, d) + blocks(b, a, c, d)));
                        if (a >= 2 && b >= 2 && c >= 2) vvv = std::max(vvv, std::fabs(blocks(a, b, c, d)));
                    }
        REQUIRE(defect < 1e-12);
        // Three vertical arguments give exactly zero, not merely small.
        REQUIRE(vvv == 0.0);
    }
}

TEST_CASE("frame-difference curvature reproduces the closed form") {
    Rng rng(0xfd5ULL);
    ManifoldChart sphere = sphere_chart(1.0);
    RescaleFunction f = RescaleFunction::from("exp(x1/5)");
    FiberPoint fp = endo_point(sample_point(sphere, rng), rng.uniform_vec(4, -0.9, 0.9));
    PointContext ctx = point_context_at(sphere, f, fp, 3);
    DTensor blocks = bundle_curvature_11(ctx);
    DTensor fd = frame_curvature_fd(sphere, f, fp,
                                    [](const PointContext& c) { return levi_civita_11(c); });
    double dev = 0.0;
    const int D = ctx.dim();
    for (int a = 0; a < D; ++a)
        for (int b = 0; b < D; ++b)
            for (int c = 0; c < D; ++c)
                for (int d = 0; d < D; ++d)
                    dev = std::max(dev, std::fabs(blocks(a, b, c, d) - fd(a, b, c, d)));
    REQUIRE(dev < 1e-8);
}

TEST_CASE("Ricci by contraction equals the directly assembled Ricci") {
    Rng rng(0x41cc1ULL);
    for (auto& sc : curvature_scenarios(rng)) {
        INFO(sc.label);
        auto t = sc.t.empty() ? rng.uniform_vec(4, -0.9, 0.9) : sc.t;
        FiberPoint fp = endo_point(sample_point(sc.chart, rng), t);
        PointContext ctx = point_context_at(sc.chart, sc.f, fp, 3);
        DTensor ric_c = ricci_from_curvature(bundle_curvature_11(ctx));
        DTensor ric_d = bundle_ricci_direct_11(ctx);
        double dev = 0.0;
        const int D = ctx.dim();
        for (int a = 0; a < D; ++a)
            for (int b = 0; b < D; ++b) dev = std::max(dev, std::fabs(ric_c(a, b) - ric_d(a, b)));
        REQUIRE(dev < 1e-12);
    }
}

TEST_CASE("scalar curvature agrees between contraction and the closed-form trace") {
    Rng rng(0x5ca1aULL);
    for (auto& sc : curvature_scenarios(rng)) {
        INFO(sc.label);
        auto t = sc.t.empty() ? rng.uniform_vec(4, -0.9, 0.9) : sc.t;
        FiberPoint fp = endo_point(sample_point(sc.chart, rng), t);
        PointContext ctx = point_context_at(sc.chart, sc.f, fp, 3);
        double sc_c = scalar_from_ricci(ctx, ricci_from_curvature(bundle_curvature_11(ctx)));
        double sc_d = bundle_scalar_direct_11(ctx);
        REQUIRE(std::fabs(sc_c - sc_d) < 1e-12);
    }
}

TEST_CASE("unit sphere with unit rescale has bundle scalar 2") {
    Rng rng(0x2222ULL);
    ManifoldChart sphere = sphere_chart(1.0);
    RescaleFunction fone = RescaleFunction::one();
    for (auto t : {std::vector<double>{0, 0, 0, 0}, std::vector<double>{1, 0, 0, 1}}) {
        FiberPoint fp = endo_point(sample_point(sphere, rng), t);
        PointContext ctx = point_context_at(sphere, fone, fp, 3);
        double sc = scalar_from_ricci(ctx, ricci_from_curvature(bundle_curvature_11(ctx)));
        REQUIRE(std::fabs(sc - 2.0) < 1e-12);
        REQUIRE(std::fabs(bundle_scalar_direct_11(ctx) - 2.0) < 1e-12);
        REQUIRE(std::fabs(constant_curvature_scalar(ctx.geo, 1.0, 1.0, fp.t, ctx.rs.fL) - 2.0) < 1e-12);
    }
}

TEST_CASE("constant-curvature scalar formula matches the contraction route") {
    Rng rng(0xccf0ULL);

    SECTION("unit sphere, constant rescale 2") {
        ManifoldChart sphere = sphere_chart(1.0);
        RescaleFunction f = RescaleFunction::from("2");
        for (int rep = 0; rep < 3; ++rep) {
            FiberPoint fp = endo_point(sample_point(sphere, rng), rng.uniform_vec(4, -1.0, 1.0));
            PointContext ctx = point_context_at(sphere, f, fp, 3);
            double sc = scalar_from_ricci(ctx, ricci_from_curvature(bundle_curvature_11(ctx)));
            double cc = constant_curvature_scalar(ctx.geo, 1.0, 2.0, fp.t, ctx.rs.fL);
            REQUIRE(std::fabs(sc - cc) < 1e-12);
        }
    }

    SECTION("hyperbolic 3-space, constant rescale") {
        ManifoldChart hyp = hyperbolic_chart(3);
        RescaleFunction f = RescaleFunction::from("1.7");
        FiberPoint fp = endo_point(sample_point(hyp, rng), rng.uniform_vec(9, -1.0, 1.0));
        PointContext ctx = point_context_at(hyp, f, fp, 3);
        double sc = scalar_from_ricci(ctx, ricci_from_curvature(bundle_curvature_11(ctx)));
        double cc = constant_curvature_scalar(ctx.geo, -1.0, 1.7, fp.t, ctx.rs.fL);
        REQUIRE(std::fabs(sc - cc) < 1e-10);
    }
}

TEST_CASE("flatness verdict tracks base curvature and the rescale obstruction") {
    Rng rng(0xf1a7ULL);
    ManifoldChart euclid = euclidean_chart(2);
    auto points = [&](const ManifoldChart& chart, int count) {
        std::vector<std::vector<double>> out;
        for (int k = 0; k < count; ++k) out.push_back(sample_point(chart, rng));
        return out;
    };

    SECTION("flat base, constant rescale: flat") {
        auto rep = flatness_check(euclid, RescaleFunction::one(), points(euclid, 20));
        REQUIRE(rep.base_flat);
        REQUIRE(rep.obstruction_zero);
        REQUIRE(rep.flat);
        REQUIRE(rep.max_base_curvature < 1e-14);
        REQUIRE(rep.max_obstruction < 1e-14);
    }

    SECTION("flat base, exponential rescale: still flat") {
        // With f = exp(x1) the correction in the x1 leg is proportional to the
        // identity and has constant coefficient, so the obstruction vanishes
        // identically; the full bundle curvature is zero as well.
        auto rep = flatness_check(euclid, RescaleFunction::from("exp(x1)"), points(euclid, 20));
        REQUIRE(rep.base_flat);
        REQUIRE(rep.obstruction_zero);
        REQUIRE(rep.flat);

        FiberPoint fp = endo_point({0.3, -0.5}, rng.uniform_vec(4, -0.9, 0.9));
        PointContext ctx = point_context_at(euclid, RescaleFunction::from("exp(x1)"), fp, 3);
        REQUIRE(bundle_curvature_11(ctx).max_abs() == 0.0);
        InducedOracle oracle(euclid, RescaleFunction::from("exp(x1)"), TensorType{1, 1});
        REQUIRE(oracle.adapted_riemann(fp).max_abs() < 1e-7);
    }

    SECTION("flat base, quadratic rescale: obstruction breaks flatness") {
        auto pts = points(euclid, 20);
        pts.push_back({0.0, 0.0});
        auto rep = flatness_check(euclid, RescaleFunction::from("1 + x1^2/10"), pts);
        REQUIRE(rep.base_flat);
        REQUIRE_FALSE(rep.obstruction_zero);
        REQUIRE_FALSE(rep.flat);
        REQUIRE(rep.max_obstruction > 0.05);
    }

    SECTION("sphere: base curvature breaks flatness regardless of rescale") {
        ManifoldChart sphere = sphere_chart(1.0);
        auto rep = flatness_check(sphere, RescaleFunction::one(), points(sphere, 10));
        REQUIRE_FALSE(rep.base_flat);
        REQUIRE_FALSE(rep.flat);
    }
}

TEST_CASE("bundle curvature rejects unsupported inputs") {
    ManifoldChart euclid = euclidean_chart(2);
    RescaleFunction fone = RescaleFunction::one();

    FiberPoint wrong;
    wrong.x = {0.1, 0.2};
    wrong.t = {0.5, -0.5};
    wrong.type = TensorType{0, 1};
    PointContext bad_type = point_context_at(euclid, fone, wrong, 3);
    REQUIRE_THROWS_AS(bundle_curvature_11(bad_type), BadParameter);
    REQUIRE_THROWS_AS(bundle_ricci_direct_11(bad_type), BadParameter);

    FiberPoint fp = endo_point({0.1, 0.2}, {1, 0, 0, 1});
    PointContext shallow = point_context_at(euclid, fone, fp, 2);
    REQUIRE_THROWS_AS(bundle_curvature_11(shallow), BadParameter);
}
