#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "tensorbundle/bundle_metric.hpp"
#include "tensorbundle/oracle.hpp"
#include "tensorbundle/rng.hpp"

using namespace tbundle;

namespace {

std::vector<double> sample_point(const ManifoldChart& chart, Rng& rng) {
    std::vector<double> x(static_cast<std::size_t>(chart.n));
    for (int i = 0; i < chart.n; ++i)
        x[static_cast<std::size_t>(i)] = rng.uniform(chart.box[static_cast<std::size_t>(i)].first,
                                                     chart.box[static_cast<std::size_t>(i)].second);
    return x;
}

ManifoldChart bumpy_chart() {
    return custom_chart(2,
                        {{"1 + x2^2", "x1*x2/2"},
                         {"x1*x2/2", "1 + x1^2"}},
                        {{-0.8, 0.8}, {-0.8, 0.8}});
}

} // namespace

TEST_CASE("rescale tensor on flat space with f = exp(x1) at the origin") {
    auto chart = euclidean_chart(2);
    auto geo = geometry_at(chart, {0.0, 0.0});
    auto rs = rescale_data_at(geo, RescaleFunction::from("exp(x1)"));

    CHECK(rs.f == Catch::Approx(1.0));
    CHECK(rs.df[0] == Catch::Approx(1.0));
    CHECK(rs.df[1] == Catch::Approx(0.0).margin(1e-15));

    // A^h_{ji} = f_j d^h_i + f_i d^h_j - f^h g_ji
    CHECK(rs.A(0, 0, 0) == Catch::Approx(1.0));
    CHECK(rs.A(0, 1, 1) == Catch::Approx(-1.0));
    CHECK(rs.A(1, 0, 1) == Catch::Approx(1.0));
    CHECK(rs.A(1, 1, 0) == Catch::Approx(1.0));
    CHECK(std::abs(rs.A(0, 0, 1)) < 1e-15);
    CHECK(std::abs(rs.A(0, 1, 0)) < 1e-15);
    CHECK(std::abs(rs.A(1, 0, 0)) < 1e-15);
    CHECK(std::abs(rs.A(1, 1, 1)) < 1e-15);
    CHECK(rs.W(0, 0, 0) == Catch::Approx(0.5));

    // f = exp(x1) makes W constant on flat space, so the scalar term is a
    // pure quadratic that cancels identically.
    CHECK(rs.nablaW.max_abs() < 1e-14);
    CHECK(std::abs(rs.fL) < 1e-14);
}

TEST_CASE("quadratic rescale on flat space has the hand-computed scalar term") {
    auto chart = euclidean_chart(2);
    auto geo = geometry_at(chart, {0.0, 0.0});
    auto rs = rescale_data_at(geo, RescaleFunction::from("1 + x1^2/10"));
    CHECK(rs.f == Catch::Approx(1.0));
    CHECK(rs.A.max_abs() < 1e-15); // df = 0 at the origin
    CHECK(rs.fL == Catch::Approx(-0.2).margin(1e-14));
}

TEST_CASE("rescale tensor symmetry and the constant-f degeneracy") {
    Rng rng(211);
    auto chart = bumpy_chart();
    for (int trial = 0; trial < 5; ++trial) {
        auto geo = geometry_at(chart, sample_point(chart, rng));
        auto rs = rescale_data_at(geo, RescaleFunction::from("exp(x1/2)*(1 + x2^2/4)"));
        const int n = geo.n;
        for (int h = 0; h < n; ++h)
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i) {
                    CHECK(rs.A(h, j, i) == Catch::Approx(rs.A(h, i, j)).margin(1e-13));
                    CHECK(rs.W(h, j, i) == Catch::Approx(rs.A(h, j, i) / (2.0 * rs.f)).margin(1e-13));
                }

        auto flat_rs = rescale_data_at(geo, RescaleFunction::from("3"));
        CHECK(flat_rs.A.max_abs() == 0.0);
        CHECK(flat_rs.W.max_abs() == 0.0);
        CHECK(flat_rs.Bcomb.max_abs() == 0.0);
        CHECK(flat_rs.fL == 0.0);
    }
}

TEST_CASE("covariant derivative of the rescale shift matches finite differences") {
    auto chart = bumpy_chart();
    auto f = RescaleFunction::from("exp(x1/2)*(1 + x2^2/4)");
    Rng rng(223);
    const double h = 1e-3;
    for (int trial = 0; trial < 3; ++trial) {
        auto x = sample_point(chart, rng);
        auto geo = geometry_at(chart, x);
        auto rs = rescale_data_at(geo, f);
        const int n = geo.n;

        auto w_at = [&](const std::vector<double>& xs) {
            auto g = geometry_at(chart, xs, 1);
            return rescale_data_at(g, f).W;
        };
        double worst = 0.0;
        for (int m = 0; m < n; ++m) {
            auto shifted = [&](double d) {
                auto xs = x;
                xs[static_cast<std::size_t>(m)] += d;
                return w_at(xs);
            };
            auto w1p = shifted(h), w1m = shifted(-h), w2p = shifted(2 * h), w2m = shifted(-2 * h);
            for (int r = 0; r < n; ++r)
                for (int l = 0; l < n; ++l)
                    for (int j = 0; j < n; ++j) {
                        const double fd =
                            (8.0 * (w1p(r, l, j) - w1m(r, l, j)) - (w2p(r, l, j) - w2m(r, l, j))) /
                            (12.0 * h);
                        double cov = fd;
                        for (int a = 0; a < n; ++a)
                            cov += geo.gamma(r, m, a) * rs.W(a, l, j) -
                                   geo.gamma(a, m, l) * rs.W(r, a, j) -
                                   geo.gamma(a, m, j) * rs.W(r, l, a);
                        worst = std::max(worst, std::abs(cov - rs.nablaW(m, r, l, j)));
                    }
        }
        CHECK(worst < 1e-8);
    }
}

TEST_CASE("vertical metric block inverts by swapping the factor kinds") {
    Rng rng(227);
    auto chart = sphere_chart(1.3);
    std::vector<TensorType> types = {{1, 1}, {2, 1}, {0, 2}, {2, 0}};
    for (auto& type : types) {
        auto geo = geometry_at(chart, sample_point(chart, rng), 1);
        auto rs = rescale_data_at(geo, RescaleFunction::one());
        auto bm = bundle_metric_at(geo, rs, type);
        auto inv = invert(bm.vv);
        for (int I = 0; I < bm.N; ++I)
            for (int J = 0; J < bm.N; ++J)
                CHECK(bm.vv_inv[static_cast<std::size_t>(I)][static_cast<std::size_t>(J)] ==
                      Catch::Approx(inv[static_cast<std::size_t>(I)][static_cast<std::size_t>(J)]).margin(1e-11));
    }
}

TEST_CASE("bundle metric is block diagonal and positive definite") {
    Rng rng(229);
    auto chart = sphere_chart(1.0);
    auto f = RescaleFunction::from("exp(x1/5)");
    const TensorType type{1, 1};
    for (int trial = 0; trial < 3; ++trial) {
        auto x = sample_point(chart, rng);
        auto t = rng.uniform_vec(4, -1.0, 1.0);
        auto ctx = point_context_at(chart, f, FiberPoint{x, t, type});
        const int D = ctx.dim();

        Matrix full = make_matrix(D, D);
        for (int a = 0; a < D; ++a)
            for (int b = 0; b < D; ++b) full[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = ctx.metric.at(a, b);
        for (int i = 0; i < ctx.n(); ++i)
            for (int K = 0; K < ctx.N(); ++K) {
                CHECK(ctx.metric.at(i, ctx.n() + K) == 0.0);
                CHECK(ctx.metric.at(ctx.n() + K, i) == 0.0);
            }
        Matrix chol;
        CHECK(cholesky(full, chol));

        Matrix inv = invert(full);
        for (int a = 0; a < D; ++a)
            for (int b = 0; b < D; ++b)
                CHECK(ctx.metric.inv_at(a, b) ==
                      Catch::Approx(inv[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]).margin(1e-11));

        AdaptedField u{rng.uniform_vec(ctx.n(), -1.0, 1.0), rng.uniform_vec(ctx.N(), -1.0, 1.0)};
        AdaptedField w{rng.uniform_vec(ctx.n(), -1.0, 1.0), rng.uniform_vec(ctx.N(), -1.0, 1.0)};
        double direct = 0.0;
        auto uf = u.flat(), wf = w.flat();
        for (int a = 0; a < D; ++a)
            for (int b = 0; b < D; ++b)
                direct += full[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] *
                          uf[static_cast<std::size_t>(a)] * wf[static_cast<std::size_t>(b)];
        CHECK(ctx.metric.pair(u, w) == Catch::Approx(direct).margin(1e-12));
    }
}

TEST_CASE("induced-coordinate metric pulls back to the adapted blocks") {
    Rng rng(233);
    auto chart = sphere_chart(1.0);
    auto f = RescaleFunction::from("exp(x1/5)");
    const TensorType type{1, 1};
    InducedOracle oracle(chart, f, type);
    for (int trial = 0; trial < 3; ++trial) {
        auto x = sample_point(chart, rng);
        auto t = rng.uniform_vec(4, -1.0, 1.0);
        auto ctx = point_context_at(chart, f, FiberPoint{x, t, type});

        auto gt = oracle.metric(InducedOracle::stack(ctx.fp));
        auto M = transition_matrix(ctx.frame);
        const int D = ctx.dim();
        // M^T g~ M must reproduce the block-diagonal adapted metric.
        for (int a = 0; a < D; ++a)
            for (int b = 0; b < D; ++b) {
                double acc = 0.0;
                for (int i = 0; i < D; ++i)
                    for (int j = 0; j < D; ++j)
                        acc += M[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] *
                               gt[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                               M[static_cast<std::size_t>(j)][static_cast<std::size_t>(b)];
                CHECK(acc == Catch::Approx(ctx.metric.at(a, b)).margin(1e-11));
            }
    }
}
