#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "tensorbundle/expr.hpp"
#include "tensorbundle/tower.hpp"

using namespace tbundle;

namespace {

// Finite-difference oracle, written independently of the tower arithmetic.
// Fourth-order central stencils, applied recursively for mixed partials.
double fd_partial(const std::function<double(std::vector<double>)>& f,
                  std::vector<double> x, std::vector<int> alpha, double h = 1e-2) {
    int v = -1;
    for (std::size_t k = 0; k < alpha.size(); ++k)
        if (alpha[k] > 0) { v = static_cast<int>(k); break; }
    if (v < 0) return f(x);
    --alpha[static_cast<std::size_t>(v)];
    auto g = [&](double xv) {
        std::vector<double> y = x;
        y[static_cast<std::size_t>(v)] = xv;
        return fd_partial(f, y, alpha, h);
    };
    const double x0 = x[static_cast<std::size_t>(v)];
    return (8.0 * (g(x0 + h) - g(x0 - h)) - (g(x0 + 2 * h) - g(x0 - 2 * h))) / (12.0 * h);
}

double tower_deriv(const std::string& src, const std::vector<double>& x,
                   const std::vector<int>& alpha) {
    int order = 0;
    for (int a : alpha) order += a;
    return eval_tower(*parse(src), x, order).deriv(alpha);
}

} // namespace

TEST_CASE("grammar accepts the documented forms") {
    CHECK(eval(*parse("1 + 2*3"), {}) == 7.0);
    CHECK(eval(*parse("(1 + 2)*3"), {}) == 9.0);
    CHECK(eval(*parse("2^3"), {}) == 8.0);
    CHECK_THROWS_AS(parse("2^3^1"), SyntaxError); // one exponent per factor
    CHECK(eval(*parse("6/3/2"), {}) == 1.0); // left associative
    CHECK(eval(*parse("1 - 2 - 3"), {}) == -4.0);
    CHECK(eval(*parse("x1*x2 + x2^2"), {2.0, 3.0}) == 15.0);
    CHECK(eval(*parse("sin(x1)^2 + cos(x1)^2"), {0.73}) == Catch::Approx(1.0).margin(1e-15));
    CHECK(eval(*parse("sqrt(x1^2)"), {2.5}) == Catch::Approx(2.5));
    CHECK(eval(*parse("log(exp(x1))"), {1.25}) == Catch::Approx(1.25));
    CHECK(eval(*parse("  1.5e2  "), {}) == 150.0);
    CHECK(eval(*parse("x1^-2"), {2.0}) == Catch::Approx(0.25));
    CHECK(eval(*parse("1/x3^2"), {0.0, 0.0, 2.0}) == Catch::Approx(0.25));
}

TEST_CASE("syntax errors carry the byte offset where parsing stopped") {
    auto offset_of = [](const std::string& src) -> std::size_t {
        try {
            parse(src);
        } catch (const SyntaxError& e) {
            return e.offset;
        }
        return static_cast<std::size_t>(-1);
    };
    CHECK(offset_of("x1 +") == 4);
    CHECK(offset_of("(x1") == 3);
    CHECK(offset_of("x1^x2") == 3);
    CHECK(offset_of("sin x1") == 4); // '(' expected after the function name
    CHECK(offset_of("1 2") == 2);    // trailing input
    CHECK(offset_of("*x1") == 0);
}

TEST_CASE("unknown identifiers are rejected with their name") {
    CHECK_THROWS_AS(parse("y1"), UnknownIdentifier);
    CHECK_THROWS_AS(parse("tan(x1)"), UnknownIdentifier);
    CHECK_THROWS_AS(parse("x0"), UnknownIdentifier);
    CHECK_THROWS_AS(parse("xx1"), UnknownIdentifier);
    // Valid at parse time, but out of range for a 2-coordinate evaluation.
    CHECK_THROWS_AS(eval(*parse("x5"), {1.0, 2.0}), UnknownIdentifier);
}

TEST_CASE("domain errors surface at evaluation") {
    CHECK_THROWS_AS(eval(*parse("log(0 - x1)"), {1.0}), DomainError);
    CHECK_THROWS_AS(eval(*parse("sqrt(0 - x1)"), {1.0}), DomainError);
    CHECK_THROWS_AS(eval(*parse("1/(x1 - x1)"), {1.0}), DomainError);
    CHECK_THROWS_AS(eval_tower(*parse("1/(x1 - x1)"), {1.0}, 2), DomainError);
    CHECK_THROWS_AS(eval_tower(*parse("log(0 - x1)"), {1.0}, 2), DomainError);
}

TEST_CASE("printed expressions reparse to the identical tree") {
    const char* sources[] = {
        "x1 + x2*x3",
        "(x1 + x2)*x3",
        "x1 - (x2 - x3)",
        "x1/x2/x3",
        "x1/(x2*x3)",
        "sin(x1)^2*cos(x2) + exp(x1*x2) - sqrt(x1 + 3)",
        "1/x3^2",
        "x1^-3 + 2.5e-1",
        "log(x1 + x2^2)/(1 + x1^2)",
    };
    for (const char* src : sources) {
        ExprPtr e = parse(src);
        std::string printed = print(*e);
        ExprPtr e2 = parse(printed);
        INFO(src << "  ->  " << printed);
        CHECK(tree_equal(*e, *e2));
    }
}

TEST_CASE("towers match analytic derivatives of elementary functions") {
    // sin(x1)*exp(x2): every mixed partial is sin-or-cos times exp.
    const std::vector<double> x = {0.6, -0.3};
    Tower t = eval_tower(*parse("sin(x1)*exp(x2)"), x, 4);
    const double s = std::sin(x[0]), c = std::cos(x[0]), e = std::exp(x[1]);
    auto ds = [&](int a) { // d^a/dx1^a of sin
        switch (a % 4) {
            case 0: return s;
            case 1: return c;
            case 2: return -s;
            default: return -c;
        }
    };
    for (int a = 0; a <= 4; ++a)
        for (int b = 0; a + b <= 4; ++b) {
            CHECK(t.deriv({a, b}) == Catch::Approx(ds(a) * e).margin(1e-12));
        }

    // 1/(x1+2): d^k = (-1)^k k! / (x1+2)^{k+1}
    Tower r = eval_tower(*parse("1/(x1 + 2)"), {0.5}, 4);
    double fact = 1.0;
    for (int k = 0; k <= 4; ++k) {
        if (k > 0) fact *= k;
        const double expect = ((k % 2) ? -1.0 : 1.0) * fact / std::pow(2.5, k + 1);
        CHECK(r.deriv({k}) == Catch::Approx(expect).epsilon(1e-13));
    }

    // exp(x1) at the origin: all derivatives are exactly 1.
    Tower ex = eval_tower(*parse("exp(x1)"), {0.0}, 4);
    for (int k = 0; k <= 4; ++k) CHECK(ex.deriv({k}) == Catch::Approx(1.0).epsilon(1e-14));

    // sqrt and log towers against closed forms.
    Tower sq = eval_tower(*parse("sqrt(x1)"), {1.7}, 3);
    CHECK(sq.deriv({1}) == Catch::Approx(0.5 / std::sqrt(1.7)).epsilon(1e-13));
    CHECK(sq.deriv({2}) == Catch::Approx(-0.25 * std::pow(1.7, -1.5)).epsilon(1e-13));
    CHECK(sq.deriv({3}) == Catch::Approx(0.375 * std::pow(1.7, -2.5)).epsilon(1e-13));
    Tower lg = eval_tower(*parse("log(x1)"), {0.8}, 3);
    CHECK(lg.deriv({1}) == Catch::Approx(1.0 / 0.8).epsilon(1e-13));
    CHECK(lg.deriv({2}) == Catch::Approx(-1.0 / 0.64).epsilon(1e-13));
    CHECK(lg.deriv({3}) == Catch::Approx(2.0 / 0.512).epsilon(1e-13));
}

TEST_CASE("towers match the finite-difference oracle on composite expressions") {
    struct Case {
        const char* src;
        std::vector<double> x;
    };
    const Case cases[] = {
        {"(x1 + x2*x1)^3/(2 + sin(x1))", {0.4, -0.7}},
        {"exp(x1*x2)*log(3 + x1)", {0.3, 0.9}},
        {"sqrt(1 + x1^2 + x2^2)", {-0.5, 1.1}},
        {"sin(x1*cos(x2))", {1.0, 0.5}},
        {"x1^2*x2 - x2/x1 + 4", {1.3, 0.7}},
        {"1/x2^2", {0.3, 1.4}},
    };
    for (const auto& tc : cases) {
        ExprPtr e = parse(tc.src);
        auto f = [&](std::vector<double> y) { return eval(*e, y); };
        for (int a = 0; a <= 2; ++a)
            for (int b = 0; a + b <= 2; ++b) {
                const double fd = fd_partial(f, tc.x, {a, b});
                const double tw = tower_deriv(tc.src, tc.x, {a, b});
                INFO(tc.src << " d^(" << a << "," << b << ")");
                CHECK(tw == Catch::Approx(fd).margin(1e-6).epsilon(1e-6));
            }
        // Third order, looser: the nested stencil loses accuracy.
        const double fd3 = fd_partial(f, tc.x, {2, 1}, 2e-2);
        const double tw3 = tower_deriv(tc.src, tc.x, {2, 1});
        CHECK(tw3 == Catch::Approx(fd3).margin(2e-4).epsilon(2e-4));
    }
}

TEST_CASE("mixed partials are stored symmetrically") {
    Tower t = eval_tower(*parse("exp(x1*x2)*sin(x2*x3)"), {0.2, 0.4, 1.1}, 3);
    CHECK(t.partial(0, 1) == t.partial(1, 0));
    CHECK(t.partial(0, 1, 2) == t.partial(2, 0, 1));
    CHECK(t.partial(1, 2) == t.partial(2, 1));
}

TEST_CASE("tower order caps at four") {
    CHECK_THROWS_AS(eval_tower(*parse("x1"), {1.0}, 5), BadParameter);
    CHECK_THROWS_AS(eval_tower(*parse("x1"), {1.0}, -1), BadParameter);
    // Asking a tower for more derivatives than it carries is a shape error.
    Tower t = eval_tower(*parse("x1*x2"), {1.0, 2.0}, 2);
    CHECK_THROWS_AS(t.deriv({2, 1}), ShapeMismatch);
}

TEST_CASE("division tower handles nontrivial denominators") {
    // f = sin(x1)/cos(x1) = tan; f' = 1 + tan^2, f'' = 2 tan (1 + tan^2)
    const double x0 = 0.35;
    Tower t = eval_tower(*parse("sin(x1)/cos(x1)"), {x0}, 3);
    const double tn = std::tan(x0);
    CHECK(t.value() == Catch::Approx(tn).epsilon(1e-14));
    CHECK(t.deriv({1}) == Catch::Approx(1 + tn * tn).epsilon(1e-13));
    CHECK(t.deriv({2}) == Catch::Approx(2 * tn * (1 + tn * tn)).epsilon(1e-13));
}
