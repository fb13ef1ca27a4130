#include "sope/error.hpp"
#include "sope/polynomial.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace sope;

namespace {

Polynomial random_poly(std::mt19937& rng, int deg) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<double> c(static_cast<std::size_t>(deg) + 1);
    for (double& v : c) v = u(rng);
    return Polynomial(std::move(c));
}

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

} // namespace

TEST_CASE("eval examples") {
    CHECK(eval(Polynomial{1, 2, 1}, 1.0) == 4.0);
    CHECK(eval(Polynomial{}, 7.0) == 0.0);
    CHECK(eval(Polynomial{0.5, -0.25, 0.125}, 2.0) == doctest::Approx(0.5));
}

TEST_CASE("zero polynomial representation") {
    Polynomial z{0.0, 0.0};
    CHECK(z.is_zero());
    CHECK(z.degree() == -1);
    CHECK(Polynomial{1, 0, 0}.degree() == 0);
    CHECK(Polynomial{1, 1e-300}.degree() == 1);
}

TEST_CASE("shift examples") {
    auto q = shift(Polynomial{0, 0, 1}, 1.0);
    CHECK(q == Polynomial{1, 2, 1});
    CHECK(shift(Polynomial{3.5}, 9.0) == Polynomial{3.5});
    auto r = shift(Polynomial{1, 3, 3, 1}, -1.0);
    CHECK(r == Polynomial{0, 0, 0, 1});
}

TEST_CASE("arithmetic examples") {
    CHECK(mul(Polynomial{0, 1}, Polynomial{0, 1}) == Polynomial{0, 0, 1});
    CHECK(scale_arg(Polynomial{1, 1}, 2.0) == Polynomial{1, 2});
    Polynomial p{0.3, -1.2, 4.0, 2.5};
    auto back = derivative(antiderivative(p, 0.0));
    REQUIRE(back.degree() == p.degree());
    for (int j = 0; j <= p.degree(); ++j) CHECK(back.coeff(j) == doctest::Approx(p.coeff(j)));
    CHECK(mul(Polynomial{1, 2}, Polynomial{}).is_zero());
}

TEST_CASE("interval validation") {
    CHECK_THROWS_AS(Interval(1.0, 1.0), Error);
    CHECK_THROWS_AS(Interval(0.0, INFINITY), Error);
    Interval iv(0.0, 2.0);
    CHECK(iv.mid() == 1.0);
    CHECK(iv.contains(2.0));
}

TEST_CASE("property: shift matches evaluation at shifted point") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int trial = 0; trial < 200; ++trial) {
        auto p = random_poly(rng, 1 + trial % 9);
        const double th = u(rng), t = u(rng);
        CHECK(rel_close(eval(shift(p, th), t), eval(p, t + th), 1e-12 * 50));
    }
}

TEST_CASE("property: shift composes") {
    std::mt19937 rng(12);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        auto p = random_poly(rng, 1 + trial % 8);
        const double a = u(rng), b = u(rng);
        auto lhs = shift(shift(p, a), b);
        auto rhs = shift(p, a + b);
        double scale = 0.0;
        for (double c : rhs.coeffs()) scale = std::max(scale, std::abs(c));
        for (int j = 0; j <= rhs.degree(); ++j) CHECK(std::abs(lhs.coeff(j) - rhs.coeff(j)) <= 1e-10 * std::max(1.0, scale));
    }
}

TEST_CASE("property: ring axioms and multiplicative evaluation") {
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        auto p = random_poly(rng, trial % 5), q = random_poly(rng, 1 + trial % 4), r = random_poly(rng, 2);
        const double t = u(rng);
        CHECK(rel_close(eval((p * q) * r, t), eval(p * (q * r), t), 1e-12 * 10));
        CHECK(rel_close(eval(p * (q + r), t), eval(p * q + p * r, t), 1e-12 * 10));
        CHECK(rel_close(eval(p * q, t), eval(p, t) * eval(q, t), 1e-12 * 10));
        CHECK((p * q).degree() == p.degree() + q.degree());
    }
}

TEST_CASE("to_frame re-centers") {
    Polynomial p{1, -2, 0.5};
    auto q = to_frame(p, {3.0, 1.0});
    CHECK(q.frame().center == 3.0);
    CHECK(q.at_time(4.2) == doctest::Approx(p(4.2)));
}

TEST_CASE("real roots") {
    auto p = Polynomial{-1, 0, 1} * Polynomial{-3, 1} * Polynomial{1, 0, 1};
    auto r = real_roots(p);
    REQUIRE(r.size() == 3);
    CHECK(r[0] == doctest::Approx(-1.0));
    CHECK(r[1] == doctest::Approx(1.0));
    CHECK(r[2] == doctest::Approx(3.0));
}
