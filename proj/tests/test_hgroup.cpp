#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <random>

#include "hflag/hgroup.hpp"

using namespace hflag;

TEST_CASE("group law by hand") {
    const HPoint c = mul(HPoint::of(1, 0, 0.5), HPoint::of(0, 1, -0.25));
    CHECK(c.x(0) == 1.0);
    CHECK(c.y(0) == 1.0);
    CHECK(c.t == doctest::Approx(-1.75).epsilon(1e-15));

    const HPoint a = HPoint::of(0.3, -1.2, 2.5);
    CHECK(mul(a, HPoint::zero(1)) == a);
    CHECK(mul(a, inv(a)) == HPoint::zero(1));  // exact
}

TEST_CASE("inverse") {
    const HPoint a = HPoint::of(1, 2, 3);
    CHECK(inv(a) == HPoint::of(-1, -2, -3));
    CHECK(inv(inv(a)) == a);
    const HPoint b = HPoint::of(-0.7, 0.4, 1.1);
    const HPoint l = mul(inv(b), inv(a)), r = inv(mul(a, b));
    CHECK(l.t == doctest::Approx(r.t).epsilon(1e-14));
    CHECK(l.x(0) == doctest::Approx(r.x(0)));
}

TEST_CASE("homogeneous norm and dilations") {
    CHECK(hnorm(HPoint::of(3, 4, -7)) == doctest::Approx(std::sqrt(32.0)).epsilon(1e-15));
    CHECK(hnorm(HPoint::zero(1)) == 0.0);
    const HPoint d = dilate(2, HPoint::of(1, 1, 3));
    CHECK(d == HPoint::of(2, 2, 12));
    CHECK(hnorm(d) == doctest::Approx(2 * std::sqrt(5.0)).epsilon(1e-14));
    CHECK(dilate(1, HPoint::of(0.2, 0.1, -4)) == HPoint::of(0.2, 0.1, -4));
    CHECK_THROWS_AS(dilate(0.0, d), std::invalid_argument);
    CHECK_THROWS_AS(dilate(-1.0, d), std::invalid_argument);

    const HPoint a = HPoint::of(0.5, -0.25, 1.0), b = HPoint::of(-1.5, 2.0, 0.125);
    const HPoint l = dilate(1.7, mul(a, b)), r = mul(dilate(1.7, a), dilate(1.7, b));
    CHECK(l.t == doctest::Approx(r.t).epsilon(1e-14));
}

TEST_CASE("non-commutative") {
    const HPoint a = HPoint::of(1, 0, 0), b = HPoint::of(0, 1, 0);
    CHECK(mul(a, b).t == -2.0);
    CHECK(mul(b, a).t == 2.0);
}

TEST_CASE("dimension mismatch is an error") {
    const HPoint a = HPoint::of(1, 0, 0);
    const HPoint b(std::vector<double>{1, 0, 0, 1}, 0.0);
    CHECK_THROWS(mul(a, b));
}

TEST_CASE("flat coordinates agree with HPoint") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> N;
    for (int i = 0; i < 100; ++i) {
        const HPoint a = HPoint::of(N(rng), N(rng), N(rng)), b = HPoint::of(N(rng), N(rng), N(rng));
        std::vector<double> out(3);
        mul_into(a.coords(), b.coords(), out);
        CHECK(HPoint::from_coords(out) == mul(a, b));
        CHECK(hnorm_coords(a.coords()) == hnorm(a));
    }
}

TEST_CASE("quasi-triangle estimate") {
    const double g = quasi_triangle_gamma(20000, 5);
    CHECK(g > 1.0);
    CHECK(g <= 2.0);
    CHECK(quasi_triangle_gamma(20000, 5) == g);  // seeded
}

TEST_CASE("invariant suite and its negative control") {
    for (const auto& r : group_invariant_suite(5000, 11)) CHECK_MESSAGE(r.pass, r.name);
    bool any_fail = false;
    for (const auto& r : group_invariant_suite(5000, 11, 1, true)) any_fail = any_fail || !r.pass;
    CHECK(any_fail);
    CHECK(to_json_array(HPoint::of(1, 2, 3)) == "[1,2,3]");
}
