#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "hflag/lipschitz.hpp"

using namespace hflag;

namespace {

FuncEval fn(PointFn f) {
    FuncEval e;
    e.name = "test";
    e.value = std::move(f);
    return e;
}

IncrementPlan small_plan() {
    IncrementPlan p = IncrementPlan::for_box({2, 2, 4});
    p.base_per_axis = 3;
    p.j_min = 1;
    p.j_max = 4;
    p.k_min = 1;
    p.k_max = 4;
    p.directions = 8;
    return p;
}

}  // namespace

TEST_CASE("exponent split") {
    const auto a = FlagExponent::make(0.5, 0.25);
    CHECK(a.m1 == 0);
    CHECK(a.r2 == 0.25);
    CHECK(a.diff_case() == DiffCase::d2_d1);
    CHECK(FlagExponent::make(1, 0.5).diff_case() == DiffCase::d2_d1z);
    CHECK(FlagExponent::make(0.5, 1).diff_case() == DiffCase::d2z_d1);
    CHECK(FlagExponent::make(1, 1).diff_case() == DiffCase::d2z_d1z);
    const auto b = FlagExponent::make(1.5, 2.0);
    CHECK(b.m1 == 1);
    CHECK(b.r1 == 0.5);
    CHECK(b.m2 == 1);
    CHECK(b.zygmund2);
    CHECK_THROWS_AS(FlagExponent::make(0, 1), std::invalid_argument);
    CHECK(to_string(DiffCase::d2z_d1) != to_string(DiffCase::d2_d1z));
}

TEST_CASE("single differences") {
    const auto f = fn([](std::span<const double> p) { return p[0] * p[0] + 3 * p[2]; });
    const HPoint uv = HPoint::of(0.5, 0.25, 0.125);
    const std::vector<double> x{0.2, -0.1, 0.7};
    const HPoint X = HPoint::from_coords(x);
    const auto y = mul(X, inv(uv)).coords();
    CHECK(delta1(f, uv)(x) == doctest::Approx(f(y) - f(x)).epsilon(1e-15));
    CHECK(delta2(f, 0.3)(x) == doctest::Approx(-0.9).epsilon(1e-14));
    CHECK(std::abs(delta2z(f, 0.3)(x)) <= 1e-13);
    // second symmetric difference kills the x-linear part and doubles the quadratic one
    const auto lin = fn([](std::span<const double> p) { return 2 * p[0] - p[1]; });
    CHECK(std::abs(delta1z(lin, uv)(x)) <= 1e-13);
    CHECK(delta1z(fn([](std::span<const double> p) { return p[0] * p[0]; }), uv)(x) ==
          doctest::Approx(2 * 0.25).epsilon(1e-14));
    CHECK(increment_norm(HPoint::of(3, 4, -11)) == doctest::Approx(6.0));
}

TEST_CASE("mixed differences annihilate the right functions") {
    const HPoint uv = HPoint::of(0.3, -0.2, 0.1);
    const std::vector<double> x{0.4, 0.2, -0.5};
    const auto zonly = fn([](std::span<const double> p) { return std::sin(p[0]) * std::cos(2 * p[1]); });
    const auto uonly = fn([](std::span<const double> p) { return std::sin(p[2]); });
    for (auto [a1, a2] : {std::pair{0.5, 0.5}, {0.5, 1.0}, {1.0, 0.5}, {1.0, 1.0}}) {
        const auto e = FlagExponent::make(a1, a2);
        CAPTURE(e.id());
        CHECK(std::abs(mixed_difference(zonly, e, uv, 0.2)(x)) <= 1e-13);
    }
    // Delta2 Delta1 of a function of u alone: the translate is f(r + const(z)) so Delta2 does not vanish,
    // but a linear function of u is annihilated
    const auto tlin = fn([](std::span<const double> p) { return 1.5 * p[2] - 2.0; });
    CHECK(std::abs(mixed_difference(tlin, FlagExponent::make(0.5, 0.5), uv, 0.2)(x)) <= 1e-13);
    CHECK(std::abs(mixed_difference(uonly, FlagExponent::make(0.5, 0.5), uv, 0.2)(x)) > 1e-4);

    // the printed case-3 display does not annihilate functions of z alone
    const auto e3 = FlagExponent::make(0.5, 1.0);
    CHECK(std::abs(mixed_difference(zonly, e3, uv, 0.2, Case3Form::as_printed)(x)) > 1e-4);

    // pointwise version matches
    const auto g = fn([](std::span<const double> p) { return std::exp(-p[0] * p[0] - p[2] * p[2]); });
    for (auto c : {DiffCase::d2_d1, DiffCase::d2_d1z, DiffCase::d2z_d1, DiffCase::d2z_d1z}) {
        const FlagExponent e = FlagExponent::make(c == DiffCase::d2_d1z || c == DiffCase::d2z_d1z ? 1 : 0.5,
                                                  c == DiffCase::d2z_d1 || c == DiffCase::d2z_d1z ? 1 : 0.5);
        CHECK(mixed_difference_at(g.value, c, x, uv, 0.2) == mixed_difference(g, e, uv, 0.2)(x));
    }
}

TEST_CASE("derivatives are required above order one") {
    const auto f = fn([](std::span<const double> p) { return p[0]; });
    CHECK_THROWS(mixed_difference(f, FlagExponent::make(1.5, 0.5), HPoint::of(0.1, 0, 0), 0.1));
    const auto w = corpus("weierstrass_flag");
    CHECK_NOTHROW(mixed_difference(w, FlagExponent::make(1.5, 0.5), HPoint::of(0.1, 0, 0), 0.1));
}

TEST_CASE("increment plan") {
    const IncrementPlan p = IncrementPlan::for_box({2, 2, 4});
    CHECK(p.half_box == std::vector<double>{1, 1, 2});
    CHECK(IncrementPlan::for_box({}).half_box == p.half_box);
    CHECK_THROWS(IncrementPlan::for_box({1, 1}));
    const IncrementPlan s = small_plan();
    CHECK(s.base_points().size() == 27);
    for (const auto& b : s.base_points()) CHECK(std::abs(b[2]) <= 2.0);
    const auto inc = s.increments();
    CHECK(!inc.empty());
    for (const auto& uv : inc) {
        const double r = increment_norm(uv);
        CHECK(r <= 0.5 + 1e-12);
        CHECK(r >= 1.0 / 16 - 1e-12);
    }
    CHECK(s.w_values().size() == 8);
    CHECK(s.increments() == inc);  // seeded
    const IncrementPlan d = s.doubled();
    CHECK(d.increments().size() > inc.size());
    CHECK(d.id() != s.id());
    IncrementPlan bad = s;
    bad.directions = 0;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("difference norm") {
    const IncrementPlan plan = small_plan();
    const auto e = FlagExponent::make(0.5, 0.5);
    CHECK(lip_norm_diff(fn([](std::span<const double>) { return 0.0; }), e, plan, 1).value == 0.0);
    CHECK(lip_norm_diff(fn([](std::span<const double> p) { return p[0] + p[2]; }), e, plan, 1).value <= 1e-12);
    const auto g = corpus("gaussian_bump");
    const DiffNorm a = lip_norm_diff(g, e, plan, 1), b = lip_norm_diff(g, e, plan, 3);
    CHECK(a.value > 0);
    CHECK(a.value == b.value);
    // the witness reproduces the value
    const HPoint& uv = a.witness.uv;
    const double r = std::abs(mixed_difference_at(g.value, e.diff_case(), a.witness.point, uv, a.witness.w));
    CHECK(r / (std::pow(increment_norm(uv), 0.5) * std::pow(std::abs(a.witness.w), 0.5)) ==
          doctest::Approx(a.value).epsilon(1e-12));
}

TEST_CASE("LP sup table and slopes") {
    FrameSpec frame;
    frame.voices_s = frame.voices_t = 1;
    frame.j_min = -1;
    frame.j_max = 1;
    frame.k_min = -1;
    frame.k_max = 1;
    const Grid grid = make_grid(1, {2, 2, 4}, {16, 16, 32});
    const auto f = sample(corpus("gaussian_bump"), grid);
    const TransformOptions opt{.threads = 1};
    const LpSupTable t = lp_sup_table(f, frame, {}, opt);
    CHECK(t.sup.size() == 9);
    for (double v : t.sup) CHECK(v > 0);
    const auto both = lp_sup_tables(f, frame, {{0.5, 0.5}, {0.25, 0.25}}, opt);
    CHECK(both[0].sup == t.sup);
    for (std::size_t i = 0; i < t.sup.size(); ++i) CHECK(both[1].sup[i] <= t.sup[i]);

    const auto e = FlagExponent::make(0.5, 0.5);
    const LpNorm n = lip_norm_lp(t, e);
    double best = 0;
    for (std::size_t is = 0; is < t.s.size(); ++is)
        for (std::size_t it = 0; it < t.t.size(); ++it)
            best = std::max(best, t.at(is, it) / (std::sqrt(t.s[is]) * std::sqrt(t.t[it])));
    CHECK(n.value == doctest::Approx(best).epsilon(1e-14));

    // exact power law is recovered by the fit
    LpSupTable syn = t;
    for (std::size_t is = 0; is < syn.s.size(); ++is)
        for (std::size_t it = 0; it < syn.t.size(); ++it)
            syn.sup[is * syn.t.size() + it] = 3 * std::pow(syn.s[is], 0.4) * std::pow(syn.t[it], 0.7);
    const SlopeFit fit = fit_lp_slopes(syn, 0.1, 10, 0.1, 10);
    CHECK(fit.used == 9);
    CHECK(fit.a1 == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(fit.a2 == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(fit.rms <= 1e-12);
}

TEST_CASE("equivalence report") {
    FrameSpec frame;
    frame.voices_s = frame.voices_t = 1;
    frame.j_min = -1;
    frame.j_max = 1;
    frame.k_min = -1;
    frame.k_max = 1;
    const Grid grid = make_grid(1, {2, 2, 4}, {16, 16, 32});
    const auto e = FlagExponent::make(0.5, 0.5);
    const TransformOptions opt{.threads = 1};
    const NormReport z = equivalence_report(fn([](std::span<const double>) { return 0.0; }), e, frame, grid,
                                            small_plan(), opt);
    CHECK(z.degenerate);
    const NormReport r = equivalence_report(corpus("gaussian_bump"), e, frame, grid, small_plan(), opt);
    CHECK(!r.degenerate);
    CHECK(r.ratio == doctest::Approx(r.lp_norm / r.diff_norm));
    CHECK(r.to_json().find("\"ratio\"") != std::string::npos);
    CHECK(NormReport::csv_header().find("ratio") != std::string::npos);
}
