#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <numbers>
#include <random>

#include "hflag/lp_frame.hpp"

using namespace hflag;

TEST_CASE("frame spec") {
    FrameSpec f;
    f.j_min = -1;
    f.j_max = 1;
    f.voices_s = 2;
    CHECK(f.s_values().size() == 5);
    CHECK(f.s_values().front() == 2.0);
    CHECK(f.weight() == doctest::Approx(std::numbers::ln2 * std::numbers::ln2 / 8));
    FrameSpec bad;
    bad.M = 1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = FrameSpec{};
    bad.k_min = bad.k_max;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK(FrameSpec{}.id() != f.id());
}

TEST_CASE("psi1 evaluators agree") {
    const Psi1 psi(4, 1);
    const KernelEval k = build_psi1(4);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> N(0, 0.7);
    const int zero[2] = {0, 0};
    for (int i = 0; i < 20; ++i) {
        const std::vector<double> p{N(rng), N(rng), N(rng)};
        CHECK(k(p) == doctest::Approx(psi.value(p)).epsilon(1e-13));
        CHECK(psi.derivative(zero, 0, p) == doctest::Approx(psi.value(p)).epsilon(1e-10).scale(1e-3));
        // line evaluation
        double line[4];
        k.eval_line(std::span(p).first(2), p[2], 0.1, line);
        std::vector<double> q = p;
        q[2] += 0.3;
        CHECK(line[3] == doctest::Approx(k(q)).epsilon(1e-12).scale(1e-3));
    }
    // d/dx by central differences
    const int bx[2] = {1, 0};
    const double h = 1e-5;
    const std::vector<double> p{0.3, -0.4, 0.2}, a{0.3 + h, -0.4, 0.2}, b{0.3 - h, -0.4, 0.2};
    CHECK(psi.derivative(bx, 0, p) == doctest::Approx((psi.value(a) - psi.value(b)) / (2 * h)).epsilon(1e-6));
}

TEST_CASE("psi1 Fourier transform by quadrature") {
    const Psi1 psi(2, 1);
    const double xi[3] = {0.8, -0.3, 0.5};
    const int G = 64;
    const double L = 6, h = 2 * L / G;
    double re = 0;
    for (int a = 0; a < G; ++a)
        for (int b = 0; b < G; ++b)
            for (int c = 0; c < G; ++c) {
                const std::vector<double> p{-L + (a + 0.5) * h, -L + (b + 0.5) * h, -L + (c + 0.5) * h};
                re += psi.value(p) * std::cos(xi[0] * p[0] + xi[1] * p[1] + xi[2] * p[2]);
            }
    CHECK(re * h * h * h == doctest::Approx(psi.fourier(xi)).epsilon(1e-8));
}

TEST_CASE("psi2 closed forms") {
    const Psi2 q = make_psi2(5, 1.0);
    for (double v : {0.0, 0.7, 2.5, -4.0})
        CHECK(q.value(v) == doctest::Approx(psi2_inverse_fourier(q, v)).epsilon(1e-9).scale(1e-6));
    // peak of the transform
    CHECK(q.fourier(1.0) > q.fourier(0.98));
    CHECK(q.fourier(1.0) > q.fourier(1.02));
    CHECK_THROWS_AS(make_psi2(0), std::invalid_argument);
}

TEST_CASE("admissibility") {
    const Psi2 q = make_psi2();
    for (double eta : {0.3, 1.0, 7.0}) {
        CHECK(admissibility_constant([&](double e) { return q.fourier(e); }, eta) == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(admissibility_constant([&](double e) { return q.fourier(e); }, -eta) ==
              doctest::Approx(1.0).epsilon(1e-6));
    }
    // Mexican hat: int_0^inf t^4 eta^4 e^{-2 t^2 eta^2} dt/t = 1/8
    auto hat = [](double e) { return e * e * std::exp(-e * e); };
    CHECK(admissibility_constant(hat, 0.6) == doctest::Approx(0.125).epsilon(1e-8));
    CHECK_THROWS(admissibility_constant(hat, 0.0));

    // psi1 along pure z directions
    const Psi1 psi(4, 1);
    for (double r : {0.5, 2.0}) {
        auto ph = [&](double e) {
            const double xi[3] = {e * r, 0, 0};
            return psi.fourier(xi);
        };
        CHECK(admissibility_constant(ph, 1.0) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("vanishing moments") {
    const auto m1 = psi1_moments(Psi1(4, 1), 8);
    for (int k = 0; k < 8; ++k) CHECK(m1[k] <= 1e-10);
    CHECK(m1[8] > 1.0);
    const auto m2 = psi2_moments(make_psi2(), 10);
    for (int k = 0; k < 10; ++k) CHECK(m2[k] <= 1e-10);
    CHECK(m2[10] > 1.0);

    const FrameSpec frame;
    const double z[2] = {0.3, 0.1};
    const auto fm = flag_moments(frame, 1.0, 0.5, z, 8);
    for (int k = 0; k < 8; ++k) CHECK(fm[k] <= 1e-7);
    // z-moments alone do not vanish
    CHECK(std::abs(partial_z_moment(frame, 1, 1, 0.0)) > 1e-4);
}

TEST_CASE("psi_st closed form against quadrature") {
    const FrameSpec frame;
    for (auto [s, t] : {std::pair{1.0, 1.0}, {0.5, 2.0}, {1.4, 0.3}}) {
        const KernelEval a = psi_st(frame, s, t), b = psi_st_quadrature(frame, s, t);
        for (const auto& p : {std::vector<double>{0.1, 0.2, 0.3}, std::vector<double>{-0.5 * s, 0.1, 1.7 * t}}) {
            CHECK(a(p) == doctest::Approx(b(p)).epsilon(1e-6).scale(1e-6 * std::abs(a(std::vector<double>{0, 0, 0}))));
        }
        double line[5];
        const double z[2] = {0.2 * s, -0.1 * s};
        a.eval_line(z, -0.4, 0.2, line);
        CHECK(line[4] == doctest::Approx(a(std::vector<double>{z[0], z[1], 0.4})).epsilon(1e-10));
    }
    CHECK_THROWS(psi_st(frame, 0.0, 1.0));
}

TEST_CASE("projection of a product") {
    // F((z,w), v) = g(z) e^{-w^2} e^{-v^2}; pi F = g(z) int e^{-(u-v)^2 - v^2} dv = g sqrt(pi/2) e^{-u^2/2}
    const ProductFn F = [](std::span<const double> p, double v) {
        return std::exp(-p[0] * p[0] - p[1] * p[1]) * std::exp(-p[2] * p[2] - v * v);
    };
    const FuncEval pf = projection_pi(F, 1, {8.0, 1.0 / 32});
    for (double u : {0.0, 0.5, -1.3}) {
        const std::vector<double> p{0.2, 0.1, u};
        const double want = std::exp(-0.05) * std::sqrt(std::numbers::pi / 2) * std::exp(-u * u / 2);
        CHECK(pf(p) == doctest::Approx(want).epsilon(1e-10));
    }
    std::vector<std::string> warnings;
    projection_pi([](std::span<const double>, double v) { return 1.0 / (1 + v * v); }, 1, {4.0, 0.125}, &warnings);
    CHECK(!warnings.empty());
}

TEST_CASE("transform and reconstruct on a small grid") {
    CorpusParams cp;
    cp.sigma = 0.5;
    const Grid g = make_grid(1, {2, 2, 4}, {16, 16, 32});
    const SampledField f = sample(corpus("gaussian_bump", cp), g);
    FrameSpec frame;
    frame.voices_s = frame.voices_t = 1;
    frame.j_min = -1;
    frame.j_max = 1;
    frame.k_min = -1;
    frame.k_max = 1;
    const TransformOptions opt{.threads = 1};
    const Coefficients c = lp_transform(f, frame, opt);
    CHECK(c.items.size() == 9);
    // z-spacing 0.25, so every s here clears the 1.2 h guard
    for (const auto& it : c.items) CHECK(linf_norm(it.field) > 0);

    int seen = 0;
    lp_transform_each(f, frame, [&](const ScaleCoefficient& sc) {
        CHECK(sc.field.values == c.items[seen].field.values);
        ++seen;
    }, opt);
    CHECK(seen == 9);

    FrameSpec wide = frame;
    wide.j_min = wide.k_min = -2;
    wide.j_max = wide.k_max = 2;
    const auto sweep = reconstruction_sweep(f, {frame, wide}, f, opt);
    REQUIRE(sweep.size() == 2);
    CHECK(sweep[1].rel_error < sweep[0].rel_error);
    const Reconstruction r = reconstruct(c, frame, &f, opt);
    CHECK(r.rel_error == doctest::Approx(sweep[0].rel_error).epsilon(1e-9));
    CHECK(r.kappa > 0);

    // scales below the resolution guard are zeroed with a warning
    FrameSpec fine = frame;
    fine.j_max = 3;
    const Coefficients cf = lp_transform(f, fine, opt);
    CHECK(!cf.warnings.empty());
    CHECK(linf_norm(cf.items.back().field) == 0.0);
}
