#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <numbers>
#include <random>

#include "hflag/convolution.hpp"
#include "hflag/hgroup.hpp"
#include "hflag/lp_frame.hpp"

using namespace hflag;

namespace {

SampledField random_field(const Grid& g, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N;
    SampledField f(g);
    for (auto& v : f.values) v = N(rng);
    return f;
}

KernelEval gauss_kernel(double a = 1.0, double b = 1.0, double shift_u = 0.0) {
    KernelEval k;
    k.name = "gauss";
    k.value = [=](std::span<const double> p) {
        return std::exp(-a * (p[0] * p[0] + p[1] * p[1]) - b * (p[2] - shift_u) * (p[2] - shift_u));
    };
    return k;
}

double rel_l2(const SampledField& a, const SampledField& b) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / den);
}

double rel_linf(const SampledField& a, const SampledField& b) { return linf_distance(a, b) / linf_norm(b); }

}  // namespace

TEST_CASE("zero kernel and zero field") {
    const Grid g = make_grid(1, {1, 1, 2}, {8, 8, 8});
    KernelEval zero;
    zero.value = [](std::span<const double>) { return 0.0; };
    const SampledField f = random_field(g, 1);
    CHECK(linf_norm(gconv(f, zero)) == 0.0);
    CHECK(linf_norm(gconv_fft_t(SampledField(g), gauss_kernel())) == 0.0);
    CHECK(linf_norm(gconv_ff(SampledField(g), f)) == 0.0);
}

TEST_CASE("sifting on a one-point mass") {
    const Grid g = make_grid(1, {1, 1, 2}, {8, 8, 8});
    SampledField f(g);
    const std::size_t i0 = 3 + 8 * (5 + 8 * 2);
    f[i0] = 1.0 / g.cell_volume();
    const KernelEval k = gauss_kernel(0.7, 1.3, 0.2);
    const SampledField out = gconv(f, k, {.threads = 1});
    const auto y0 = HPoint::from_coords(g.point(i0));
    for (std::size_t i = 0; i < g.total(); i += 13) {
        const auto x = HPoint::from_coords(g.point(i));
        CHECK(out[i] == doctest::Approx(k(mul(inv(y0), x).coords())).epsilon(1e-13));
    }
}

TEST_CASE("fft-t path equals the naive sum") {
    const Grid g = make_grid(1, {1, 1, 2}, {16, 16, 16});
    const SampledField f = random_field(g, 4);
    const KernelEval k = gauss_kernel(2.0, 0.8, 0.3);
    const SampledField a = gconv(f, k, {.threads = 1});
    CHECK(rel_linf(gconv_fft_t(f, k, {.threads = 1}), a) <= 1e-10);
    // bit-reproducible across worker counts
    CHECK(gconv_fft_t(f, k, {.threads = 1}).values == gconv_fft_t(f, k, {.threads = 4}).values);
    CHECK(gconv(f, k, {.threads = 1}).values == gconv(f, k, {.threads = 3}).values);
}

TEST_CASE("parity: even kernel and even field give an even output") {
    // (x, y, t) -> (x, -y, -t) flips the twist, so it commutes with the convolution
    const Grid g = make_grid(1, {1, 1, 2}, {8, 8, 16});
    SampledField f(g);
    for (std::size_t i = 0; i < g.total(); ++i) {
        const auto p = g.point(i);
        f[i] = std::exp(-p[0] * p[0] - 2 * p[1] * p[1]) * std::cos(p[2]) * (1 + 0.5 * p[0]);
    }
    const SampledField out = gconv_fft_t(f, gauss_kernel(), {.threads = 1});
    const int G0 = g.counts[0], G1 = g.counts[1], G2 = g.counts[2];
    double dev = 0;
    for (int c = 0; c < G2; ++c)
        for (int b = 0; b < G1; ++b)
            for (int a = 0; a < G0; ++a) {
                const std::size_t i = (static_cast<std::size_t>(a) * G1 + b) * G2 + c;  // t fastest
                const std::size_t j = (static_cast<std::size_t>(a) * G1 + (G1 - 1 - b)) * G2 + (G2 - 1 - c);
                dev = std::max(dev, std::abs(out[i] - out[j]));
            }
    CHECK(linf_norm(out) > 0);
    CHECK(dev <= 1e-10 * linf_norm(out));
}

TEST_CASE("linearity") {
    const Grid g = make_grid(1, {1, 1, 2}, {8, 8, 8});
    const SampledField f = random_field(g, 5), h = random_field(g, 6);
    SampledField c(g);
    for (std::size_t i = 0; i < g.total(); ++i) c[i] = 2.5 * f[i] - 0.75 * h[i];
    const KernelEval k = gauss_kernel(1.5, 0.5);
    const SampledField a = gconv(f, k), b = gconv(h, k), ab = gconv(c, k);
    double dev = 0;
    for (std::size_t i = 0; i < g.total(); ++i) dev = std::max(dev, std::abs(ab[i] - (2.5 * a[i] - 0.75 * b[i])));
    CHECK(dev <= 1e-12 * linf_norm(ab));
}

TEST_CASE("psi_{1,1} on a gaussian bump against a 2x oracle") {
    const FrameSpec frame;
    const KernelEval k = psi_st(frame, 1.0, 1.0);
    const Grid g = make_grid(1, {2, 2, 4}, {16, 16, 32});
    const Grid fine = refine(g, 2);
    const auto f = corpus("gaussian_bump");
    const SampledField coarse = gconv_fft_t(sample(f, g), k, {.threads = 1});
    const std::vector<std::vector<double>> pts = [&] {
        std::vector<std::vector<double>> p;
        for (std::size_t i = 0; i < g.total(); i += 97) p.push_back(g.point(i));
        return p;
    }();
    const auto oracle = gconv_at(sample(f, fine), k, pts, {.threads = 1});
    double num = 0, den = 0;
    for (std::size_t m = 0; m < pts.size(); ++m) {
        const double c = coarse[m * 97];
        num += (c - oracle[m]) * (c - oracle[m]);
        den += oracle[m] * oracle[m];
    }
    CHECK(std::sqrt(num / den) <= 0.02);
}

TEST_CASE("field-field convolution") {
    const Grid g = make_grid(1, {2, 2, 4}, {16, 16, 32});
    const KernelEval k = gauss_kernel(2.0, 2.0);
    const SampledField f = sample(corpus("gaussian_bump"), g);
    const SampledField ks = sample(FuncEval{.name = "k", .value = k.value}, g);
    CHECK(rel_l2(gconv_ff(f, ks, {.threads = 1}), gconv(f, k, {.threads = 1})) <= 0.05);

    const Grid s = make_grid(1, {1, 1, 2}, {8, 8, 8});
    const SampledField a = random_field(s, 7), b = random_field(s, 8);
    CHECK(rel_l2(gconv_ff(a, b, {.threads = 1}), gconv_ff_naive(a, b, {.threads = 1})) <= 1e-12);
    // non-abelian: the two orders differ
    CHECK(rel_l2(gconv_ff(a, b), gconv_ff(b, a)) > 1e-3);
}

TEST_CASE("partial convolution in u") {
    // t-box wide enough for psi2_t: the sampled path integrates over the box only
    const Grid g = make_grid(1, {1, 1, 32}, {8, 8, 256});
    const Kernel1D psi2 = build_psi2();

    auto coarse = psi2;
    coarse.window = 40;
    coarse.step = 1.0 / 64;
    const auto cf = pconv2(corpus("constant"), coarse);
    CHECK(std::abs(cf(std::vector<double>{0.1, 0.2, 0.3})) <= 1e-10);

    // cos(omega u) -> |psi2_hat(t omega)| cos(omega u) for the even psi2
    const double omega = 1.3, t = 0.8;
    auto k = scale_kernel2(psi2, t);
    k.window = 16;
    k.step = 1.0 / 128;
    FuncEval c;
    c.name = "cos";
    c.value = [=](std::span<const double> p) { return std::cos(omega * p[2]); };
    const auto out = pconv2(c, k);
    const double amp = std::abs(psi2.fourier(t * omega));
    for (double u : {0.0, 0.4, 1.1})
        CHECK(out(std::vector<double>{0, 0, u}) == doctest::Approx(amp * std::cos(omega * u)).epsilon(0.01));

    // twice with k, h equals once with k *_R h
    Kernel1D ka, kb;
    ka.value = [](double v) { return std::exp(-v * v); };
    kb.value = [](double v) { return std::exp(-2 * v * v); };
    ka.window = kb.window = 8;
    ka.step = kb.step = 1.0 / 64;
    Kernel1D kab;
    kab.value = [](double v) { return std::sqrt(std::numbers::pi / 3) * std::exp(-2 * v * v / 3); };
    kab.window = 8;
    kab.step = 1.0 / 64;
    FuncEval bump;
    bump.value = [](std::span<const double> p) { return std::exp(-p[2] * p[2] / 4) * (1 + p[0]); };
    const auto twice = pconv2(pconv2(bump, ka), kb);
    const auto once = pconv2(bump, kab);
    for (double u : {-1.0, 0.0, 0.7}) {
        const std::vector<double> p{0.2, 0, u};
        CHECK(twice(p) == doctest::Approx(once(p)).epsilon(1e-8));
    }

    // window coverage warning
    std::vector<std::string> warnings;
    auto narrow = ka;
    narrow.window = 1.0;
    pconv2(bump, narrow, &warnings);
    CHECK(!warnings.empty());

    // sampled path agrees with the analytic one
    const SampledField sf = pconv2(sample(c, g), k, {.threads = 1});
    const std::size_t mid = (3 * 8 + 4) * 256 + 136;
    CHECK(sf[mid] == doctest::Approx(out(g.point(mid))).epsilon(0.02));
}

TEST_CASE("kernel scaling") {
    const KernelEval psi = build_psi1(4);
    const std::vector<double> p{0.3, -0.2, 0.5};
    const KernelEval s1 = scale_kernel1(psi, 1.0);
    CHECK(s1(p) == psi(p));
    const double s = 1.7;
    const KernelEval ss = scale_kernel1(psi, s);
    const std::vector<double> q{s * p[0], s * p[1], s * s * p[2]};
    CHECK(ss(q) == doctest::Approx(std::pow(s, -4) * psi(p)).epsilon(1e-15));
    CHECK_THROWS_AS(scale_kernel1(psi, 0.0), std::invalid_argument);

    // mass invariance, with a gaussian kernel
    auto mass = [](const KernelEval& k, const Grid& g) {
        double m = 0;
        for (std::size_t i = 0; i < g.total(); ++i) m += k(g.point(i));
        return m * g.cell_volume();
    };
    const Grid big = make_grid(1, {8, 8, 16}, {128, 128, 128});
    const KernelEval gk = gauss_kernel();
    CHECK(mass(scale_kernel1(gk, 0.8), big) == doctest::Approx(mass(gk, big)).epsilon(1e-8));

    const Kernel1D k2 = build_psi2();
    CHECK(scale_kernel2(k2, 1.0)(0.4) == k2(0.4));
    CHECK(scale_kernel2(k2, 2.0)(0.8) == doctest::Approx(k2(0.4) / 2).epsilon(1e-15));
    CHECK_THROWS_AS(scale_kernel2(k2, -1.0), std::invalid_argument);
    Kernel1D gg;
    gg.value = [](double v) { return std::exp(-v * v); };
    auto m1 = [](const Kernel1D& k) {
        double m = 0;
        for (int i = -4000; i < 4000; ++i) m += k((i + 0.5) / 200.0);
        return m / 200.0;
    };
    CHECK(m1(scale_kernel2(gg, 1.6)) == doctest::Approx(m1(gg)).epsilon(1e-8));
}

TEST_CASE("escaped mass") {
    const Grid g = make_grid(1, {2, 2, 4}, {16, 16, 32});
    CHECK(kernel_escaped_mass(gauss_kernel(4, 4), g) < 1e-6);
    CHECK(kernel_escaped_mass(gauss_kernel(0.05, 0.05), g) > 0.1);
    Kernel1D k;
    k.value = [](double v) { return std::exp(-v * v); };
    CHECK(kernel1d_escaped_mass(k, 6) < 1e-10);
    CHECK(kernel1d_escaped_mass(k, 0.5) > 0.4);
}
