#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "hflag/flagkernel.hpp"

using namespace hflag;

TEST_CASE("riesz kernel symmetries and the eps -> 0 closed form") {
    const FlagKernelSpec K = riesz_flag_kernel(1e-4);
    const std::vector<double> p{0.6, -0.3, 0.4}, px{-0.6, -0.3, 0.4}, pu{0.6, -0.3, -0.4};
    const double v = K(p);
    CHECK(v != 0.0);
    CHECK(K(px) == doctest::Approx(-v).epsilon(1e-10));
    CHECK(K(pu) == doctest::Approx(-v).epsilon(1e-6));
    CHECK(riesz_kernel_fourier(p) == doctest::Approx(v).epsilon(1e-3));
    const std::vector<double> q{1.2, 0.5, 2.0};
    CHECK(riesz_kernel_fourier(q) == doctest::Approx(K(q)).epsilon(1e-3));
}

TEST_CASE("negative controls") {
    const FlagKernelSpec K = riesz_flag_kernel(1e-3);
    const FlagKernelSpec L = log_corrupted(K);
    const std::vector<double> p{0.3, 0.4, 0.2};
    CHECK(L(p) == doctest::Approx(K(p) * std::log(1 / 0.5)).epsilon(1e-12));
    const FlagKernelSpec E = even_flag_control();
    CHECK(E(p) == doctest::Approx(1 / (0.25 * (0.25 + 0.2))).epsilon(1e-12));
    CHECK(zero_flag_kernel()(p) == 0.0);
}

TEST_CASE("central-difference derivatives") {
    const FlagKernelSpec E = even_flag_control();
    const std::vector<double> p{0.3, 0.4, 0.2};
    const int a0[2] = {0, 0}, ax[2] = {1, 0};
    const double r2 = 0.25;
    CHECK(kernel_derivative(E, a0, 1, p) == doctest::Approx(-1 / (r2 * (r2 + 0.2) * (r2 + 0.2))).epsilon(1e-6));
    // d/dx |z|^{-2} (|z|^2 + u)^{-1}
    const double want = -2 * 0.3 / (r2 * r2) / (r2 + 0.2) - 2 * 0.3 / r2 / ((r2 + 0.2) * (r2 + 0.2));
    CHECK(kernel_derivative(E, ax, 0, p) == doctest::Approx(want).epsilon(1e-6));
    const std::vector<double> origin{0, 0, 1};
    CHECK_THROWS(kernel_derivative(E, a0, 0, origin));

    const auto ords = orders_up_to(1, 1);
    CHECK(ords.size() == 6);
    CHECK(ords.front().alpha == std::vector<int>{0, 0});
    CHECK(ords.front().beta == 0);
}

TEST_CASE("sample spec") {
    const DiffSampleSpec s;
    const auto r = s.radii();
    CHECK(r.size() == 13);
    CHECK(r.front() == doctest::Approx(1.0 / 16));
    CHECK(r.back() == doctest::Approx(4.0));
    CHECK(s.doubled().radii().size() > r.size());
}

TEST_CASE("bumps are C^2 normalised") {
    const Bump b = Bump::make("b", {0.5}, 2.0);
    CHECK(b(0.5) > 0);
    CHECK(b(0.5) <= 1.0);
    CHECK(b(2.6) == 0.0);
    CHECK(b.support_extent() == doctest::Approx(2.5));
    const Bump b2 = Bump::make("c", {0.0, 1.0}, 1.0);
    const double at[2] = {0.0, 1.0};
    CHECK(b2(std::span<const double>(at, 2)) <= 1.0);
    CHECK_THROWS(Bump::make("x", {}, 1.0));
    const BumpFamily fam = BumpFamily::standard();
    CHECK(!fam.phi1.empty());
    CHECK(fam.deltas().size() == 9);
    CHECK(fam.doubled().deltas().size() > fam.deltas().size());
}

TEST_CASE("zero kernel passes both checks") {
    const FlagKernelSpec Z = zero_flag_kernel();
    DiffSampleSpec spec;
    spec.angles = 2;
    spec.shape_lo = -2;
    spec.shape_hi = 2;
    const CheckTable d = check_diff_ineq(Z, orders_up_to(1, 1), spec, 1);
    CHECK(d.pass());
    for (const auto& r : d.rows) CHECK(r.C == 0.0);
    CHECK(d.csv().find("diff") != std::string::npos);
    CHECK(CheckTable::csv_header().find("pass") != std::string::npos);
}

TEST_CASE("even control satisfies the differential inequalities") {
    DiffSampleSpec spec;
    spec.angles = 4;
    const CheckTable d = check_diff_ineq(even_flag_control(), orders_up_to(1, 1), spec, 1);
    CHECK(d.pass());
    for (const auto& r : d.rows) CHECK(r.C > 0);
}

TEST_CASE("log-corrupted kernel fails the differential inequalities") {
    DiffSampleSpec spec;
    spec.angles = 4;
    const CheckTable d = check_diff_ineq(log_corrupted(riesz_flag_kernel(1e-6)), orders_up_to(0, 0), spec, 1);
    CHECK(!d.pass());
}

TEST_CASE("flag operator") {
    const Grid g = make_grid(1, {2, 2, 4}, {8, 8, 16});
    const SampledField f = sample(corpus("gaussian_bump"), g);
    CHECK(linf_norm(apply_flag_operator(zero_flag_kernel(), f, 1)) == 0.0);
    const OperatorResult r =
        apply_flag_operator_checked([](double e) { return riesz_flag_kernel(e); }, 1.0 / 16, f, 1);
    CHECK(linf_norm(r.field) > 0);
    CHECK(r.cauchy >= 0);
    CHECK(r.cauchy < 0.2);
    // odd kernel in x_1 on an x_1-even input gives an x_1-odd output
    const auto& o = r.field;
    const int G0 = g.counts[0], G1 = g.counts[1], G2 = g.counts[2];
    double dev = 0;
    for (int c = 0; c < G2; ++c)
        for (int b = 0; b < G1; ++b)
            for (int a = 0; a < G0; ++a) {
                const std::size_t i = (static_cast<std::size_t>(a) * G1 + b) * G2 + c;  // t fastest
                const std::size_t j = (static_cast<std::size_t>(G0 - 1 - a) * G1 + (G1 - 1 - b)) * G2 + c;
                dev = std::max(dev, std::abs(o[i] + o[j]));
            }
    CHECK(dev <= 1e-10 * linf_norm(o));
}

TEST_CASE("psi pair value against a grid convolution") {
    const FrameSpec frame;
    const Grid g = make_grid(1, {12, 12, 24}, {96, 96, 192});  // psi2 at t = 2 needs the wide t-box
    const SampledField a = sample(FuncEval{.name = "psi", .value = psi_st(frame, 1, 1).value}, g);
    const KernelEval b = psi_st(frame, 1, 2);
    const std::vector<std::vector<double>> pts{{0, 0, 0}, {0, 0, 0.75}};
    const auto grid = gconv_at(a, b, pts, {.threads = 1});
    for (std::size_t i = 0; i < pts.size(); ++i)
        CHECK(psi_pair_at(frame, 1, 1, 1, 2, pts[i][2]) == doctest::Approx(grid[i]).epsilon(1e-6));
}

TEST_CASE("almost orthogonality on a small lattice") {
    const OrthTable t = almost_orth_decay(FrameSpec{}, {1, 2}, {1, 2});
    CHECK(t.cells.size() == 16);
    CHECK(t.diagonal_dominant);
    CHECK(std::isfinite(t.C));
    CHECK(t.C > 0);
    CHECK(t.at(0, 0, 0, 0).measured > 0);
    CHECK(t.csv().find("ratio") != std::string::npos);
}

TEST_CASE("operator bound table") {
    const Grid g = make_grid(1, {2, 2, 4}, {8, 8, 16});
    FrameSpec frame;
    frame.voices_s = frame.voices_t = 1;
    frame.j_min = -1;
    frame.j_max = 1;
    frame.k_min = -1;
    frame.k_max = 1;
    std::vector<NamedField> corp{{"gaussian_bump", sample(corpus("gaussian_bump"), g)}};
    const OperatorTable t =
        operator_lip_bound(riesz_flag_kernel(1.0 / 16), corp, FlagExponent::make(0.5, 0.5), frame, 1);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].lp_f > 0);
    CHECK(t.max_ratio == doctest::Approx(t.rows[0].ratio));
    CHECK(t.csv().find("gaussian_bump") != std::string::npos);
}
