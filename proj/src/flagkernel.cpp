#include "hflag/flagkernel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <json.hpp>

#include "hflag/parallel.hpp"

namespace hflag {

namespace {

constexpr double kPi = std::numbers::pi;

using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
using GK15 = boost::math::quadrature::gauss_kronrod<double, 15>;

template <class F>
double gk_split(F& f, double a, double b, double abs_tol, unsigned depth) {
    double err = 0.0;
    const double r = GK::integrate(f, a, b, 0, 0.0, &err);
    if (depth == 0 || err <= abs_tol) return r;
    const double m = 0.5 * (a + b);
    return gk_split(f, a, m, 0.5 * abs_tol, depth - 1) + gk_split(f, m, b, 0.5 * abs_tol, depth - 1);
}

// Adaptive Gauss-Kronrod with the tolerance taken relative to int |f|, so
// integrals that cancel to zero still terminate.
template <class F>
double gk(F&& f, double a, double b, double tol = 1e-11, unsigned depth = 7) {
    if (!(b > a)) return 0.0;
    double err = 0.0, l1 = 0.0;
    const double r = GK::integrate(f, a, b, 0, 0.0, &err, &l1);
    const double abs_tol = tol * l1;
    if (depth == 0 || err <= abs_tol) return r;
    const double m = 0.5 * (a + b);
    return gk_split(f, a, m, 0.5 * abs_tol, depth - 1) + gk_split(f, m, b, 0.5 * abs_tol, depth - 1);
}

// int_a^inf f, through x = a + t / (1 - t)
template <class F>
double gk_tail(F&& f, double a, double tol, unsigned depth = 7) {
    auto g = [&](double t) {
        const double q = 1.0 - t;
        return f(a + t / q) / (q * q);
    };
    return gk(g, 0.0, 1.0, tol, depth);
}

// Integral over [pts.front(), pts.back()] split at the interior points;
// with `to_inf` the last piece runs to +infinity.
template <class F>
double gk_pieces(F&& f, std::vector<double> pts, bool to_inf, double tol = 1e-11) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) s += gk(f, pts[i], pts[i + 1], tol);
    if (to_inf && !pts.empty()) s += gk_tail(f, pts.back(), tol);
    return s;
}

double z_norm(std::span<const double> p, int n) {
    double r2 = 0.0;
    for (int a = 0; a < 2 * n; ++a) r2 += p[a] * p[a];
    return std::sqrt(r2);
}

// Points of [lo, hi] kept for splitting.
std::vector<double> clip(std::vector<double> v, double lo, double hi) {
    std::vector<double> out{lo, hi};
    for (double x : v)
        if (x > lo && x < hi) out.push_back(x);
    return out;
}

double sine_integral(double x) {
    if (x == 0.0) return 0.0;
    const double ax = std::abs(x);
    const double v = gk([](double t) { return t == 0.0 ? 1.0 : std::sin(t) / t; }, 0.0, ax, 1e-13);
    return x < 0 ? -v : v;
}

// int (a^2 + w^2)^{-(nu + 1/2)} e^{-i omega w} dw
double bessel_profile_hat(double a, double nu, double omega) {
    const double w = std::abs(omega);
    if (w == 0.0)
        return std::sqrt(kPi) * std::tgamma(nu) / std::tgamma(nu + 0.5) * std::pow(a, -2.0 * nu);
    const double x = a * w;
    if (x > 700.0) return 0.0;
    return 2.0 * std::sqrt(kPi) / std::tgamma(nu + 0.5) * std::pow(w / (2.0 * a), nu) *
           boost::math::cyl_bessel_k(nu, x);
}

// Gauss series, |y| <= 1/2.
double hyp2f1_series(double a, double b, double c, double y) {
    double term = 1.0, s = 1.0;
    for (int k = 0; k < 200; ++k) {
        term *= (a + k) * (b + k) / ((c + k) * (k + 1)) * y;
        s += term;
        if (std::abs(term) < 1e-17 * std::abs(s)) break;
    }
    return s;
}

// 2F1(a, b; c; y) on 0 <= y < 1, through 1 - y above 1/2. c - a - b must not
// be an integer.
double hyp2f1_unit(double a, double b, double c, double y) {
    if (y <= 0.5) return hyp2f1_series(a, b, c, y);
    const double g = std::tgamma(c);
    const double d = c - a - b;
    return g * std::tgamma(d) / (std::tgamma(c - a) * std::tgamma(c - b)) * hyp2f1_series(a, b, 1.0 - d, 1.0 - y) +
           std::pow(1.0 - y, d) * g * std::tgamma(-d) / (std::tgamma(a) * std::tgamma(b)) *
               hyp2f1_series(c - a, c - b, 1.0 + d, 1.0 - y);
}

// PV int (a^2 + (u - v)^2)^{-(nu + 1/2)} dv / v
//   = 2 sqrt(pi) G(nu + 1) / G(nu + 1/2) u a^{-2 nu - 2} 2F1(nu + 1, 1; 3/2; -u^2 / a^2),
// the last factor by Pfaff as (1 + x^2)^{-1} 2F1(1, 1/2 - nu; 3/2; x^2 / (1 + x^2)).
double hilbert_profile(double a, double nu, double u) {
    if (u == 0.0) return 0.0;
    const double x2 = (u / a) * (u / a);
    const double F = hyp2f1_unit(1.0, 0.5 - nu, 1.5, x2 / (1.0 + x2)) / (1.0 + x2);
    return 2.0 * std::sqrt(kPi) * std::tgamma(nu + 1.0) / std::tgamma(nu + 0.5) * u * std::pow(a, -2.0 * nu - 2.0) * F;
}

}  // namespace

// ----------------------------------------------------------- kernels

FlagKernelSpec riesz_flag_kernel(double eps, int n) {
    if (!(eps > 0.0)) throw std::invalid_argument("riesz_flag_kernel: eps must be > 0");
    if (n < 1) throw std::invalid_argument("riesz_flag_kernel: n must be >= 1");
    FlagKernelSpec K;
    K.kind = FlagKernelSpec::Kind::projected_product;
    K.name = "riesz";
    K.n = n;
    K.eps = eps;
    const double power = 2.0 * n + 3.0;
    K.k1 = [n, eps, power](std::span<const double> p) {
        double r2 = 0.0;
        for (int a = 0; a < 2 * n; ++a) r2 += p[a] * p[a];
        const double u = p[2 * n];
        const double rho = std::pow(r2 * r2 + u * u, 0.25);
        if (rho == 0.0) return 0.0;
        const double cut = 1.0 - cutoff_profile(rho / eps);
        if (cut == 0.0) return 0.0;
        return cut * p[0] * std::pow(rho, -power);
    };
    K.k2 = [eps](double v) { return std::abs(v) > eps ? 1.0 / v : 0.0; };
    K.k2_odd = true;
    // Symmetric form of the principal value: int_eps^inf [k1(z,u-v) - k1(z,u+v)] / v dv.
    const double nu = (2.0 * n + 1.0) / 4.0;
    K.value = [n, eps, nu, k1 = K.k1](std::span<const double> p) {
        if (p[0] == 0.0) return 0.0;
        const double r = z_norm(p, n);
        const double u = p[2 * n];
        std::vector<double> q(p.begin(), p.end());
        auto f = [&](double v) {
            q[2 * n] = u - v;
            const double a = k1(q);
            q[2 * n] = u + v;
            const double b = k1(q);
            return (a - b) / v;
        };
        if (r >= eps) {
            // rho >= r >= eps, so the excision in k1 is inactive: closed eps -> 0
            // value minus the part of the v-integral inside (0, eps)
            // k1 varies on the scale |z|^2 + |w|; one panel when that is well above eps
            const double inner =
                r * r + std::abs(u) >= 4 * eps ? GK15::integrate(f, 0.0, eps, 0) : gk(f, 0.0, eps, 1e-12, 5);
            return p[0] * hilbert_profile(r * r, nu, u) - inner;
        }
        const double w = r * r + eps;
        const double au = std::abs(u);
        std::vector<double> pts{eps, au - 2 * w, au - w, au - 0.25 * w, au, au + 0.25 * w, au + w, au + 2 * w,
                                au + 8 * w};
        const double top = au + 8 * w;
        std::vector<double> keep{eps};
        for (double x : pts)
            if (x > eps) keep.push_back(x);
        if (top <= eps) keep.push_back(eps + 8 * w);
        return gk_pieces(f, keep, true, 1e-10);
    };
    K.uhat = [n, eps, nu, k1 = K.k1](std::span<const double> z, double omega) -> std::complex<double> {
        if (z[0] == 0.0) return {0.0, 0.0};
        const double r = z_norm(z, n);
        double k1hat;
        if (r >= eps) {
            k1hat = z[0] * bessel_profile_hat(r * r, nu, omega);
        } else {
            // the excision is active on part of the line; cosine transform numerically
            std::vector<double> q(z.begin(), z.end());
            q.resize(2 * n + 1);
            auto prof = [&](double w) {
                q[2 * n] = w;
                return k1(q);
            };
            const double w0 = std::max(eps * eps, r * r);
            if (omega == 0.0) {
                k1hat = 2.0 * gk_pieces(prof, {0.0, w0, 4 * w0}, true, 1e-11);
            } else {
                boost::math::quadrature::ooura_fourier_cos<double> oc;
                k1hat = 2.0 * oc.integrate(prof, std::abs(omega)).first;
            }
        }
        // int_{|v|>eps} e^{-i omega v} / v dv = -2i sgn(omega) (pi/2 - Si(eps |omega|))
        const double k2hat = omega == 0.0 ? 0.0 : -2.0 * std::copysign(1.0, omega) * (kPi / 2 - sine_integral(eps * std::abs(omega)));
        return {0.0, k1hat * k2hat};
    };
    return K;
}

double riesz_kernel_fourier(std::span<const double> p) {
    const double x1 = p[0];
    const double r = std::hypot(p[0], p[1]);
    const double u = p[2];
    if (x1 == 0.0 || u == 0.0 || r == 0.0) return 0.0;
    const double nu = 0.75;
    auto c = [&](double w) { return bessel_profile_hat(r * r, nu, w); };
    boost::math::quadrature::ooura_fourier_sin<double> os;
    const double v = os.integrate(c, std::abs(u)).first;
    return x1 * (u < 0 ? -v : v);
}

FlagKernelSpec log_corrupted(const FlagKernelSpec& K) {
    FlagKernelSpec out;
    out.kind = FlagKernelSpec::Kind::analytic;
    out.name = K.name + "_log";
    out.n = K.n;
    out.eps = K.eps;
    out.excision = std::max(K.excision, K.eps);
    out.value = [base = K.value, n = K.n](std::span<const double> p) {
        const double r = z_norm(p, n);
        if (r == 0.0) return 0.0;
        return base(p) * std::log(1.0 / r);
    };
    return out;
}

FlagKernelSpec even_flag_control(double excision, int n) {
    if (!(excision > 0.0)) throw std::invalid_argument("even_flag_control: excision must be > 0");
    FlagKernelSpec K;
    K.kind = FlagKernelSpec::Kind::analytic;
    K.name = "even_control";
    K.n = n;
    K.eps = excision;
    K.excision = excision;
    K.value = [n](std::span<const double> p) {
        double r2 = 0.0;
        for (int a = 0; a < 2 * n; ++a) r2 += p[a] * p[a];
        if (r2 == 0.0) return 0.0;
        return std::pow(r2, -n) / (r2 + std::abs(p[2 * n]));
    };
    return K;
}

FlagKernelSpec zero_flag_kernel(int n) {
    FlagKernelSpec K;
    K.kind = FlagKernelSpec::Kind::analytic;
    K.name = "zero";
    K.n = n;
    K.value = [](std::span<const double>) { return 0.0; };
    K.uhat = [](std::span<const double>, double) { return std::complex<double>{}; };
    return K;
}

// ----------------------------------------------------------- derivatives

double kernel_derivative(const FlagKernelSpec& K, std::span<const int> alpha, int beta, std::span<const double> p) {
    const int n = K.n;
    if (static_cast<int>(alpha.size()) != 2 * n) throw std::invalid_argument("kernel_derivative: alpha needs 2n entries");
    const double r = z_norm(p, n);
    if (r == 0.0) throw std::invalid_argument("kernel_derivative: z = 0 is excluded");
    // axes with their order and step
    struct Axis {
        int index, order;
        double h;
    };
    std::vector<Axis> axes;
    for (int a = 0; a < 2 * n; ++a)
        if (alpha[a] > 0) axes.push_back({a, alpha[a], 1e-4 * r});
    if (beta > 0) axes.push_back({2 * n, beta, 1e-4 * (r * r + std::abs(p[2 * n]))});
    for (const Axis& ax : axes)
        if (ax.order > 2) throw std::invalid_argument("kernel_derivative: orders above 2 per axis are not supported");
    // tensor product of 1D central stencils
    std::vector<double> q(p.begin(), p.end());
    double total = 0.0;
    const std::size_t A = axes.size();
    std::vector<int> idx(A, 0);
    const int pts1[2][3] = {{-1, 1, 0}, {-1, 0, 1}};
    const double wts1[2][3] = {{-0.5, 0.5, 0.0}, {1.0, -2.0, 1.0}};
    const int cnt[2] = {2, 3};
    while (true) {
        double w = 1.0;
        for (std::size_t i = 0; i < A; ++i) {
            const Axis& ax = axes[i];
            const int o = ax.order - 1;
            q[ax.index] = p[ax.index] + pts1[o][idx[i]] * ax.h;
            w *= wts1[o][idx[i]] / std::pow(ax.h, ax.order);
        }
        total += w * K.value(q);
        std::size_t i = 0;
        for (; i < A; ++i) {
            if (++idx[i] < cnt[axes[i].order - 1]) break;
            idx[i] = 0;
        }
        if (i == A) break;
    }
    return total;
}

std::string KernelOrder::label() const {
    std::ostringstream os;
    os << "a=";
    for (std::size_t i = 0; i < alpha.size(); ++i) os << (i ? "," : "") << alpha[i];
    os << ";b=" << beta;
    return os.str();
}

std::vector<KernelOrder> orders_up_to(int alpha_max, int beta_max, int n) {
    std::vector<KernelOrder> out;
    const int d = 2 * n;
    std::vector<int> a(d, 0);
    // all multi-indices with |a| <= alpha_max, in order of |a|
    std::vector<std::vector<int>> alphas;
    std::function<void(int, int)> rec = [&](int axis, int left) {
        if (axis == d) {
            alphas.push_back(a);
            return;
        }
        for (int k = 0; k <= left; ++k) {
            a[axis] = k;
            rec(axis + 1, left - k);
        }
        a[axis] = 0;
    };
    rec(0, alpha_max);
    std::stable_sort(alphas.begin(), alphas.end(), [](const auto& x, const auto& y) {
        int sx = 0, sy = 0;
        for (int v : x) sx += v;
        for (int v : y) sy += v;
        return sx < sy;
    });
    for (int b = 0; b <= beta_max; ++b)
        for (const auto& al : alphas) out.push_back({al, b});
    return out;
}

// ----------------------------------------------------------- condition (1)

DiffSampleSpec DiffSampleSpec::doubled() const {
    DiffSampleSpec d = *this;
    d.per_octave *= 2;
    d.shapes_per_octave *= 2;
    d.angles *= 2;
    return d;
}

std::vector<double> DiffSampleSpec::radii() const {
    if (!(r_lo > 0 && r_hi > r_lo) || per_octave < 1) throw std::invalid_argument("DiffSampleSpec: bad radial range");
    const int steps = static_cast<int>(std::lround(std::log2(r_hi / r_lo) * per_octave));
    std::vector<double> out;
    for (int i = 0; i <= steps; ++i) out.push_back(r_lo * std::exp2(static_cast<double>(i) / per_octave));
    return out;
}

bool CheckTable::pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass; });
}

std::string CheckTable::csv_header() { return "kernel,check,label,C,C_inner,C_doubled,interior,stable,pass\n"; }

std::string CheckTable::csv() const {
    std::ostringstream os;
    os.precision(10);
    for (const auto& r : rows)
        os << kernel << ',' << r.check << ',' << r.label << ',' << r.C << ',' << r.C_inner << ',' << r.C_doubled << ','
           << r.interior << ',' << r.stable << ',' << (r.pass ? "PASS" : "FAIL") << '\n';
    return os.str();
}

std::string CheckTable::to_json() const {
    nlohmann::json j;
    j["kernel"] = kernel;
    j["pass"] = pass();
    for (const auto& r : rows)
        j["rows"].push_back({{"check", r.check},
                             {"label", r.label},
                             {"C", r.C},
                             {"C_inner", r.C_inner},
                             {"C_doubled", r.C_doubled},
                             {"interior", r.interior},
                             {"stable", r.stable},
                             {"pass", r.pass},
                             {"argmax", r.argmax}});
    return j.dump(2);
}

namespace {


void finish_row(CheckRow& row, double C_doubled) {
    row.C_doubled = C_doubled;
    const double big = std::max(row.C, C_doubled);
    if (big <= kCheckFloor) {
        row.interior = row.stable = row.pass = true;
        return;
    }
    row.interior = row.C <= 1.05 * row.C_inner;
    row.stable = std::abs(C_doubled - row.C) <= 0.2 * big;
    row.pass = row.interior && row.stable;
}

struct DiffSample {
    std::vector<double> p;
    bool outer = false;  // on the first or last radial shell
};

std::vector<DiffSample> diff_samples(const DiffSampleSpec& spec, int n) {
    if (n != 1) throw std::invalid_argument("check_diff_ineq: only n = 1 is supported");
    const auto radii = spec.radii();
    std::vector<double> shapes{0.0};
    for (int i = spec.shape_lo * spec.shapes_per_octave; i <= spec.shape_hi * spec.shapes_per_octave; ++i) {
        const double a = std::exp2(static_cast<double>(i) / spec.shapes_per_octave);
        shapes.push_back(a);
        shapes.push_back(-a);
    }
    std::vector<DiffSample> out;
    for (std::size_t ir = 0; ir < radii.size(); ++ir) {
        const double r = radii[ir];
        for (int k = 0; k < spec.angles; ++k) {
            // angles avoid the x_1 = 0 line, where odd kernels vanish
            const double th = kPi * (k + 0.5) / spec.angles - kPi / 2;
            for (double a : shapes)
                out.push_back({{r * std::cos(th), r * std::sin(th), a * r * r}, ir == 0 || ir + 1 == radii.size()});
        }
    }
    return out;
}

struct MaxResult {
    double all = 0.0, inner = 0.0;
    std::vector<double> argmax;
};

CheckRow make_row(std::string check, std::string label, const MaxResult& m) {
    CheckRow row;
    row.check = std::move(check);
    row.label = std::move(label);
    row.C = m.all;
    row.C_inner = m.inner;
    row.argmax = m.argmax;
    return row;
}

MaxResult diff_max(const FlagKernelSpec& K, const KernelOrder& ord, const DiffSampleSpec& spec, unsigned threads) {
    const auto samples = diff_samples(spec, K.n);
    std::vector<double> vals(samples.size());
    int am = 0;
    for (int v : ord.alpha) am += v;
    parallel_for(samples.size(), threads, [&](std::size_t i) {
        const auto& p = samples[i].p;
        const double r2 = p[0] * p[0] + p[1] * p[1];
        const double bound = std::pow(r2, -(2.0 * K.n + am) / 2.0) * std::pow(r2 + std::abs(p[2]), -1.0 - ord.beta);
        vals[i] = std::abs(kernel_derivative(K, ord.alpha, ord.beta, p)) / bound;
    });
    MaxResult m;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (vals[i] > m.all) {
            m.all = vals[i];
            m.argmax = samples[i].p;
        }
        if (!samples[i].outer) m.inner = std::max(m.inner, vals[i]);
    }
    return m;
}

}  // namespace

CheckTable check_diff_ineq(const FlagKernelSpec& K, const std::vector<KernelOrder>& orders, const DiffSampleSpec& spec,
                           unsigned threads) {
    CheckTable tab;
    tab.kernel = K.name;
    const DiffSampleSpec dbl = spec.doubled();
    for (const auto& ord : orders) {
        CheckRow row;
        row.check = "diff";
        row.label = ord.label();
        const MaxResult m = diff_max(K, ord, spec, threads);
        row.C = m.all;
        row.C_inner = m.inner;
        row.argmax = m.argmax;
        finish_row(row, diff_max(K, ord, dbl, threads).all);
        tab.rows.push_back(std::move(row));
    }
    return tab;
}

// ----------------------------------------------------------- bumps

namespace {

double bump_base(double x) {
    const double q = 1.0 - x * x;
    return q <= 0.0 ? 0.0 : std::exp(1.0 - 1.0 / q);
}

}  // namespace

Bump Bump::make(std::string name, std::vector<double> center, double radius) {
    if (center.empty() || center.size() > 2) throw std::invalid_argument("Bump: center needs 1 or 2 entries");
    if (!(radius > 0)) throw std::invalid_argument("Bump: radius must be > 0");
    Bump b;
    b.name = std::move(name);
    b.center = std::move(center);
    b.radius = radius;
    b.norm = 1.0;
    // C^2 norm on a grid over the support, central differences
    const double h = 1e-4 * radius;
    double m = 0.0;
    if (b.center.size() == 1) {
        const int N = 4000;
        for (int i = 0; i <= N; ++i) {
            const double x = b.center[0] - radius + 2.0 * radius * i / N;
            const double f0 = b(x), fp = b(x + h), fm = b(x - h);
            m = std::max({m, std::abs(f0), std::abs(fp - fm) / (2 * h), std::abs(fp - 2 * f0 + fm) / (h * h)});
        }
    } else {
        const int N = 300;
        std::vector<double> x(2);
        auto at = [&](double a, double c) {
            const double v[2] = {a, c};
            return b(std::span<const double>(v, 2));
        };
        for (int i = 0; i <= N; ++i)
            for (int j = 0; j <= N; ++j) {
                const double a = b.center[0] - radius + 2.0 * radius * i / N;
                const double c = b.center[1] - radius + 2.0 * radius * j / N;
                const double f0 = at(a, c);
                const double fx = (at(a + h, c) - at(a - h, c)) / (2 * h);
                const double fy = (at(a, c + h) - at(a, c - h)) / (2 * h);
                const double fxx = (at(a + h, c) - 2 * f0 + at(a - h, c)) / (h * h);
                const double fyy = (at(a, c + h) - 2 * f0 + at(a, c - h)) / (h * h);
                const double fxy =
                    (at(a + h, c + h) - at(a + h, c - h) - at(a - h, c + h) + at(a - h, c - h)) / (4 * h * h);
                m = std::max({m, std::abs(f0), std::abs(fx), std::abs(fy), std::abs(fxx), std::abs(fyy),
                              std::abs(fxy)});
            }
    }
    b.norm = m;
    return b;
}

double Bump::operator()(double x) const { return bump_base((x - center[0]) / radius) / norm; }

double Bump::operator()(std::span<const double> x) const {
    double r2 = 0.0;
    for (std::size_t a = 0; a < center.size(); ++a) r2 += (x[a] - center[a]) * (x[a] - center[a]);
    return bump_base(std::sqrt(r2) / radius) / norm;
}

double Bump::support_extent() const {
    double c2 = 0.0;
    for (double c : center) c2 += c * c;
    return std::sqrt(c2) + radius;
}

BumpFamily BumpFamily::standard() {
    BumpFamily f;
    f.phi1 = {Bump::make("sym1", {0.0}, 1.0), Bump::make("off1", {0.35}, 0.6)};
    f.phi2 = {Bump::make("sym2", {0.0, 0.0}, 1.0), Bump::make("off2", {0.35, 0.1}, 0.6)};
    return f;
}

BumpFamily BumpFamily::doubled() const {
    BumpFamily d = *this;
    d.per_octave *= 2;
    d.z_angles *= 2;
    return d;
}

std::vector<double> BumpFamily::deltas() const {
    std::vector<double> out;
    for (int i = delta_lo * per_octave; i <= delta_hi * per_octave; ++i)
        out.push_back(std::exp2(static_cast<double>(i) / per_octave));
    return out;
}

// ----------------------------------------------------------- condition (2)

namespace {

constexpr int kRing = 48;
constexpr double kCancelTol = 1e-7;
// |I| below this fraction of int |integrand| is cancellation to quadrature accuracy
constexpr double kZeroFraction = 1e-6;

// int F over the disc |z - c| < R intersected with |z| > r0, in polar
// coordinates about the origin. Rings that meet the disc in an arc use a
// Kronrod rule on the arc; full rings the trapezoid rule. F should vanish
// smoothly on the boundary circle (it carries the bump factor).
struct Quad {
    double value = 0.0;
    double scale = 0.0;  // estimate of the integral of |f|
};

// f(x, absolute) integrated over the pieces of `pts`, plus both infinite
// tails when `tails`. The error target is tol * int |f|, from a first
// non-adaptive pass with absolute = true.
template <class F>
Quad gk_scaled(F&& f, std::vector<double> pts, double tol, bool tails = false) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const double lo = pts.front(), hi = pts.back();
    auto right = [&](double t, bool ab) {
        const double q = 1.0 - t;
        return f(hi + t / q, ab) / (q * q);
    };
    auto left = [&](double t, bool ab) {
        const double q = 1.0 - t;
        return f(lo - t / q, ab) / (q * q);
    };
    auto pass = [&](auto&& g, double a, double b, bool ab, double abs_tol) {
        auto h = [&](double x) { return g(x, ab); };
        return ab ? GK::integrate(h, a, b, 0) : gk_split(h, a, b, abs_tol, 7);
    };
    Quad q;
    for (bool ab : {true, false}) {
        const double target = tol * q.scale;
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) s += pass(f, pts[i], pts[i + 1], ab, target);
        if (tails) s += pass(right, 0.0, 1.0, ab, target) + pass(left, 0.0, 1.0, ab, target);
        (ab ? q.scale : q.value) = s;
    }
    return q;
}

template <class F>
Quad disc_polar(F&& f, double cx, double cy, double R, double r0, std::vector<double> radial_pts, double tol) {
    const double cn = std::hypot(cx, cy);
    const double arg = std::atan2(cy, cx);
    const double rmin = std::max(r0, cn - R), rmax = cn + R;
    if (!(rmax > rmin)) return {};
    // ring sums, signed and absolute together; the scale pass and the first
    // adaptive level share nodes
    std::map<double, std::pair<double, double>> memo;
    auto ring = [&](double r) -> std::pair<double, double> {
        if (auto it = memo.find(r); it != memo.end()) return it->second;
        double sv = 0.0, sa = 0.0;
        if (r <= R - cn) {
            for (int k = 0; k < kRing; ++k) {
                const double th = 2 * kPi * (k + 0.5) / kRing;
                const double x = f(r * std::cos(th), r * std::sin(th));
                sv += x;
                sa += std::abs(x);
            }
            sv *= r * (2 * kPi / kRing);
            sa *= r * (2 * kPi / kRing);
        } else {
            const double c = std::clamp((r * r + cn * cn - R * R) / (2 * r * cn), -1.0, 1.0);
            const double half = std::acos(c);
            const auto& x = GK::abscissa();
            const auto& wk = GK::weights();
            for (std::size_t i = 0; i < x.size() && half > 0; ++i)
                for (double sg : {1.0, -1.0}) {
                    if (i == 0 && sg < 0) continue;
                    const double th = arg + sg * half * x[i];
                    const double v = f(r * std::cos(th), r * std::sin(th));
                    sv += wk[i] * v;
                    sa += wk[i] * std::abs(v);
                }
            sv *= r * half;
            sa *= r * half;
        }
        return memo[r] = {sv, sa};
    };
    auto radial = [&](double r, bool absolute) {
        const auto [v, a] = ring(r);
        return absolute ? a : v;
    };
    radial_pts.push_back(R - cn);
    auto pts = clip(radial_pts, std::max(rmin, 0.0), rmax);
    std::sort(pts.begin(), pts.end());
    // r = e^t away from the origin: the ring integral can fall like r^{-2}
    // over many octaves
    Quad q;
    if (pts.front() == 0.0) {
        q = gk_scaled(radial, {0.0, pts[1]}, tol);
        pts.erase(pts.begin());
    }
    if (pts.size() < 2) return q;
    std::vector<double> ts;
    for (double r : pts) ts.push_back(std::log(r));
    const Quad l = gk_scaled([&](double t, bool ab) { return std::exp(t) * radial(std::exp(t), ab); }, ts, tol);
    return {q.value + l.value, q.scale + l.scale};
}

void require_window(double extent, const BumpFamily& B, const char* what) {
    if (extent > B.max_window)
        throw std::invalid_argument(std::string("check_cancellation: ") + what +
                                    " bump support exceeds the quadrature window");
}

double significant(const Quad& q) {
    const double v = std::abs(q.value);
    return v <= kZeroFraction * q.scale ? 0.0 : v;
}

// int d^alpha_z K(z,u) phi1(delta u) du
Quad cancel_u(const FlagKernelSpec& K, std::span<const int> alpha, std::span<const double> z, const Bump& b,
              double delta) {
    const double lo = (b.center[0] - b.radius) / delta, hi = (b.center[0] + b.radius) / delta;
    const double r2 = z[0] * z[0] + z[1] * z[1];
    std::vector<double> p{z[0], z[1], 0.0};
    bool plain = std::all_of(alpha.begin(), alpha.end(), [](int a) { return a == 0; });
    auto f = [&](double u, bool ab) {
        p[2] = u;
        const double k = (plain ? K.value(p) : kernel_derivative(K, alpha, 0, p)) * b(delta * u);
        return ab ? std::abs(k) : k;
    };
    return gk_scaled(f, clip({0.0, -r2, r2, -4 * r2, 4 * r2, b.center[0] / delta}, lo, hi), kCancelTol);
}

// int d^beta_u K(z,u) phi2(delta z) dz
Quad cancel_z(const FlagKernelSpec& K, int beta, double u, const Bump& b, double delta) {
    const double r0 = K.kind == FlagKernelSpec::Kind::analytic ? K.excision : 0.0;
    const int zero_alpha[2] = {0, 0};
    auto f = [&](double x, double y) {
        const double q[2] = {delta * x, delta * y};
        const double w = b(std::span<const double>(q, 2));
        if (w == 0.0) return 0.0;
        const double p[3] = {x, y, u};
        const std::span<const double> ps(p, 3);
        return w * (beta == 0 ? K.value(ps) : kernel_derivative(K, zero_alpha, beta, ps));
    };
    const double su = std::sqrt(std::abs(u));
    return disc_polar(f, b.center[0] / delta, b.center[1] / delta, b.radius / delta, r0, {0.5 * su, su, 2 * su},
                      kCancelTol);
}

// Fixed nodes in s = u |u|^{-1/2}, where the z-integral J(u) of K against
// phi2(d1 z) (which can grow like |u|^{-1/2}) gives a smooth integrand:
// one Kronrod panel per four octaves of |s| on [s_lo, s_hi], one from 0 to s_lo,
// and a mapped tail beyond s_hi.
struct UNodes {
    std::vector<double> u, weight;  // weight includes du = 2|s| ds
};

UNodes u_nodes(double s_lo, double s_hi, bool tail) {
    const auto& x = GK::abscissa();
    const auto& wk = GK::weights();
    UNodes n;
    auto panel = [&](double a, double b, auto&& map) {
        const double c = 0.5 * (a + b), h = 0.5 * (b - a);
        for (std::size_t i = 0; i < x.size(); ++i)
            for (double sg : {1.0, -1.0}) {
                if (i == 0 && sg < 0) continue;
                const auto [sv, jac] = map(c + sg * h * x[i]);
                for (double side : {1.0, -1.0}) {
                    n.u.push_back(side * sv * sv);
                    n.weight.push_back(wk[i] * h * jac * 2.0 * sv);
                }
            }
    };
    auto id = [](double t) { return std::pair{t, 1.0}; };
    panel(0.0, s_lo, id);
    for (double a = s_lo; a < s_hi; a *= 16) panel(a, std::min(16 * a, s_hi), id);
    if (tail)
        panel(0.0, 1.0, [s_hi](double t) { return std::pair{s_hi + t / (1 - t), 1.0 / ((1 - t) * (1 - t))}; });
    return n;
}

// J(u) = int K(z,u) phi2(d1 z) dz at every node (k1 in place of K for
// projected kernels).
std::vector<Quad> z_integrals(const FlagKernelSpec& K, const Bump& a, double d1, const UNodes& n) {
    const bool analytic = K.kind == FlagKernelSpec::Kind::analytic;
    const PointFn& F = analytic ? K.value : K.k1;
    const double r0 = analytic ? K.excision : 0.0;
    const double e = analytic ? 0.0 : K.eps;
    std::vector<Quad> J(n.u.size());
    for (std::size_t i = 0; i < n.u.size(); ++i) {
        const double w = n.u[i];
        auto f = [&](double x, double y) {
            const double q[2] = {d1 * x, d1 * y};
            const double av = a(std::span<const double>(q, 2));
            if (av == 0.0) return 0.0;
            const double p[3] = {x, y, w};
            return av * F(std::span<const double>(p, 3));
        };
        const double sw = std::sqrt(std::abs(w));
        std::vector<double> pts{0.5 * sw, sw, 2 * sw};
        if (e > 0) pts.insert(pts.end(), {0.5 * e, e});
        J[i] = disc_polar(f, a.center[0] / d1, a.center[1] / d1, a.radius / d1, r0, pts, kCancelTol);
    }
    return J;
}

// int K(z,u) phi2(d1 z) phi1(d2 u) from the tabulated J: against phi1(d2 u)
// directly, or for projected kernels against H(w) = int k2(v) phi1(d2 (w + v)) dv.
Quad cancel_h(const FlagKernelSpec& K, const Bump& b, double d2, const UNodes& n, const std::vector<Quad>& J) {
    const double ulo = (b.center[0] - b.radius) / d2, uhi = (b.center[0] + b.radius) / d2;
    const double eps = K.eps;
    auto H = [&](double w) {
        if (K.kind == FlagKernelSpec::Kind::analytic) return b(d2 * w);
        const double vlo = ulo - w, vhi = uhi - w;  // support of b(d2 (w + v)) in v
        if (K.k2_odd) {
            const double top = std::max(std::abs(vlo), std::abs(vhi));
            if (top <= eps) return 0.0;
            auto g = [&](double v) { return K.k2(v) * (b(d2 * (w + v)) - b(d2 * (w - v))); };
            return gk_pieces(g, clip({std::abs(vlo), std::abs(vhi), std::abs(w)}, eps, top), false, kCancelTol);
        }
        auto g = [&](double v) { return K.k2(v) * b(d2 * (w + v)); };
        return gk_pieces(g, clip({-eps, eps, 0.0}, vlo, vhi), false, kCancelTol);
    };
    Quad q;
    for (std::size_t i = 0; i < n.u.size(); ++i) {
        if (J[i].scale == 0.0) continue;
        const double h = H(n.u[i]);
        q.value += n.weight[i] * J[i].value * h;
        q.scale += n.weight[i] * J[i].scale * std::abs(h);
    }
    return q;
}

}  // namespace

CheckTable check_cancellation(const FlagKernelSpec& K, const BumpFamily& bumps, int alpha_max, int beta_max,
                              unsigned threads) {
    if (K.n != 1) throw std::invalid_argument("check_cancellation: only n = 1 is supported");
    if (K.kind == FlagKernelSpec::Kind::projected_product && (!K.k1 || !K.k2))
        throw std::invalid_argument("check_cancellation: projected kernel lacks k1/k2");
    CheckTable tab;
    tab.kernel = K.name;
    const std::vector<KernelOrder> zorders = orders_up_to(alpha_max, 0, 1);

    auto run_u = [&](const BumpFamily& B, const KernelOrder& ord, const Bump& b, MaxResult& m) {
        const auto ds = B.deltas();
        for (double d : ds) require_window(b.support_extent() / d, B, "phi1");
        int am = 0;
        for (int v : ord.alpha) am += v;
        struct Job {
            std::vector<double> z;
            double d;
            bool outer;
        };
        std::vector<Job> jobs;
        for (double r : B.z_radii)
            for (int k = 0; k < B.z_angles; ++k) {
                const double th = kPi * (k + 0.5) / B.z_angles - kPi / 2;
                for (std::size_t i = 0; i < ds.size(); ++i)
                    jobs.push_back({{r * std::cos(th), r * std::sin(th)}, ds[i], i == 0 || i + 1 == ds.size()});
            }
        std::vector<double> vals(jobs.size());
        parallel_for(jobs.size(), threads, [&](std::size_t j) {
            const double r = std::hypot(jobs[j].z[0], jobs[j].z[1]);
            vals[j] = significant(cancel_u(K, ord.alpha, jobs[j].z, b, jobs[j].d)) * std::pow(r, 2.0 + am);
        });
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            if (vals[j] > m.all) {
                m.all = vals[j];
                m.argmax = {jobs[j].z[0], jobs[j].z[1], jobs[j].d};
            }
            if (!jobs[j].outer) m.inner = std::max(m.inner, vals[j]);
        }
    };
    auto run_z = [&](const BumpFamily& B, int beta, const Bump& b, MaxResult& m) {
        const auto ds = B.deltas();
        for (double d : ds) require_window(b.support_extent() / d, B, "phi2");
        struct Job {
            double u, d;
            bool outer;
        };
        std::vector<Job> jobs;
        for (double u : B.u_samples)
            for (std::size_t i = 0; i < ds.size(); ++i) jobs.push_back({u, ds[i], i == 0 || i + 1 == ds.size()});
        std::vector<double> vals(jobs.size());
        parallel_for(jobs.size(), threads, [&](std::size_t j) {
            vals[j] = significant(cancel_z(K, beta, jobs[j].u, b, jobs[j].d)) * std::pow(std::abs(jobs[j].u), 1.0 + beta);
        });
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            if (vals[j] > m.all) {
                m.all = vals[j];
                m.argmax = {jobs[j].u, jobs[j].d};
            }
            if (!jobs[j].outer) m.inner = std::max(m.inner, vals[j]);
        }
    };
    // J tables keyed by d1; the doubled family reuses the base ones
    using JCache = std::map<double, std::vector<Quad>>;
    auto run_h = [&](const BumpFamily& B, const Bump& a, const Bump& b, MaxResult& m, JCache& cache) {
        const auto ds = B.deltas();
        for (double d : ds) {
            require_window(a.support_extent() / d, B, "phi3 (z)");
            require_window(b.support_extent() / d, B, "phi3 (u)");
        }
        // the u-nodes must cover phi1(d2 u) for the smallest d2 and, for
        // projected kernels, the eps scale of k1; beyond them a tail
        const bool analytic = K.kind == FlagKernelSpec::Kind::analytic;
        const double s_lo = 0.5 * (analytic ? std::max(K.excision, 1e-6) : K.eps);
        const double reach = std::max(b.support_extent() / ds.front(), a.support_extent() / ds.front());
        const UNodes nodes = u_nodes(s_lo, std::max(std::sqrt(reach), reach), !analytic);
        std::vector<std::vector<Quad>> J(ds.size());
        parallel_for(ds.size(), threads, [&](std::size_t i) {
            if (auto it = cache.find(ds[i]); it != cache.end())
                J[i] = it->second;
            else
                J[i] = z_integrals(K, a, ds[i], nodes);
        });
        for (std::size_t i = 0; i < ds.size(); ++i) cache.emplace(ds[i], J[i]);
        struct Job {
            std::size_t i1;
            double d2;
            bool outer;
        };
        std::vector<Job> jobs;
        for (std::size_t i = 0; i < ds.size(); ++i)
            for (std::size_t k = 0; k < ds.size(); ++k)
                jobs.push_back({i, ds[k], i == 0 || k == 0 || i + 1 == ds.size() || k + 1 == ds.size()});
        std::vector<double> vals(jobs.size());
        parallel_for(jobs.size(), threads,
                     [&](std::size_t j) { vals[j] = significant(cancel_h(K, b, jobs[j].d2, nodes, J[jobs[j].i1])); });
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            if (vals[j] > m.all) {
                m.all = vals[j];
                m.argmax = {ds[jobs[j].i1], jobs[j].d2};
            }
            if (!jobs[j].outer) m.inner = std::max(m.inner, vals[j]);
        }
    };

    const BumpFamily dbl = bumps.doubled();
    for (const auto& ord : zorders)
        for (std::size_t bi = 0; bi < bumps.phi1.size(); ++bi) {
            MaxResult m, md;
            run_u(bumps, ord, bumps.phi1[bi], m);
            run_u(dbl, ord, dbl.phi1[bi], md);
            CheckRow row = make_row("cancel_u", ord.label() + ";" + bumps.phi1[bi].name, m);
            finish_row(row, md.all);
            tab.rows.push_back(row);
        }
    for (int beta = 0; beta <= beta_max; ++beta)
        for (std::size_t bi = 0; bi < bumps.phi2.size(); ++bi) {
            MaxResult m, md;
            run_z(bumps, beta, bumps.phi2[bi], m);
            run_z(dbl, beta, dbl.phi2[bi], md);
            CheckRow row = make_row("cancel_z", "b=" + std::to_string(beta) + ";" + bumps.phi2[bi].name, m);
            finish_row(row, md.all);
            tab.rows.push_back(row);
        }
    const std::size_t pairs = std::min(bumps.phi1.size(), bumps.phi2.size());
    for (std::size_t bi = 0; bi < pairs; ++bi) {
        MaxResult m, md;
        JCache cache;
        run_h(bumps, bumps.phi2[bi], bumps.phi1[bi], m, cache);
        run_h(dbl, dbl.phi2[bi], dbl.phi1[bi], md, cache);
        CheckRow row = make_row("cancel_h", bumps.phi2[bi].name + "x" + bumps.phi1[bi].name, m);
        finish_row(row, md.all);
        tab.rows.push_back(row);
    }
    return tab;
}

// ----------------------------------------------------------- operator

SampledField apply_flag_operator(const FlagKernelSpec& K, const SampledField& f, unsigned threads, int pad) {
    if (!K.uhat) throw std::invalid_argument("apply_flag_operator: kernel " + K.name + " has no u-transform");
    const Grid& g = f.grid;
    if (g.n != K.n) throw std::invalid_argument("apply_flag_operator: dimension mismatch");
    const int dz = g.dims() - 1;
    const int P = pad * g.t_count();
    const std::vector<double> om = spectral_omegas(g, P);
    const std::size_t H = om.size();
    // K depends on the transverse difference only through lattice offsets;
    // tabulate its line spectra once per offset.
    std::vector<int> lo(dz), span(dz);
    std::size_t count = 1;
    for (int a = 0; a < dz; ++a) {
        lo[a] = -(g.counts[a] - 1);
        span[a] = 2 * g.counts[a] - 1;
        count *= static_cast<std::size_t>(span[a]);
    }
    std::vector<std::complex<double>> table(count * H);
    parallel_for(count, threads, [&](std::size_t idx) {
        std::vector<double> d(dz);
        std::size_t rem = idx;
        for (int a = dz - 1; a >= 0; --a) {
            const int off = static_cast<int>(rem % span[a]) + lo[a];
            rem /= span[a];
            d[a] = off * g.spacing[a];
        }
        for (std::size_t m = 0; m < H; ++m) table[idx * H + m] = K.uhat(d, om[m]);
    });
    KernelEval k;
    k.name = K.name;
    k.n = K.n;
    k.value = K.value;
    k.uhat_line = [&g, &table, lo, span, H, dz](std::span<const double> d, std::span<const double>,
                                               std::span<std::complex<double>> out) {
        std::size_t idx = 0;
        for (int a = 0; a < dz; ++a) {
            const int off = static_cast<int>(std::lround(d[a] / g.spacing[a]));
            idx = idx * span[a] + static_cast<std::size_t>(off - lo[a]);
        }
        std::copy_n(table.data() + idx * H, H, out.begin());
    };
    ConvOptions opt;
    opt.threads = threads;
    return spectral_to_field(gconv_spectral_t(f, k, opt, pad), {}, threads);
}

OperatorResult apply_flag_operator_checked(const std::function<FlagKernelSpec(double)>& make, double eps,
                                           const SampledField& f, unsigned threads) {
    OperatorResult r;
    r.eps = eps;
    r.field = apply_flag_operator(make(eps), f, threads);
    const SampledField half = apply_flag_operator(make(eps / 2), f, threads);
    const double nrm = l2_norm(half);
    r.cauchy = nrm > 0 ? l2_distance(r.field, half) / nrm : 0.0;
    return r;
}

// ----------------------------------------------------------- almost orthogonality

double psi_pair_at(const FrameSpec& frame, double s, double t, double s2, double t2, double u) {
    if (frame.n != 1) throw std::invalid_argument("psi_pair_at: only n = 1 is supported");
    const Psi1 P1(frame.M, frame.n);
    const Psi2 P2 = make_psi2(frame.psi2_order, frame.psi2_peak);
    const double cut = 16.0;
    const double rmax = cut / std::min(s, s2);
    const double emax = std::min({cut / (s * s), cut / (s2 * s2), 8.0 / (std::sqrt(P2.b) * t), 8.0 / (std::sqrt(P2.b) * t2)});
    auto inner = [&](double eta) {
        const double m2 = P2.fourier(t * eta) * P2.fourier(t2 * eta);
        if (m2 == 0.0) return 0.0;
        auto rad = [&](double rho) {
            const double a[3] = {s * rho, 0.0, s * s * eta};
            const double b[3] = {s2 * rho, 0.0, s2 * s2 * eta};
            return rho * P1.fourier(a) * P1.fourier(b);
        };
        return m2 * std::cos(eta * u) * gk(rad, 0.0, rmax, 1e-11);
    };
    // (2 pi)^{-3} * 2 pi (angle) * 2 (eta even)
    return gk(inner, 0.0, emax, 1e-11) * 2.0 * 2.0 * kPi / std::pow(2.0 * kPi, 3);
}

const OrthCell& OrthTable::at(std::size_t is, std::size_t it, std::size_t js, std::size_t jt) const {
    const std::size_t ns = s.size(), nt = t.size();
    return cells[((is * nt + it) * ns + js) * nt + jt];
}

std::string OrthTable::csv() const {
    std::ostringstream os;
    os.precision(10);
    os << "s,t,s2,t2,regime,measured,envelope,ratio\n";
    for (const auto& c : cells)
        os << c.s << ',' << c.t << ',' << c.s2 << ',' << c.t2 << ',' << (c.regime_t ? "t" : "s") << ',' << c.measured
           << ',' << c.envelope << ',' << c.ratio << '\n';
    return os.str();
}

OrthTable almost_orth_decay(const FrameSpec& frame, const std::vector<double>& s, const std::vector<double>& t,
                            const OrthOptions& opt) {
    frame.validate();
    if (s.empty() || t.empty()) throw std::invalid_argument("almost_orth_decay: empty scale lists");
    OrthTable tab;
    tab.s = s;
    tab.t = t;
    const std::size_t ns = s.size(), nt = t.size();
    tab.cells.resize(ns * nt * ns * nt);
    const int M = frame.M;
    const int n = frame.n;
    auto envelope = [&](double a, double b, double a2, double b2, double u, bool& regime_t) {
        const double S = std::max(a, a2), T = std::max(b, b2);
        const double rs = std::min(a / a2, a2 / a), rt = std::min(b / b2, b2 / b);
        regime_t = S * S <= T;
        if (regime_t)
            return std::pow(rs, 2 * M) * std::pow(rt, M) * std::pow(S, -2.0 * n) * std::pow(T, M) /
                   std::pow(T + std::abs(u), 1.0 + M);
        const double lead = opt.envelope == EnvelopeForm::homogeneous ? 2.0 * M : M;
        return std::pow(rs, M) * std::pow(rt, M) * std::pow(S, -2.0 * n) * std::pow(S, lead) /
               std::pow(S + std::sqrt(std::abs(u)), 2.0 + 2 * M);
    };
    const int W = 5;  // window points on the u-axis, u_k = k * (S^2 + T) / 2
    auto cell_index = [&](std::size_t is, std::size_t it, std::size_t js, std::size_t jt) {
        return ((is * nt + it) * ns + js) * nt + jt;
    };
    if (!opt.K) {
        parallel_for(tab.cells.size(), opt.threads, [&](std::size_t idx) {
            std::size_t rem = idx;
            const std::size_t jt = rem % nt;
            rem /= nt;
            const std::size_t js = rem % ns;
            rem /= ns;
            const std::size_t it = rem % nt;
            const std::size_t is = rem / nt;
            OrthCell c{s[is], t[it], s[js], t[jt]};
            const double S = std::max(c.s, c.s2), T = std::max(c.t, c.t2);
            for (int k = 0; k < W; ++k) {
                const double u = k * (S * S + T) / 2;
                const double v = std::abs(psi_pair_at(frame, c.s, c.t, c.s2, c.t2, u));
                bool rt = true;
                const double env = envelope(c.s, c.t, c.s2, c.t2, u, rt);
                if (k == 0) {
                    c.envelope = env;
                    c.regime_t = rt;
                }
                c.measured = std::max(c.measured, v);
                c.ratio = std::max(c.ratio, v / env);
            }
            tab.cells[idx] = c;
        });
    } else {
        // composite psi_{s,t} * K * psi_{s',t'} on the grid: apply K to the
        // sampled psi_{s',t'}, transform with the frame (whose range must
        // contain the lists) and take the sup over the window |z_a| <= h_a,
        // |u| <= (W - 1) (S^2 + T) / 2.
        const Grid& g = opt.grid;
        auto find = [](const std::vector<double>& v, double x) {
            for (std::size_t i = 0; i < v.size(); ++i)
                if (std::abs(v[i] - x) <= 1e-9 * x) return static_cast<long>(i);
            return -1L;
        };
        TransformOptions to;
        to.threads = opt.threads;
        std::vector<char> seen(tab.cells.size(), 0);
        for (std::size_t js = 0; js < ns; ++js)
            for (std::size_t jt = 0; jt < nt; ++jt) {
                const KernelEval psi = psi_st(frame, s[js], t[jt]);
                FuncEval pf{"psi", frame.n, psi.value, {}};
                const SampledField Kpsi = apply_flag_operator(*opt.K, sample(pf, g, opt.threads), opt.threads);
                lp_transform_each(
                    Kpsi, frame,
                    [&](const ScaleCoefficient& c) {
                        const long is = find(s, c.s), it = find(t, c.t);
                        if (is < 0 || it < 0) return;
                        OrthCell cell{c.s, c.t, s[js], t[jt]};
                        const double S = std::max(cell.s, cell.s2), T = std::max(cell.t, cell.t2);
                        const double uw = (S * S + T) / 2 * (W - 1);
                        std::vector<double> p(g.dims());
                        bool rt = true;
                        cell.envelope = envelope(cell.s, cell.t, cell.s2, cell.t2, 0.0, rt);
                        cell.regime_t = rt;
                        for (std::size_t i = 0; i < g.total(); ++i) {
                            g.point(i, p);
                            bool in = std::abs(p.back()) <= uw;
                            for (int a = 0; a + 1 < g.dims(); ++a) in = in && std::abs(p[a]) <= g.spacing[a];
                            if (!in) continue;
                            const double v = std::abs(c.field[i]);
                            cell.measured = std::max(cell.measured, v);
                            cell.ratio = std::max(cell.ratio, v / envelope(cell.s, cell.t, cell.s2, cell.t2, p.back(), rt));
                        }
                        const std::size_t idx = cell_index(is, it, js, jt);
                        tab.cells[idx] = cell;
                        seen[idx] = 1;
                    },
                    to);
            }
        if (std::find(seen.begin(), seen.end(), 0) != seen.end())
            throw std::invalid_argument("almost_orth_decay: scale lists are not inside the frame range");
    }
    // fitted constant, diagonal dominance, off-diagonal slopes
    for (const auto& c : tab.cells) tab.C = std::max(tab.C, c.ratio);
    for (std::size_t is = 0; is < ns; ++is)
        for (std::size_t it = 0; it < nt; ++it)
            for (std::size_t js = 0; js < ns; ++js)
                for (std::size_t jt = 0; jt < nt; ++jt) {
                    if (js == is && jt == it) continue;
                    const double d1 = tab.at(is, it, is, it).measured, d2 = tab.at(js, jt, js, jt).measured;
                    tab.max_normalised =
                        std::max(tab.max_normalised, tab.at(is, it, js, jt).measured / std::sqrt(d1 * d2));
                }
    // quadrature noise allowance on the Cauchy-Schwarz bound
    tab.diagonal_dominant = tab.max_normalised <= 1.0 + 1e-6;
    // normalised value m / sqrt(m_diag m'_diag) against |log ratio|, fitted through the origin
    auto slope = [&](bool along_s) {
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t is = 0; is < ns; ++is)
            for (std::size_t it = 0; it < nt; ++it)
                for (std::size_t js = 0; js < ns; ++js)
                    for (std::size_t jt = 0; jt < nt; ++jt) {
                        if (along_s ? (jt != it || js == is) : (js != is || jt == it)) continue;
                        const double m = tab.at(is, it, js, jt).measured;
                        const double d1 = tab.at(is, it, is, it).measured, d2 = tab.at(js, jt, js, jt).measured;
                        if (!(m > 0 && d1 > 0 && d2 > 0)) continue;
                        const double x = along_s ? std::abs(std::log(s[is] / s[js])) : std::abs(std::log(t[it] / t[jt]));
                        const double y = std::log(m / std::sqrt(d1 * d2));
                        sxy += x * y;
                        sxx += x * x;
                    }
        return sxx > 0 ? -sxy / sxx : 0.0;
    };
    tab.slope_s = slope(true);
    tab.slope_t = slope(false);
    return tab;
}

// ----------------------------------------------------------- boundedness ratio

std::string OperatorTable::csv() const {
    std::ostringstream os;
    os.precision(10);
    os << "function,lp_f,lp_Tf,ratio,degenerate\n";
    for (const auto& r : rows)
        os << r.function << ',' << r.lp_f << ',' << r.lp_Tf << ',' << r.ratio << ',' << r.degenerate << '\n';
    return os.str();
}

OperatorTable operator_lip_bound(const FlagKernelSpec& K, const std::vector<NamedField>& corpus, const FlagExponent& e,
                                 const FrameSpec& frame, unsigned threads, double zero_tol) {
    OperatorTable tab;
    TransformOptions opt;
    opt.threads = threads;
    for (const auto& nf : corpus) {
        OperatorRow row;
        row.function = nf.name;
        row.lp_f = lip_norm_lp(lp_sup_table(nf.field, frame, {}, opt), e).value;
        const SampledField Tf = apply_flag_operator(K, nf.field, threads);
        row.lp_Tf = lip_norm_lp(lp_sup_table(Tf, frame, {}, opt), e).value;
        row.degenerate = row.lp_f <= zero_tol;
        row.ratio = row.degenerate ? 0.0 : row.lp_Tf / row.lp_f;
        if (!row.degenerate) tab.max_ratio = std::max(tab.max_ratio, row.ratio);
        tab.rows.push_back(row);
    }
    return tab;
}

}  // namespace hflag
