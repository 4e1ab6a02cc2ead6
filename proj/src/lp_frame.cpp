#include "hflag/lp_frame.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "hflag/parallel.hpp"
#include "hflag/special.hpp"

namespace hflag {

namespace {

constexpr double kPi = std::numbers::pi;

// All compositions of `total` into `parts` non-negative integers.
void compositions(int total, int parts, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (static_cast<int>(cur.size()) == parts - 1) {
        cur.push_back(total);
        out.push_back(cur);
        cur.pop_back();
        return;
    }
    for (int k = total; k >= 0; --k) {
        cur.push_back(k);
        compositions(total - k, parts, cur, out);
        cur.pop_back();
    }
}

}  // namespace

void FrameSpec::validate() const {
    if (n < 1) throw std::invalid_argument("frame: n must be >= 1");
    if (M < 2) throw std::invalid_argument("frame: M must be >= 2");
    if (psi2_order < 1) throw std::invalid_argument("frame: psi2_order must be >= 1");
    if (!(psi2_peak > 0.0)) throw std::invalid_argument("frame: psi2_peak must be > 0");
    if (!(j_min < j_max)) throw std::invalid_argument("frame: need j_min < j_max");
    if (!(k_min < k_max)) throw std::invalid_argument("frame: need k_min < k_max");
    if (voices_s < 1 || voices_t < 1) throw std::invalid_argument("frame: voices must be >= 1");
    if (pad < 2) throw std::invalid_argument("frame: pad must be >= 2");
}

std::vector<double> FrameSpec::s_values() const {
    std::vector<double> v;
    for (int j = j_min * voices_s; j <= j_max * voices_s; ++j) v.push_back(std::exp2(-static_cast<double>(j) / voices_s));
    return v;
}

std::vector<double> FrameSpec::t_values() const {
    std::vector<double> v;
    for (int k = k_min * voices_t; k <= k_max * voices_t; ++k) v.push_back(std::exp2(-static_cast<double>(k) / voices_t));
    return v;
}

double FrameSpec::weight() const { return (std::numbers::ln2 / voices_s) * (std::numbers::ln2 / voices_t); }

std::string FrameSpec::id() const {
    std::ostringstream os;
    os << "n" << n << "_M" << M << "_p" << psi2_order << "_peak" << psi2_peak << "_j" << j_min << ".." << j_max << "_k"
       << k_min << ".." << k_max << "_v" << voices_s << "x" << voices_t;
    return os.str();
}

// --- psi1 -------------------------------------------------------------------

Psi1::Psi1(int M, int n) : M_(M), n_(n) {
    if (M < 2) throw std::invalid_argument("build_psi1: M must be >= 2");
    if (n < 1) throw std::invalid_argument("build_psi1: n must be >= 1");
    const int d = 2 * n + 1;
    // int |psihat(s xi)|^2 ds/s = 1 along any pure-z direction
    cM_ = 1.0 / std::sqrt(std::pow(kPi, d) * std::exp2(2 * M - 1) * std::tgamma(2.0 * M));
    const double sign = (M % 2 == 0) ? 1.0 : -1.0;
    groups_.resize(M + 1);
    for (int c = 0; c <= M; ++c) {
        std::vector<std::vector<int>> comps;
        std::vector<int> cur;
        compositions(M - c, 2 * n, cur, comps);
        for (auto& a : comps) {
            std::vector<int> parts = a;
            parts.push_back(c);
            groups_[c].push_back({a, sign * cM_ * multinomial(parts)});
        }
    }
}

void Psi1::zpart(std::span<const double> z, double s, std::span<double> w) const {
    const int dz = 2 * n_;
    const int K = 2 * M_;
    thread_local std::vector<double> H;
    H.resize(static_cast<std::size_t>(dz) * (K + 1));
    double r2 = 0.0;
    for (int i = 0; i < dz; ++i) {
        const double x = z[i] / s;
        r2 += x * x;
        hermite_all(K, x, std::span<double>(H.data() + i * (K + 1), K + 1));
    }
    const double amp = std::pow(s, -(2 * n_ + 2)) * std::exp(-r2);
    for (int c = 0; c <= M_; ++c) {
        double acc = 0.0;
        for (const Term& t : groups_[c]) {
            double p = t.coeff;
            for (int i = 0; i < dz; ++i) p *= H[i * (K + 1) + 2 * t.a[i]];
            acc += p;
        }
        w[c] = acc * amp;
    }
}

double Psi1::value(std::span<const double> p, double s) const {
    const int dz = 2 * n_;
    double w[64];
    zpart(p.first(dz), s, std::span<double>(w, M_ + 1));
    const double u = p[dz] / (s * s);
    double H[130];
    hermite_all(2 * M_, u, std::span<double>(H, 2 * M_ + 1));
    const double g = std::exp(-u * u);
    double acc = 0.0;
    for (int c = 0; c <= M_; ++c) acc += w[c] * H[2 * c];
    return acc * g;
}

namespace {

// u-profile of psi1_s *_2 psi2_t for group c: (U_c * psi2_t)(u).
struct StProfile {
    double beta = 0.0;
    std::vector<double> coef;  // per c
    int p = 0;
};

StProfile st_profile(int M, double s, double t, int p, double b) {
    StProfile pr;
    pr.p = p;
    const double sigma = s * s;
    pr.beta = sigma * sigma / 4.0 + b * t * t;
    const double lnA = 0.5 * (std::log(2.0) + 2.0 * p * std::log(2.0 * b) - std::lgamma(2.0 * p));
    const double sign = (p % 2 == 0) ? 1.0 : -1.0;
    for (int c = 0; c <= M; ++c) {
        const int k = c + p;
        const double lg = (2 * c + 1) * std::log(sigma) + 0.5 * std::log(kPi) + lnA + 2.0 * p * std::log(t) -
                          0.5 * std::log(4.0 * kPi * pr.beta) - k * std::log(4.0 * pr.beta);
        pr.coef.push_back(sign * std::exp(lg));
    }
    return pr;
}

}  // namespace

double Psi1::value_st(std::span<const double> p, double s, double t, int psi2_order, double psi2_b) const {
    const int dz = 2 * n_;
    double w[64];
    zpart(p.first(dz), s, std::span<double>(w, M_ + 1));
    const StProfile pr = st_profile(M_, s, t, psi2_order, psi2_b);
    const double y = p[dz] / (2.0 * std::sqrt(pr.beta));
    const int K = 2 * M_ + 2 * psi2_order;
    std::vector<double> H(K + 1);
    hermite_all(K, y, H);
    double acc = 0.0;
    for (int c = 0; c <= M_; ++c) acc += w[c] * pr.coef[c] * H[2 * c + 2 * psi2_order];
    return acc * std::exp(-y * y);
}

double Psi1::fourier(std::span<const double> xi) const {
    double r2 = 0.0;
    for (double x : xi) r2 += x * x;
    return cM_ * std::pow(kPi, (2 * n_ + 1) / 2.0) * std::pow(r2, M_) * std::exp(-r2 / 4.0);
}

double Psi1::derivative(std::span<const int> beta, int m_u, std::span<const double> p) const {
    const int dz = 2 * n_;
    if (static_cast<int>(beta.size()) != dz) throw std::invalid_argument("psi1 derivative: beta has wrong length");
    double r2 = 0.0;
    for (int i = 0; i <= dz; ++i) r2 += p[i] * p[i];
    int sign_order = m_u;
    for (int b : beta) sign_order += b;
    double acc = 0.0;
    for (int c = 0; c <= M_; ++c) {
        const double hu = hermite(2 * c + m_u, p[dz]);
        for (const Term& t : groups_[c]) {
            double v = t.coeff * hu;
            for (int i = 0; i < dz; ++i) v *= hermite(2 * t.a[i] + beta[i], p[i]);
            acc += v;
        }
    }
    // d^k [H_j e^{-x^2}] = (-1)^k H_{j+k} e^{-x^2}
    return ((sign_order % 2 == 0) ? 1.0 : -1.0) * acc * std::exp(-r2);
}

KernelEval psi1_scaled(const Psi1& psi, double s) {
    if (!(s > 0.0)) throw std::invalid_argument("psi1_scaled: s must be > 0");
    auto P = std::make_shared<const Psi1>(psi);
    const int n = psi.n();
    const int M = psi.M();
    const int dz = 2 * n;
    const double sigma = s * s;
    KernelEval k;
    k.name = "psi1_M" + std::to_string(M) + (s == 1.0 ? std::string() : "_s" + std::to_string(s));
    k.n = n;
    k.value = [P, s](std::span<const double> p) { return P->value(p, s); };
    k.line = [P, s, M, sigma](std::span<const double> z, double u0, double h, std::span<double> out) {
        double w[64];
        P->zpart(z, s, std::span<double>(w, M + 1));
        double H[130];
        for (std::size_t m = 0; m < out.size(); ++m) {
            const double u = (u0 + static_cast<double>(m) * h) / sigma;
            const double g = std::exp(-u * u);
            if (g == 0.0) {
                out[m] = 0.0;
                continue;
            }
            hermite_all(2 * M, u, std::span<double>(H, 2 * M + 1));
            double acc = 0.0;
            for (int c = 0; c <= M; ++c) acc += w[c] * H[2 * c];
            out[m] = acc * g;
        }
    };
    k.derivative = [P, s, n, dz](std::span<const int> beta, int m_u) -> PointFn {
        if (static_cast<int>(beta.size()) != dz || m_u < 0) return {};
        int order = 0;
        for (int b : beta) {
            if (b < 0) return {};
            order += b;
        }
        const double amp = std::pow(s, -(2 * n + 2) - order - 2 * m_u);
        std::vector<int> bv(beta.begin(), beta.end());
        return [P, s, amp, bv, m_u](std::span<const double> p) {
            std::vector<double> q(p.begin(), p.end());
            for (std::size_t a = 0; a + 1 < q.size(); ++a) q[a] /= s;
            q.back() /= s * s;
            return amp * P->derivative(bv, m_u, q);
        };
    };
    k.z_cutoff = 7.0 * s;
    k.even_in_u = true;
    k.radial_in_z = true;
    k.separated.terms = M + 1;
    k.separated.zpart = [P, s](std::span<const double> z, std::span<double> w) { P->zpart(z, s, w); };
    k.separated.uhat = [sigma](int c, double om) {
        const double sign = (c % 2 == 0) ? 1.0 : -1.0;
        return sign * std::pow(sigma, 2 * c + 1) * std::sqrt(kPi) * std::pow(om, 2 * c) *
               std::exp(-sigma * sigma * om * om / 4.0);
    };
    return k;
}

KernelEval build_psi1(int M, int n) { return psi1_scaled(Psi1(M, n), 1.0); }

// --- psi2 -------------------------------------------------------------------

Psi2 make_psi2(int order, double peak) {
    if (order < 1) throw std::invalid_argument("build_psi2: order must be >= 1");
    if (!(peak > 0.0)) throw std::invalid_argument("build_psi2: peak must be > 0");
    Psi2 q;
    q.p = order;
    q.b = order / (peak * peak);
    q.A = std::sqrt(2.0 * std::pow(2.0 * q.b, 2 * order) / std::tgamma(2.0 * order));
    return q;
}

double Psi2::value(double v) const {
    const double y = v / (2.0 * std::sqrt(b));
    const double sign = (p % 2 == 0) ? 1.0 : -1.0;
    return sign * A / std::sqrt(4.0 * kPi * b) * std::pow(4.0 * b, -p) * hermite(2 * p, y) * std::exp(-y * y);
}

double Psi2::fourier(double eta) const { return A * std::pow(eta * eta, p) * std::exp(-b * eta * eta); }

Kernel1D Psi2::kernel() const {
    Kernel1D k;
    k.name = "psi2_p" + std::to_string(p);
    k.value = [q = *this](double v) { return q.value(v); };
    k.fourier = [q = *this](double e) { return q.fourier(e); };
    k.window = 64.0;
    k.step = 1.0 / 16.0;
    k.even = true;
    return k;
}

Kernel1D build_psi2(int order, double peak) { return make_psi2(order, peak).kernel(); }

double psi2_inverse_fourier(const Psi2& psi, double v) {
    // psihat is even and flat to high order at 0, so the trapezoid rule on
    // [0, L] converges spectrally; psihat(L) is below 1e-30 for L = 12/sqrt(b).
    const double L = 12.0 / std::sqrt(psi.b) * std::max(1.0, std::sqrt(psi.p / 5.0));
    const int N = 40000;
    const double h = L / N;
    double acc = 0.5 * psi.fourier(0.0);
    for (int i = 1; i <= N; ++i) {
        const double e = i * h;
        acc += psi.fourier(e) * std::cos(e * v);
    }
    return acc * h / kPi;
}

double admissibility_constant(const std::function<double(double)>& psihat, double eta, const DyadicQuadrature& q) {
    if (eta == 0.0) throw std::invalid_argument("admissibility_constant: eta must be nonzero");
    if (!(q.log2_hi > q.log2_lo) || q.nodes < 1) throw std::invalid_argument("admissibility_constant: bad quadrature");
    const double lo = q.log2_lo * std::numbers::ln2;
    const double hi = q.log2_hi * std::numbers::ln2;
    const double h = (hi - lo) / q.nodes;
    double acc = 0.0;
    for (int i = 0; i < q.nodes; ++i) {
        const double t = std::exp(lo + (i + 0.5) * h);
        const double v = psihat(t * eta);
        acc += v * v;
    }
    return acc * h;
}

// --- psi_{s,t} --------------------------------------------------------------

KernelEval psi_st(const FrameSpec& frame, double s, double t) {
    frame.validate();
    if (!(s > 0.0 && t > 0.0)) throw std::invalid_argument("psi_st: s and t must be > 0");
    const Psi1 psi(frame.M, frame.n);
    const Psi2 q = make_psi2(frame.psi2_order, frame.psi2_peak);
    KernelEval k = psi1_scaled(psi, s);
    auto P = std::make_shared<const Psi1>(psi);
    const int M = frame.M;
    const int p = q.p;
    auto pr = std::make_shared<const StProfile>(st_profile(M, s, t, p, q.b));
    std::ostringstream name;
    name << "psi_st(" << s << "," << t << ")";
    k.name = name.str();
    k.value = [P, s, t, p, b = q.b](std::span<const double> x) { return P->value_st(x, s, t, p, b); };
    k.line = [P, s, M, p, pr](std::span<const double> z, double u0, double h, std::span<double> out) {
        double w[64];
        P->zpart(z, s, std::span<double>(w, M + 1));
        const int K = 2 * M + 2 * p;
        std::vector<double> H(K + 1);
        const double sc = 1.0 / (2.0 * std::sqrt(pr->beta));
        for (std::size_t m = 0; m < out.size(); ++m) {
            const double y = (u0 + static_cast<double>(m) * h) * sc;
            const double g = std::exp(-y * y);
            if (g == 0.0) {
                out[m] = 0.0;
                continue;
            }
            hermite_all(K, y, H);
            double acc = 0.0;
            for (int c = 0; c <= M; ++c) acc += w[c] * pr->coef[c] * H[2 * c + 2 * p];
            out[m] = acc * g;
        }
    };
    k.derivative = {};
    k.separated.uhat = [u1 = k.separated.uhat, q, t](int c, double om) { return u1(c, om) * q.fourier(t * om); };
    return k;
}

KernelEval psi_st_quadrature(const FrameSpec& frame, double s, double t) {
    frame.validate();
    if (!(s > 0.0 && t > 0.0)) throw std::invalid_argument("psi_st_quadrature: s and t must be > 0");
    const KernelEval k1 = psi1_scaled(Psi1(frame.M, frame.n), s);
    Kernel1D k2 = scale_kernel2(build_psi2(frame.psi2_order, frame.psi2_peak), t);
    k2.window = 64.0 * std::max(t, s * s);
    k2.step = std::min(t, s * s) / 16.0;
    FuncEval f;
    f.name = k1.name;
    f.n = k1.n;
    f.value = k1.value;
    const FuncEval g = pconv2(f, k2);
    KernelEval out;
    out.name = "psi_st_quad(" + std::to_string(s) + "," + std::to_string(t) + ")";
    out.n = frame.n;
    out.value = g.value;
    out.z_cutoff = k1.z_cutoff;
    out.even_in_u = true;
    out.radial_in_z = true;
    return out;
}

// --- moments ----------------------------------------------------------------

namespace {

// Nodes -L + i h, i = 0..2L/h, and their powers 0..K.
struct PowerTable {
    std::vector<double> x;
    std::vector<double> pw;  // x.size() * (K + 1)
    int K = 0;
    PowerTable(double L, double h, int K_) : K(K_) {
        const int N = static_cast<int>(std::lround(2.0 * L / h));
        for (int i = 0; i <= N; ++i) x.push_back(-L + i * h);
        pw.resize(x.size() * (K + 1));
        for (std::size_t i = 0; i < x.size(); ++i) {
            double p = 1.0;
            for (int k = 0; k <= K; ++k, p *= x[i]) pw[i * (K + 1) + k] = p;
        }
    }
    double at(std::size_t i, int k) const { return pw[i * (K + 1) + k]; }
};

}  // namespace

std::vector<double> psi1_moments(const Psi1& psi, int max_order) {
    if (psi.n() != 1) throw std::invalid_argument("psi1_moments: only n = 1 is supported");
    if (max_order < 0) throw std::invalid_argument("psi1_moments: negative order");
    const double h = 0.2, L = 9.0;
    const PowerTable P(L, h, max_order);
    const std::size_t N = P.x.size();
    // reduce over u, then y, then x; A[c] holds sum_u u^c psi for one (x, y)
    std::vector<double> Y(N * (max_order + 1) * (max_order + 1), 0.0);  // (ix, b, c)
    std::vector<double> p(3);
    for (std::size_t ix = 0; ix < N; ++ix)
        for (std::size_t iy = 0; iy < N; ++iy) {
            std::vector<double> A(max_order + 1, 0.0);
            for (std::size_t iu = 0; iu < N; ++iu) {
                p = {P.x[ix], P.x[iy], P.x[iu]};
                const double v = psi.value(p);
                for (int c = 0; c <= max_order; ++c) A[c] += v * P.at(iu, c);
            }
            for (int b = 0; b <= max_order; ++b)
                for (int c = 0; b + c <= max_order; ++c)
                    Y[(ix * (max_order + 1) + b) * (max_order + 1) + c] += P.at(iy, b) * A[c];
        }
    std::vector<double> worst(max_order + 1, 0.0);
    const double vol = h * h * h;
    for (int a = 0; a <= max_order; ++a)
        for (int b = 0; a + b <= max_order; ++b)
            for (int c = 0; a + b + c <= max_order; ++c) {
                double m = 0.0;
                for (std::size_t ix = 0; ix < N; ++ix)
                    m += P.at(ix, a) * Y[(ix * (max_order + 1) + b) * (max_order + 1) + c];
                worst[a + b + c] = std::max(worst[a + b + c], std::abs(m * vol));
            }
    return worst;
}

std::vector<double> psi2_moments(const Psi2& psi, int max_order) {
    if (max_order < 0) throw std::invalid_argument("psi2_moments: negative order");
    // psi2 is a Hermite polynomial times exp(-v^2 / 4b)
    const double w = std::sqrt(psi.b);
    // int |v|^8 |psi2| is ~1e8 for b = 5, so double roundoff alone is ~1e-8
    // at k = 8; nodes, powers, profile and sums are all long double
    const long double sign = (psi.p % 2 == 0) ? 1.0L : -1.0L;
    const long double amp = sign * psi.A / std::sqrt(4.0L * kPi * psi.b) * std::pow(4.0L * psi.b, -psi.p);
    auto value = [&](long double v) {
        const long double y = v / (2.0L * std::sqrt(static_cast<long double>(psi.b)));
        long double a = 1.0L, h = 2.0L * y;
        for (int j = 1; j < 2 * psi.p; ++j) {
            const long double c = 2.0L * y * h - 2.0L * j * a;
            a = h;
            h = c;
        }
        return amp * h * std::exp(-y * y);
    };
    const long double h = static_cast<long double>(w) / 8.0L, L = 40.0L * w;
    const int N = 640;
    std::vector<long double> acc(max_order + 1, 0.0L);
    for (int i = 0; i <= N; ++i) {
        const long double x = -L + i * h;
        long double v = value(x);
        for (int k = 0; k <= max_order; ++k, v *= x) acc[k] += v;
    }
    std::vector<double> m(max_order + 1);
    for (int k = 0; k <= max_order; ++k) m[k] = static_cast<double>(std::abs(acc[k] * h));
    return m;
}

std::vector<double> flag_moments(const FrameSpec& frame, double s, double t, std::span<const double> z,
                                 int max_order) {
    if (max_order < 0) throw std::invalid_argument("flag_moments: negative order");
    if (static_cast<int>(z.size()) != 2 * frame.n) throw std::invalid_argument("flag_moments: z needs 2n entries");
    const KernelEval k = psi_st(frame, s, t);
    const Psi2 q = make_psi2(frame.psi2_order, frame.psi2_peak);
    // u-profile exp(-u^2 / 4 beta)
    const double w = std::sqrt(s * s * s * s / 4.0 + q.b * t * t);
    const int N = 640;
    const double h = w / 8.0, L = 40.0 * w;
    std::vector<double> line(N + 1);
    k.eval_line(z, -L, h, line);
    // powers and sums in long double, as for psi2
    std::vector<long double> acc(max_order + 1, 0.0L);
    for (int i = 0; i <= N; ++i) {
        const long double x = -static_cast<long double>(L) + i * static_cast<long double>(h);
        long double v = line[i];
        for (int g = 0; g <= max_order; ++g, v *= x) acc[g] += v;
    }
    std::vector<double> m(max_order + 1);
    for (int g = 0; g <= max_order; ++g) m[g] = static_cast<double>(acc[g] * h);
    return m;
}

double partial_z_moment(const FrameSpec& frame, double s, double t, double u) {
    if (frame.n != 1) throw std::invalid_argument("partial_z_moment: only n = 1 is supported");
    const KernelEval k = psi_st(frame, s, t);
    const double h = s / 8.0, L = 10.0 * s;
    const int N = static_cast<int>(std::lround(2.0 * L / h));
    double acc = 0.0;
    std::vector<double> p(3);
    for (int i = 0; i <= N; ++i)
        for (int j = 0; j <= N; ++j) {
            p = {-L + i * h, -L + j * h, u};
            acc += k.value(p);
        }
    return acc * h * h;
}

// --- projection -------------------------------------------------------------

FuncEval projection_pi(const ProductFn& F, int n, const ProjectionWindow& w, std::vector<std::string>* warnings) {
    if (!(w.half_width > 0.0 && w.step > 0.0)) throw std::invalid_argument("projection_pi: bad window");
    const auto count = static_cast<std::size_t>(std::ceil(2.0 * w.half_width / w.step));
    const double step = 2.0 * w.half_width / static_cast<double>(count);
    if (warnings) {
        // escaped mass at the origin over a doubled window
        std::vector<double> q(2 * n + 1, 0.0);
        double inside = 0.0, all = 0.0;
        for (std::size_t i = 0; i < 2 * count; ++i) {
            const double v = -2.0 * w.half_width + (i + 0.5) * step;
            q.back() = -v;
            const double a = std::abs(F(q, v));
            all += a;
            if (std::abs(v) <= w.half_width) inside += a;
        }
        if (all > 0.0 && (all - inside) / all > 1e-6) {
            std::ostringstream os;
            os << "coverage: projection window " << w.half_width << " misses mass fraction " << (all - inside) / all;
            warnings->push_back(os.str());
        }
    }
    FuncEval out;
    out.name = "pi(F)";
    out.n = n;
    out.value = [F, count, step, L = w.half_width](std::span<const double> p) {
        std::vector<double> q(p.begin(), p.end());
        const double u = p.back();
        double acc = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
            const double v = -L + (static_cast<double>(i) + 0.5) * step;
            q.back() = u - v;
            acc += F(q, v);
        }
        return acc * step;
    };
    return out;
}

// --- transform and reconstruction -------------------------------------------

namespace {

// psi1_s *_H g as a left convolution, spectrum in t of the reflected result.
SpectralField left_spectral(const Psi1& psi, double s, const SampledField& g, const FrameSpec& frame, unsigned threads) {
    ConvOptions opt;
    opt.threads = threads;
    return gconv_spectral_t(reflect(g), psi1_scaled(psi, s), opt, frame.pad);
}

double z_spacing(const Grid& g) {
    double h = 0.0;
    for (int a = 0; a + 1 < g.dims(); ++a) h = std::max(h, g.spacing[a]);
    return h;
}

bool unresolved(double s, const Grid& g, const TransformOptions& opt) { return s < opt.resolve_factor * z_spacing(g); }

std::string unresolved_note(double s, const Grid& g) {
    std::ostringstream os;
    os << "resolution: s=" << s << " is below the z-spacing guard (h=" << z_spacing(g) << "); coefficients set to 0";
    return os.str();
}

int voice_index(double x, int voices) { return static_cast<int>(std::lround(-std::log2(x) * voices)); }

void fit_kappa(Reconstruction& r, const SampledField* reference) {
    r.kappa = 1.0;
    r.calibrated = r.raw;
    r.rel_error = 0.0;
    if (!reference) return;
    if (!(reference->grid == r.raw.grid)) throw std::invalid_argument("reconstruct: reference grid mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < r.raw.size(); ++i) {
        num += r.raw[i] * (*reference)[i];
        den += r.raw[i] * r.raw[i];
    }
    if (den > 0.0) r.kappa = num / den;
    for (double& v : r.calibrated.values) v *= r.kappa;
    const double ref = l2_norm(*reference);
    r.rel_error = ref > 0.0 ? l2_distance(r.calibrated, *reference) / ref : l2_norm(r.calibrated);
}

void same_family(const FrameSpec& a, const FrameSpec& b) {
    if (a.n != b.n || a.M != b.M || a.psi2_order != b.psi2_order || a.psi2_peak != b.psi2_peak ||
        a.voices_s != b.voices_s || a.voices_t != b.voices_t || a.pad != b.pad)
        throw std::invalid_argument("frames differ in more than their ranges");
}

void add_scaled(SampledField& acc, const SampledField& x, double w) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * x[i];
}

}  // namespace

std::vector<std::string> lp_transform_each(const SampledField& f, const FrameSpec& frame,
                                           const std::function<void(const ScaleCoefficient&)>& sink,
                                           const TransformOptions& opt) {
    frame.validate();
    if (f.grid.n != frame.n) throw std::invalid_argument("lp_transform: dimension mismatch");
    const Psi1 psi(frame.M, frame.n);
    const Psi2 q = make_psi2(frame.psi2_order, frame.psi2_peak);
    std::vector<std::string> warnings;
    const auto ts = frame.t_values();
    for (double s : frame.s_values()) {
        const bool skip = unresolved(s, f.grid, opt);
        if (skip) warnings.push_back(unresolved_note(s, f.grid));
        SpectralField S;
        if (!skip) S = left_spectral(psi, s, f, frame, opt.threads);
        for (double t : ts) {
            ScaleCoefficient c;
            c.s = s;
            c.t = t;
            c.jv = voice_index(s, frame.voices_s);
            c.kv = voice_index(t, frame.voices_t);
            c.field = skip ? SampledField(f.grid)
                           : reflect(spectral_to_field(S, [&q, t](double om) { return q.fourier(t * om); }, opt.threads));
            sink(c);
        }
    }
    return warnings;
}

Coefficients lp_transform(const SampledField& f, const FrameSpec& frame, const TransformOptions& opt) {
    Coefficients out;
    out.frame = frame;
    out.warnings = lp_transform_each(f, frame, [&out](const ScaleCoefficient& c) { out.items.push_back(c); }, opt);
    return out;
}

Reconstruction reconstruct(const Coefficients& coeffs, const FrameSpec& frame, const SampledField* reference,
                           const TransformOptions& opt) {
    frame.validate();
    same_family(coeffs.frame, frame);
    const Psi1 psi(frame.M, frame.n);
    const Psi2 q = make_psi2(frame.psi2_order, frame.psi2_peak);
    const int jlo = frame.j_min * frame.voices_s, jhi = frame.j_max * frame.voices_s;
    const int klo = frame.k_min * frame.voices_t, khi = frame.k_max * frame.voices_t;
    // group by s; g_s = sum_t psi2_t *_2 c_{s,t}
    std::map<int, SampledField> g;
    std::map<int, double> svalue;
    for (const auto& c : coeffs.items) {
        if (c.jv < jlo || c.jv > jhi || c.kv < klo || c.kv > khi) continue;
        SampledField part = pconv2_spectral(c.field, [&q, t = c.t](double om) { return q.fourier(t * om); },
                                            frame.pad, opt.threads);
        auto it = g.find(c.jv);
        if (it == g.end()) {
            g.emplace(c.jv, std::move(part));
            svalue[c.jv] = c.s;
        } else {
            add_scaled(it->second, part, 1.0);
        }
    }
    Reconstruction r;
    if (g.empty()) {
        if (coeffs.items.empty()) throw std::invalid_argument("reconstruct: no coefficients");
        r.raw = SampledField(coeffs.items.front().field.grid);
    } else {
        r.raw = SampledField(g.begin()->second.grid);
    }
    for (auto& [jv, gs] : g) {
        bool any = false;
        for (double v : gs.values) any = any || v != 0.0;
        if (!any) continue;
        const SampledField part = reflect(spectral_to_field(left_spectral(psi, svalue[jv], gs, frame, opt.threads), {},
                                                            opt.threads));
        add_scaled(r.raw, part, frame.weight());
    }
    r.warnings = coeffs.warnings;
    fit_kappa(r, reference);
    return r;
}

std::vector<Reconstruction> reconstruction_sweep(const SampledField& f, const std::vector<FrameSpec>& frames,
                                                 const SampledField& reference, const TransformOptions& opt) {
    if (frames.empty()) throw std::invalid_argument("reconstruction_sweep: no frames");
    FrameSpec uni = frames.front();
    for (const auto& fr : frames) {
        fr.validate();
        same_family(uni, fr);
        uni.j_min = std::min(uni.j_min, fr.j_min);
        uni.j_max = std::max(uni.j_max, fr.j_max);
        uni.k_min = std::min(uni.k_min, fr.k_min);
        uni.k_max = std::max(uni.k_max, fr.k_max);
    }
    if (f.grid.n != uni.n) throw std::invalid_argument("reconstruction_sweep: dimension mismatch");
    const Psi1 psi(uni.M, uni.n);
    const Psi2 q = make_psi2(uni.psi2_order, uni.psi2_peak);
    std::vector<Reconstruction> out(frames.size());
    for (auto& r : out) r.raw = SampledField(f.grid);
    const auto ts = uni.t_values();
    for (double s : uni.s_values()) {
        if (unresolved(s, f.grid, opt)) {
            for (auto& r : out) r.warnings.push_back(unresolved_note(s, f.grid));
            continue;
        }
        const int jv = voice_index(s, uni.voices_s);
        std::vector<std::size_t> active;
        for (std::size_t i = 0; i < frames.size(); ++i)
            if (jv >= frames[i].j_min * uni.voices_s && jv <= frames[i].j_max * uni.voices_s) active.push_back(i);
        const SpectralField S = left_spectral(psi, s, f, uni, opt.threads);
        std::vector<SampledField> g(frames.size());
        for (std::size_t i : active) g[i] = SampledField(f.grid);
        for (double t : ts) {
            const int kv = voice_index(t, uni.voices_t);
            auto mult = [&q, t](double om) { return q.fourier(t * om); };
            const SampledField c = reflect(spectral_to_field(S, mult, opt.threads));
            const SampledField part = pconv2_spectral(c, mult, uni.pad, opt.threads);
            for (std::size_t i : active)
                if (kv >= frames[i].k_min * uni.voices_t && kv <= frames[i].k_max * uni.voices_t)
                    add_scaled(g[i], part, 1.0);
        }
        for (std::size_t i : active) {
            const SampledField back =
                reflect(spectral_to_field(left_spectral(psi, s, g[i], uni, opt.threads), {}, opt.threads));
            add_scaled(out[i].raw, back, uni.weight());
        }
    }
    for (auto& r : out) fit_kappa(r, &reference);
    return out;
}

}  // namespace hflag
