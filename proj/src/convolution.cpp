#include "hflag/convolution.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "hflag/hgroup.hpp"
#include "hflag/parallel.hpp"

namespace hflag {

void KernelEval::eval_line(std::span<const double> z, double u0, double h, std::span<double> out) const {
    if (line) {
        line(z, u0, h, out);
        return;
    }
    std::vector<double> p(z.begin(), z.end());
    p.push_back(0.0);
    for (std::size_t m = 0; m < out.size(); ++m) {
        p.back() = u0 + static_cast<double>(m) * h;
        out[m] = value(p);
    }
}

namespace {

void require_same_n(const SampledField& f, int n, const char* who) {
    if (f.grid.n != n) throw std::invalid_argument(std::string(who) + ": kernel and field dimension differ");
}

// Transverse coordinates of transverse index `tr` (all axes but t).
void transverse_point(const Grid& g, std::size_t tr, std::span<double> out) {
    for (int a = g.dims() - 2; a >= 0; --a) {
        const auto c = static_cast<std::size_t>(g.counts[a]);
        out[a] = g.node(a, static_cast<int>(tr % c));
        tr /= c;
    }
}

double z_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

bool all_zero(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

// Output tiles: 8x8 blocks over the last two transverse axes, remaining
// transverse axes one at a time. Tiles are listed in a fixed order.
std::vector<std::vector<std::size_t>> transverse_tiles(const Grid& g, int block = 8) {
    const int d = g.dims() - 1;
    const int ax1 = d - 2, ax2 = d - 1;
    const int c1 = g.counts[ax1], c2 = g.counts[ax2];
    std::size_t outer = 1;
    for (int a = 0; a < ax1; ++a) outer *= static_cast<std::size_t>(g.counts[a]);
    std::vector<std::vector<std::size_t>> tiles;
    for (std::size_t o = 0; o < outer; ++o)
        for (int b1 = 0; b1 < c1; b1 += block)
            for (int b2 = 0; b2 < c2; b2 += block) {
                std::vector<std::size_t> tile;
                for (int i = b1; i < std::min(c1, b1 + block); ++i)
                    for (int j = b2; j < std::min(c2, b2 + block); ++j)
                        tile.push_back((o * c1 + i) * c2 + j);
                tiles.push_back(std::move(tile));
            }
    return tiles;
}

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};
using RealBuf = std::unique_ptr<double[], FftwFree>;
using CplxBuf = std::unique_ptr<fftw_complex[], FftwFree>;

RealBuf real_buf(std::size_t n) { return RealBuf(static_cast<double*>(fftw_malloc(sizeof(double) * n))); }
CplxBuf cplx_buf(std::size_t n) {
    return CplxBuf(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n)));
}

// Real FFT plans of one length, shareable across threads via new-array execute.
class RealFftPair {
public:
    explicit RealFftPair(int len) : len_(len) {
        RealBuf r = real_buf(len);
        CplxBuf c = cplx_buf(len / 2 + 1);
        std::lock_guard lock(fftw_planner_mutex());
        fwd_ = fftw_plan_dft_r2c_1d(len, r.get(), c.get(), FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_c2r_1d(len, c.get(), r.get(), FFTW_ESTIMATE);
    }
    ~RealFftPair() {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
    }
    RealFftPair(const RealFftPair&) = delete;
    RealFftPair& operator=(const RealFftPair&) = delete;

    void forward(double* in, fftw_complex* out) const { fftw_execute_dft_r2c(fwd_, in, out); }
    // Destroys the contents of `in`.
    void backward(fftw_complex* in, double* out) const { fftw_execute_dft_c2r(bwd_, in, out); }
    int len() const { return len_; }

private:
    int len_;
    fftw_plan fwd_{};
    fftw_plan bwd_{};
};

void maybe_check_coverage(const KernelEval& k, const Grid& g, const ConvOptions& opt) {
    if (!opt.coverage_check || !opt.warnings) return;
    const double esc = kernel_escaped_mass(k, g);
    if (esc > 1e-6) {
        std::ostringstream os;
        os << "coverage: kernel " << k.name << " has escaped mass fraction " << esc << " outside the box";
        opt.warnings->push_back(os.str());
    }
}

}  // namespace

SampledField gconv(const SampledField& f, const KernelEval& k, const ConvOptions& opt) {
    require_same_n(f, k.n, "gconv");
    maybe_check_coverage(k, f.grid, opt);
    const Grid& g = f.grid;
    const int d = g.dims();
    const std::size_t N = g.total();
    const double vol = g.cell_volume();
    SampledField out(g);
    const auto tiles = transverse_tiles(g);
    const int gt = g.t_count();
    parallel_for(tiles.size(), opt.threads, [&](std::size_t ti) {
        std::vector<double> x(d), y(d), q(d);
        for (std::size_t tr : tiles[ti]) {
            for (int it = 0; it < gt; ++it) {
                const std::size_t xi = tr * gt + it;
                g.point(xi, x);
                double acc = 0.0;
                for (std::size_t yi = 0; yi < N; ++yi) {
                    const double fy = f.values[yi];
                    if (fy == 0.0) continue;
                    g.point(yi, y);
                    for (int a = 0; a < d - 1; ++a) q[a] = x[a] - y[a];
                    q[d - 1] = x[d - 1] - y[d - 1] - twist(std::span<const double>(y).first(d - 1),
                                                           std::span<const double>(x).first(d - 1));
                    acc += fy * k.value(q);
                }
                out.values[xi] = acc * vol;
            }
        }
    });
    return out;
}

SampledField gconv_fft_t(const SampledField& f, const KernelEval& k, const ConvOptions& opt) {
    require_same_n(f, k.n, "gconv_fft_t");
    maybe_check_coverage(k, f.grid, opt);
    const Grid& g = f.grid;
    const int dz = g.dims() - 1;
    const int G = g.t_count();
    const int P = 2 * G;
    const int H = P / 2 + 1;
    const double h = g.spacing.back();
    const double vol = g.cell_volume();
    const std::size_t T = g.transverse_total();

    RealFftPair fft(P);

    // Spectra of the zero-padded input t-lines.
    std::vector<std::complex<double>> spectra(T * H);
    std::vector<char> nonzero(T, 0);
    {
        RealBuf r = real_buf(P);
        CplxBuf c = cplx_buf(H);
        for (std::size_t w = 0; w < T; ++w) {
            auto line = f.t_line(w);
            if (all_zero(line)) continue;
            nonzero[w] = 1;
            std::fill(r.get(), r.get() + P, 0.0);
            std::copy(line.begin(), line.end(), r.get());
            fft.forward(r.get(), c.get());
            for (int m = 0; m < H; ++m) spectra[w * H + m] = {c[m][0], c[m][1]};
        }
    }
    std::vector<double> zcoord(T * dz);
    for (std::size_t w = 0; w < T; ++w) transverse_point(g, w, std::span<double>(zcoord).subspan(w * dz, dz));

    SampledField out(g);
    const auto tiles = transverse_tiles(g);
    parallel_for(tiles.size(), opt.threads, [&](std::size_t ti) {
        RealBuf r = real_buf(P);
        CplxBuf c = cplx_buf(H);
        std::vector<double> kline(2 * G - 1), dvec(dz);
        std::vector<std::complex<double>> acc(H);
        for (std::size_t x : tiles[ti]) {
            std::span<const double> xz(zcoord.data() + x * dz, dz);
            std::fill(acc.begin(), acc.end(), std::complex<double>{});
            bool any = false;
            for (std::size_t w = 0; w < T; ++w) {
                if (!nonzero[w]) continue;
                std::span<const double> wz(zcoord.data() + w * dz, dz);
                if (z_distance(xz, wz) > k.z_cutoff) continue;
                for (int a = 0; a < dz; ++a) dvec[a] = xz[a] - wz[a];
                const double cshift = twist(wz, xz);
                // kline[m + G - 1] = k(d, m h - c), m = -(G-1)..(G-1)
                k.eval_line(dvec, -(G - 1) * h - cshift, h, kline);
                if (all_zero(kline)) continue;
                any = true;
                std::fill(r.get(), r.get() + P, 0.0);
                for (int m = -(G - 1); m <= G - 1; ++m) r[(m + P) % P] = kline[m + G - 1];
                fft.forward(r.get(), c.get());
                const std::complex<double>* F = spectra.data() + w * H;
                for (int m = 0; m < H; ++m) acc[m] += F[m] * std::complex<double>(c[m][0], c[m][1]);
            }
            if (!any) continue;
            for (int m = 0; m < H; ++m) {
                c[m][0] = acc[m].real();
                c[m][1] = acc[m].imag();
            }
            fft.backward(c.get(), r.get());
            auto o = out.t_line(x);
            for (int i = 0; i < G; ++i) o[i] = r[i] * (vol / P);
        }
    });
    return out;
}

KernelEval kernel_from_field(const SampledField& g) {
    auto field = std::make_shared<const SampledField>(g);
    KernelEval k;
    k.name = "interpolated_field";
    k.n = g.grid.n;
    k.value = [field](std::span<const double> p) { return interpolate(*field, p); };
    k.line = [field](std::span<const double> z, double u0, double hstep, std::span<double> out) {
        const Grid& gr = field->grid;
        const int dz = gr.dims() - 1;
        // Transverse multilinear weights, computed once per line.
        std::vector<std::size_t> rows;
        std::vector<double> weights;
        std::vector<long> base(dz);
        std::vector<double> frac(dz);
        for (int a = 0; a < dz; ++a) {
            const double xi = (z[a] + gr.half_extent[a]) / gr.spacing[a] - 0.5;
            const double f0 = std::floor(xi);
            if (f0 < -1.0 || f0 > gr.counts[a] - 1) {
                std::fill(out.begin(), out.end(), 0.0);
                return;
            }
            base[a] = static_cast<long>(f0);
            frac[a] = xi - f0;
        }
        for (unsigned mask = 0; mask < (1u << dz); ++mask) {
            double w = 1.0;
            std::size_t tr = 0;
            bool inside = true;
            for (int a = 0; a < dz; ++a) {
                const bool up = (mask >> a) & 1u;
                const long idx = base[a] + (up ? 1 : 0);
                w *= up ? frac[a] : 1.0 - frac[a];
                if (idx < 0 || idx >= gr.counts[a]) {
                    inside = false;
                    break;
                }
                tr = tr * static_cast<std::size_t>(gr.counts[a]) + static_cast<std::size_t>(idx);
            }
            if (inside && w != 0.0) {
                rows.push_back(tr);
                weights.push_back(w);
            }
        }
        const int G = gr.t_count();
        const double L = gr.half_extent.back(), ht = gr.spacing.back();
        for (std::size_t m = 0; m < out.size(); ++m) {
            const double u = u0 + static_cast<double>(m) * hstep;
            const double xi = (u + L) / ht - 0.5;
            const double f0 = std::floor(xi);
            double v = 0.0;
            if (f0 >= -1.0 && f0 <= G - 1) {
                const long i0 = static_cast<long>(f0);
                const double fr = xi - f0;
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    auto line = field->t_line(rows[r]);
                    double lo = (i0 >= 0) ? line[i0] : 0.0;
                    double hi = (i0 + 1 < G) ? line[i0 + 1] : 0.0;
                    v += weights[r] * ((1.0 - fr) * lo + fr * hi);
                }
            }
            out[m] = v;
        }
    };
    return k;
}

SampledField gconv_ff(const SampledField& f, const SampledField& g, const ConvOptions& opt) {
    if (!(f.grid == g.grid)) throw std::invalid_argument("gconv_ff: fields must share a grid");
    return gconv_fft_t(f, kernel_from_field(g), opt);
}

SampledField gconv_ff_naive(const SampledField& f, const SampledField& g, const ConvOptions& opt) {
    if (!(f.grid == g.grid)) throw std::invalid_argument("gconv_ff_naive: fields must share a grid");
    KernelEval k;
    k.n = g.grid.n;
    k.name = "interpolated_field";
    k.value = [&g](std::span<const double> p) { return interpolate(g, p); };
    return gconv(f, k, opt);
}

std::vector<double> gconv_at(const SampledField& f, const KernelEval& k,
                             const std::vector<std::vector<double>>& points, const ConvOptions& opt) {
    require_same_n(f, k.n, "gconv_at");
    const Grid& g = f.grid;
    const int dz = g.dims() - 1;
    const int G = g.t_count();
    const double h = g.spacing.back();
    const double t_last = g.node(dz, G - 1);
    const double vol = g.cell_volume();
    const std::size_t T = g.transverse_total();
    std::vector<double> zcoord(T * dz);
    std::vector<char> nonzero(T, 0);
    for (std::size_t w = 0; w < T; ++w) {
        transverse_point(g, w, std::span<double>(zcoord).subspan(w * dz, dz));
        nonzero[w] = !all_zero(f.t_line(w));
    }
    std::vector<double> out(points.size(), 0.0);
    parallel_for(points.size(), opt.threads, [&](std::size_t pi) {
        const auto& p = points[pi];
        std::span<const double> pz(p.data(), dz);
        std::vector<double> kline(G), dvec(dz);
        double acc = 0.0;
        for (std::size_t w = 0; w < T; ++w) {
            if (!nonzero[w]) continue;
            std::span<const double> wz(zcoord.data() + w * dz, dz);
            if (z_distance(pz, wz) > k.z_cutoff) continue;
            for (int a = 0; a < dz; ++a) dvec[a] = pz[a] - wz[a];
            const double cshift = twist(wz, pz);
            // kline[m] = k(d, p_t - s_{G-1-m} - c)
            k.eval_line(dvec, p[dz] - t_last - cshift, h, kline);
            auto line = f.t_line(w);
            double s = 0.0;
            for (int m = 0; m < G; ++m) s += line[G - 1 - m] * kline[m];
            acc += s;
        }
        out[pi] = acc * vol;
    });
    return out;
}

SampledField pconv2(const SampledField& f, const Kernel1D& k, const ConvOptions& opt) {
    const Grid& g = f.grid;
    const int G = g.t_count();
    const double h = g.spacing.back();
    std::vector<double> kk(2 * G - 1);
    for (int m = -(G - 1); m <= G - 1; ++m) kk[m + G - 1] = k.value(m * h) * h;
    if (opt.warnings) {
        const double esc = kernel1d_escaped_mass(k, (G - 1) * h);
        if (esc > 1e-6) {
            std::ostringstream os;
            os << "coverage: 1D kernel " << k.name << " has escaped mass fraction " << esc << " outside the t-window";
            opt.warnings->push_back(os.str());
        }
    }
    SampledField out(g);
    parallel_for(g.transverse_total(), opt.threads, [&](std::size_t tr) {
        auto in = f.t_line(tr);
        if (all_zero(in)) return;
        auto o = out.t_line(tr);
        for (int i = 0; i < G; ++i) {
            double s = 0.0;
            for (int j = 0; j < G; ++j) s += in[j] * kk[i - j + G - 1];
            o[i] = s;
        }
    });
    return out;
}

FuncEval pconv2(const FuncEval& f, const Kernel1D& k, std::vector<std::string>* warnings) {
    if (!(k.window > 0.0 && k.step > 0.0)) throw std::invalid_argument("pconv2: kernel needs a quadrature window and step");
    const auto count = static_cast<std::size_t>(std::ceil(2.0 * k.window / k.step));
    auto nodes = std::make_shared<std::vector<double>>(count);
    auto weights = std::make_shared<std::vector<double>>(count);
    const double step = 2.0 * k.window / static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
        (*nodes)[i] = -k.window + (i + 0.5) * step;
        (*weights)[i] = k.value((*nodes)[i]) * step;
    }
    if (warnings) {
        const double esc = kernel1d_escaped_mass(k, k.window);
        if (esc > 1e-6) {
            std::ostringstream os;
            os << "coverage: 1D kernel " << k.name << " has escaped mass fraction " << esc << " outside its window";
            warnings->push_back(os.str());
        }
    }
    FuncEval out;
    out.name = f.name + "*2" + k.name;
    out.n = f.n;
    out.value = [fv = f.value, nodes, weights](std::span<const double> p) {
        std::vector<double> q(p.begin(), p.end());
        const double u = p.back();
        double s = 0.0;
        for (std::size_t i = 0; i < nodes->size(); ++i) {
            q.back() = u - (*nodes)[i];
            s += fv(q) * (*weights)[i];
        }
        return s;
    };
    return out;
}

KernelEval scale_kernel1(const KernelEval& psi1, double s) {
    if (!(s > 0.0)) throw std::invalid_argument("scale_kernel1: s must be > 0");
    const int Q = 2 * psi1.n + 2;
    const double amp = std::pow(s, -Q);
    KernelEval k = psi1;
    k.name = psi1.name + "_s" + std::to_string(s);
    k.value = [v = psi1.value, s, amp](std::span<const double> p) {
        std::vector<double> q(p.begin(), p.end());
        for (std::size_t a = 0; a + 1 < q.size(); ++a) q[a] /= s;
        q.back() /= s * s;
        return amp * v(q);
    };
    k.line = [base = psi1, s, amp](std::span<const double> z, double u0, double h, std::span<double> out) {
        std::vector<double> zs(z.begin(), z.end());
        for (double& c : zs) c /= s;
        base.eval_line(zs, u0 / (s * s), h / (s * s), out);
        for (double& o : out) o *= amp;
    };
    if (psi1.derivative)
        k.derivative = [d = psi1.derivative, s, Q](std::span<const int> beta, int m_u) -> PointFn {
            PointFn df = d(beta, m_u);
            if (!df) return {};
            int order = 0;
            for (int b : beta) order += b;
            const double amp2 = std::pow(s, -Q - order - 2 * m_u);
            return [df, s, amp2](std::span<const double> p) {
                std::vector<double> q(p.begin(), p.end());
                for (std::size_t a = 0; a + 1 < q.size(); ++a) q[a] /= s;
                q.back() /= s * s;
                return amp2 * df(q);
            };
        };
    if (psi1.separated.terms > 0)
        k.separated.zpart = [zp = psi1.separated.zpart, s, amp](std::span<const double> z, std::span<double> w) {
            std::vector<double> zs(z.begin(), z.end());
            for (double& c : zs) c /= s;
            zp(zs, w);
            for (double& x : w) x *= amp;
        };
    if (psi1.separated.terms > 0)
        k.separated.uhat = [uh = psi1.separated.uhat, s](int c, double om) { return s * s * uh(c, s * s * om); };
    k.z_cutoff = psi1.z_cutoff * s;
    return k;
}

Kernel1D scale_kernel2(const Kernel1D& psi2, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("scale_kernel2: t must be > 0");
    Kernel1D k = psi2;
    k.name = psi2.name + "_t" + std::to_string(t);
    k.value = [v = psi2.value, t](double x) { return v(x / t) / t; };
    if (psi2.fourier) k.fourier = [fh = psi2.fourier, t](double eta) { return fh(t * eta); };
    k.window = psi2.window * t;
    k.step = psi2.step * t;
    return k;
}

double kernel_escaped_mass(const KernelEval& k, const Grid& grid, double pad) {
    const int d = grid.dims();
    std::vector<int> cnt(d);
    std::vector<double> lo(d);
    std::size_t total = 1;
    for (int a = 0; a < d; ++a) {
        const double L = grid.half_extent[a] * pad;
        cnt[a] = static_cast<int>(std::ceil(2.0 * L / grid.spacing[a]));
        lo[a] = -L;
        total *= static_cast<std::size_t>(cnt[a]);
    }
    std::vector<double> p(d);
    double inside = 0.0, all = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
        std::size_t r = i;
        bool in_box = true;
        for (int a = d - 1; a >= 0; --a) {
            const int idx = static_cast<int>(r % static_cast<std::size_t>(cnt[a]));
            r /= static_cast<std::size_t>(cnt[a]);
            p[a] = lo[a] + (idx + 0.5) * (2.0 * -lo[a] / cnt[a]);
            if (std::abs(p[a]) > grid.half_extent[a]) in_box = false;
        }
        const double v = std::abs(k.value(p));
        all += v;
        if (in_box) inside += v;
    }
    return all > 0.0 ? (all - inside) / all : 0.0;
}

double kernel1d_escaped_mass(const Kernel1D& k, double window) {
    const int N = 20000;
    const double L = 8.0 * window;
    const double h = 2.0 * L / N;
    double inside = 0.0, all = 0.0;
    for (int i = 0; i < N; ++i) {
        const double v = -L + (i + 0.5) * h;
        const double a = std::abs(k.value(v));
        all += a;
        if (std::abs(v) <= window) inside += a;
    }
    return all > 0.0 ? (all - inside) / all : 0.0;
}

}  // namespace hflag

namespace hflag {

SampledField reflect(const SampledField& f) {
    SampledField out(f.grid);
    const std::size_t N = f.size();
    for (std::size_t i = 0; i < N; ++i) out.values[i] = f.values[N - 1 - i];
    return out;
}

SampledField lconv_fft_t(const KernelEval& k, const SampledField& f, const ConvOptions& opt) {
    return reflect(gconv_fft_t(reflect(f), k, opt));
}

namespace {

std::vector<double> omega_grid(const Grid& g, int P) {
    const int H = P / 2 + 1;
    const double h = g.spacing.back();
    std::vector<double> om(H);
    for (int m = 0; m < H; ++m) om[m] = 2.0 * std::numbers::pi * m / (P * h);
    return om;
}

}  // namespace

std::vector<double> spectral_omegas(const Grid& g, int P) { return omega_grid(g, P); }

SpectralField gconv_spectral_t(const SampledField& f, const KernelEval& k, const ConvOptions& opt, int pad) {
    require_same_n(f, k.n, "gconv_spectral_t");
    const bool sep = k.separated.terms > 0 && k.separated.zpart && k.separated.uhat;
    if (!sep && !k.uhat_line)
        throw std::invalid_argument("gconv_spectral_t: kernel " + k.name + " has no separated form or u-transform");
    if (pad < 2) throw std::invalid_argument("gconv_spectral_t: pad must be >= 2");
    maybe_check_coverage(k, f.grid, opt);
    const Grid& g = f.grid;
    const int dz = g.dims() - 1;
    const int G = g.t_count();
    const int P = pad * G;
    const int H = P / 2 + 1;
    const double h = g.spacing.back();
    const double vol = g.cell_volume();
    const std::size_t T = g.transverse_total();
    const int terms = sep ? k.separated.terms : 0;
    const std::vector<double> om = omega_grid(g, P);

    std::vector<double> uhat(static_cast<std::size_t>(terms) * H);
    for (int c = 0; c < terms; ++c)
        for (int m = 0; m < H; ++m) uhat[c * H + m] = k.separated.uhat(c, om[m]) / h;

    RealFftPair fft(P);
    std::vector<std::complex<double>> spectra(T * H);
    std::vector<char> nonzero(T, 0);
    {
        RealBuf r = real_buf(P);
        CplxBuf c = cplx_buf(H);
        for (std::size_t w = 0; w < T; ++w) {
            auto line = f.t_line(w);
            if (all_zero(line)) continue;
            nonzero[w] = 1;
            std::fill(r.get(), r.get() + P, 0.0);
            std::copy(line.begin(), line.end(), r.get());
            fft.forward(r.get(), c.get());
            for (int m = 0; m < H; ++m) spectra[w * H + m] = {c[m][0], c[m][1]};
        }
    }
    std::vector<double> zcoord(T * dz);
    for (std::size_t w = 0; w < T; ++w) transverse_point(g, w, std::span<double>(zcoord).subspan(w * dz, dz));

    SpectralField out;
    out.grid = g;
    out.P = P;
    out.spectra.assign(T * H, {});
    const double scale = vol / P;
    const auto tiles = transverse_tiles(g);
    parallel_for(tiles.size(), opt.threads, [&](std::size_t ti) {
        std::vector<double> wz_c(terms), dvec(dz), kh(H);
        std::vector<std::complex<double>> khc(sep ? 0 : H);
        for (std::size_t x : tiles[ti]) {
            std::span<const double> xz(zcoord.data() + x * dz, dz);
            std::complex<double>* acc = out.spectra.data() + x * H;
            for (std::size_t w = 0; w < T; ++w) {
                if (!nonzero[w]) continue;
                std::span<const double> wz(zcoord.data() + w * dz, dz);
                if (z_distance(xz, wz) > k.z_cutoff) continue;
                for (int a = 0; a < dz; ++a) dvec[a] = xz[a] - wz[a];
                const double cshift = twist(wz, xz);
                const std::complex<double> rot = std::polar(1.0, -om[1] * cshift);
                const std::complex<double>* F = spectra.data() + w * H;
                if (!sep) {
                    k.uhat_line(dvec, om, khc);
                    std::complex<double> ph(1.0 / h, 0.0);
                    for (int m = 0; m < H; ++m) {
                        acc[m] += F[m] * (khc[m] * ph);
                        ph *= rot;
                    }
                    continue;
                }
                k.separated.zpart(dvec, wz_c);
                bool any = false;
                for (int c = 0; c < terms; ++c) any = any || wz_c[c] != 0.0;
                if (!any) continue;
                for (int m = 0; m < H; ++m) {
                    double s = 0.0;
                    for (int c = 0; c < terms; ++c) s += wz_c[c] * uhat[c * H + m];
                    kh[m] = s;
                }
                std::complex<double> ph(1.0, 0.0);
                for (int m = 0; m < H; ++m) {
                    acc[m] += F[m] * (kh[m] * ph);
                    ph *= rot;
                }
            }
            for (int m = 0; m < H; ++m) acc[m] *= scale;
        }
    });
    return out;
}

SampledField spectral_to_field(const SpectralField& s, const std::function<double(double)>& multiplier,
                               unsigned threads) {
    const Grid& g = s.grid;
    const int G = g.t_count();
    const int P = s.P;
    const int H = P / 2 + 1;
    const std::vector<double> om = omega_grid(g, P);
    std::vector<double> mult(H, 1.0);
    if (multiplier)
        for (int m = 0; m < H; ++m) mult[m] = multiplier(om[m]);
    RealFftPair fft(P);
    SampledField out(g);
    const std::size_t T = g.transverse_total();
    const std::size_t chunk = 64;
    parallel_for((T + chunk - 1) / chunk, threads, [&](std::size_t ci) {
        RealBuf r = real_buf(P);
        CplxBuf c = cplx_buf(H);
        for (std::size_t x = ci * chunk; x < std::min(T, (ci + 1) * chunk); ++x) {
            const std::complex<double>* sp = s.spectra.data() + x * H;
            bool any = false;
            for (int m = 0; m < H; ++m) {
                const std::complex<double> v = sp[m] * mult[m];
                c[m][0] = v.real();
                c[m][1] = v.imag();
                any = any || v != std::complex<double>{};
            }
            if (!any) continue;
            fft.backward(c.get(), r.get());
            auto o = out.t_line(x);
            for (int i = 0; i < G; ++i) o[i] = r[i];
        }
    });
    return out;
}

SampledField pconv2_spectral(const SampledField& f, const std::function<double(double)>& khat, int pad,
                             unsigned threads) {
    const Grid& g = f.grid;
    const int G = g.t_count();
    const int P = pad * G;
    const int H = P / 2 + 1;
    const std::vector<double> om = omega_grid(g, P);
    std::vector<double> kh(H);
    for (int m = 0; m < H; ++m) kh[m] = khat(om[m]) / P;
    RealFftPair fft(P);
    SampledField out(g);
    const std::size_t T = g.transverse_total();
    const std::size_t chunk = 64;
    parallel_for((T + chunk - 1) / chunk, threads, [&](std::size_t ci) {
        RealBuf r = real_buf(P);
        CplxBuf c = cplx_buf(H);
        for (std::size_t x = ci * chunk; x < std::min(T, (ci + 1) * chunk); ++x) {
            auto in = f.t_line(x);
            if (all_zero(in)) continue;
            std::fill(r.get(), r.get() + P, 0.0);
            std::copy(in.begin(), in.end(), r.get());
            fft.forward(r.get(), c.get());
            for (int m = 0; m < H; ++m) {
                c[m][0] *= kh[m];
                c[m][1] *= kh[m];
            }
            fft.backward(c.get(), r.get());
            auto o = out.t_line(x);
            for (int i = 0; i < G; ++i) o[i] = r[i];
        }
    });
    return out;
}

}  // namespace hflag
