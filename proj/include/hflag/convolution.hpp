#pragma once

#include <complex>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hflag/sampling.hpp"

namespace hflag {

// Fills out[m] = k(z, u0 + m*h) for m = 0..out.size()-1.
using LineFn = std::function<void(std::span<const double> z, double u0, double h, std::span<double> out)>;

// Analytic kernel on H^n, called with flat coordinates (x_1, y_1, ..., t).
struct KernelEval {
    std::string name;
    int n = 1;
    PointFn value;
    // Optional fast evaluation along a line in u; falls back to `value`.
    LineFn line;
    // Optional exact partial derivatives, same convention as FuncEval.
    std::function<PointFn(std::span<const int>, int)> derivative;
    // Decay descriptor. The kernel is treated as exactly zero for |z| > z_cutoff
    // (a compact-support radius or an effective Gaussian cutoff); decay_order
    // is the polynomial decay rate in the homogeneous norm when known (0 = unknown).
    double z_cutoff = std::numeric_limits<double>::infinity();
    double decay_order = 0.0;
    bool even_in_u = false;
    bool radial_in_z = false;
    // Optional separated form k(z,u) = sum_c W_c(z) U_c(u), with the Fourier
    // transform in u of each U_c. Used by the spectral-in-t path.
    struct Separated {
        int terms = 0;
        std::function<void(std::span<const double> z, std::span<double> w)> zpart;
        std::function<double(int c, double omega)> uhat;
    };
    Separated separated;
    // Optional u-transform of k(z, .) at fixed z, int k(z,u) e^{-i omega u} du,
    // used by the spectral-in-t path when there is no separated form.
    using UhatLine = std::function<void(std::span<const double> z, std::span<const double> omega,
                                        std::span<std::complex<double>> out)>;
    UhatLine uhat_line;

    double operator()(std::span<const double> p) const { return value(p); }
    void eval_line(std::span<const double> z, double u0, double h, std::span<double> out) const;
};

// Kernel on R (central variable only).
struct Kernel1D {
    std::string name;
    std::function<double(double)> value;
    std::function<double(double)> fourier;  // optional exact transform int k(v) e^{-i eta v} dv
    double window = 0.0;                   // quadrature half-width for analytic use
    double step = 0.0;                     // quadrature step for analytic use
    bool even = false;

    double operator()(double v) const { return value(v); }
};

struct ConvOptions {
    unsigned threads = 0;                     // 0 = hardware concurrency
    std::vector<std::string>* warnings = nullptr;
    bool coverage_check = false;              // run the kernel mass-coverage check
};

// Riemann-sum group convolution out(x) = sum_y f(y) k(y^{-1} x) vol, naive path.
SampledField gconv(const SampledField& f, const KernelEval& k, const ConvOptions& opt = {});
// Same sum, t-contraction done by FFT per transverse pair.
SampledField gconv_fft_t(const SampledField& f, const KernelEval& k, const ConvOptions& opt = {});
// Field-field convolution, g evaluated at y^{-1} x by multilinear interpolation.
SampledField gconv_ff(const SampledField& f, const SampledField& g, const ConvOptions& opt = {});
// Reference naive field-field sum (interpolate() at every pair); intended for small grids.
SampledField gconv_ff_naive(const SampledField& f, const SampledField& g, const ConvOptions& opt = {});
// Group convolution evaluated at arbitrary output points (naive sum over the grid).
std::vector<double> gconv_at(const SampledField& f, const KernelEval& k,
                             const std::vector<std::vector<double>>& points, const ConvOptions& opt = {});

// Left convolution k*f(x) = sum_y f(y) k(x y^{-1}) vol, for kernels even under
// x -> x^{-1}; computed through the reflection f -> f(-x), exact on the
// symmetric cell-centred grid.
SampledField lconv_fft_t(const KernelEval& k, const SampledField& f, const ConvOptions& opt = {});
SampledField reflect(const SampledField& f);
// omega_m = 2 pi m / (P h), m = 0..P/2, for the t-axis of `g`.
std::vector<double> spectral_omegas(const Grid& g, int P);

// Spectral-in-t variant: the t-contraction uses the exact Fourier transform
// in u of the kernel (band-limited convolution of the sampled lines) instead
// of kernel samples, so kernels narrower than the t-spacing do not alias.
// Requires KernelEval::separated or KernelEval::uhat_line. `pad` is the
// zero-padding factor in t.
struct SpectralField {
    Grid grid;
    int P = 0;                                    // padded FFT length
    std::vector<std::complex<double>> spectra;    // transverse-major, P/2+1 per line
};
SpectralField gconv_spectral_t(const SampledField& f, const KernelEval& k, const ConvOptions& opt = {}, int pad = 2);
// Multiply every line spectrum by m(omega) and return the field (first G samples).
SampledField spectral_to_field(const SpectralField& s, const std::function<double(double)>& multiplier = {},
                               unsigned threads = 0);
// Band-limited partial convolution with a 1D kernel given by its Fourier transform.
SampledField pconv2_spectral(const SampledField& f, const std::function<double(double)>& khat, int pad = 2,
                             unsigned threads = 0);

// Partial convolution in the central variable, midpoint rule.
SampledField pconv2(const SampledField& f, const Kernel1D& k, const ConvOptions& opt = {});
FuncEval pconv2(const FuncEval& f, const Kernel1D& k, std::vector<std::string>* warnings = nullptr);

KernelEval scale_kernel1(const KernelEval& psi1, double s);
Kernel1D scale_kernel2(const Kernel1D& psi2, double t);

// Treat a sampled field as a kernel (multilinear interpolation, zero outside).
KernelEval kernel_from_field(const SampledField& g);

// Fraction of int |k| lying outside the grid box, by midpoint quadrature on
// a box with `pad` times the extents and the same spacing per axis.
double kernel_escaped_mass(const KernelEval& k, const Grid& grid, double pad = 3.0);
// Fraction of int |k| outside [-window, window] for a 1D kernel.
double kernel1d_escaped_mass(const Kernel1D& k, double window);

}  // namespace hflag
