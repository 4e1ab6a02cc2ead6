#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hflag/convolution.hpp"
#include "hflag/sampling.hpp"

namespace hflag {

struct FrameSpec {
    int n = 1;
    int M = 4;              // psi1 = c_M (-Laplacian)^M exp(-|z|^2 - u^2)
    int psi2_order = 5;     // psi2_hat = A eta^{2p} exp(-b eta^2)
    double psi2_peak = 1.0; // |eta| where psi2_hat peaks; b = p / peak^2
    // Octave ranges: s = 2^{-j}, t = 2^{-k}, sampled with `voices_*` steps per octave.
    int j_min = -3, j_max = 3;
    int k_min = -3, k_max = 3;
    int voices_s = 4, voices_t = 4;
    int pad = 2;            // zero-padding factor of the spectral t-path

    void validate() const;
    std::vector<double> s_values() const;
    std::vector<double> t_values() const;
    double weight() const;  // (ln 2 / voices_s) (ln 2 / voices_t)
    std::string id() const;
};

struct ScalePair {
    double s = 1.0;
    double t = 1.0;
};

// Closed-form component functions. Coordinates are (x_1, y_1, ..., x_n, y_n, u).
class Psi1 {
public:
    Psi1(int M, int n);
    int M() const { return M_; }
    int n() const { return n_; }
    double c_M() const { return cM_; }

    // psi1_s(z,u) = s^{-2n-2} psi1(z/s, u/s^2).
    double value(std::span<const double> p, double s = 1.0) const;
    // Same kernel convolved in u with psi2_t (closed form).
    double value_st(std::span<const double> p, double s, double t, int psi2_order, double psi2_b) const;
    // Fourier transform on R^{2n+1} (e^{-i x.xi} convention), s = 1.
    double fourier(std::span<const double> xi) const;
    // z-factor of the separated form: w[c] multiplies the u-profile of index c.
    void zpart(std::span<const double> z, double s, std::span<double> w) const;
    // Partial derivative d^beta_z d^m_u of psi1 (s = 1).
    double derivative(std::span<const int> beta, int m_u, std::span<const double> p) const;

private:
    struct Term {
        std::vector<int> a;  // exponents of H_{2a_i}(z_i), length 2n
        double coeff;
    };
    int M_, n_;
    double cM_;
    std::vector<std::vector<Term>> groups_;  // indexed by the u-exponent c
};

KernelEval build_psi1(int M, int n = 1);
KernelEval psi1_scaled(const Psi1& psi, double s);

struct Psi2 {
    int p = 5;
    double b = 5.0;
    double A = 0.0;
    double value(double v) const;
    double fourier(double eta) const;
    Kernel1D kernel() const;
};

Psi2 make_psi2(int order = 5, double peak = 1.0);
Kernel1D build_psi2(int order = 5, double peak = 1.0);
// Spatial psi2 from the Fourier transform by direct quadrature (test oracle).
double psi2_inverse_fourier(const Psi2& psi, double v);

struct DyadicQuadrature {
    double log2_lo = -40.0;
    double log2_hi = 40.0;
    int nodes = 20000;
};
// int_0^inf |psihat(t eta)|^2 dt/t by the midpoint rule in log t.
double admissibility_constant(const std::function<double(double)>& psihat, double eta,
                              const DyadicQuadrature& q = {});

// Moments by the trapezoid rule on a uniform grid wide enough for the
// Gaussian factor; for these profiles the rule is spectrally accurate, so the
// vanishing orders come out at roundoff. Entry k is the max |moment| over all
// multi-indices of total order k. n = 1 for psi1.
std::vector<double> psi1_moments(const Psi1& psi, int max_order);
std::vector<double> psi2_moments(const Psi2& psi, int max_order);
// int u^gamma psi_{s,t}(z, u) du for gamma = 0..max_order.
std::vector<double> flag_moments(const FrameSpec& frame, double s, double t, std::span<const double> z,
                                 int max_order);
// int over C^n of psi_{s,t}(z, u) dz (n = 1).
double partial_z_moment(const FrameSpec& frame, double s, double t, double u);

// psi_{s,t} = psi1_s *_2 psi2_t in closed form.
KernelEval psi_st(const FrameSpec& frame, double s, double t);
// Same function by midpoint quadrature in v of the scaled kernels
// (window |v| <= 64 max(t, s^2), step min(t, s^2)/16).
KernelEval psi_st_quadrature(const FrameSpec& frame, double s, double t);

// F on H^n x R: called with (z, u) and v.
using ProductFn = std::function<double(std::span<const double>, double)>;
struct ProjectionWindow {
    double half_width = 32.0;
    double step = 1.0 / 32.0;
};
// (pi F)(z,u) = int F((z, u - v), v) dv by the midpoint rule.
FuncEval projection_pi(const ProductFn& F, int n, const ProjectionWindow& w, std::vector<std::string>* warnings = nullptr);

struct ScaleCoefficient {
    int jv = 0, kv = 0;  // indices in voice units: s = 2^{-jv/voices_s}
    double s = 1.0, t = 1.0;
    SampledField field;
};

struct Coefficients {
    FrameSpec frame;
    std::vector<ScaleCoefficient> items;
    std::vector<std::string> warnings;
};

struct TransformOptions {
    unsigned threads = 0;
    // Scales with s < resolve_factor * (largest z-spacing) are not resolved by
    // the z-quadrature; their coefficients are set to zero and a warning is
    // recorded. For band-limited f the true coefficients there are negligible.
    double resolve_factor = 1.2;
};

// Streams c_{s,t} to `sink` one scale pair at a time (s outer, t inner)
// without keeping the fields. Returns the warnings.
std::vector<std::string> lp_transform_each(const SampledField& f, const FrameSpec& frame,
                                           const std::function<void(const ScaleCoefficient&)>& sink,
                                           const TransformOptions& opt = {});

// c_{s,t} = psi_{s,t} * f for every scale pair in the frame range.
Coefficients lp_transform(const SampledField& f, const FrameSpec& frame, const TransformOptions& opt = {});

struct Reconstruction {
    SampledField raw;         // weight * sum psi_{s,t} * c_{s,t}
    SampledField calibrated;  // kappa * raw
    double kappa = 1.0;
    double rel_error = 0.0;   // relative L2 error of the calibrated field against the reference
    std::vector<std::string> warnings;
};

// Uses the coefficients whose scales lie inside `frame`'s range; kappa is
// the least-squares fit against `reference` (1 if no reference is given).
Reconstruction reconstruct(const Coefficients& coeffs, const FrameSpec& frame, const SampledField* reference = nullptr,
                           const TransformOptions& opt = {});

// Transform and reconstruct for several ranges at once without storing the
// coefficient fields. All frames must agree except for their j/k ranges; the
// transform runs once over the union of the ranges.
std::vector<Reconstruction> reconstruction_sweep(const SampledField& f, const std::vector<FrameSpec>& frames,
                                                 const SampledField& reference, const TransformOptions& opt = {});

}  // namespace hflag
