#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hflag/hgroup.hpp"
#include "hflag/lp_frame.hpp"
#include "hflag/sampling.hpp"

namespace hflag {

// The four mixed differences, named after the operator composition.
enum class DiffCase {
    d2_d1,    // 0 < a1 < 1, 0 < a2 < 1
    d2_d1z,   // a1 = 1
    d2z_d1,   // a2 = 1
    d2z_d1z,  // a1 = a2 = 1
};
std::string to_string(DiffCase c);

struct FlagExponent {
    double alpha1 = 0.5, alpha2 = 0.5;
    int m1 = 0, m2 = 0;     // alpha_i = m_i + r_i, m_i = ceil(alpha_i) - 1
    double r1 = 0.5, r2 = 0.5;
    bool zygmund1 = false, zygmund2 = false;

    static FlagExponent make(double alpha1, double alpha2);
    DiffCase diff_case() const;
    std::string id() const;
};

// How the a2 = 1, a1 < 1 case is evaluated. `composition` expands
// Delta2Z_w Delta1_(u,v) literally. `as_printed` uses the expanded display
// with f(x o (u, -v + w)), which differs from the composition and does not
// annihilate functions of z alone (kept for comparison only).
enum class Case3Form { composition, as_printed };

FuncEval delta1(const FuncEval& f, const HPoint& uv);   // f(x o uv^{-1}) - f(x)
FuncEval delta1z(const FuncEval& f, const HPoint& uv);  // f(x o uv) + f(x o uv^{-1}) - 2 f(x)
FuncEval delta2(const FuncEval& f, double w);           // f(z, r - w) - f(z, r)
FuncEval delta2z(const FuncEval& f, double w);          // f(z, r + w) + f(z, r - w) - 2 f(z, r)

// Mixed difference for the case selected by `e`, applied to d^beta_z d^{m2}_u f
// (|beta| = m1). `beta` defaults to m1 derivatives in x_1. Throws if f lacks
// the derivative.
FuncEval mixed_difference(const FuncEval& f, const FlagExponent& e, const HPoint& uv, double w,
                          Case3Form form = Case3Form::composition, std::vector<int> beta = {});
// Pointwise version without building evaluators; `g` is the function the
// difference is applied to (already differentiated).
double mixed_difference_at(const PointFn& g, DiffCase c, std::span<const double> x, const HPoint& uv, double w,
                           Case3Form form = Case3Form::composition);

// |(u,v)| = (|u|^2 + |v|)^{1/2}
double increment_norm(const HPoint& uv);

struct IncrementPlan {
    int n = 1;
    std::vector<double> half_box;  // base points fill prod [-half_box, half_box]
    int base_per_axis = 8;
    int j_min = 1, j_max = 8;      // |(u,v)| = 2^{-j}
    int k_min = 1, k_max = 8;      // |w| = 2^{-k}, both signs
    int steps_per_octave = 1;
    int directions = 32;
    std::uint64_t seed = 1;

    // Inner half of the corpus box (default (2,..,2,4) -> (1,..,1,2)).
    static IncrementPlan for_box(std::vector<double> corpus_box, int n = 1);
    IncrementPlan doubled() const;  // twice the directions and magnitude steps
    void validate() const;
    std::string id() const;
    std::vector<std::vector<double>> base_points() const;
    std::vector<HPoint> increments() const;  // all (u,v)
    std::vector<double> w_values() const;
};

struct DiffWitness {
    std::vector<double> point;
    HPoint uv;
    double w = 0.0;
    double difference = 0.0;
};

struct DiffNorm {
    double value = 0.0;
    DiffWitness witness;
};

DiffNorm lip_norm_diff(const FuncEval& f, const FlagExponent& e, const IncrementPlan& plan, unsigned threads = 0,
                       Case3Form form = Case3Form::composition);

// Region of grid points entering the sup: |z_a| <= z_fraction * L_a and
// |u| <= u_fraction * L_u.
struct LpRegion {
    double z_fraction = 0.5;
    double u_fraction = 0.5;
};

// sup over the inner region of |c_{s,t}| for every scale pair of a frame.
struct LpSupTable {
    FrameSpec frame;
    std::vector<double> s, t;                    // s_values(), t_values()
    std::vector<double> sup;                     // s-major, size s.size() * t.size()
    std::vector<std::vector<double>> argmax;     // point of each sup
    LpRegion region;
    std::vector<std::string> warnings;

    double at(std::size_t is, std::size_t it) const { return sup[is * t.size() + it]; }
};

LpSupTable lp_sup_table(const SampledField& f, const FrameSpec& frame, const LpRegion& region = {},
                        const TransformOptions& opt = {});
// Several regions from one transform.
std::vector<LpSupTable> lp_sup_tables(const SampledField& f, const FrameSpec& frame,
                                      const std::vector<LpRegion>& regions, const TransformOptions& opt = {});

struct LpNorm {
    double value = 0.0;
    double s = 0.0, t = 0.0;
    int j = 0, k = 0;                 // in voice units of the frame
    std::vector<double> point;
    bool at_boundary = false;         // sup attained on the first/last s or t
};

LpNorm lip_norm_lp(const LpSupTable& table, const FlagExponent& e);
LpNorm lip_norm_lp(const FuncEval& f, const FlagExponent& e, const FrameSpec& frame, const Grid& grid,
                   const TransformOptions& opt = {});

// Least-squares fit log sup = c + a1 log s + a2 log t over the scales with
// s in [s_lo, s_hi] and t in [t_lo, t_hi].
struct SlopeFit {
    double a1 = 0.0, a2 = 0.0, c = 0.0;
    double rms = 0.0;
    int used = 0;
};
SlopeFit fit_lp_slopes(const LpSupTable& table, double s_lo, double s_hi, double t_lo, double t_hi);

struct NormReport {
    std::string function;
    FlagExponent exponent;
    double diff_norm = 0.0;
    double lp_norm = 0.0;
    double ratio = 0.0;
    bool degenerate = false;     // both norms (near) zero
    bool inconsistent = false;   // diff zero while lp is not
    DiffWitness diff_witness;
    LpNorm lp_witness;
    std::string plan_id;
    std::uint64_t plan_seed = 0;
    std::string frame_id;

    std::string to_json() const;
    static std::string csv_header();
    std::string csv_row() const;
};

NormReport equivalence_report(const std::string& name, const FuncEval& f, const LpSupTable& table,
                              const FlagExponent& e, const IncrementPlan& plan, unsigned threads = 0,
                              double zero_tol = 1e-8);
NormReport equivalence_report(const FuncEval& f, const FlagExponent& e, const FrameSpec& frame, const Grid& grid,
                              const IncrementPlan& plan, const TransformOptions& opt = {}, double zero_tol = 1e-8);

}  // namespace hflag
