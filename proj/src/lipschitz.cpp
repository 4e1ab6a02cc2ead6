#include "hflag/lipschitz.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "hflag/parallel.hpp"

namespace hflag {

std::string to_string(DiffCase c) {
    switch (c) {
        case DiffCase::d2_d1: return "d2_d1";
        case DiffCase::d2_d1z: return "d2_d1z";
        case DiffCase::d2z_d1: return "d2z_d1";
        case DiffCase::d2z_d1z: return "d2z_d1z";
    }
    return "?";
}

FlagExponent FlagExponent::make(double alpha1, double alpha2) {
    if (!(alpha1 > 0.0 && alpha2 > 0.0) || !std::isfinite(alpha1) || !std::isfinite(alpha2))
        throw std::invalid_argument("FlagExponent: alpha1 and alpha2 must be positive");
    FlagExponent e;
    e.alpha1 = alpha1;
    e.alpha2 = alpha2;
    e.m1 = static_cast<int>(std::ceil(alpha1)) - 1;
    e.m2 = static_cast<int>(std::ceil(alpha2)) - 1;
    e.r1 = alpha1 - e.m1;
    e.r2 = alpha2 - e.m2;
    e.zygmund1 = e.r1 == 1.0;
    e.zygmund2 = e.r2 == 1.0;
    return e;
}

DiffCase FlagExponent::diff_case() const {
    if (zygmund1 && zygmund2) return DiffCase::d2z_d1z;
    if (zygmund1) return DiffCase::d2_d1z;
    if (zygmund2) return DiffCase::d2z_d1;
    return DiffCase::d2_d1;
}

std::string FlagExponent::id() const {
    std::ostringstream os;
    os << "(" << alpha1 << "," << alpha2 << ")";
    return os.str();
}

double increment_norm(const HPoint& uv) { return std::sqrt(uv.z_norm_sq() + std::abs(uv.t)); }

namespace {

constexpr int kMaxDims = 33;

struct Stack {
    double v[kMaxDims];
    int d;
    std::span<double> span() { return {v, static_cast<std::size_t>(d)}; }
};

// out = x o p (p given as flat coordinates)
Stack right(std::span<const double> x, std::span<const double> p) {
    Stack s;
    s.d = static_cast<int>(x.size());
    mul_into(x, p, s.span());
    return s;
}

Stack shift_t(std::span<const double> x, double w) {
    Stack s;
    s.d = static_cast<int>(x.size());
    std::copy(x.begin(), x.end(), s.v);
    s.v[s.d - 1] += w;
    return s;
}

struct IncrementCoords {
    Stack fwd;  // (u, v)
    Stack inv;  // (u, v)^{-1}
};

IncrementCoords coords_of(const HPoint& uv) {
    IncrementCoords c;
    const auto a = uv.coords();
    c.fwd.d = c.inv.d = static_cast<int>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        c.fwd.v[i] = a[i];
        c.inv.v[i] = -a[i];
    }
    return c;
}

double first_diff(const PointFn& g, std::span<const double> x, IncrementCoords& ic) {
    Stack a = right(x, ic.inv.span());
    return g(a.span()) - g(x);
}

double first_diff_z(const PointFn& g, std::span<const double> x, IncrementCoords& ic) {
    Stack a = right(x, ic.fwd.span());
    Stack b = right(x, ic.inv.span());
    return g(a.span()) + g(b.span()) - 2.0 * g(x);
}

double mixed_at(const PointFn& g, DiffCase c, std::span<const double> x, IncrementCoords& ic, double w,
                Case3Form form) {
    const bool zyg1 = c == DiffCase::d2_d1z || c == DiffCase::d2z_d1z;
    const bool zyg2 = c == DiffCase::d2z_d1 || c == DiffCase::d2z_d1z;
    if (c == DiffCase::d2z_d1 && form == Case3Form::as_printed) {
        Stack p = shift_t(x, w), m = shift_t(x, -w);
        // x o (u, -v + w)
        Stack q;
        q.d = ic.fwd.d;
        std::copy(ic.fwd.v, ic.fwd.v + q.d, q.v);
        q.v[q.d - 1] = -ic.fwd.v[q.d - 1] + w;
        Stack a = right(x, q.span());
        // x o (u, v + w)^{-1}
        Stack r;
        r.d = ic.inv.d;
        std::copy(ic.inv.v, ic.inv.v + r.d, r.v);
        r.v[r.d - 1] -= w;
        Stack b = right(x, r.span());
        Stack e = right(x, ic.inv.span());
        return (g(p.span()) + g(m.span()) - 2.0 * g(x)) - (g(a.span()) + g(b.span()) - 2.0 * g(e.span()));
    }
    auto inner = [&](std::span<const double> y) {
        return zyg1 ? first_diff_z(g, y, ic) : first_diff(g, y, ic);
    };
    if (zyg2) {
        Stack p = shift_t(x, w), m = shift_t(x, -w);
        return inner(p.span()) + inner(m.span()) - 2.0 * inner(x);
    }
    Stack m = shift_t(x, -w);
    return inner(m.span()) - inner(x);
}

void check_dims(int n) {
    if (2 * n + 1 > kMaxDims) throw std::invalid_argument("lipschitz: n too large");
}

}  // namespace

double mixed_difference_at(const PointFn& g, DiffCase c, std::span<const double> x, const HPoint& uv, double w,
                           Case3Form form) {
    check_dims(uv.n());
    IncrementCoords ic = coords_of(uv);
    return mixed_at(g, c, x, ic, w, form);
}

FuncEval delta1(const FuncEval& f, const HPoint& uv) {
    if (uv.n() != f.n) throw std::invalid_argument("delta1: dimension mismatch");
    FuncEval out;
    out.name = "d1(" + f.name + ")";
    out.n = f.n;
    out.value = [g = f.value, ic = coords_of(uv)](std::span<const double> x) mutable { return first_diff(g, x, ic); };
    return out;
}

FuncEval delta1z(const FuncEval& f, const HPoint& uv) {
    if (uv.n() != f.n) throw std::invalid_argument("delta1z: dimension mismatch");
    FuncEval out;
    out.name = "d1z(" + f.name + ")";
    out.n = f.n;
    out.value = [g = f.value, ic = coords_of(uv)](std::span<const double> x) mutable { return first_diff_z(g, x, ic); };
    return out;
}

FuncEval delta2(const FuncEval& f, double w) {
    FuncEval out;
    out.name = "d2(" + f.name + ")";
    out.n = f.n;
    out.value = [g = f.value, w](std::span<const double> x) {
        Stack m = shift_t(x, -w);
        return g(m.span()) - g(x);
    };
    return out;
}

FuncEval delta2z(const FuncEval& f, double w) {
    FuncEval out;
    out.name = "d2z(" + f.name + ")";
    out.n = f.n;
    out.value = [g = f.value, w](std::span<const double> x) {
        Stack p = shift_t(x, w), m = shift_t(x, -w);
        return g(p.span()) + g(m.span()) - 2.0 * g(x);
    };
    return out;
}

namespace {

PointFn reduced(const FuncEval& f, const FlagExponent& e, std::vector<int> beta) {
    if (e.m1 == 0 && e.m2 == 0) {
        if (!beta.empty() && std::any_of(beta.begin(), beta.end(), [](int b) { return b != 0; }))
            throw std::invalid_argument("mixed_difference: beta given but m1 = 0");
        return f.value;
    }
    if (beta.empty()) {
        beta.assign(2 * f.n, 0);
        beta[0] = e.m1;
    }
    int total = 0;
    for (int b : beta) total += b;
    if (static_cast<int>(beta.size()) != 2 * f.n || total != e.m1)
        throw std::invalid_argument("mixed_difference: beta must have 2n entries summing to m1");
    PointFn g = f.derivative ? f.derivative(beta, e.m2) : PointFn{};
    if (!g) {
        std::ostringstream os;
        os << "mixed_difference: " << f.name << " has no derivative of order (m1,m2)=(" << e.m1 << "," << e.m2 << ")";
        throw std::invalid_argument(os.str());
    }
    return g;
}

void all_betas(int total, int parts, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (static_cast<int>(cur.size()) == parts - 1) {
        cur.push_back(total);
        out.push_back(cur);
        cur.pop_back();
        return;
    }
    for (int k = total; k >= 0; --k) {
        cur.push_back(k);
        all_betas(total - k, parts, cur, out);
        cur.pop_back();
    }
}

}  // namespace

FuncEval mixed_difference(const FuncEval& f, const FlagExponent& e, const HPoint& uv, double w, Case3Form form,
                          std::vector<int> beta) {
    if (uv.n() != f.n) throw std::invalid_argument("mixed_difference: dimension mismatch");
    check_dims(f.n);
    PointFn g = reduced(f, e, std::move(beta));
    FuncEval out;
    out.name = to_string(e.diff_case()) + "(" + f.name + ")";
    out.n = f.n;
    out.value = [g, c = e.diff_case(), ic = coords_of(uv), w, form](std::span<const double> x) mutable {
        return mixed_at(g, c, x, ic, w, form);
    };
    return out;
}

// --- plan -------------------------------------------------------------------

IncrementPlan IncrementPlan::for_box(std::vector<double> corpus_box, int n) {
    const int d = 2 * n + 1;
    if (corpus_box.empty()) {
        corpus_box.assign(d, 2.0);
        corpus_box.back() = 4.0;
    }
    if (static_cast<int>(corpus_box.size()) != d) throw std::invalid_argument("IncrementPlan: box needs 2n+1 entries");
    IncrementPlan p;
    p.n = n;
    p.half_box = corpus_box;
    for (double& b : p.half_box) b *= 0.5;
    return p;
}

IncrementPlan IncrementPlan::doubled() const {
    IncrementPlan p = *this;
    p.directions *= 2;
    p.steps_per_octave *= 2;
    return p;
}

void IncrementPlan::validate() const {
    if (n < 1 || static_cast<int>(half_box.size()) != 2 * n + 1)
        throw std::invalid_argument("IncrementPlan: half_box needs 2n+1 entries");
    if (base_per_axis < 1 || directions < 1 || steps_per_octave < 1)
        throw std::invalid_argument("IncrementPlan: counts must be >= 1");
    if (j_min > j_max || k_min > k_max) throw std::invalid_argument("IncrementPlan: empty magnitude range");
    for (double b : half_box)
        if (!(b > 0.0)) throw std::invalid_argument("IncrementPlan: half_box must be positive");
}

std::string IncrementPlan::id() const {
    std::ostringstream os;
    os << "b" << base_per_axis << "_j" << j_min << ".." << j_max << "_k" << k_min << ".." << k_max << "_o"
       << steps_per_octave << "_d" << directions << "_seed" << seed;
    return os.str();
}

std::vector<std::vector<double>> IncrementPlan::base_points() const {
    validate();
    const int d = 2 * n + 1;
    std::size_t total = 1;
    for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(base_per_axis);
    std::vector<std::vector<double>> pts(total, std::vector<double>(d));
    for (std::size_t i = 0; i < total; ++i) {
        std::size_t r = i;
        for (int a = d - 1; a >= 0; --a) {
            const int idx = static_cast<int>(r % base_per_axis);
            r /= base_per_axis;
            pts[i][a] = -half_box[a] + (idx + 0.5) * (2.0 * half_box[a] / base_per_axis);
        }
    }
    return pts;
}

std::vector<HPoint> IncrementPlan::increments() const {
    validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    struct Dir {
        std::vector<double> a;
        double c2, s2;
    };
    std::vector<Dir> dirs;
    for (int i = 0; i < directions; ++i) {
        Dir dir;
        dir.a.resize(2 * n);
        double nn = 0.0;
        while (nn < 1e-12) {
            nn = 0.0;
            for (double& x : dir.a) {
                x = normal(rng);
                nn += x * x;
            }
        }
        for (double& x : dir.a) x /= std::sqrt(nn);
        const double phi = 0.5 * std::numbers::pi * unit(rng);
        const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
        dir.c2 = std::cos(phi);
        dir.s2 = sign * std::sin(phi) * std::sin(phi);
        dirs.push_back(std::move(dir));
    }
    std::vector<HPoint> out;
    for (int j = j_min * steps_per_octave; j <= j_max * steps_per_octave; ++j) {
        const double rho = std::exp2(-static_cast<double>(j) / steps_per_octave);
        for (const Dir& dir : dirs) {
            std::vector<double> u(dir.a);
            for (double& x : u) x *= rho * dir.c2;
            out.emplace_back(std::move(u), rho * rho * dir.s2);
        }
    }
    return out;
}

std::vector<double> IncrementPlan::w_values() const {
    std::vector<double> w;
    for (int k = k_min * steps_per_octave; k <= k_max * steps_per_octave; ++k) {
        const double m = std::exp2(-static_cast<double>(k) / steps_per_octave);
        w.push_back(m);
        w.push_back(-m);
    }
    return w;
}

// --- difference estimator ---------------------------------------------------

DiffNorm lip_norm_diff(const FuncEval& f, const FlagExponent& e, const IncrementPlan& plan, unsigned threads,
                       Case3Form form) {
    plan.validate();
    if (plan.n != f.n) throw std::invalid_argument("lip_norm_diff: dimension mismatch");
    check_dims(f.n);
    std::vector<std::vector<int>> betas;
    if (e.m1 == 0) {
        betas.push_back(std::vector<int>(2 * f.n, 0));
    } else {
        std::vector<int> cur;
        all_betas(e.m1, 2 * f.n, cur, betas);
    }
    std::vector<PointFn> gs;
    for (auto& b : betas) gs.push_back(reduced(f, e, e.m1 == 0 ? std::vector<int>{} : b));

    const auto base = plan.base_points();
    const auto incs = plan.increments();
    const auto ws = plan.w_values();
    const DiffCase c = e.diff_case();
    std::vector<IncrementCoords> ic;
    std::vector<double> uvpow;
    for (const auto& uv : incs) {
        ic.push_back(coords_of(uv));
        uvpow.push_back(std::pow(increment_norm(uv), e.r1));
    }
    std::vector<double> wpow;
    for (double w : ws) wpow.push_back(std::pow(std::abs(w), e.r2));

    struct Best {
        double ratio = -1.0;
        std::size_t inc = 0, w = 0;
        double diff = 0.0;
    };
    std::vector<Best> best(base.size());
    parallel_for(base.size(), threads, [&](std::size_t bi) {
        std::vector<IncrementCoords> local = ic;
        Best b;
        for (const PointFn& g : gs)
            for (std::size_t i = 0; i < local.size(); ++i)
                for (std::size_t k = 0; k < ws.size(); ++k) {
                    const double d = mixed_at(g, c, base[bi], local[i], ws[k], form);
                    const double r = std::abs(d) / (uvpow[i] * wpow[k]);
                    if (r > b.ratio) b = {r, i, k, d};
                }
        best[bi] = b;
    });
    DiffNorm out;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < best.size(); ++i)
        if (best[i].ratio > best[arg].ratio) arg = i;
    if (best.empty()) return out;
    out.value = std::max(0.0, best[arg].ratio);
    out.witness.point = base[arg];
    out.witness.uv = incs[best[arg].inc];
    out.witness.w = ws[best[arg].w];
    out.witness.difference = best[arg].diff;
    return out;
}

// --- Littlewood-Paley estimator ---------------------------------------------

std::vector<LpSupTable> lp_sup_tables(const SampledField& f, const FrameSpec& frame,
                                      const std::vector<LpRegion>& regions, const TransformOptions& opt) {
    if (regions.empty()) throw std::invalid_argument("lp_sup_tables: no regions");
    const Grid& g = f.grid;
    std::vector<LpSupTable> tabs(regions.size());
    std::vector<std::vector<std::size_t>> inner(regions.size());
    std::vector<double> p(g.dims());
    for (std::size_t r = 0; r < regions.size(); ++r) {
        const LpRegion& region = regions[r];
        if (!(region.z_fraction > 0.0 && region.z_fraction <= 1.0 && region.u_fraction > 0.0 &&
              region.u_fraction <= 1.0))
            throw std::invalid_argument("lp_sup_table: region fractions must be in (0,1]");
        LpSupTable& tab = tabs[r];
        tab.frame = frame;
        tab.s = frame.s_values();
        tab.t = frame.t_values();
        tab.region = region;
        tab.sup.assign(tab.s.size() * tab.t.size(), 0.0);
        tab.argmax.assign(tab.sup.size(), {});
        for (std::size_t i = 0; i < g.total(); ++i) {
            g.point(i, p);
            bool in = true;
            for (int a = 0; a < g.dims(); ++a) {
                const double frac = a + 1 == g.dims() ? region.u_fraction : region.z_fraction;
                in = in && std::abs(p[a]) <= frac * g.half_extent[a];
            }
            if (in) inner[r].push_back(i);
        }
        if (inner[r].empty()) throw std::invalid_argument("lp_sup_table: region contains no grid point");
    }
    std::size_t idx = 0;
    auto warnings = lp_transform_each(
        f, frame,
        [&](const ScaleCoefficient& c) {
            for (std::size_t r = 0; r < regions.size(); ++r) {
                double m = 0.0;
                std::size_t at = inner[r].front();
                for (std::size_t i : inner[r]) {
                    const double v = std::abs(c.field[i]);
                    if (v > m) {
                        m = v;
                        at = i;
                    }
                }
                tabs[r].sup[idx] = m;
                tabs[r].argmax[idx] = g.point(at);
            }
            ++idx;
        },
        opt);
    for (auto& tab : tabs) tab.warnings = warnings;
    return tabs;
}

LpSupTable lp_sup_table(const SampledField& f, const FrameSpec& frame, const LpRegion& region,
                        const TransformOptions& opt) {
    return std::move(lp_sup_tables(f, frame, {region}, opt).front());
}

LpNorm lip_norm_lp(const LpSupTable& table, const FlagExponent& e) {
    LpNorm out;
    double best = -1.0;
    for (std::size_t is = 0; is < table.s.size(); ++is)
        for (std::size_t it = 0; it < table.t.size(); ++it) {
            const double v = std::pow(table.s[is], -e.alpha1) * std::pow(table.t[it], -e.alpha2) * table.at(is, it);
            if (v > best) {
                best = v;
                out.value = v;
                out.s = table.s[is];
                out.t = table.t[it];
                out.j = static_cast<int>(std::lround(-std::log2(out.s) * table.frame.voices_s));
                out.k = static_cast<int>(std::lround(-std::log2(out.t) * table.frame.voices_t));
                out.point = table.argmax[is * table.t.size() + it];
                out.at_boundary = is == 0 || is + 1 == table.s.size() || it == 0 || it + 1 == table.t.size();
            }
        }
    return out;
}

LpNorm lip_norm_lp(const FuncEval& f, const FlagExponent& e, const FrameSpec& frame, const Grid& grid,
                   const TransformOptions& opt) {
    return lip_norm_lp(lp_sup_table(sample(f, grid, opt.threads), frame, {}, opt), e);
}

SlopeFit fit_lp_slopes(const LpSupTable& table, double s_lo, double s_hi, double t_lo, double t_hi) {
    // normal equations for (c, a1, a2)
    double S[3][3] = {}, R[3] = {};
    std::vector<std::array<double, 3>> rows;
    std::vector<double> ys;
    const double tol = 1e-9;
    for (std::size_t is = 0; is < table.s.size(); ++is)
        for (std::size_t it = 0; it < table.t.size(); ++it) {
            const double s = table.s[is], t = table.t[it];
            if (s < s_lo * (1 - tol) || s > s_hi * (1 + tol) || t < t_lo * (1 - tol) || t > t_hi * (1 + tol)) continue;
            const double v = table.at(is, it);
            if (!(v > 0.0)) continue;
            const std::array<double, 3> x{1.0, std::log(s), std::log(t)};
            const double y = std::log(v);
            for (int a = 0; a < 3; ++a) {
                R[a] += x[a] * y;
                for (int b = 0; b < 3; ++b) S[a][b] += x[a] * x[b];
            }
            rows.push_back(x);
            ys.push_back(y);
        }
    SlopeFit fit;
    fit.used = static_cast<int>(rows.size());
    if (fit.used < 3) throw std::invalid_argument("fit_lp_slopes: need at least 3 scale pairs");
    // Gaussian elimination with partial pivoting
    double A[3][4];
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) A[a][b] = S[a][b];
        A[a][3] = R[a];
    }
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        if (std::abs(A[piv][col]) < 1e-14) throw std::invalid_argument("fit_lp_slopes: degenerate scale selection");
        std::swap(A[col], A[piv]);
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            const double m = A[r][col] / A[col][col];
            for (int c = col; c < 4; ++c) A[r][c] -= m * A[col][c];
        }
    }
    fit.c = A[0][3] / A[0][0];
    fit.a1 = A[1][3] / A[1][1];
    fit.a2 = A[2][3] / A[2][2];
    double ss = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double r = ys[i] - (fit.c + fit.a1 * rows[i][1] + fit.a2 * rows[i][2]);
        ss += r * r;
    }
    fit.rms = std::sqrt(ss / rows.size());
    return fit;
}

// --- report -----------------------------------------------------------------

NormReport equivalence_report(const std::string& name, const FuncEval& f, const LpSupTable& table,
                              const FlagExponent& e, const IncrementPlan& plan, unsigned threads, double zero_tol) {
    NormReport r;
    r.function = name;
    r.exponent = e;
    const DiffNorm d = lip_norm_diff(f, e, plan, threads);
    r.diff_norm = d.value;
    r.diff_witness = d.witness;
    r.lp_witness = lip_norm_lp(table, e);
    r.lp_norm = r.lp_witness.value;
    r.plan_id = plan.id();
    r.plan_seed = plan.seed;
    r.frame_id = table.frame.id();
    const bool dz = r.diff_norm <= zero_tol;
    const bool lz = r.lp_norm <= zero_tol;
    r.degenerate = dz && lz;
    r.inconsistent = dz && !lz;
    r.ratio = dz ? std::numeric_limits<double>::quiet_NaN() : r.lp_norm / r.diff_norm;
    return r;
}

NormReport equivalence_report(const FuncEval& f, const FlagExponent& e, const FrameSpec& frame, const Grid& grid,
                              const IncrementPlan& plan, const TransformOptions& opt, double zero_tol) {
    const LpSupTable tab = lp_sup_table(sample(f, grid, opt.threads), frame, {}, opt);
    return equivalence_report(f.name, f, tab, e, plan, opt.threads, zero_tol);
}

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

}  // namespace

std::string NormReport::to_json() const {
    using nlohmann::json;
    auto finite_or_null = [](double v) -> json { return std::isfinite(v) ? json(v) : json(nullptr); };
    json j;
    j["function"] = function;
    j["alpha"] = {exponent.alpha1, exponent.alpha2};
    j["case"] = to_string(exponent.diff_case());
    j["diff_norm"] = diff_norm;
    j["lp_norm"] = lp_norm;
    j["ratio"] = finite_or_null(ratio);
    j["degenerate"] = degenerate;
    j["inconsistent"] = inconsistent;
    j["diff_witness"] = {{"point", diff_witness.point},
                         {"u", diff_witness.uv.xy},
                         {"v", diff_witness.uv.t},
                         {"w", diff_witness.w},
                         {"difference", diff_witness.difference}};
    j["lp_witness"] = {{"s", lp_witness.s},
                       {"t", lp_witness.t},
                       {"j", lp_witness.j},
                       {"k", lp_witness.k},
                       {"point", lp_witness.point},
                       {"at_boundary", lp_witness.at_boundary}};
    j["plan"] = plan_id;
    j["seed"] = plan_seed;
    j["frame"] = frame_id;
    return j.dump(2);
}

std::string NormReport::csv_header() { return "function,alpha1,alpha2,case,diff_norm,lp_norm,ratio,lp_s,lp_t,lp_boundary,degenerate"; }

std::string NormReport::csv_row() const {
    std::ostringstream os;
    os << function << "," << num(exponent.alpha1) << "," << num(exponent.alpha2) << "," << to_string(exponent.diff_case())
       << "," << num(diff_norm) << "," << num(lp_norm) << "," << num(ratio) << "," << num(lp_witness.s) << ","
       << num(lp_witness.t) << "," << (lp_witness.at_boundary ? 1 : 0) << "," << (degenerate ? 1 : 0);
    return os.str();
}

}  // namespace hflag
