#include "hflag/hgroup.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace hflag {

HPoint::HPoint(std::vector<double> coords, double central) : xy(std::move(coords)), t(central) {
    if (xy.empty() || xy.size() % 2 != 0)
        throw std::invalid_argument("HPoint: z needs 2n real coordinates, n >= 1");
}

HPoint HPoint::zero(int n) {
    if (n < 1) throw std::invalid_argument("HPoint: n must be >= 1");
    return HPoint(std::vector<double>(2 * n, 0.0), 0.0);
}

HPoint HPoint::of(double x, double y, double central) { return HPoint({x, y}, central); }

double HPoint::z_norm_sq() const {
    double s = 0.0;
    for (double c : xy) s += c * c;
    return s;
}

std::vector<double> HPoint::coords() const {
    std::vector<double> c(xy);
    c.push_back(t);
    return c;
}

HPoint HPoint::from_coords(std::span<const double> c) {
    if (c.size() < 3 || c.size() % 2 != 1)
        throw std::invalid_argument("HPoint: flat coordinates need length 2n+1");
    return HPoint(std::vector<double>(c.begin(), c.end() - 1), c.back());
}

double twist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < a.size(); j += 2) s += a[j + 1] * b[j] - a[j] * b[j + 1];
    return 2.0 * s;
}

static void check_same_n(const HPoint& a, const HPoint& b) {
    if (a.xy.size() != b.xy.size())
        throw std::invalid_argument("hgroup: dimension mismatch (n=" + std::to_string(a.n()) +
                                    " vs n=" + std::to_string(b.n()) + ")");
}

HPoint mul(const HPoint& a, const HPoint& b) {
    check_same_n(a, b);
    HPoint r;
    r.xy.resize(a.xy.size());
    for (std::size_t i = 0; i < a.xy.size(); ++i) r.xy[i] = a.xy[i] + b.xy[i];
    r.t = a.t + b.t + twist(a.xy, b.xy);
    return r;
}

HPoint inv(const HPoint& a) {
    HPoint r = a;
    for (double& c : r.xy) c = -c;
    r.t = -a.t;
    return r;
}

double hnorm(const HPoint& a) { return std::sqrt(a.z_norm_sq() + std::abs(a.t)); }

HPoint dilate(double r, const HPoint& a) {
    if (!(r > 0.0)) throw std::invalid_argument("dilate: r must be > 0");
    HPoint out = a;
    for (double& c : out.xy) c *= r;
    out.t = r * r * a.t;
    return out;
}

void mul_into(std::span<const double> a, std::span<const double> b, std::span<double> out) {
    const std::size_t d = a.size() - 1;
    const double tw = twist(a.first(d), b.first(d));
    for (std::size_t i = 0; i < d; ++i) out[i] = a[i] + b[i];
    out[d] = a[d] + b[d] + tw;
}

double hnorm_coords(std::span<const double> c) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < c.size(); ++i) s += c[i] * c[i];
    return std::sqrt(s + std::abs(c.back()));
}

namespace {

HPoint random_point(std::mt19937_64& rng, int n, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    HPoint p = HPoint::zero(n);
    for (double& c : p.xy) c = u(rng);
    p.t = u(rng);
    return p;
}

double max_coord(const HPoint& p) {
    double m = std::abs(p.t);
    for (double c : p.xy) m = std::max(m, std::abs(c));
    return m;
}

double max_diff(const HPoint& a, const HPoint& b) {
    double m = std::abs(a.t - b.t);
    for (std::size_t i = 0; i < a.xy.size(); ++i) m = std::max(m, std::abs(a.xy[i] - b.xy[i]));
    return m;
}

}  // namespace

double quasi_triangle_gamma(std::int64_t sample_count, std::uint64_t seed, int n) {
    if (sample_count < 1) throw std::invalid_argument("quasi_triangle_gamma: sample_count >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> logr(-3.0, 3.0);
    double best = 0.0;
    for (std::int64_t i = 0; i < sample_count; ++i) {
        // Gaussian directions with independent random dilations so that both
        // z-dominated and t-dominated pairs are represented.
        HPoint a = HPoint::zero(n), b = HPoint::zero(n);
        for (double& c : a.xy) c = g(rng);
        for (double& c : b.xy) c = g(rng);
        a.t = g(rng);
        b.t = g(rng);
        a = dilate(std::exp2(logr(rng)), a);
        b = dilate(std::exp2(logr(rng)), b);
        const double den = hnorm(a) + hnorm(b);
        if (den < 1e-9) continue;
        best = std::max(best, hnorm(mul(a, b)) / den);
    }
    return best;
}

std::vector<GroupCheckResult> group_invariant_suite(std::int64_t samples, std::uint64_t seed,
                                                    int n, bool fault) {
    auto op = [fault](const HPoint& a, const HPoint& b) {
        HPoint r = mul(a, b);
        if (fault) {
            // Flip the sign of the x_j y'_j part of the twist.
            double s = 0.0;
            for (int j = 0; j < a.n(); ++j) s += a.x(j) * b.y(j);
            r.t += 4.0 * s;
        }
        return r;
    };
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> logr(-3.0, 3.0);
    const double tol = 1e-12;
    GroupCheckResult assoc{"associativity", true, 0.0, tol};
    GroupCheckResult ident{"identity", true, 0.0, 0.0};
    GroupCheckResult inver{"inverse", true, 0.0, 0.0};
    GroupCheckResult autom{"dilation_automorphism", true, 0.0, tol};
    GroupCheckResult homog{"norm_homogeneity", true, 0.0, tol};
    const HPoint e = HPoint::zero(n);
    for (std::int64_t i = 0; i < samples; ++i) {
        const HPoint a = random_point(rng, n, 10.0);
        const HPoint b = random_point(rng, n, 10.0);
        const HPoint c = random_point(rng, n, 10.0);
        const double r = std::exp2(logr(rng));

        const double scale = 1.0 + std::max({max_coord(a), max_coord(b), max_coord(c)});
        const double da = max_diff(op(op(a, b), c), op(a, op(b, c))) / scale;
        assoc.worst = std::max(assoc.worst, da);

        ident.worst = std::max({ident.worst, max_diff(op(a, e), a), max_diff(op(e, a), a)});
        inver.worst = std::max({inver.worst, max_diff(op(a, inv(a)), e), max_diff(op(inv(a), a), e)});

        const HPoint lhs = dilate(r, op(a, b));
        const HPoint rhs = op(dilate(r, a), dilate(r, b));
        autom.worst = std::max(autom.worst, max_diff(lhs, rhs) / (1.0 + max_coord(lhs)));

        const double na = hnorm(a);
        if (na > 0.0)
            homog.worst = std::max(homog.worst, std::abs(hnorm(dilate(r, a)) - r * na) / (r * na));
    }
    assoc.pass = assoc.worst <= tol;
    ident.pass = ident.worst == 0.0;
    inver.pass = inver.worst == 0.0;
    autom.pass = autom.worst <= tol;
    homog.pass = homog.worst <= tol;

    // Known values of the group law and a non-commutativity witness.
    GroupCheckResult known{"known_values", true, 0.0, 1e-15};
    GroupCheckResult noncomm{"non_commutativity", true, 0.0, 0.0};
    if (n == 1) {
        const HPoint p = op(HPoint::of(1, 0, 0.5), HPoint::of(0, 1, -0.25));
        known.worst = max_diff(p, HPoint::of(1, 1, -1.75));
        const HPoint ab = op(HPoint::of(1, 0, 0), HPoint::of(0, 1, 0));
        const HPoint ba = op(HPoint::of(0, 1, 0), HPoint::of(1, 0, 0));
        known.worst = std::max({known.worst, std::abs(ab.t + 2.0), std::abs(ba.t - 2.0)});
        noncomm.worst = std::abs(ab.t - ba.t);
    } else {
        HPoint a = HPoint::zero(n), b = HPoint::zero(n);
        a.xy[0] = 1.0;
        b.xy[1] = 1.0;
        known.worst = std::abs(op(a, b).t + 2.0);
        noncomm.worst = std::abs(op(a, b).t - op(b, a).t);
    }
    known.pass = known.worst <= known.tolerance;
    noncomm.pass = noncomm.worst > 0.0;
    return {assoc, ident, inver, autom, homog, known, noncomm};
}

std::string to_json_array(const HPoint& p) {
    std::ostringstream os;
    os.precision(17);
    os << '[';
    for (double c : p.xy) os << c << ',';
    os << p.t << ']';
    return os.str();
}

}  // namespace hflag
