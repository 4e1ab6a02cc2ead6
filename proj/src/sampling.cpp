#include "hflag/sampling.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "hflag/parallel.hpp"
#include "hflag/special.hpp"

namespace hflag {

std::size_t Grid::total() const {
    std::size_t p = 1;
    for (int c : counts) p *= static_cast<std::size_t>(c);
    return p;
}

std::size_t Grid::transverse_total() const { return total() / static_cast<std::size_t>(counts.back()); }

double Grid::cell_volume() const {
    double v = 1.0;
    for (double h : spacing) v *= h;
    return v;
}

void Grid::point(std::size_t flat, std::span<double> out) const {
    for (int a = dims() - 1; a >= 0; --a) {
        const auto c = static_cast<std::size_t>(counts[a]);
        out[a] = node(a, static_cast<int>(flat % c));
        flat /= c;
    }
}

std::vector<double> Grid::point(std::size_t flat) const {
    std::vector<double> p(dims());
    point(flat, p);
    return p;
}

Grid make_grid(int n, std::vector<double> extents, std::vector<int> counts, std::size_t cap) {
    if (n < 1) throw std::invalid_argument("make_grid: n must be >= 1");
    const std::size_t d = 2 * static_cast<std::size_t>(n) + 1;
    if (extents.size() != d || counts.size() != d)
        throw std::invalid_argument("make_grid: need " + std::to_string(d) + " extents and counts");
    long double total = 1;
    for (std::size_t a = 0; a < d; ++a) {
        if (!(extents[a] > 0.0) || !std::isfinite(extents[a]))
            throw std::invalid_argument("make_grid: half-extent must be positive and finite");
        if (counts[a] % 2 != 0) throw std::invalid_argument("make_grid: odd count on axis " + std::to_string(a));
        if (counts[a] < 8) throw std::invalid_argument("make_grid: count below 8 on axis " + std::to_string(a));
        total *= counts[a];
    }
    if (total > static_cast<long double>(cap))
        throw std::invalid_argument("make_grid: point count exceeds cap " + std::to_string(cap));
    Grid g;
    g.n = n;
    g.half_extent = std::move(extents);
    g.counts = std::move(counts);
    for (std::size_t a = 0; a < d; ++a) g.spacing.push_back(2.0 * g.half_extent[a] / g.counts[a]);
    return g;
}

Grid refine(const Grid& g, int factor) {
    std::vector<int> c = g.counts;
    for (int& x : c) x *= factor;
    return make_grid(g.n, g.half_extent, c);
}

SampledField::SampledField(Grid g) : grid(std::move(g)), values(grid.total(), 0.0) {}

SampledField::SampledField(Grid g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid.total()) throw std::invalid_argument("SampledField: value count does not match grid");
    for (double x : values)
        if (!std::isfinite(x)) throw std::invalid_argument("SampledField: non-finite value");
}

std::span<const double> SampledField::t_line(std::size_t tr) const {
    const auto g = static_cast<std::size_t>(grid.t_count());
    return {values.data() + tr * g, g};
}

std::span<double> SampledField::t_line(std::size_t tr) {
    const auto g = static_cast<std::size_t>(grid.t_count());
    return {values.data() + tr * g, g};
}

bool FuncEval::has_derivative(std::span<const int> beta, int m_u) const {
    if (!derivative) return false;
    return static_cast<bool>(derivative(beta, m_u));
}

FuncEval scaled(const FuncEval& f, double c) {
    FuncEval g = f;
    g.name = f.name + "*" + std::to_string(c);
    g.value = [v = f.value, c](std::span<const double> p) { return c * v(p); };
    if (f.derivative)
        g.derivative = [d = f.derivative, c](std::span<const int> b, int m) -> PointFn {
            PointFn df = d(b, m);
            if (!df) return {};
            return [df, c](std::span<const double> p) { return c * df(p); };
        };
    return g;
}

FuncEval sum(const FuncEval& f, const FuncEval& g) {
    FuncEval h;
    h.name = f.name + "+" + g.name;
    h.n = f.n;
    h.support_radius = std::max(f.support_radius, g.support_radius);
    h.value = [a = f.value, b = g.value](std::span<const double> p) { return a(p) + b(p); };
    if (f.derivative && g.derivative)
        h.derivative = [a = f.derivative, b = g.derivative](std::span<const int> beta, int m) -> PointFn {
            PointFn da = a(beta, m), db = b(beta, m);
            if (!da || !db) return {};
            return [da, db](std::span<const double> p) { return da(p) + db(p); };
        };
    return h;
}

SampledField sample(const FuncEval& f, const Grid& grid, unsigned threads) {
    SampledField out(grid);
    const std::size_t tr = grid.transverse_total();
    const int gt = grid.t_count();
    parallel_for(tr, threads, [&](std::size_t i) {
        std::vector<double> p(grid.dims());
        for (int k = 0; k < gt; ++k) {
            const std::size_t flat = i * gt + k;
            grid.point(flat, p);
            const double v = f(p);
            if (!std::isfinite(v)) {
                std::ostringstream os;
                os << "sample: non-finite value of " << f.name << " at (";
                for (std::size_t a = 0; a < p.size(); ++a) os << (a ? "," : "") << p[a];
                os << ")";
                throw std::runtime_error(os.str());
            }
            out.values[flat] = v;
        }
    });
    return out;
}

double interpolate(const SampledField& field, std::span<const double> p) {
    const Grid& g = field.grid;
    const int d = g.dims();
    std::array<long, 16> base{};
    std::array<double, 16> frac{};
    for (int a = 0; a < d; ++a) {
        const double xi = (p[a] + g.half_extent[a]) / g.spacing[a] - 0.5;
        const double f0 = std::floor(xi);
        if (f0 < -1.0 || f0 > g.counts[a] - 1) return 0.0;
        base[a] = static_cast<long>(f0);
        frac[a] = xi - f0;
    }
    double acc = 0.0;
    for (unsigned mask = 0; mask < (1u << d); ++mask) {
        double w = 1.0;
        std::size_t flat = 0;
        bool inside = true;
        for (int a = 0; a < d; ++a) {
            const bool up = (mask >> a) & 1u;
            const long idx = base[a] + (up ? 1 : 0);
            w *= up ? frac[a] : 1.0 - frac[a];
            if (idx < 0 || idx >= g.counts[a]) {
                inside = false;
                break;
            }
            flat = flat * static_cast<std::size_t>(g.counts[a]) + static_cast<std::size_t>(idx);
        }
        if (inside && w != 0.0) acc += w * field.values[flat];
    }
    return acc;
}

namespace {

constexpr char kMagic[4] = {'H', 'F', 'L', 'D'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double x) {
    const auto v = std::bit_cast<std::uint64_t>(x);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void get_bytes(std::istream& is, unsigned char* b, std::size_t len) {
    is.read(reinterpret_cast<char*>(b), static_cast<std::streamsize>(len));
    if (static_cast<std::size_t>(is.gcount()) != len) throw std::runtime_error("load_field: unexpected end of file");
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    get_bytes(is, b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& is) {
    unsigned char b[8];
    get_bytes(is, b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

}  // namespace

void write_field(const SampledField& field, std::ostream& os) {
    const Grid& g = field.grid;
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(g.n));
    for (int c : g.counts) put_u32(os, static_cast<std::uint32_t>(c));
    for (double L : g.half_extent) put_f64(os, L);
    for (double v : field.values) put_f64(os, v);
}

SampledField read_field(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("load_field: not a HFLD file");
    const std::uint32_t version = get_u32(is);
    if (version != kVersion) throw std::runtime_error("load_field: unsupported HFLD version " + std::to_string(version));
    const std::uint32_t n = get_u32(is);
    if (n < 1 || n > 8) throw std::runtime_error("load_field: bad dimension n=" + std::to_string(n));
    std::vector<int> counts(2 * n + 1);
    for (int& c : counts) c = static_cast<int>(get_u32(is));
    std::vector<double> ext(2 * n + 1);
    for (double& L : ext) L = get_f64(is);
    Grid g;
    try {
        g = make_grid(static_cast<int>(n), ext, counts);
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("load_field: bad dims: ") + e.what());
    }
    std::vector<double> vals(g.total());
    for (double& v : vals) v = get_f64(is);
    return SampledField(std::move(g), std::move(vals));
}

void save_field(const SampledField& field, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_field: cannot open " + path);
    write_field(field, os);
    if (!os) throw std::runtime_error("save_field: write failed for " + path);
}

SampledField load_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_field: cannot open " + path);
    return read_field(is);
}

void export_csv(const SampledField& field, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("export_csv: cannot open " + path);
    const Grid& g = field.grid;
    for (int a = 0; a < g.dims(); ++a) {
        if (a == g.dims() - 1) os << "t,";
        else os << (a % 2 == 0 ? "x" : "y") << a / 2 + 1 << ',';
    }
    os << "value\n";
    os << std::setprecision(17);
    std::vector<double> p(g.dims());
    for (std::size_t i = 0; i < field.size(); ++i) {
        g.point(i, p);
        for (double c : p) os << c << ',';
        os << field.values[i] << '\n';
    }
}

double l2_norm(const SampledField& f) {
    double s = 0.0;
    for (double v : f.values) s += v * v;
    return std::sqrt(s * f.grid.cell_volume());
}

double l2_distance(const SampledField& a, const SampledField& b) {
    if (a.size() != b.size()) throw std::invalid_argument("l2_distance: grid mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s * a.grid.cell_volume());
}

double linf_norm(const SampledField& f) {
    double m = 0.0;
    for (double v : f.values) m = std::max(m, std::abs(v));
    return m;
}

double linf_distance(const SampledField& a, const SampledField& b) {
    if (a.size() != b.size()) throw std::invalid_argument("linf_distance: grid mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// ---------------------------------------------------------------- corpus

double cutoff_profile(double xi) {
    const double a = std::abs(xi);
    if (a <= 0.5) return 1.0;
    if (a >= 1.0) return 0.0;
    const double tau = 2.0 * (1.0 - a);
    const double p = std::exp(-1.0 / tau), q = std::exp(-1.0 / (1.0 - tau));
    return p / (p + q);
}

double cutoff_profile_d1(double xi) {
    const double a = std::abs(xi);
    if (a <= 0.5 || a >= 1.0) return 0.0;
    const double tau = 2.0 * (1.0 - a);
    const double p = std::exp(-1.0 / tau), q = std::exp(-1.0 / (1.0 - tau));
    const double dp = p / (tau * tau), dq = q / ((1.0 - tau) * (1.0 - tau));
    const double ds = (dp * q + p * dq) / ((p + q) * (p + q));
    return -2.0 * (xi > 0 ? 1.0 : -1.0) * ds;
}

namespace {

// One-dimensional factor with derivatives up to max_order (-1 = unlimited).
struct AxisFactor {
    std::function<double(double, int)> eval;
    int max_order = -1;
};

AxisFactor constant_factor(double c = 1.0) {
    return {[c](double, int k) { return k == 0 ? c : 0.0; }, -1};
}

// c(x/L) * g(x), derivatives up to order 1.
AxisFactor with_cutoff(double L, AxisFactor g) {
    const int order = g.max_order < 0 ? 1 : std::min(1, g.max_order);
    return {[L, g = std::move(g)](double x, int k) {
                const double c = cutoff_profile(x / L);
                if (k == 0) return c == 0.0 ? 0.0 : c * g.eval(x, 0);
                const double dc = cutoff_profile_d1(x / L) / L;
                return dc * g.eval(x, 0) + (c == 0.0 ? 0.0 : c * g.eval(x, 1));
            },
            order};
}

AxisFactor gaussian_factor(double sigma) {
    return {[sigma](double x, int k) {
                const double xi = x / sigma;
                const double e = std::exp(-xi * xi);
                if (k == 0) return e;
                return ((k % 2) ? -1.0 : 1.0) * std::pow(sigma, -k) * hermite(k, xi) * e;
            },
            -1};
}

AxisFactor bump_factor(double R) {
    return {[R](double x, int k) {
                const double xi = x / R;
                if (std::abs(xi) >= 1.0) return 0.0;
                const double w = 1.0 - xi * xi;
                const double b = std::exp(1.0 - 1.0 / w);
                if (k == 0) return b;
                const double g1 = -2.0 * xi / (w * w);
                if (k == 1) return b * g1 / R;
                const double g2 = -2.0 / (w * w) - 8.0 * xi * xi / (w * w * w);
                return b * (g1 * g1 + g2) / (R * R);
            },
            2};
}

AxisFactor cosine_series(double alpha, int J, double base) {
    return {[alpha, J, base](double x, int k) {
                double s = 0.0;
                for (int j = 0; j <= J; ++j) {
                    const double lam = base * std::exp2(j);
                    const double a = std::exp2(-j * alpha) * std::pow(lam, k);
                    switch (k % 4) {
                        case 0: s += a * std::cos(lam * x); break;
                        case 1: s -= a * std::sin(lam * x); break;
                        case 2: s -= a * std::cos(lam * x); break;
                        default: s += a * std::sin(lam * x); break;
                    }
                }
                return s;
            },
            -1};
}

AxisFactor polynomial_factor(int degree) {
    return {[degree](double x, int k) {
                double s = 0.0;
                for (int j = degree; j >= k; --j) s = s * x + 1.0 / factorial(j - k);
                return k > degree ? 0.0 : s;
            },
            -1};
}

AxisFactor linear_factor() {
    return {[](double x, int k) { return k == 0 ? x : (k == 1 ? 1.0 : 0.0); }, -1};
}

FuncEval separable(std::string name, int n, double amplitude, std::vector<AxisFactor> axes, double support) {
    FuncEval f;
    f.name = std::move(name);
    f.n = n;
    f.support_radius = support;
    auto shared = std::make_shared<const std::vector<AxisFactor>>(std::move(axes));
    f.value = [shared, amplitude](std::span<const double> p) {
        double v = amplitude;
        for (std::size_t a = 0; a < shared->size() && v != 0.0; ++a) v *= (*shared)[a].eval(p[a], 0);
        return v;
    };
    f.derivative = [shared, amplitude](std::span<const int> beta, int m_u) -> PointFn {
        const std::size_t d = shared->size();
        if (beta.size() != d - 1) return {};
        std::vector<int> orders(beta.begin(), beta.end());
        orders.push_back(m_u);
        for (std::size_t a = 0; a < d; ++a) {
            if (orders[a] < 0) return {};
            const int mx = (*shared)[a].max_order;
            if (mx >= 0 && orders[a] > mx) return {};
        }
        return [shared, amplitude, orders](std::span<const double> p) {
            double v = amplitude;
            for (std::size_t a = 0; a < orders.size() && v != 0.0; ++a) v *= (*shared)[a].eval(p[a], orders[a]);
            return v;
        };
    };
    return f;
}

}  // namespace

std::vector<std::string> corpus_names() {
    return {"constant", "coordinate_t", "gaussian_bump", "smooth_bump", "weierstrass_flag", "polynomial"};
}

FuncEval corpus(const std::string& name, const CorpusParams& params, int n) {
    const int d = 2 * n + 1;
    std::vector<double> box = params.box;
    if (box.empty()) {
        box.assign(d, 2.0);
        box.back() = 4.0;
    }
    if (static_cast<int>(box.size()) != d) throw std::invalid_argument("corpus: box needs 2n+1 half-extents");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<AxisFactor> axes;
    const double A = params.amplitude;

    if (name == "constant") {
        for (int a = 0; a < d; ++a) axes.push_back(constant_factor());
        return separable(name, n, A, std::move(axes), inf);
    }
    if (name == "coordinate_t") {
        for (int a = 0; a < d - 1; ++a) axes.push_back(with_cutoff(box[a], constant_factor()));
        axes.push_back(with_cutoff(box.back(), linear_factor()));
        return separable(name, n, A, std::move(axes), inf);
    }
    if (name == "gaussian_bump") {
        if (!(params.sigma > 0 && params.tau > 0)) throw std::invalid_argument("corpus: gaussian_bump widths must be > 0");
        for (int a = 0; a < d - 1; ++a) axes.push_back(gaussian_factor(params.sigma));
        axes.push_back(gaussian_factor(params.tau));
        return separable(name, n, A, std::move(axes), inf);
    }
    if (name == "smooth_bump") {
        if (!(params.radius > 0 && params.radius_u > 0)) throw std::invalid_argument("corpus: smooth_bump radii must be > 0");
        for (int a = 0; a < d - 1; ++a) axes.push_back(bump_factor(params.radius));
        axes.push_back(bump_factor(params.radius_u));
        return separable(name, n, A, std::move(axes), std::hypot(params.radius * std::sqrt(2.0 * n), params.radius_u));
    }
    if (name == "weierstrass_flag") {
        if (!(params.alpha1 > 0 && params.alpha2 > 0) || params.J < 0 || params.K < 0 || !(params.base1 > 0) ||
            !(params.base2 > 0))
            throw std::invalid_argument("corpus: weierstrass_flag needs alpha > 0 and J,K >= 0");
        axes.push_back(with_cutoff(box[0], cosine_series(params.alpha1, params.J, params.base1)));
        for (int a = 1; a < d - 1; ++a) axes.push_back(with_cutoff(box[a], constant_factor()));
        axes.push_back(with_cutoff(box.back(), cosine_series(params.alpha2, params.K, params.base2)));
        return separable(name, n, A, std::move(axes), inf);
    }
    if (name == "polynomial") {
        if (params.degree < 0) throw std::invalid_argument("corpus: polynomial degree must be >= 0");
        const int ax = params.axis < 0 ? d - 1 : params.axis;
        if (ax >= d) throw std::invalid_argument("corpus: polynomial axis out of range");
        for (int a = 0; a < d; ++a) axes.push_back(a == ax ? polynomial_factor(params.degree) : constant_factor());
        return separable(name, n, A, std::move(axes), inf);
    }
    throw std::invalid_argument("unknown corpus entry: " + name);
}

}  // namespace hflag
