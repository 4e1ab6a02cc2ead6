#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace hflag {

inline constexpr std::size_t kDefaultPointCap = std::size_t{1} << 27;

// Uniform cell-centred grid over the box prod_i [-L_i, L_i] in R^{2n+1}.
// Node i on axis a sits at -L_a + (i + 1/2) h_a, h_a = 2 L_a / G_a.
// Axis order is (x_1, y_1, ..., x_n, y_n, t); t is the last axis.
struct Grid {
    int n = 1;
    std::vector<double> half_extent;
    std::vector<int> counts;
    std::vector<double> spacing;

    int dims() const { return 2 * n + 1; }
    std::size_t total() const;
    std::size_t transverse_total() const;  // product of all counts but t
    int t_count() const { return counts.back(); }
    double node(int axis, int i) const { return -half_extent[axis] + (i + 0.5) * spacing[axis]; }
    double cell_volume() const;
    void point(std::size_t flat, std::span<double> out) const;
    std::vector<double> point(std::size_t flat) const;
    bool operator==(const Grid&) const = default;
};

Grid make_grid(int n, std::vector<double> extents, std::vector<int> counts,
               std::size_t cap = kDefaultPointCap);
// Same box, every count multiplied by `factor`.
Grid refine(const Grid& g, int factor);

struct SampledField {
    Grid grid;
    std::vector<double> values;

    SampledField() = default;
    explicit SampledField(Grid g);  // zero-filled
    SampledField(Grid g, std::vector<double> v);

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    std::size_t size() const { return values.size(); }
    std::span<const double> t_line(std::size_t transverse) const;
    std::span<double> t_line(std::size_t transverse);
};

using PointFn = std::function<double(std::span<const double>)>;

// A pure analytic function on R^{2n+1} (coordinates as in Grid) with
// optional partial derivatives. `derivative(beta, m_u)` returns the
// evaluator for d^{beta} in the 2n real z-coordinates and d^{m_u} in u,
// or an empty PointFn when that order is not available.
struct FuncEval {
    std::string name;
    int n = 1;
    PointFn value;
    std::function<PointFn(std::span<const int>, int)> derivative;
    double support_radius = std::numeric_limits<double>::infinity();

    double operator()(std::span<const double> p) const { return value(p); }
    bool has_derivative(std::span<const int> beta, int m_u) const;
};

FuncEval scaled(const FuncEval& f, double c);
FuncEval sum(const FuncEval& f, const FuncEval& g);

SampledField sample(const FuncEval& f, const Grid& grid, unsigned threads = 0);
double interpolate(const SampledField& field, std::span<const double> p);

void save_field(const SampledField& field, const std::string& path);
SampledField load_field(const std::string& path);
void write_field(const SampledField& field, std::ostream& os);
SampledField read_field(std::istream& is);
void export_csv(const SampledField& field, const std::string& path);

// Discrete norms over the grid (midpoint rule).
double l2_norm(const SampledField& f);
double l2_distance(const SampledField& a, const SampledField& b);
double linf_norm(const SampledField& f);
double linf_distance(const SampledField& a, const SampledField& b);

struct CorpusParams {
    std::vector<double> box;  // half-extents of the box the cutoff refers to; default (2,...,2,4)
    double sigma = 1.0;       // gaussian_bump width in z
    double tau = 1.0;         // gaussian_bump width in u
    double radius = 1.0;      // smooth_bump radius in z
    double radius_u = 1.0;    // smooth_bump radius in u
    double alpha1 = 0.5, alpha2 = 0.5;
    int J = 6, K = 6;
    double base1 = 1.0, base2 = 1.0;  // weierstrass_flag lowest frequencies in x_1 and t
    int degree = 2;
    int axis = -1;            // polynomial axis; -1 means t
    double amplitude = 1.0;
};

// Known entries: constant, coordinate_t, gaussian_bump, smooth_bump,
// weierstrass_flag, polynomial.
FuncEval corpus(const std::string& name, const CorpusParams& params = {}, int n = 1);
std::vector<std::string> corpus_names();

// Smooth cutoff equal to 1 on |xi| <= 1/2 and 0 on |xi| >= 1.
double cutoff_profile(double xi);
double cutoff_profile_d1(double xi);

}  // namespace hflag
