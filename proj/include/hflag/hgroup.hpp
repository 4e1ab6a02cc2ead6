#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hflag {

// A point [z,t] of the Heisenberg group H^n. z is stored as interleaved
// real pairs (x_1, y_1, ..., x_n, y_n).
struct HPoint {
    std::vector<double> xy;
    double t = 0.0;

    HPoint() = default;
    HPoint(std::vector<double> coords, double central);
    static HPoint zero(int n);
    // n=1 convenience: z = x + i y.
    static HPoint of(double x, double y, double central);

    int n() const { return static_cast<int>(xy.size() / 2); }
    double x(int j) const { return xy[2 * j]; }
    double y(int j) const { return xy[2 * j + 1]; }
    double z_norm_sq() const;

    // Flat coordinates (x_1, y_1, ..., x_n, y_n, t).
    std::vector<double> coords() const;
    static HPoint from_coords(std::span<const double> c);

    bool operator==(const HPoint&) const = default;
};

struct HomogeneousDims {
    int n = 1;
    int Q() const { return 2 * n + 2; }
};

// 2 Im(<a, conj(b)>) = 2 sum_j (y_j x'_j - x_j y'_j).
double twist(std::span<const double> a_xy, std::span<const double> b_xy);

HPoint mul(const HPoint& a, const HPoint& b);
HPoint inv(const HPoint& a);
double hnorm(const HPoint& a);
HPoint dilate(double r, const HPoint& a);

// Flat-coordinate versions used on hot paths. Arrays have length 2n+1.
void mul_into(std::span<const double> a, std::span<const double> b, std::span<double> out);
double hnorm_coords(std::span<const double> c);

// Empirical lower estimate of the quasi-triangle constant.
double quasi_triangle_gamma(std::int64_t sample_count, std::uint64_t seed, int n = 1);

struct GroupCheckResult {
    std::string name;
    bool pass = false;
    double worst = 0.0;
    double tolerance = 0.0;
};

// Invariant suite over seeded random points. `fault` flips the sign of the
// twist term in the multiplication under test (negative control).
std::vector<GroupCheckResult> group_invariant_suite(std::int64_t samples, std::uint64_t seed,
                                                    int n = 1, bool fault = false);

std::string to_json_array(const HPoint& p);

}  // namespace hflag
