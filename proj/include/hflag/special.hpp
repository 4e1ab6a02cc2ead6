#pragma once

#include <span>

namespace hflag {

// Physicists' Hermite polynomials H_0..H_kmax at x, written to out[0..kmax].
inline void hermite_all(int kmax, double x, std::span<double> out) {
    out[0] = 1.0;
    if (kmax >= 1) out[1] = 2.0 * x;
    for (int k = 1; k < kmax; ++k) out[k + 1] = 2.0 * x * out[k] - 2.0 * k * out[k - 1];
}

inline double hermite(int k, double x) {
    double a = 1.0, b = 2.0 * x;
    if (k == 0) return a;
    for (int j = 1; j < k; ++j) {
        const double c = 2.0 * x * b - 2.0 * j * a;
        a = b;
        b = c;
    }
    return b;
}

double factorial(int k);
double multinomial(std::span<const int> parts);

}  // namespace hflag
