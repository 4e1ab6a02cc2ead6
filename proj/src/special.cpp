#include "hflag/special.hpp"

#include <cmath>

namespace hflag {

double factorial(int k) { return std::tgamma(k + 1.0); }

double multinomial(std::span<const int> parts) {
    int total = 0;
    double den = 1.0;
    for (int p : parts) {
        total += p;
        den *= factorial(p);
    }
    return factorial(total) / den;
}

}  // namespace hflag
