#include "noarb/tridiagonal.hpp"

#include "noarb/error.hpp"

#include <cmath>

namespace noarb {

void solve_tridiagonal(const TridiagonalSystem& sys, std::span<const double> rhs,
                       std::span<double> x, std::span<double> scratch) {
    const std::size_t n = sys.size();
    if (rhs.size() != n || x.size() != n || scratch.size() < n)
        throw ValidationError("tridiagonal: size mismatch");
    if (n == 0) return;

    double denom = sys.diag[0];
    if (denom == 0.0) throw ConvergenceError("tridiagonal: zero pivot", 0, 0.0);
    scratch[0] = sys.upper[0] / denom;
    x[0] = rhs[0] / denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = sys.diag[i] - sys.lower[i] * scratch[i - 1];
        if (denom == 0.0 || !std::isfinite(denom))
            throw ConvergenceError("tridiagonal: zero pivot", static_cast<int>(i), 0.0);
        scratch[i] = sys.upper[i] / denom;
        x[i] = (rhs[i] - sys.lower[i] * x[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= scratch[i] * x[i + 1];
}

} // namespace noarb
