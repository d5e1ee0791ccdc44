#pragma once

#include <span>
#include <vector>

namespace noarb {

// Tridiagonal system: lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i].
// lower[0] and upper[n-1] are ignored.
struct TridiagonalSystem {
    std::vector<double> lower;
    std::vector<double> diag;
    std::vector<double> upper;

    explicit TridiagonalSystem(std::size_t n = 0) : lower(n), diag(n), upper(n) {}
    std::size_t size() const { return diag.size(); }
};

// Thomas algorithm. `scratch` must hold size() entries; x may alias rhs.
void solve_tridiagonal(const TridiagonalSystem& sys, std::span<const double> rhs,
                       std::span<double> x, std::span<double> scratch);

} // namespace noarb
