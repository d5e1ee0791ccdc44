#pragma once

// Reference values computed independently of the library: direct quadrature of
// the discounted lognormal expectation.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

// e^{-disc tau} E[f(S_T)], S_T = S e^{(carry - sigma^2/2) tau + sigma sqrt(tau) Z}.
// `kinks` are the S values where f is not smooth; the z range is split there.
inline double lognormal_expectation(const std::function<double(double)>& f, double S, double tau,
                                    double sigma, double carry, double disc,
                                    const std::vector<double>& kinks = {}) {
    const double vol = sigma * std::sqrt(tau);
    const double mean = std::log(S) + (carry - 0.5 * sigma * sigma) * tau;
    auto integrand = [&](double z) {
        const double density = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
        return f(std::exp(mean + vol * z)) * density;
    };
    std::vector<double> cuts{-12.0, 12.0};
    for (double k : kinks) {
        const double z = (std::log(k) - mean) / vol;
        if (z > -12.0 && z < 12.0) cuts.push_back(z);
    }
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, cuts[i], cuts[i + 1],
                                                                               20, 1e-14);
    return std::exp(-disc * tau) * total;
}

inline double call(double S, double K, double tau, double sigma, double carry, double disc) {
    return lognormal_expectation([K](double x) { return std::max(x - K, 0.0); }, S, tau, sigma, carry, disc, {K});
}

inline double put(double S, double K, double tau, double sigma, double carry, double disc) {
    return lognormal_expectation([K](double x) { return std::max(K - x, 0.0); }, S, tau, sigma, carry, disc, {K});
}

// Proportional-recovery price for constant parameters: the default-free
// expectation discounted at the extra loss rate s.
inline double loss_rate(double lambda_a, double chi_a, double lambda_b, double chi_b, double k) {
    return std::max(1.0 - k, 0.0) * ((1.0 - chi_a) * lambda_a + (1.0 - chi_b) * lambda_b);
}

} // namespace oracle
