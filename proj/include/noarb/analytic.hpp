#pragma once

#include "noarb/model.hpp"

namespace noarb {

enum class OptionKind { Call, Put };

double norm_cdf(double x);

// Generalized Black-Scholes with separate cost of carry b and discount rate:
// e^{-disc tau} [F N(+-d1) - K N(+-d2)], F = S e^{b tau}. Intrinsic value at tau = 0.
double black_scholes_carry(double S, double K, double tau, double sigma, double carry,
                           double disc, OptionKind kind);

// Closed form for the proportional-recovery equation with constant parameters:
// carry r - delta, discount r + (1-k)^+ [(1-chi_A) lambda_A + (1-chi_B) lambda_B].
// Piecewise-linear payoffs are priced as a strip of calls plus a linear part.
double effective_hazard_price(const MarketParams& mkt, const PayoffSpec& payoff,
                              const CounterpartyParams& a, const CounterpartyParams& b, double k);

// Price of a claim that is the liability of `cpty` alone (the other side
// cannot default). Throws ValidationError for sign-changing payoffs.
double unilateral_price(const MarketParams& mkt, const PayoffSpec& payoff,
                        const CounterpartyParams& cpty);

} // namespace noarb
