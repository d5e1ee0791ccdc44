#include "noarb/analytic.hpp"

#include "noarb/error.hpp"

#include <cmath>
#include <numbers>

namespace noarb {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double black_scholes_carry(double S, double K, double tau, double sigma, double carry,
                           double disc, OptionKind kind) {
    if (!(S > 0.0) || !(K > 0.0)) throw ValidationError("black_scholes_carry: S and K must be > 0");
    if (!(sigma > 0.0)) throw ValidationError("black_scholes_carry: sigma must be > 0");
    if (!(tau >= 0.0)) throw ValidationError("black_scholes_carry: tau must be >= 0");
    if (tau == 0.0) return kind == OptionKind::Call ? positive_part(S - K) : positive_part(K - S);

    const double fwd = S * std::exp(carry * tau);
    const double vol = sigma * std::sqrt(tau);
    const double d1 = (std::log(fwd / K) + 0.5 * vol * vol) / vol;
    const double d2 = d1 - vol;
    const double df = std::exp(-disc * tau);
    if (kind == OptionKind::Call) return df * (fwd * norm_cdf(d1) - K * norm_cdf(d2));
    return df * (K * norm_cdf(-d2) - fwd * norm_cdf(-d1));
}

double effective_hazard_price(const MarketParams& mkt, const PayoffSpec& payoff,
                              const CounterpartyParams& a, const CounterpartyParams& b, double k) {
    mkt.validate();
    payoff.validate();
    a.validate();
    b.validate();
    if (!(k >= 0.0)) throw ValidationError("k: must be >= 0");

    const double tau = payoff.maturity;
    const double carry = mkt.r - mkt.delta;
    const double disc = mkt.r + positive_part(1.0 - k) *
                                    ((1.0 - a.derivative_recovery) * a.lambda +
                                     (1.0 - b.derivative_recovery) * b.lambda);
    const double S = mkt.spot;
    const double df = std::exp(-disc * tau);
    const double fwd = S * std::exp(carry * tau);

    return std::visit(
        [&](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Call>) {
                return black_scholes_carry(S, p.strike, tau, mkt.sigma, carry, disc, OptionKind::Call);
            } else if constexpr (std::is_same_v<T, Put>) {
                return black_scholes_carry(S, p.strike, tau, mkt.sigma, carry, disc, OptionKind::Put);
            } else if constexpr (std::is_same_v<T, Forward>) {
                return df * (fwd - p.strike);
            } else {
                // phi(S) = phi(x0) + s0 (S - x0) + sum_i (s_i - s_{i-1}) (S - x_i)^+
                const auto& pts = p.points;
                if (pts.size() == 1) return df * pts.front().second;
                auto slope = [&](std::size_t i) {
                    return (pts[i + 1].second - pts[i].second) / (pts[i + 1].first - pts[i].first);
                };
                const double s0 = slope(0);
                double price = df * (pts[0].second - s0 * pts[0].first) + s0 * df * fwd;
                for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
                    const double kink = slope(i) - slope(i - 1);
                    if (kink != 0.0)
                        price += kink * black_scholes_carry(S, pts[i].first, tau, mkt.sigma, carry,
                                                            disc, OptionKind::Call);
                }
                return price;
            }
        },
        payoff.kind);
}

double unilateral_price(const MarketParams& mkt, const PayoffSpec& payoff,
                        const CounterpartyParams& cpty) {
    payoff.validate();
    if (!payoff.non_negative()) throw ValidationError("not unilateral; use bilateral solver");
    CounterpartyParams riskless = cpty;
    riskless.lambda = 0.0;
    return effective_hazard_price(mkt, payoff, cpty, riskless, 0.0);
}

} // namespace noarb
