#pragma once

#include "noarb/model.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace noarb {

struct GridSpec {
    int n_space = 400;           // S nodes, uniform in log S
    int n_time = 400;            // time steps on [0, T]
    double domain_mult = 5.0;    // half-width of the log grid in units of sigma sqrt(T)
    double theta = 0.5;          // 0.5 = Crank-Nicolson, 1 = fully implicit
    int rannacher_steps = 4;     // fully implicit steps next to maturity
    int max_picard_iters = 50;
    double picard_tol = 1e-10;

    void validate() const;
};

// V(t_i, S_j) on the solver grid, stored row-major by time.
struct PriceSurface {
    std::vector<double> times;  // ascending, times.back() == T
    std::vector<double> spots;  // ascending, uniform in log S
    std::vector<double> values;
    std::vector<double> deltas;
    std::vector<double> gammas;
    std::string label;
    bool market_cleared = true;

    std::size_t n_time() const { return times.size(); }
    std::size_t n_space() const { return spots.size(); }
    std::size_t index(std::size_t i, std::size_t j) const { return i * spots.size() + j; }
    double value(std::size_t i, std::size_t j) const { return values[index(i, j)]; }
    double s_min() const { return spots.front(); }
    double s_max() const { return spots.back(); }
    double maturity() const { return times.back(); }
    // Index of the node at the spot the grid was built around.
    std::size_t spot_index = 0;
};

struct Greeks {
    double value;
    double delta;
    double gamma;
};

// Bilinear interpolation in (t, log S) of value, delta and gamma.
// Throws DomainError outside the grid.
Greeks greeks(const PriceSurface& surface, double t, double S);

// Like greeks() but extends linearly in S beyond the spatial boundaries, which
// is exact under the zero-gamma boundary condition. Sets *off_grid when it did.
Greeks greeks_extrapolated(const PriceSurface& surface, double t, double S, bool* off_grid);

// CSV with header t,S,V,delta,gamma, row-major by time.
void write_csv(const PriceSurface& surface, std::ostream& os);

using RateFunction = std::function<double(double t)>;

// Right-hand side of the pricing equation, a function of (t, S, V).
// `lipschitz` bounds |d source / dV| and is used to bound the time step.
struct SourceTerm {
    std::function<double(double t, double S, double V)> eval;
    double lipschitz = 0.0;

    explicit operator bool() const { return static_cast<bool>(eval); }
};

// dV/dt + carry(t) S V_S + 1/2 sigma^2 S^2 V_SS - discount(t) V = source(t, S, V)
// with V(T) = payoff and V_SS = 0 at both spatial boundaries. Coefficients are
// sampled at slab midpoints. A nonlinear source is resolved by Picard iteration
// inside every implicit step.
PriceSurface solve_generalized(const MarketParams& mkt, const PayoffSpec& payoff,
                               const GridSpec& grid, const RateFunction& carry,
                               const RateFunction& discount, const SourceTerm& source = {});

// Composite-rate equation: carry rho - delta, discount rho.
PriceSurface solve_default_free(const MarketParams& mkt, const PayoffSpec& payoff,
                                const GridSpec& grid, double rho);

// Default-risky equation with recovery proportional to the pre-default value,
// optionally collateralized at a constant level k.
PriceSurface solve_default_risky(const MarketParams& mkt, const PayoffSpec& payoff,
                                 const GridSpec& grid, const CounterpartyParams& a,
                                 const CounterpartyParams& b, const CollateralSpec& collateral);

// Source lambda_B (V - v_B) + lambda_A (V - v_A) with v_X from the closeout rule.
PriceSurface solve_general_closeout(const MarketParams& mkt, const PayoffSpec& payoff,
                                    const GridSpec& grid, const CounterpartyParams& a,
                                    const CounterpartyParams& b, CloseoutRule rule,
                                    const CollateralSpec& collateral);

// Equation obtained when the money account accrues at the composite rate of a
// structured account. Its solution is not a market-clearing price; it exists to
// measure the wedge against solve_default_risky.
PriceSurface solve_rho_structured(const MarketParams& mkt, const PayoffSpec& payoff,
                                  const GridSpec& grid, const CounterpartyParams& a,
                                  const CounterpartyParams& b, const MoneyAccountStructure& ma);

// Price at which a hedge left epsilon short of full replication on the A-bond
// leg has zero drift between defaults:
//   L V - r V = [(1-chi_A) lambda_A + (1-chi_B) lambda_B] V + lambda_A epsilon(V).
PriceSurface solve_semi_replication(const MarketParams& mkt, const PayoffSpec& payoff,
                                    const GridSpec& grid, const CounterpartyParams& a,
                                    const CounterpartyParams& b, const EpsilonRule& epsilon);

// Price at the grid's spot node at t = 0.
double price_at_spot(const PriceSurface& surface);

} // namespace noarb
