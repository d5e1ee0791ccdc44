#pragma once

#include "noarb/model.hpp"
#include "noarb/pde.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace noarb {

struct McConfig {
    std::size_t n_paths = 100000;
    int n_steps = 50;  // per year
    std::uint64_t seed = 1;
    bool antithetic = false;
    unsigned threads = 0;  // 0 = hardware concurrency; results do not depend on it

    void validate() const;
};

struct McEstimate {
    std::string estimator;
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    std::size_t off_grid_steps = 0;
    std::vector<std::string> notes;
};

nlohmann::json to_json(const McEstimate& est, const std::string& scenario_id);

// E^Q[exp(-int (r + (1-k)^+ sum_X (1-chi_X) lambda_X)) Phi(S_T)] under
// risk-neutral GBM with exact lognormal steps.
McEstimate mc_effective_discount(const MarketParams& mkt, const PayoffSpec& payoff,
                                 const CounterpartyParams& a, const CounterpartyParams& b,
                                 double k, const McConfig& cfg);

// E^Q[Z_r(0,T) Phi] - sum_X E^Q[int Z_r(0,u) (1-chi_X) lambda_X (V(u) - C(u) - I_X(u))^+ du]
// with V(u) read from `surface` and the time integral taken by the trapezoid
// rule on the path steps. Scheduled collateral is read from the previous step.
// Throws DomainError when more than 1% of path steps fall off the surface.
McEstimate mc_loss_integral(const MarketParams& mkt, const PayoffSpec& payoff,
                            const CounterpartyParams& a, const CounterpartyParams& b,
                            const CollateralSpec& collateral, const PriceSurface& surface,
                            const McConfig& cfg);

struct DefaultEvent {
    std::optional<Party> who;  // empty when nobody defaults before the horizon
    double when = 0.0;
};

// Independent exponential default times; the first one within the horizon wins.
std::vector<DefaultEvent> simulate_first_to_default(double lambda_a, double lambda_b,
                                                    double horizon, const McConfig& cfg);

} // namespace noarb
