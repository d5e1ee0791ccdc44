#include "noarb/montecarlo.hpp"

#include "noarb/error.hpp"
#include "noarb/paths.hpp"

#include <cmath>
#include <limits>

namespace noarb {

void McConfig::validate() const {
    if (n_paths < 1) throw ValidationError("mc.n_paths: must be >= 1");
    if (n_steps < 1) throw ValidationError("mc.n_steps: must be >= 1");
    if (antithetic && (n_paths < 2 || n_paths % 2 != 0))
        throw ValidationError("mc.n_paths: must be even with antithetic sampling");
}

nlohmann::json to_json(const McEstimate& est, const std::string& scenario_id) {
    nlohmann::json j;
    j["scenario_id"] = scenario_id;
    j["estimator"] = est.estimator;
    j["mean"] = est.mean;
    j["std_error"] = est.std_error;
    j["n_paths"] = est.n_paths;
    j["seed"] = est.seed;
    if (est.off_grid_steps > 0) j["off_grid_steps"] = est.off_grid_steps;
    if (!est.notes.empty()) j["notes"] = est.notes;
    return j;
}

namespace {

struct PathGrid {
    int steps;
    double dt;
};

PathGrid path_grid(double maturity, int steps_per_year) {
    const int steps = std::max(1, static_cast<int>(std::ceil(steps_per_year * maturity - 1e-9)));
    return {steps, maturity / steps};
}

// Evaluates `value(path, off_grid)` on risk-neutral GBM paths. With antithetic
// sampling one sample is the average over a +z / -z pair.
template <class ValueFn>
McEstimate run_paths(const MarketParams& mkt, double maturity, const McConfig& cfg,
                     const char* name, ValueFn&& value) {
    cfg.validate();
    const PathGrid pg = path_grid(maturity, cfg.n_steps);
    const double drift = (mkt.r - mkt.delta - 0.5 * mkt.sigma * mkt.sigma) * pg.dt;
    const double vol = mkt.sigma * std::sqrt(pg.dt);
    const std::size_t samples = cfg.antithetic ? cfg.n_paths / 2 : cfg.n_paths;

    std::vector<double> out(samples);
    std::vector<std::size_t> off_grid(samples, 0);
    parallel_for(samples, cfg.threads, [&](std::size_t p) {
        PathEngine eng = path_engine(cfg.seed, p);
        std::normal_distribution<double> normal;
        std::vector<double> z(static_cast<std::size_t>(pg.steps));
        for (double& x : z) x = normal(eng);
        std::vector<double> path(z.size() + 1);
        auto build = [&](double sign) {
            path[0] = mkt.spot;
            for (std::size_t k = 0; k < z.size(); ++k) path[k + 1] = path[k] * std::exp(drift + sign * vol * z[k]);
        };
        build(1.0);
        double v = value(path, pg.dt, off_grid[p]);
        if (cfg.antithetic) {
            build(-1.0);
            v = 0.5 * (v + value(path, pg.dt, off_grid[p]));
        }
        out[p] = v;
    });

    const SampleStats stats = sample_stats(out);
    McEstimate est;
    est.estimator = name;
    est.mean = stats.mean;
    est.std_error = stats.std_error;
    est.n_paths = cfg.n_paths;
    est.seed = cfg.seed;
    for (std::size_t c : off_grid) est.off_grid_steps += c;
    return est;
}

} // namespace

McEstimate mc_effective_discount(const MarketParams& mkt, const PayoffSpec& payoff,
                                 const CounterpartyParams& a, const CounterpartyParams& b,
                                 double k, const McConfig& cfg) {
    mkt.validate();
    payoff.validate();
    a.validate();
    b.validate();
    if (!(k >= 0.0)) throw ValidationError("k: must be >= 0");
    const double rate = mkt.r + positive_part(1.0 - k) * ((1.0 - a.derivative_recovery) * a.lambda +
                                                        (1.0 - b.derivative_recovery) * b.lambda);
    const double T = payoff.maturity;
    // Piecewise-constant rates integrate step by step along the path grid.
    return run_paths(mkt, T, cfg, "mc_effective_discount",
                     [&](const std::vector<double>& path, double dt, std::size_t&) {
                         double integrated = 0.0;
                         for (std::size_t k2 = 1; k2 < path.size(); ++k2) integrated += rate * dt;
                         return std::exp(-integrated) * payoff(path.back());
                     });
}

McEstimate mc_loss_integral(const MarketParams& mkt, const PayoffSpec& payoff,
                            const CounterpartyParams& a, const CounterpartyParams& b,
                            const CollateralSpec& collateral, const PriceSurface& surface,
                            const McConfig& cfg) {
    mkt.validate();
    payoff.validate();
    a.validate();
    b.validate();
    collateral.validate(payoff.maturity);
    if (std::abs(surface.maturity() - payoff.maturity) > 1e-12 * payoff.maturity)
        throw ValidationError("surface: maturity does not match the payoff");

    const double loss_a = (1.0 - a.derivative_recovery) * a.lambda;
    const double loss_b = (1.0 - b.derivative_recovery) * b.lambda;
    const double unsecured =
        collateral.is_scheduled() ? 1.0 : collateral.unsecured_fraction();
    const double T = payoff.maturity;

    auto integrand = [&](double u, double S, std::size_t k, std::size_t& off) {
        double v_hat = 0.0;
        if (k == 0 || u < T) {
            bool off_grid = false;
            v_hat = greeks_extrapolated(surface, u, S, &off_grid).value;
            if (off_grid) ++off;
        } else {
            v_hat = payoff(S);
        }
        double loss = 0.0;
        if (collateral.is_scheduled()) {
            // Collateral in force over the previous step (left limit at u).
            const double c_a = collateral.scheduled_amount(u, Party::A, k != 0);
            const double c_b = collateral.scheduled_amount(u, Party::B, k != 0);
            loss = loss_a * positive_part(v_hat - c_a) + loss_b * positive_part(v_hat - c_b);
        } else {
            loss = (loss_a + loss_b) * unsecured * positive_part(v_hat);
        }
        return std::exp(-mkt.r * u) * loss;
    };

    McEstimate est = run_paths(
        mkt, T, cfg, "mc_loss_integral",
        [&](const std::vector<double>& path, double dt, std::size_t& off) {
            const std::size_t steps = path.size() - 1;
            double integral = 0.0;
            double prev = integrand(0.0, path[0], 0, off);
            for (std::size_t k = 1; k <= steps; ++k) {
                const double u = k == steps ? T : static_cast<double>(k) * dt;
                const double cur = integrand(u, path[k], k, off);
                integral += 0.5 * dt * (prev + cur);
                prev = cur;
            }
            return std::exp(-mkt.r * T) * payoff(path.back()) - integral;
        });

    const PathGrid pg = path_grid(T, cfg.n_steps);
    const double evaluations = static_cast<double>(cfg.n_paths) * pg.steps;
    if (static_cast<double>(est.off_grid_steps) > 0.01 * evaluations)
        throw DomainError("mc_loss_integral: more than 1% of path steps fall off the price surface");
    if (collateral.is_scheduled())
        est.notes.push_back("first interval reads the time-0 collateral schedule value");
    return est;
}

std::vector<DefaultEvent> simulate_first_to_default(double lambda_a, double lambda_b,
                                                    double horizon, const McConfig& cfg) {
    if (!(lambda_a >= 0.0) || !(lambda_b >= 0.0)) throw ValidationError("lambda: must be >= 0");
    if (!(horizon > 0.0)) throw ValidationError("horizon: must be > 0");
    cfg.validate();
    std::vector<DefaultEvent> events(cfg.n_paths);
    constexpr double never = std::numeric_limits<double>::infinity();
    parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t p) {
        PathEngine eng = path_engine(cfg.seed, p);
        const double u_a = open_uniform(eng);
        const double u_b = open_uniform(eng);
        const double tau_a = lambda_a > 0.0 ? -std::log(u_a) / lambda_a : never;
        const double tau_b = lambda_b > 0.0 ? -std::log(u_b) / lambda_b : never;
        const double first = std::min(tau_a, tau_b);
        if (first <= horizon) events[p] = {tau_a <= tau_b ? Party::A : Party::B, first};
        else events[p] = {std::nullopt, horizon};
    });
    return events;
}

} // namespace noarb
