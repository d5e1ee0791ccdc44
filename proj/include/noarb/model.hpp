#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace noarb {

inline double positive_part(double x) { return x > 0.0 ? x : 0.0; }
inline double negative_part(double x) { return x < 0.0 ? x : 0.0; }

enum class Party { A, B };

std::string_view to_string(Party p);

// Underlying market. Rates are continuously compounded per year.
struct MarketParams {
    double r = 0.0;      // risk-free rate
    double mu = 0.0;     // real-world drift of the underlying price
    double sigma = 0.2;  // volatility
    double delta = 0.0;  // continuous dividend yield
    double spot = 100.0;

    void validate() const;
};

// One default-risky party: flat hazard rate, senior unsecured bond recovery,
// recovery on the derivative position and the bond's current price.
struct CounterpartyParams {
    double lambda = 0.0;
    double bond_recovery = 0.4;
    double derivative_recovery = 0.4;
    double bond_price = 1.0;

    void validate() const;
};

// Piecewise-constant function of time. Knot i holds on [t_i, t_{i+1}).
class Schedule {
public:
    Schedule() = default;
    explicit Schedule(std::vector<std::pair<double, double>> knots);

    static Schedule constant(double value) { return Schedule({{0.0, value}}); }

    // Right-continuous value: the knot in force at t.
    double value(double t) const;
    // Left limit: the knot in force just before t (the first knot at t <= t_0).
    double prior(double t) const;

    double max_value() const;
    double min_value() const;
    bool is_zero() const;
    const std::vector<std::pair<double, double>>& knots() const { return knots_; }

private:
    std::vector<std::pair<double, double>> knots_{{0.0, 0.0}};
};

struct NoCollateral {};
struct ProportionalCollateral {
    double k = 0.0;  // collateral as a fraction of the pre-default value
};
struct ScheduledCollateral {
    Schedule C;    // variation margin
    Schedule I_A;  // initial margin protecting against A's default
    Schedule I_B;  // initial margin protecting against B's default
};

struct CollateralSpec {
    std::variant<NoCollateral, ProportionalCollateral, ScheduledCollateral> mode;
    bool netted = true;
    double r_C = 0.0;

    static CollateralSpec none() { return {}; }
    static CollateralSpec proportional(double k) { return {ProportionalCollateral{k}, true, 0.0}; }
    static CollateralSpec scheduled(Schedule C, Schedule I_A = {}, Schedule I_B = {},
                                    bool netted = true);

    bool is_scheduled() const { return std::holds_alternative<ScheduledCollateral>(mode); }
    // (1-k)^+ in proportional mode, 1 with no collateral. Throws for schedules.
    double unsecured_fraction() const;
    // Collateral held against `defaulter` at time t, given the pre-default value.
    // Schedules are read right-continuously; see montecarlo for the lagged reading.
    double amount(double t, double v_hat, Party defaulter) const;
    double scheduled_amount(double t, Party defaulter, bool lagged) const;

    void validate(double horizon) const;
};

struct Call { double strike; };
struct Put { double strike; };
struct Forward { double strike; };
// Linear interpolation between (S, value) breakpoints, extended linearly
// beyond the end segments.
struct PiecewiseLinear { std::vector<std::pair<double, double>> points; };

struct PayoffSpec {
    std::variant<Call, Put, Forward, PiecewiseLinear> kind;
    double maturity = 1.0;

    double operator()(double S) const;
    // True when the payoff is >= 0 for every S >= 0.
    bool non_negative() const;
    std::string name() const;
    void validate() const;
};

struct MoneyAccountComponent {
    std::string name;
    double weight = 1.0;
    double rate = 0.0;
};

// Money account split into components accruing at their own rates.
// Weights are fractions of the total account and must sum to one.
struct MoneyAccountStructure {
    std::vector<MoneyAccountComponent> components;

    static MoneyAccountStructure single(double rate) { return {{{"M", 1.0, rate}}}; }

    double composite_rate() const;
    void validate() const;
};

enum class CloseoutRule { Proportional, PariPassuNetted, Collateralized };

// Offset of a semi-replicating A-bond hedge from the full replication weight,
// expressed as the jump left in the hedged portfolio at A's default:
// epsilon(V) = constant + proportional * V.
struct EpsilonRule {
    double constant = 0.0;
    double proportional = 0.0;

    double operator()(double v_hat) const { return constant + proportional * v_hat; }
    bool is_zero() const { return constant == 0.0 && proportional == 0.0; }
};

std::string_view to_string(CloseoutRule rule);
CloseoutRule closeout_rule_from_string(std::string_view s);

// Yield of the party's bond under frictionless pricing: r + (1-R) lambda.
double bond_yield(const MarketParams& mkt, const CounterpartyParams& cpty);

// Derivative loss rate over bond loss rate, (1-chi)/(1-R).
double loss_ratio(const CounterpartyParams& cpty);

// chi~ with 1 - chi~ = (1-k)^+ (1-chi).
double collateral_adjusted_recovery(double chi, double k);

// Value of the position immediately after `defaulter` defaults.
//
// v_hat is the pre-default value seen by party A (positive when B owes A).
// `recovery` is chi for the Proportional and Collateralized rules and the bond
// recovery R for PariPassuNetted, where recovery only applies to the side of
// the netted exposure owed by the defaulting party.
double closeout_residual(CloseoutRule rule, double v_hat, double C, double recovery,
                         Party defaulter = Party::B);

} // namespace noarb
