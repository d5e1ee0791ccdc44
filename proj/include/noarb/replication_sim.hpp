#pragma once

#include "noarb/hedge.hpp"
#include "noarb/model.hpp"
#include "noarb/pde.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace noarb {

struct SimConfig {
    double dt = 1.0 / 250.0;
    double horizon = 1.0;
    std::size_t n_paths = 10000;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::size_t trace_paths = 0;  // paths written to the step trace
    int drift_blocks = 4;         // time blocks used to check that a drift persists

    // dt (lambda_A + lambda_B) < 0.1 keeps the one-default-per-step
    // approximation second order.
    void validate(double lambda_total) const;
};

enum class StrategyKind { FullReplication, Collateralized, BK13, Custom };

std::string_view to_string(StrategyKind kind);

// Positions for one unit of the derivative given (t, S) and the surface greeks.
// The money account is always re-solved from the zero-investment condition.
using WeightFunction = std::function<ReplicationWeights(double t, double S, const Greeks& g)>;

struct StrategySpec {
    StrategyKind kind = StrategyKind::FullReplication;
    double k = 0.0;            // collateral level of the contract
    EpsilonRule epsilon;       // A-bond shortfall left at A's default (BK13)
    WeightFunction custom;
    // Composition of the A-bond leg. Holdings are rescaled every step so the
    // aggregate default shortfall matches the strategy; prices are unit prices
    // at t = 0. Empty means the single A bond of the counterparty parameters.
    std::optional<BondPortfolio> a_bonds;

    static StrategySpec full_replication() { return {}; }
    static StrategySpec collateralized(double k);
    static StrategySpec bk13(EpsilonRule eps);
    static StrategySpec custom_weights(WeightFunction fn);
};

struct JumpResidual {
    std::size_t path = 0;
    double t = 0.0;
    Party party = Party::B;
    double residual = 0.0;  // change of the hedged portfolio at the default
    double expected = 0.0;  // what the strategy leaves open by construction
};

struct TraceRow {
    std::size_t path = 0;
    double t = 0.0;
    double S = 0.0;
    int J_A = 0;
    int J_B = 0;
    double Pi = 0.0;          // accumulated P&L of the hedged position
    double drift_pred = 0.0;  // predicted drift rate at t
};

struct SimReport {
    std::string strategy;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    double dt = 0.0;
    double horizon = 0.0;
    double notional = 0.0;
    double default_intensity = 0.0;  // lambda_A + lambda_B

    // Drift per year of the hedged position between defaults (pooled over
    // paths) and its prediction from the money-account spread.
    double mean_drift = 0.0;
    double drift_std_error = 0.0;
    double predicted_drift = 0.0;
    double excess_drift = 0.0;  // mean_drift - predicted_drift
    double excess_std_error = 0.0;
    std::vector<double> block_drift;
    std::vector<double> block_predicted;

    std::size_t n_defaults = 0;
    std::vector<JumpResidual> jump_residuals;
    double max_accounting_error = 0.0;
    std::size_t off_grid_steps = 0;

    bool arbitrage_flag = false;
    std::string verdict;
    std::vector<TraceRow> trace;
};

// Hedged position of one unit of the derivative simulated under the real-world
// measure. Positions are set at the start of each step with zero net value,
// the money account components accrue at their own rates and a path stops at
// its first default. The derivative is marked on `surface`; the contract's
// closeout is chi~ V with chi~ from the strategy's collateral level k.
SimReport simulate(const MarketParams& mkt, const PayoffSpec& payoff, const CounterpartyParams& a,
                   const CounterpartyParams& b, const StrategySpec& strategy,
                   const MoneyAccountStructure& ma, const PriceSurface& surface,
                   const SimConfig& cfg);

enum class Verdict { Clean, NonClearingDrift, Arbitrage, Inconclusive };

std::string_view to_string(Verdict v);

// (a) drift beyond the confidence band with the predicted sign in every time
// block, or (b) no default residual is of the opposite sign to a nonzero one,
// and the drift is not significantly of the other sign either. Fewer than 30
// defaults with positive default intensity leaves (b) undecided.
Verdict detect_arbitrage(const SimReport& report, double confidence);

struct SpreadResult {
    double rho = 0.0;
    double spread = 0.0;
};

SpreadResult money_account_spread(const MoneyAccountStructure& ma, double r);

enum class Preset { Piterbarg, BurgardKjaer };

std::string_view to_string(Preset p);
Preset preset_from_string(std::string_view s);

// Market state that sizes the preset components.
struct PresetState {
    double V = 0.0;
    double C = 0.0;
    double Delta = 0.0;
    double S = 0.0;
    double g_B = 0.0;         // closeout value at B's default (BurgardKjaer)
    double h_B_P_B = 0.0;     // counterparty bond position (BurgardKjaer)
    double r = 0.0;
    double r_R = 0.0;         // repo rate
    double r_F = 0.0;         // funding rate
    double r_C = 0.0;         // collateral rate
};

MoneyAccountStructure preset_money_account(Preset preset, const PresetState& state);

nlohmann::json to_json(const SimReport& report);

// CSV with header path,t,S,J_A,J_B,Pi,drift_pred.
void write_trace_csv(const std::vector<TraceRow>& rows, std::ostream& os);

} // namespace noarb
