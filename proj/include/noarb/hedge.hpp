#pragma once

#include "noarb/model.hpp"

#include <iosfwd>
#include <vector>

namespace noarb {

// Pre-default value, delta and spot read off a price surface.
struct SurfacePoint {
    double V = 0.0;
    double Delta = 0.0;
    double S = 0.0;
};

struct ReplicationWeights {
    double h_S = 0.0;
    double h_V = 1.0;
    double h_A = 0.0;
    double h_B = 0.0;
    double M = 0.0;
    double m_bsm = 0.0;      // (Delta S - V) h_V
    double m_default = 0.0;  // the part of M that funds the bond legs
};

// h_S S + h_V V + h_A P_A + h_B P_B + M. Zero for every weight set built here.
double zii_residual(const ReplicationWeights& w, const SurfacePoint& p, double P_A, double P_B);

// Delta hedge plus bonds of both parties sized so that neither default moves
// the portfolio: h_X = -z_X V h_V / P_X.
ReplicationWeights full_replication_weights(const SurfacePoint& p, const CounterpartyParams& a,
                                            const CounterpartyParams& b, double h_V = 1.0);

// Same with only the uncollateralized fraction (1-k)^+ of the exposure hedged.
ReplicationWeights collateralized_weights(const SurfacePoint& p, const CounterpartyParams& a,
                                          const CounterpartyParams& b, double k,
                                          double h_V = 1.0);

struct Bk13Weights {
    ReplicationWeights weights;
    double epsilon = 0.0;          // jump of the hedged position at A's default
    double derivative_gap = 0.0;   // V - g_A
    double bond_shortfall = 0.0;   // h_A (P_A - P_D_A)
};

// Semi-replication: h_S = -Delta, the B bond (zero recovery) covers the B jump
// g_B - V, and the A bond holding is C - V. The cash collateral C sits inside M.
// P_D_A is the post-default price of one A bond.
Bk13Weights bk13_weights(const SurfacePoint& p, double g_A, double g_B, double P_A, double P_D_A,
                         double P_B, double C);

struct BondIssue {
    double price = 1.0;
    double recovery = 0.4;
    double holding = 0.0;
};

struct BondPortfolio {
    std::vector<BondIssue> issues;

    // sum_i h_i (1 - R_i) P_i: the loss of the holdings when the issuer defaults.
    double shortfall() const;
    double value() const;
};

// Rescales the holdings of `portfolio` (keeping the composition) so that
// -sum_i h_i (1 - R_i) P_i equals target_shortfall.
BondPortfolio aggregate_bond_portfolio(const BondPortfolio& portfolio, double target_shortfall);

struct WeightRow {
    double t = 0.0;
    double S = 0.0;
    ReplicationWeights w;
    double epsilon = 0.0;
};

// CSV with header t,S,h_S,h_A,h_B,M,epsilon.
void write_weights_csv(const std::vector<WeightRow>& rows, std::ostream& os);

} // namespace noarb
