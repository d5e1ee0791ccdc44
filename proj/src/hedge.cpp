#include "noarb/hedge.hpp"

#include "noarb/error.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace noarb {

double zii_residual(const ReplicationWeights& w, const SurfacePoint& p, double P_A, double P_B) {
    return w.h_S * p.S + w.h_V * p.V + w.h_A * P_A + w.h_B * P_B + w.M;
}

namespace {

ReplicationWeights scaled_bond_weights(const SurfacePoint& p, const CounterpartyParams& a,
                                       const CounterpartyParams& b, double unsecured, double h_V) {
    a.validate();
    b.validate();
    const double z_a = unsecured * loss_ratio(a);
    const double z_b = unsecured * loss_ratio(b);
    ReplicationWeights w;
    w.h_V = h_V;
    w.h_S = -p.Delta * h_V;
    w.h_A = -z_a * p.V * h_V / a.bond_price;
    w.h_B = -z_b * p.V * h_V / b.bond_price;
    w.m_bsm = (p.Delta * p.S - p.V) * h_V;
    w.m_default = (z_a + z_b) * p.V * h_V;
    w.M = w.m_bsm + w.m_default;
    return w;
}

} // namespace

ReplicationWeights full_replication_weights(const SurfacePoint& p, const CounterpartyParams& a,
                                            const CounterpartyParams& b, double h_V) {
    return scaled_bond_weights(p, a, b, 1.0, h_V);
}

ReplicationWeights collateralized_weights(const SurfacePoint& p, const CounterpartyParams& a,
                                          const CounterpartyParams& b, double k, double h_V) {
    if (!(k >= 0.0)) throw ValidationError("k: must be >= 0");
    return scaled_bond_weights(p, a, b, positive_part(1.0 - k), h_V);
}

Bk13Weights bk13_weights(const SurfacePoint& p, double g_A, double g_B, double P_A, double P_D_A,
                         double P_B, double C) {
    for (double x : {p.V, p.Delta, p.S, g_A, g_B, P_A, P_D_A, P_B, C})
        if (!std::isfinite(x)) throw ValidationError("bk13_weights: inputs must be finite");
    if (!(P_A > 0.0) || !(P_B > 0.0)) throw ValidationError("bk13_weights: bond prices must be > 0");

    Bk13Weights out;
    ReplicationWeights& w = out.weights;
    w.h_V = 1.0;
    w.h_S = -p.Delta;
    w.h_B = (g_B - p.V) / P_B;
    w.h_A = (C - p.V) / P_A;
    w.M = -w.h_S * p.S - w.h_B * P_B - C;
    w.m_bsm = p.Delta * p.S - p.V;
    w.m_default = w.M - w.m_bsm;
    out.epsilon = w.h_A * P_D_A - C + g_A;
    out.derivative_gap = p.V - g_A;
    out.bond_shortfall = w.h_A * (P_A - P_D_A);
    return out;
}

double BondPortfolio::shortfall() const {
    double s = 0.0;
    for (const auto& b : issues) s += b.holding * (1.0 - b.recovery) * b.price;
    return s;
}

double BondPortfolio::value() const {
    double s = 0.0;
    for (const auto& b : issues) s += b.holding * b.price;
    return s;
}

BondPortfolio aggregate_bond_portfolio(const BondPortfolio& portfolio, double target_shortfall) {
    if (portfolio.issues.empty()) throw ValidationError("bond portfolio: no issues");
    bool any_loss = false;
    for (const auto& b : portfolio.issues) {
        if (!(b.price > 0.0)) throw ValidationError("bond portfolio: prices must be > 0");
        if (!(b.recovery >= 0.0 && b.recovery <= 1.0))
            throw ValidationError("bond portfolio: recovery must be in [0, 1]");
        if (b.recovery < 1.0) any_loss = true;
    }
    if (!any_loss) throw ValidationError("cannot replicate default loss");
    const double unit = portfolio.shortfall();
    if (unit == 0.0) throw ValidationError("bond portfolio: composition has zero aggregate shortfall");

    BondPortfolio out = portfolio;
    const double scale = -target_shortfall / unit;
    for (auto& b : out.issues) b.holding *= scale;
    return out;
}

void write_weights_csv(const std::vector<WeightRow>& rows, std::ostream& os) {
    os << "t,S,h_S,h_A,h_B,M,epsilon\n";
    char buf[200];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t, r.S,
                      r.w.h_S, r.w.h_A, r.w.h_B, r.w.M, r.epsilon);
        os << buf;
    }
}

} // namespace noarb
