#include "noarb/replication_sim.hpp"

#include "noarb/error.hpp"
#include "noarb/paths.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <cstdio>
#include <ostream>

namespace noarb {

void SimConfig::validate(double lambda_total) const {
    if (!(dt > 0.0)) throw ValidationError("sim.dt: must be > 0");
    if (!(horizon > 0.0)) throw ValidationError("sim.horizon: must be > 0");
    if (n_paths < 2) throw ValidationError("sim.n_paths: must be >= 2");
    if (drift_blocks < 1) throw ValidationError("sim.drift_blocks: must be >= 1");
    if (!(dt * lambda_total < 0.1))
        throw ValidationError("sim.dt: dt * (lambda_A + lambda_B) must be < 0.1");
}

std::string_view to_string(StrategyKind kind) {
    switch (kind) {
    case StrategyKind::FullReplication: return "full_replication";
    case StrategyKind::Collateralized: return "collateralized";
    case StrategyKind::BK13: return "bk13";
    case StrategyKind::Custom: return "custom";
    }
    return "?";
}

StrategySpec StrategySpec::collateralized(double k) {
    StrategySpec s;
    s.kind = StrategyKind::Collateralized;
    s.k = k;
    return s;
}

StrategySpec StrategySpec::bk13(EpsilonRule eps) {
    StrategySpec s;
    s.kind = StrategyKind::BK13;
    s.epsilon = eps;
    return s;
}

StrategySpec StrategySpec::custom_weights(WeightFunction fn) {
    StrategySpec s;
    s.kind = StrategyKind::Custom;
    s.custom = std::move(fn);
    return s;
}

std::string_view to_string(Verdict v) {
    switch (v) {
    case Verdict::Clean: return "clean";
    case Verdict::NonClearingDrift: return "non_clearing_drift";
    case Verdict::Arbitrage: return "arbitrage";
    case Verdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

namespace {

// Units of a bond with recovery R and price P that lose `loss` at default.
double bond_units(double loss, double recovery, double price) {
    if (recovery >= 1.0) {
        if (loss == 0.0) return 0.0;
        throw ValidationError("bond loss rate zero, hedge ratio undefined");
    }
    return -loss / ((1.0 - recovery) * price);
}

struct PathResult {
    double pnl = 0.0;
    double exposure = 0.0;
    double predicted = 0.0;
    std::vector<double> block_pnl, block_exposure, block_predicted;
    std::optional<JumpResidual> jump;
    std::vector<TraceRow> trace;
    double accounting_error = 0.0;
    std::size_t off_grid = 0;
    std::size_t evaluations = 0;
};

struct Ratio {
    double value = 0.0;
    double std_error = 0.0;
};

// Pooled ratio sum(x) / sum(y) with its delta-method standard error.
Ratio ratio_estimate(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    const double sy = pairwise_sum(y);
    Ratio out;
    if (sy <= 0.0) return out;
    out.value = pairwise_sum(x) / sy;
    std::vector<double> e2(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = x[i] - out.value * y[i];
        e2[i] = e * e;
    }
    const double y_bar = sy / n;
    out.std_error = std::sqrt(pairwise_sum(e2) / (n * (n - 1.0))) / y_bar;
    return out;
}

} // namespace

SimReport simulate(const MarketParams& mkt, const PayoffSpec& payoff, const CounterpartyParams& a,
                   const CounterpartyParams& b, const StrategySpec& strategy,
                   const MoneyAccountStructure& ma, const PriceSurface& surface,
                   const SimConfig& cfg) {
    mkt.validate();
    payoff.validate();
    a.validate();
    b.validate();
    ma.validate();
    cfg.validate(a.lambda + b.lambda);
    if (cfg.horizon > surface.maturity() * (1.0 + 1e-12))
        throw ValidationError("sim.horizon: exceeds the price surface maturity");
    if (strategy.kind == StrategyKind::Custom && !strategy.custom)
        throw ValidationError("strategy: custom strategy needs a weight function");
    if (strategy.a_bonds && strategy.kind == StrategyKind::Custom)
        throw ValidationError("strategy: a bond portfolio cannot be combined with custom weights");
    if (!(strategy.k >= 0.0))
        throw ValidationError("strategy.k: must be >= 0");

    const double k = strategy.k;
    const double chi_a = collateral_adjusted_recovery(a.derivative_recovery, k);
    const double chi_b = collateral_adjusted_recovery(b.derivative_recovery, k);
    const double y_a = bond_yield(mkt, a);
    const double y_b = bond_yield(mkt, b);
    const double p_hazard = a.lambda * cfg.dt;
    const double p_total = (a.lambda + b.lambda) * cfg.dt;

    const auto n_steps = static_cast<std::size_t>(std::max(1.0, std::ceil(cfg.horizon / cfg.dt - 1e-9)));
    const double dt = cfg.horizon / static_cast<double>(n_steps);
    const auto blocks = static_cast<std::size_t>(cfg.drift_blocks);
    const double drift = (mkt.mu - mkt.delta - 0.5 * mkt.sigma * mkt.sigma) * dt;
    const double vol = mkt.sigma * std::sqrt(dt);

    std::vector<double> ma_growth, ma_spread;
    for (const auto& c : ma.components) {
        ma_growth.push_back(std::expm1(c.rate * dt));
        ma_spread.push_back(c.weight * (c.rate - mkt.r));
    }
    double spread = 0.0;
    for (double s : ma_spread) spread += s;

    const double notional = mkt.spot;
    const double acct_tol_scale = notional;

    std::vector<PathResult> results(cfg.n_paths);
    parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t p) {
        PathResult& res = results[p];
        res.block_pnl.assign(blocks, 0.0);
        res.block_exposure.assign(blocks, 0.0);
        res.block_predicted.assign(blocks, 0.0);
        PathEngine eng = path_engine(cfg.seed, p);
        std::normal_distribution<double> normal;
        const bool tracing = p < cfg.trace_paths;

        double S = mkt.spot;
        double cum = 0.0;
        std::vector<double> m_parts(ma.components.size());

        auto mark = [&](double t, double s) {
            bool off = false;
            const Greeks g = greeks_extrapolated(surface, t, s, &off);
            ++res.evaluations;
            if (off) ++res.off_grid;
            return g;
        };

        if (tracing) res.trace.push_back({p, 0.0, S, 0, 0, 0.0, 0.0});
        Greeks g = mark(0.0, S);
        for (std::size_t n = 0; n < n_steps; ++n) {
            const double t = static_cast<double>(n) * dt;
            const double P_A = a.bond_price * std::exp(y_a * t);
            const double P_B = b.bond_price * std::exp(y_b * t);
            const double V = g.value;
            const double g_a = chi_a * V;
            const double g_b = chi_b * V;

            // Positions for the coming step.
            double h_V = 1.0, h_S = -g.delta, h_A = 0.0, h_B = 0.0, eps = 0.0;
            double a_leg_value = 0.0;   // value of the A-bond leg
            double a_leg_jump = 0.0;    // its change at A's default
            double a_leg_growth = 0.0;  // its accrual over the step
            if (strategy.kind == StrategyKind::Custom) {
                const ReplicationWeights w = strategy.custom(t, S, g);
                h_V = w.h_V;
                h_S = w.h_S;
                h_A = w.h_A;
                h_B = w.h_B;
            } else {
                if (strategy.kind == StrategyKind::BK13) eps = strategy.epsilon(V);
                h_B = bond_units(h_V * (V - g_b), b.bond_recovery, P_B);
                const double target = h_V * (V - g_a) + eps;
                if (!strategy.a_bonds) {
                    h_A = bond_units(target, a.bond_recovery, P_A);
                } else {
                    BondPortfolio now = *strategy.a_bonds;
                    for (auto& issue : now.issues)
                        issue.price *= std::exp((mkt.r + (1.0 - issue.recovery) * a.lambda) * t);
                    const BondPortfolio held = aggregate_bond_portfolio(now, target);
                    for (const auto& issue : held.issues) {
                        a_leg_value += issue.holding * issue.price;
                        a_leg_jump -= issue.holding * (1.0 - issue.recovery) * issue.price;
                        a_leg_growth += issue.holding * issue.price *
                                        std::expm1((mkt.r + (1.0 - issue.recovery) * a.lambda) * dt);
                    }
                }
            }
            if (!strategy.a_bonds) {
                a_leg_value = h_A * P_A;
                a_leg_jump = -h_A * (1.0 - a.bond_recovery) * P_A;
                a_leg_growth = h_A * P_A * std::expm1(y_a * dt);
            }

            // Zero net investment fixes the money account.
            const double risky = h_V * V + h_S * S + a_leg_value + h_B * P_B;
            const double M = -risky;
            double m_total = 0.0;
            for (std::size_t c = 0; c < m_parts.size(); ++c) {
                m_parts[c] = ma.components[c].weight * M;
                m_total += m_parts[c];
            }
            res.accounting_error = std::max(res.accounting_error, std::abs(risky + m_total) / acct_tol_scale);
            const double drift_rate = spread * M;

            const double u = open_uniform(eng);
            const double z = normal(eng);
            if (u < p_total) {
                JumpResidual j;
                j.path = p;
                j.t = t;
                if (u < p_hazard) {
                    j.party = Party::A;
                    j.residual = h_V * (g_a - V) + a_leg_jump;
                    j.expected = eps;
                } else {
                    j.party = Party::B;
                    j.residual = h_V * (g_b - V) - h_B * (1.0 - b.bond_recovery) * P_B;
                }
                res.jump = j;
                cum += j.residual;
                if (tracing)
                    res.trace.push_back({p, t, S, j.party == Party::A, j.party == Party::B, cum, drift_rate});
                break;
            }

            const double t_next = n + 1 == n_steps ? cfg.horizon : static_cast<double>(n + 1) * dt;
            const double S_next = S * std::exp(drift + vol * z);
            const Greeks g_next = mark(t_next, S_next);

            double gains = h_V * (g_next.value - V) + h_S * (S_next - S + mkt.delta * S * dt) +
                           a_leg_growth + h_B * P_B * std::expm1(y_b * dt);
            double m_end = 0.0;
            for (std::size_t c = 0; c < m_parts.size(); ++c) {
                gains += m_parts[c] * ma_growth[c];
                m_end += m_parts[c] * (1.0 + ma_growth[c]);
            }
            // Mark-to-market of the step's holdings, dividends included.
            const double pi_end = h_V * g_next.value + h_S * S_next + h_S * mkt.delta * S * dt +
                                  a_leg_value + a_leg_growth + h_B * P_B * (1.0 + std::expm1(y_b * dt)) + m_end;
            res.accounting_error = std::max(res.accounting_error, std::abs(pi_end - gains) / acct_tol_scale);

            const std::size_t blk = std::min(blocks - 1, n * blocks / n_steps);
            res.pnl += gains;
            res.exposure += dt;
            res.predicted += drift_rate * dt;
            res.block_pnl[blk] += gains;
            res.block_exposure[blk] += dt;
            res.block_predicted[blk] += drift_rate * dt;
            cum += gains;
            S = S_next;
            g = g_next;
            if (tracing) res.trace.push_back({p, t_next, S, 0, 0, cum, drift_rate});
        }
    });

    SimReport rep;
    rep.strategy = std::string(to_string(strategy.kind));
    rep.n_paths = cfg.n_paths;
    rep.seed = cfg.seed;
    rep.dt = dt;
    rep.horizon = cfg.horizon;
    rep.notional = notional;
    rep.default_intensity = a.lambda + b.lambda;

    std::vector<double> x(cfg.n_paths), y(cfg.n_paths), q(cfg.n_paths), xq(cfg.n_paths);
    std::size_t evaluations = 0;
    for (std::size_t p = 0; p < cfg.n_paths; ++p) {
        const PathResult& r = results[p];
        x[p] = r.pnl;
        y[p] = r.exposure;
        q[p] = r.predicted;
        xq[p] = r.pnl - r.predicted;
        if (r.jump) rep.jump_residuals.push_back(*r.jump);
        rep.max_accounting_error = std::max(rep.max_accounting_error, r.accounting_error);
        rep.off_grid_steps += r.off_grid;
        evaluations += r.evaluations;
        rep.trace.insert(rep.trace.end(), r.trace.begin(), r.trace.end());
    }
    if (static_cast<double>(rep.off_grid_steps) > 0.01 * static_cast<double>(evaluations))
        throw DomainError("simulate: more than 1% of path steps fall off the price surface");
    rep.n_defaults = rep.jump_residuals.size();

    const Ratio d = ratio_estimate(x, y);
    const Ratio e = ratio_estimate(xq, y);
    rep.mean_drift = d.value;
    rep.drift_std_error = d.std_error;
    rep.predicted_drift = ratio_estimate(q, y).value;
    rep.excess_drift = e.value;
    rep.excess_std_error = e.std_error;
    for (std::size_t blk = 0; blk < blocks; ++blk) {
        for (std::size_t p = 0; p < cfg.n_paths; ++p) {
            x[p] = results[p].block_pnl[blk];
            y[p] = results[p].block_exposure[blk];
            q[p] = results[p].block_predicted[blk];
        }
        rep.block_drift.push_back(ratio_estimate(x, y).value);
        rep.block_predicted.push_back(ratio_estimate(q, y).value);
    }

    const Verdict v = detect_arbitrage(rep, 0.99);
    rep.verdict = std::string(to_string(v));
    rep.arbitrage_flag = v == Verdict::Arbitrage || v == Verdict::NonClearingDrift;
    return rep;
}

Verdict detect_arbitrage(const SimReport& report, double confidence) {
    if (!(confidence > 0.0 && confidence < 1.0))
        throw ValidationError("confidence: must be in (0, 1)");
    const boost::math::normal_distribution<double> unit;
    const double z = boost::math::quantile(unit, 0.5 + 0.5 * confidence);
    const double band = z * report.drift_std_error;

    auto sign = [](double x) { return (x > 0.0) - (x < 0.0); };

    // (b) one-sided jump residuals.
    const bool needs_defaults = report.default_intensity > 0.0;
    const bool b_decidable = !needs_defaults || report.n_defaults >= 30;
    bool b_fires = false;
    if (b_decidable && !report.jump_residuals.empty()) {
        const double tol = 1e-10 * report.notional;
        // Residuals within tol count as zero, which is on either side.
        int s = 0;
        bool one_sided = true;
        for (const auto& j : report.jump_residuals) {
            const int sj = std::abs(j.residual) > tol ? sign(j.residual) : 0;
            if (sj == 0) continue;
            if (s != 0 && sj != s) {
                one_sided = false;
                break;
            }
            s = sj;
        }
        b_fires = one_sided && s != 0 && s * report.mean_drift >= -band;
    }
    if (b_fires) return Verdict::Arbitrage;

    // (a) persistent drift of the predicted sign.
    const int ps = sign(report.predicted_drift);
    bool a_fires = ps != 0 && std::abs(report.mean_drift) > band && sign(report.mean_drift) == ps;
    for (double bd : report.block_drift)
        if (sign(bd) != ps) a_fires = false;
    if (a_fires) return Verdict::NonClearingDrift;

    return b_decidable ? Verdict::Clean : Verdict::Inconclusive;
}

SpreadResult money_account_spread(const MoneyAccountStructure& ma, double r) {
    ma.validate();
    SpreadResult out;
    out.rho = ma.composite_rate();
    double spread = 0.0;
    for (const auto& c : ma.components) spread += c.weight * (c.rate - r);
    out.spread = spread;
    return out;
}

std::string_view to_string(Preset p) {
    return p == Preset::Piterbarg ? "piterbarg" : "burgard_kjaer";
}

Preset preset_from_string(std::string_view s) {
    if (s == "piterbarg") return Preset::Piterbarg;
    if (s == "burgard_kjaer") return Preset::BurgardKjaer;
    throw ValidationError("unknown money account preset '" + std::string(s) + "'");
}

MoneyAccountStructure preset_money_account(Preset preset, const PresetState& st) {
    std::vector<MoneyAccountComponent> parts;
    if (preset == Preset::Piterbarg) {
        parts = {{"R", -st.Delta * st.S, st.r_R}, {"F", st.V - st.C, st.r_F}, {"C", st.C, st.r_C}};
    } else {
        const double cash = -st.V - (st.g_B - st.V);
        parts = {{"F+", positive_part(cash), st.r},
                 {"F-", negative_part(cash), st.r_F},
                 {"R", -st.Delta * st.S, st.r_R},
                 {"C", -st.h_B_P_B, st.r}};
    }
    double total = 0.0;
    for (const auto& c : parts) total += c.weight;
    if (total == 0.0) throw ValidationError("weights undefined");
    for (auto& c : parts) c.weight /= total;
    return {parts};
}

nlohmann::json to_json(const SimReport& r) {
    nlohmann::json j;
    j["strategy"] = r.strategy;
    j["n_paths"] = r.n_paths;
    j["seed"] = r.seed;
    j["dt"] = r.dt;
    j["horizon"] = r.horizon;
    j["notional"] = r.notional;
    j["mean_drift"] = r.mean_drift;
    j["drift_std_error"] = r.drift_std_error;
    j["predicted_drift"] = r.predicted_drift;
    j["excess_drift"] = r.excess_drift;
    j["excess_std_error"] = r.excess_std_error;
    j["block_drift"] = r.block_drift;
    j["block_predicted"] = r.block_predicted;
    j["n_defaults"] = r.n_defaults;
    j["max_accounting_error"] = r.max_accounting_error;
    j["off_grid_steps"] = r.off_grid_steps;
    auto& jumps = j["jump_residuals"] = nlohmann::json::array();
    for (const auto& jr : r.jump_residuals)
        jumps.push_back({{"path", jr.path},
                         {"t", jr.t},
                         {"party", std::string(to_string(jr.party))},
                         {"residual", jr.residual},
                         {"expected", jr.expected}});
    j["arbitrage_flag"] = r.arbitrage_flag;
    j["verdict"] = r.verdict;
    return j;
}

void write_trace_csv(const std::vector<TraceRow>& rows, std::ostream& os) {
    os << "path,t,S,J_A,J_B,Pi,drift_pred\n";
    char buf[200];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%d,%d,%.17g,%.17g\n", r.path, r.t, r.S, r.J_A,
                      r.J_B, r.Pi, r.drift_pred);
        os << buf;
    }
}

} // namespace noarb
