// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "oracles.hpp"

#include "noarb/analytic.hpp"
#include "noarb/montecarlo.hpp"
#include "noarb/pde.hpp"
#include "noarb/replication_sim.hpp"
#include "noarb/runner.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace noarb;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

class Detail {
public:
    template <class T>
    Detail& operator<<(const T& x) {
        os_ << x;
        return *this;
    }
    std::string str() const { return os_.str(); }

private:
    std::ostringstream os_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

MarketParams market(double r, double mu, double sigma, double delta, double spot = 100.0) {
    MarketParams m;
    m.r = r;
    m.mu = mu;
    m.sigma = sigma;
    m.delta = delta;
    m.spot = spot;
    return m;
}

CounterpartyParams party(double lambda, double R, double chi) {
    CounterpartyParams c;
    c.lambda = lambda;
    c.bond_recovery = R;
    c.derivative_recovery = chi;
    return c;
}

GridSpec grid(int n) {
    GridSpec g;
    g.n_space = n;
    g.n_time = n;
    return g;
}

double rel_dev(double x, double ref) { return std::abs(x - ref) / std::abs(ref); }

Outcome oracle_chain() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto m = market(0.05, 0.05, 0.2, 0.01);
    const auto s = solve_default_free(m, {Call{100.0}, 1.0}, grid(400), m.r);
    const double pde = price_at_spot(s);
    const double bs = black_scholes_carry(100.0, 100.0, 1.0, 0.2, 0.04, 0.05, OptionKind::Call);
    const double quad = oracle::call(100.0, 100.0, 1.0, 0.2, 0.04, 0.05);
    const double elapsed = seconds_since(t0);
    const double d1 = rel_dev(pde, bs);
    const double d2 = rel_dev(bs, quad);
    Detail d;
    d << "pde " << pde << " vs analytic " << bs << " rel " << d1 << "; analytic vs quadrature rel " << d2
      << "; " << elapsed << " s";
    return {d1 <= 1e-3 && d2 <= 1e-6 && elapsed < 5.0, d.str()};
}

Outcome effective_hazard_lattice() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto m = market(0.03, 0.03, 0.2, 0.01);
    const double base = oracle::call(100.0, 100.0, 1.0, 0.2, 0.02, 0.03);
    const std::vector<double> lambdas{0.0, 0.02, 0.05}, chis{0.0, 0.4, 1.0}, ks{0.0, 0.5, 1.0};
    double worst = 0.0;
    int n = 0;
    for (double la : lambdas)
        for (double lb : lambdas)
            for (double ca : chis)
                for (double cb : chis)
                    for (double k : ks) {
                        const auto a = party(la, 0.4, ca);
                        const auto b = party(lb, 0.4, cb);
                        const double pde = price_at_spot(solve_default_risky(
                            m, {Call{100.0}, 1.0}, grid(400), a, b, CollateralSpec::proportional(k)));
                        const double ref = base * std::exp(-oracle::loss_rate(la, ca, lb, cb, k));
                        worst = std::max(worst, rel_dev(pde, ref));
                        ++n;
                    }
    const double elapsed = seconds_since(t0);
    Detail d;
    d << n << " parameter sets, worst rel deviation " << worst << "; " << elapsed << " s";
    return {n == 243 && worst <= 1e-3 && elapsed < 120.0, d.str()};
}

Outcome two_representations() {
    const auto m = market(0.03, 0.03, 0.2, 0.01);
    const PayoffSpec call{Call{100.0}, 1.0};
    McConfig cfg;
    cfg.n_paths = 100000;
    cfg.n_steps = 50;
    cfg.antithetic = true;
    cfg.threads = 0;
    bool pass = true;
    Detail d;
    struct Case {
        CounterpartyParams a, b;
        double k;
    };
    const std::vector<Case> cases{{party(0.02, 0.4, 0.4), party(0.05, 0.4, 0.4), 0.0},
                                  {party(0.05, 0.4, 0.3), party(0.03, 0.4, 0.5), 0.0},
                                  {party(0.02, 0.4, 0.4), party(0.05, 0.4, 0.2), 0.5}};
    std::uint64_t seed = 101;
    for (const auto& c : cases) {
        const auto coll = CollateralSpec::proportional(c.k);
        const auto surface = solve_default_risky(m, call, grid(400), c.a, c.b, coll);
        cfg.seed = seed++;
        const auto loss = mc_loss_integral(m, call, c.a, c.b, coll, surface, cfg);
        cfg.seed = seed++;
        const auto eff = mc_effective_discount(m, call, c.a, c.b, c.k, cfg);
        const double se = std::hypot(loss.std_error, eff.std_error);
        const double units = std::abs(loss.mean - eff.mean) / se;
        pass = pass && units <= 3.0;
        d << "[" << loss.mean << " vs " << eff.mean << ": " << units << " SE] ";
    }
    return {pass, d.str()};
}

Outcome collateral_limits() {
    const auto m = market(0.03, 0.03, 0.2, 0.0);
    const PayoffSpec call{Call{100.0}, 1.0};
    const auto a = party(0.02, 0.4, 0.4);
    const auto b = party(0.05, 0.4, 0.4);
    const auto g = grid(400);
    const auto free = solve_default_free(m, call, g, m.r);

    double dev_k1 = 0.0, dev_big = 0.0;
    const auto k1 = solve_default_risky(m, call, g, a, b, CollateralSpec::proportional(1.0));
    double v_max = 0.0;
    for (double v : free.values) v_max = std::max(v_max, std::abs(v));
    const auto big = solve_general_closeout(m, call, g, a, b, CloseoutRule::Collateralized,
                                            CollateralSpec::scheduled(Schedule::constant(1.01 * v_max)));
    for (std::size_t i = 0; i < free.values.size(); ++i) {
        const double scale = std::max(std::abs(free.values[i]), 1.0);
        dev_k1 = std::max(dev_k1, std::abs(k1.values[i] - free.values[i]) / scale);
        dev_big = std::max(dev_big, std::abs(big.values[i] - free.values[i]) / scale);
    }
    std::vector<double> sweep;
    bool monotone = true;
    for (double k : {0.0, 0.25, 0.5, 0.75, 1.0, 1.25}) {
        sweep.push_back(price_at_spot(solve_default_risky(m, call, g, a, b, CollateralSpec::proportional(k))));
        if (sweep.size() > 1 && sweep.back() < sweep[sweep.size() - 2]) monotone = false;
    }
    const double tol = g.picard_tol * 100.0;
    Detail d;
    d << "k=1 max rel dev " << dev_k1 << ", C>=V max rel dev " << dev_big << ", k sweep";
    for (double p : sweep) d << ' ' << p;
    return {dev_k1 <= tol && dev_big <= tol && monotone, d.str()};
}

Outcome unilateral_separability() {
    const auto m = market(0.03, 0.03, 0.2, 0.0);
    const auto a = party(0.02, 0.4, 0.4);
    const auto b = party(0.05, 0.4, 0.4);
    const double notional = 100.0;
    const double bilateral = price_at_spot(solve_general_closeout(m, {Forward{100.0}, 1.0}, grid(400), a, b,
                                                                  CloseoutRule::PariPassuNetted, CollateralSpec::none()));
    const double call_b = unilateral_price(m, {Call{100.0}, 1.0}, b);
    const double put_a = unilateral_price(m, {Put{100.0}, 1.0}, a);
    const double dev = std::abs(bilateral - (call_b - put_a));
    Detail d;
    d << "bilateral " << bilateral << " vs " << call_b << " - " << put_a << " = " << call_b - put_a << ", dev "
      << dev << " (limit " << 2e-3 * notional << ")";
    return {dev <= 2e-3 * notional, d.str()};
}

SimConfig sim_config(std::size_t n, std::uint64_t seed, double dt) {
    SimConfig c;
    c.n_paths = n;
    c.seed = seed;
    c.dt = dt;
    c.horizon = 1.0;
    c.threads = 0;
    return c;
}

Outcome no_arbitrage_drift() {
    const auto m = market(0.05, 0.08, 0.2, 0.0);
    const PayoffSpec call{Call{100.0}, 1.0};
    const auto a = party(0.02, 0.4, 0.4);
    const auto b = party(0.05, 0.4, 0.4);
    const auto surface = solve_default_risky(m, call, grid(400), a, b, CollateralSpec::none());
    const auto cfg = sim_config(50000, 2024, 1.0 / 250.0);
    const auto strategy = StrategySpec::full_replication();

    const auto flat = simulate(m, call, a, b, strategy, MoneyAccountStructure::single(m.r), surface, cfg);
    bool pass = std::abs(flat.mean_drift) < 3.0 * flat.drift_std_error;
    Detail d;
    d << "zero spread drift " << flat.mean_drift << " +- " << flat.drift_std_error;

    std::vector<double> xs, ys;
    for (double bp : {25.0, 50.0, 100.0}) {
        const MoneyAccountStructure ma{{{"M1", 0.5, m.r}, {"M2", 0.5, m.r + bp * 1e-4}}};
        const auto rep = simulate(m, call, a, b, strategy, ma, surface, cfg);
        if (bp == 50.0) {
            const bool ok = std::abs(rep.mean_drift - rep.predicted_drift) <= 3.0 * rep.drift_std_error;
            pass = pass && ok;
            d << "; 50bp drift " << rep.mean_drift << " +- " << rep.drift_std_error << " vs predicted "
              << rep.predicted_drift;
        }
        xs.push_back(bp);
        ys.push_back(rep.mean_drift);
    }
    const double xm = (xs[0] + xs[1] + xs[2]) / 3.0;
    const double ym = (ys[0] + ys[1] + ys[2]) / 3.0;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (int i = 0; i < 3; ++i) {
        sxy += (xs[i] - xm) * (ys[i] - ym);
        sxx += (xs[i] - xm) * (xs[i] - xm);
        syy += (ys[i] - ym) * (ys[i] - ym);
    }
    const double r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 0.0;
    pass = pass && r2 > 0.99;
    d << "; R^2 over 25/50/100bp " << r2;
    return {pass, d.str()};
}

Outcome semi_replication_arbitrage() {
    const auto m = market(0.05, 0.08, 0.2, 0.0);
    const PayoffSpec call{Call{100.0}, 1.0};
    const auto a = party(0.05, 0.4, 0.4);
    const auto b = party(0.02, 0.4, 0.4);
    const auto cfg = sim_config(20000, 11, 1.0 / 250.0);
    const auto ma = MoneyAccountStructure::single(m.r);
    Detail d;
    bool pass = true;

    for (EpsilonRule eps : {EpsilonRule{0.5, 0.0}, EpsilonRule{0.0, 0.02}}) {
        const auto surface = solve_semi_replication(m, call, grid(400), a, b, eps);
        const auto rep = simulate(m, call, a, b, StrategySpec::bk13(eps), ma, surface, cfg);
        std::size_t n_a = 0;
        double worst = 0.0;
        for (const auto& j : rep.jump_residuals) {
            if (j.party != Party::A) continue;
            ++n_a;
            const double tol = 10.0 * cfg.dt * std::abs(j.expected) + 1e-10 * rep.notional;
            worst = std::max(worst, std::abs(j.residual - j.expected) / tol);
        }
        pass = pass && n_a > 0 && worst <= 1.0 && rep.verdict == "arbitrage";
        d << "eps(" << eps.constant << "+" << eps.proportional << "V): " << n_a << " A defaults, worst "
          << worst << " of tolerance, verdict " << rep.verdict << "; ";
    }

    const auto surface = solve_semi_replication(m, call, grid(400), a, b, {});
    const auto rep = simulate(m, call, a, b, StrategySpec::bk13({}), ma, surface, cfg);
    double worst = 0.0;
    for (const auto& j : rep.jump_residuals) worst = std::max(worst, std::abs(j.residual));
    pass = pass && worst <= 1e-10 * rep.notional && rep.verdict == "clean";
    d << "eps=0: max |residual| " << worst << ", verdict " << rep.verdict;
    return {pass, d.str()};
}

Outcome aggregate_invariance() {
    const auto m = market(0.05, 0.08, 0.2, 0.0);
    const PayoffSpec call{Call{100.0}, 1.0};
    const auto a = party(0.05, 0.4, 0.4);
    const auto b = party(0.02, 0.4, 0.4);
    const auto cfg = sim_config(20000, 23, 1.0 / 250.0);
    const auto ma = MoneyAccountStructure::single(m.r);
    const BondPortfolio senior{{{1.0, 0.4, 1.0}}};
    const BondPortfolio mixed{{{1.0, 0.4, 0.5}, {1.0, 0.1, 0.5}}};
    bool pass = true;
    Detail d;
    for (const EpsilonRule eps : {EpsilonRule{}, EpsilonRule{0.5, 0.0}}) {
        const auto surface = solve_semi_replication(m, call, grid(400), a, b, eps);
        StrategySpec s1 = StrategySpec::bk13(eps), s2 = StrategySpec::bk13(eps);
        s1.a_bonds = senior;
        s2.a_bonds = mixed;
        const auto r1 = simulate(m, call, a, b, s1, ma, surface, cfg);
        const auto r2 = simulate(m, call, a, b, s2, ma, surface, cfg);
        double worst = r1.jump_residuals.size() == r2.jump_residuals.size() ? 0.0 : INFINITY;
        for (std::size_t i = 0; std::isfinite(worst) && i < r1.jump_residuals.size(); ++i) {
            if (r1.jump_residuals[i].path != r2.jump_residuals[i].path) worst = INFINITY;
            else worst = std::max(worst, std::abs(r1.jump_residuals[i].residual - r2.jump_residuals[i].residual));
        }
        pass = pass && !r1.jump_residuals.empty() && worst <= 1e-10 * r1.notional;
        d << "eps " << eps.constant << ": " << r1.jump_residuals.size() << " defaults, max difference " << worst
          << "; ";
    }
    return {pass, d.str()};
}

json preset_scenario(const std::string& preset, const std::string& payoff, double r_R, double r_F, double r_C,
                     double k, double h_B_P_B) {
    json doc = {
        {"schema", kScenarioSchema},
        {"id", "preset_" + preset},
        {"market", {{"r", 0.05}, {"mu", 0.08}, {"sigma", 0.2}, {"spot", 100}}},
        {"payoff", {{"type", payoff}, {"strike", 100}, {"maturity", 1.0}}},
        {"parties",
         {{"A", {{"lambda", 0.02}, {"bond_recovery", 0.4}, {"derivative_recovery", 0.4}}},
          {"B", {{"lambda", 0.05}, {"bond_recovery", 0.4}, {"derivative_recovery", 0.4}}}}},
        {"closeout", "proportional"},
        {"money_account", {{"preset", preset}, {"r_R", r_R}, {"r_F", r_F}, {"r_C", r_C}}},
        {"engines", {"sim"}},
        {"grid", {{"n_space", 300}, {"n_time", 300}}},
        {"sim", {{"dt", 0.004}, {"n_paths", 20000}, {"seed", 31}, {"strategy", {{"kind", "full_replication"}}}}}};
    if (k > 0.0) {
        doc["collateral"] = {{"type", "proportional"}, {"k", k}};
        doc["sim"]["strategy"]["kind"] = "collateralized";
    }
    if (preset == "burgard_kjaer") doc["money_account"]["h_B_P_B"] = h_B_P_B;
    return doc;
}

Outcome money_account_condition() {
    const double r = 0.05, up = 0.06;
    struct Case {
        std::string preset;
        double r_R, r_F, r_C, k;
    };
    const std::vector<Case> cases{
        {"piterbarg", r, r, r, 0.0},      {"piterbarg", r, up, r, 0.0},      {"piterbarg", up, r, r, 0.0},
        {"piterbarg", r, r, up, 0.5},     {"piterbarg", r, r, r, 0.5},       {"burgard_kjaer", r, r, r, 0.0},
        {"burgard_kjaer", r, up, r, 0.0}, {"burgard_kjaer", up, r, r, 0.0},  {"burgard_kjaer", r, r, up, 0.0},
    };
    bool pass = true;
    Detail d;
    for (const auto& c : cases) {
        const json doc = preset_scenario(c.preset, "put", c.r_R, c.r_F, c.r_C, c.k, -4.8);
        const Scenario sc = scenario_from_json(doc, doc.dump(), "preset");
        const RunResult res = run_scenario(sc, doc, true);
        const json& sim = res.report["simulation"];
        const double spread = sim["money_account"]["spread"].get<double>();
        bool all_r = true;
        for (const auto& comp : sim["money_account"]["components"])
            if (comp["weight"].get<double>() != 0.0 && comp["rate"].get<double>() != r) all_r = false;
        const std::string verdict = sim["verdict"];
        const bool ok = ((spread == 0.0) == all_r) && ((verdict == "clean") == (spread == 0.0));
        pass = pass && ok;
        d << "[" << c.preset << " " << c.r_R << "/" << c.r_F << "/" << c.r_C << " k " << c.k << ": spread "
          << spread << ", " << verdict << (ok ? "" : " MISMATCH") << "] ";
    }
    return {pass, d.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const fs::path scenarios = NOARB_SCENARIO_DIR;
    const fs::path root = fs::temp_directory_path() / "noarb_acceptance_determinism";
    bool pass = true;
    Detail d;
    const std::vector<std::pair<std::string, std::string>> runs{{"price", "call_default_free.json"},
                                                                {"price", "call_bilateral.json"},
                                                                {"simulate", "bk13_arbitrage.json"},
                                                                {"simulate", "spread_piterbarg.json"}};
    int files = 0;
    for (const auto& [cmd, file] : runs) {
        std::vector<fs::path> dirs;
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path dir = root / (file + "." + std::to_string(rep));
            fs::remove_all(dir);
            const std::string sc = (scenarios / file).string();
            const std::string out = dir.string();
            const char* argv[] = {"noarb", cmd.c_str(), sc.c_str(), "--out", out.c_str()};
            std::ostringstream so, se;
            const int code = run_cli(5, argv, so, se);
            if (code != 0) {
                pass = false;
                d << file << " exit " << code << " " << se.str() << "; ";
            }
            dirs.push_back(dir);
        }
        for (const char* f : {"report.json", "surface.csv", "weights.csv", "sim_trace.csv"}) {
            const bool a = fs::exists(dirs[0] / f), b = fs::exists(dirs[1] / f);
            if (a != b || (a && slurp(dirs[0] / f) != slurp(dirs[1] / f))) {
                pass = false;
                d << file << "/" << f << " differs; ";
            }
            files += a;
        }
        if (!fs::exists(dirs[0] / "report.json")) pass = false;
    }
    d << files << " output files compared";
    return {pass, d.str()};
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"oracle chain", oracle_chain},
        {"effective hazard equivalence", effective_hazard_lattice},
        {"two expectation forms agree", two_representations},
        {"collateral limits", collateral_limits},
        {"unilateral separability", unilateral_separability},
        {"no-arbitrage drift", no_arbitrage_drift},
        {"semi-replication arbitrage", semi_replication_arbitrage},
        {"aggregate invariance", aggregate_invariance},
        {"money account condition", money_account_condition},
        {"determinism", determinism},
    };
    int failures = 0;
    int index = 0;
    for (const auto& [name, run] : criteria) {
        ++index;
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << index << " (" << name << "): " << o.detail
                  << std::endl;
        failures += !o.pass;
    }
    return failures == 0 ? 0 : 1;
}
